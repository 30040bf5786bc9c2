//! Piecewise-linear qubit frequency trajectories, instantaneous microwave
//! rotations, and the time-dependent Hamiltonian they drive.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::QubitFilterModel;
use crate::linalg::{eig_hermitian, ComplexMatrix, ComplexVector, C64};
use crate::propagate::{
    evolve_columns_with_events, propagate_open_with_events, NoiseModel, NoisySystem, TimeDependentHamiltonian,
    UnitaryEvent,
};
use crate::state::{Basis, LabeledState};
use crate::transmon::TransmonParams;

const TIME_TOL: f64 = 1e-9;

/// How frequency varies inside a segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RampShape {
    LinearFrequency,
    /// Flux varies linearly between the endpoint fluxes of the transmon.
    LinearFlux,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
    pub nu_start: f64,
    pub nu_end: f64,
    pub shape: RampShape,
    #[serde(skip)]
    flux: Option<(f64, f64, TransmonParams)>,
}

impl Segment {
    fn frequency(&self, t: f64) -> f64 {
        let len = self.t_end - self.t_start;
        if len <= 0.0 || self.nu_start == self.nu_end {
            return self.nu_start;
        }
        let s = ((t - self.t_start) / len).clamp(0.0, 1.0);
        match self.flux {
            Some((phi0, phi1, tr)) => {
                let phi = phi0 + s * (phi1 - phi0);
                // the endpoints were validated, so intermediate fluxes are in range
                tr.nu01(phi).unwrap_or(self.nu_start + s * (self.nu_end - self.nu_start))
            }
            None => self.nu_start + s * (self.nu_end - self.nu_start),
        }
    }

    fn is_constant(&self) -> bool {
        self.nu_start == self.nu_end
    }
}

/// Contiguous segments for one qubit starting at t = 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    segments: Vec<Segment>,
    initial: f64,
}

impl Trajectory {
    pub fn starting_at(nu: f64) -> Self {
        Self { segments: Vec::new(), initial: nu }
    }

    pub fn end_time(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.t_end)
    }

    pub fn end_frequency(&self) -> f64 {
        self.segments.last().map_or(self.initial, |s| s.nu_end)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn hold(mut self, duration: f64) -> Self {
        let nu = self.end_frequency();
        self.push(duration, nu, RampShape::LinearFrequency, None);
        self
    }

    pub fn ramp_to(mut self, nu: f64, duration: f64) -> Self {
        self.push(duration, nu, RampShape::LinearFrequency, None);
        self
    }

    /// Ramp linear in flux through `transmon`'s tuning curve.
    pub fn ramp_flux_to(mut self, nu: f64, duration: f64, transmon: &TransmonParams) -> Result<Self> {
        let phi0 = transmon.frequency_to_flux(self.end_frequency())?;
        let phi1 = transmon.frequency_to_flux(nu)?;
        self.push(duration, nu, RampShape::LinearFlux, Some((phi0, phi1, *transmon)));
        Ok(self)
    }

    /// Ramp using `shape`; `transmon` is required for flux ramps.
    pub fn ramp_with(
        self,
        shape: RampShape,
        nu: f64,
        duration: f64,
        transmon: Option<&TransmonParams>,
    ) -> Result<Self> {
        match (shape, transmon) {
            (RampShape::LinearFrequency, _) => Ok(self.ramp_to(nu, duration)),
            (RampShape::LinearFlux, Some(t)) => self.ramp_flux_to(nu, duration, t),
            (RampShape::LinearFlux, None) => Err(Error::invalid("flux ramps need a transmon model")),
        }
    }

    /// Pads with a hold so the trajectory ends at `t`.
    pub fn hold_until(self, t: f64) -> Self {
        let extra = t - self.end_time();
        if extra > TIME_TOL {
            self.hold(extra)
        } else {
            self
        }
    }

    fn push(&mut self, duration: f64, nu: f64, shape: RampShape, flux: Option<(f64, f64, TransmonParams)>) {
        if duration <= 0.0 {
            // zero-length segments would only add breakpoints; a step in
            // frequency is still recorded so later ramps start from `nu`
            if nu != self.end_frequency() {
                let t = self.end_time();
                self.segments.push(Segment { t_start: t, t_end: t, nu_start: nu, nu_end: nu, shape, flux: None });
            }
            return;
        }
        let t = self.end_time();
        let nu0 = self.end_frequency();
        self.segments.push(Segment { t_start: t, t_end: t + duration, nu_start: nu0, nu_end: nu, shape, flux });
    }

    pub fn frequency(&self, t: f64) -> f64 {
        if self.segments.is_empty() {
            return self.initial;
        }
        // segments are sorted; pick the last one starting at or before t
        let k = self.segments.partition_point(|s| s.t_start <= t).saturating_sub(1);
        let k = (k..self.segments.len()).find(|&i| self.segments[i].t_end >= t).unwrap_or(k);
        self.segments[k].frequency(t)
    }

    fn constant_on(&self, t0: f64, t1: f64) -> bool {
        self.segments.iter().filter(|s| s.t_end > t0 + TIME_TOL && s.t_start < t1 - TIME_TOL).all(Segment::is_constant)
            && self.frequency(t0) == self.frequency(t1)
    }

    fn validate(&self, qubit: usize) -> Result<()> {
        let mut t = 0.0;
        for s in &self.segments {
            if (s.t_start - t).abs() > TIME_TOL || s.t_end < s.t_start {
                return Err(Error::invalid(format!("qubit {} segments not contiguous at {} ns", qubit + 1, s.t_start)));
            }
            if !(s.nu_start > 0.0 && s.nu_end > 0.0) {
                return Err(Error::invalid(format!("qubit {} frequency must be positive", qubit + 1)));
            }
            t = s.t_end;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationAxis {
    X,
    Y,
}

/// Ideal instantaneous rotation of one qubit in the frame of its reference
/// frequency. `phase` offsets the rotation axis in the xy-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MicrowavePulse {
    pub time: f64,
    pub qubit: usize,
    pub axis: RotationAxis,
    pub angle: f64,
    pub phase: f64,
}

impl MicrowavePulse {
    pub fn new(time: f64, qubit: usize, axis: RotationAxis, angle: f64) -> Self {
        Self { time, qubit, axis, angle, phase: 0.0 }
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    fn axis_angle(&self) -> f64 {
        self.phase
            + match self.axis {
                RotationAxis::X => 0.0,
                RotationAxis::Y => 0.5 * PI,
            }
    }
}

/// Frequency trajectories for both qubits plus microwave pulses. Rotations
/// are defined in the frame rotating at `reference` (normally the idle
/// frequencies).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PulseSchedule {
    pub trajectories: [Trajectory; 2],
    pub pulses: Vec<MicrowavePulse>,
    pub reference: [f64; 2],
}

impl PulseSchedule {
    /// Pads both trajectories to a common end time and validates.
    pub fn new(trajectories: [Trajectory; 2], pulses: Vec<MicrowavePulse>) -> Result<Self> {
        let end = trajectories[0].end_time().max(trajectories[1].end_time());
        let [a, b] = trajectories;
        let reference = [a.initial, b.initial];
        let s = Self { trajectories: [a.hold_until(end), b.hold_until(end)], pulses, reference };
        s.validate()?;
        Ok(s)
    }

    pub fn with_reference(mut self, reference: [f64; 2]) -> Self {
        self.reference = reference;
        self
    }

    pub fn duration(&self) -> f64 {
        self.trajectories[0].end_time().max(self.trajectories[1].end_time())
    }

    pub fn frequencies(&self, t: f64) -> [f64; 2] {
        [self.trajectories[0].frequency(t), self.trajectories[1].frequency(t)]
    }

    pub fn validate(&self) -> Result<()> {
        for (q, tr) in self.trajectories.iter().enumerate() {
            tr.validate(q)?;
        }
        let end = self.duration();
        for p in &self.pulses {
            if p.qubit > 1 {
                return Err(Error::invalid(format!("pulse on qubit index {}", p.qubit)));
            }
            if p.time < -TIME_TOL || p.time > end + TIME_TOL {
                return Err(Error::invalid(format!("pulse at {} ns outside [0, {end}]", p.time)));
            }
        }
        Ok(())
    }

    /// Checks every segment endpoint against each qubit's tuning band.
    pub fn validate_band(&self, transmons: &[TransmonParams; 2]) -> Result<()> {
        for (q, tr) in self.trajectories.iter().enumerate() {
            let (low, high) = transmons[q].band()?;
            let ends = tr.segments.iter().flat_map(|s| [s.nu_start, s.nu_end]).chain([tr.initial]);
            for nu in ends {
                if !(low..=high).contains(&nu) {
                    return Err(Error::OutOfBand { target: nu, low, high });
                }
            }
        }
        Ok(())
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> =
            self.trajectories.iter().flat_map(|tr| tr.segments.iter().flat_map(|s| [s.t_start, s.t_end])).collect();
        b.sort_by(f64::total_cmp);
        b.dedup_by(|x, y| (*x - *y).abs() < TIME_TOL);
        b
    }

    /// Time-reversed schedule: frequencies retraced backwards, pulses dropped.
    pub fn reversed(&self) -> Result<Self> {
        let end = self.duration();
        let rev = |tr: &Trajectory| {
            let mut out = Trajectory::starting_at(tr.frequency(end));
            for s in tr.segments.iter().rev() {
                let len = s.t_end - s.t_start;
                out.push(len, s.nu_start, s.shape, s.flux.map(|(a, b, t)| (b, a, t)));
            }
            out
        };
        Self::new([rev(&self.trajectories[0]), rev(&self.trajectories[1])], Vec::new())
    }
}

/// Dressed eigenbasis of the idle Hamiltonian. Column `k` of `vectors` is the
/// eigenstate adiabatically labelled by bare basis state `k`, and
/// `energies[k]` its energy. Computational states, microwave rotations and
/// readout are all defined in this basis.
#[derive(Debug, Clone)]
pub struct IdleFrame {
    vectors: ComplexMatrix,
    energies: Vec<f64>,
}

impl IdleFrame {
    /// Diagonalizes each excitation block at `reference` and pairs
    /// eigenvectors with bare labels greedily by overlap. States without
    /// photons must be unambiguous; degenerate resonator sites make photon
    /// labels a bookkeeping choice only.
    pub fn dressed(model: &QubitFilterModel, reference: [f64; 2]) -> Result<Self> {
        let basis = model.basis();
        let dim = basis.dim();
        let mut vectors = ComplexMatrix::zeros(dim, dim);
        let mut energies = vec![0.0; dim];
        for (b, idx) in basis.blocks().iter().enumerate() {
            let eig = eig_hermitian(&model.block_hamiltonian(b, reference[0], reference[1]))?;
            let n = idx.len();
            let mut pairs: Vec<(usize, usize, f64)> = (0..n)
                .flat_map(|i| (0..n).map(move |k| (i, k)))
                .map(|(i, k)| (i, k, eig.vectors[(i, k)].norm_sqr()))
                .collect();
            pairs.sort_by(|a, b| b.2.total_cmp(&a.2));
            let (mut label_used, mut vec_used) = (vec![false; n], vec![false; n]);
            for (pos, k, weight) in pairs {
                if label_used[pos] || vec_used[k] {
                    continue;
                }
                let label = basis.label(idx[pos]);
                if label.photon_count() == 0 && weight < 0.5 {
                    return Err(Error::AmbiguousAssignment { label: label.to_string(), overlap: weight });
                }
                label_used[pos] = true;
                vec_used[k] = true;
                // fix the global phase so the label amplitude is real and non-negative
                let a = eig.vectors[(pos, k)];
                let phase = if a.norm() > 0.0 { a.conj() / a.norm() } else { C64::new(1.0, 0.0) };
                for (i, &g) in idx.iter().enumerate() {
                    vectors[(g, idx[pos])] = eig.vectors[(i, k)] * phase;
                }
                energies[idx[pos]] = eig.values[k];
            }
        }
        Ok(Self { vectors, energies })
    }

    pub fn vectors(&self) -> &ComplexMatrix {
        &self.vectors
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Dressed state carrying bare label index `k`.
    pub fn state(&self, k: usize) -> ComplexVector {
        self.vectors.column(k).into_owned()
    }

    /// `F(t) = D(t)·V†` with `D = diag(exp(+2πi·E_k·t))`, taking lab-frame
    /// amplitudes to dressed rotating-frame amplitudes.
    pub fn transform(&self, t: f64) -> ComplexMatrix {
        let mut f = self.vectors.adjoint();
        for (k, e) in self.energies.iter().enumerate() {
            let d = C64::from_polar(1.0, TAU * e * t);
            for j in 0..f.ncols() {
                f[(k, j)] *= d;
            }
        }
        f
    }

    pub fn to_frame(&self, psi: &ComplexVector, t: f64) -> ComplexVector {
        self.transform(t) * psi
    }

    pub fn rho_to_frame(&self, rho: &ComplexMatrix, t: f64) -> ComplexMatrix {
        let f = self.transform(t);
        &f * rho * f.adjoint()
    }

    /// Populations of the dressed states.
    pub fn populations(&self, psi: &ComplexVector) -> Vec<f64> {
        (self.vectors.adjoint() * psi).iter().map(|c| c.norm_sqr()).collect()
    }
}

/// The qubit–filter Hamiltonian driven by a [`PulseSchedule`].
#[derive(Debug, Clone)]
pub struct ScheduledSystem {
    model: Arc<QubitFilterModel>,
    schedule: PulseSchedule,
    frame: Arc<IdleFrame>,
}

impl ScheduledSystem {
    pub fn new(model: Arc<QubitFilterModel>, schedule: PulseSchedule) -> Result<Self> {
        let frame = Arc::new(IdleFrame::dressed(&model, schedule.reference)?);
        Ok(Self { model, schedule, frame })
    }

    /// Reuses a precomputed frame; it must belong to the schedule's reference.
    pub fn with_frame(model: Arc<QubitFilterModel>, schedule: PulseSchedule, frame: Arc<IdleFrame>) -> Self {
        Self { model, schedule, frame }
    }

    pub fn model(&self) -> &QubitFilterModel {
        &self.model
    }

    pub fn schedule(&self) -> &PulseSchedule {
        &self.schedule
    }

    pub fn idle_frame(&self) -> &IdleFrame {
        &self.frame
    }

    pub fn basis_arc(&self) -> &Arc<Basis> {
        self.model.basis()
    }

    /// Lab-frame unitary `F(t)†·R·F(t)` of a pulse applied at its time.
    pub fn pulse_unitary(&self, pulse: &MicrowavePulse) -> ComplexMatrix {
        let r = qubit_rotation(self.model.basis(), pulse.qubit, pulse.axis_angle(), pulse.angle);
        let f = self.frame.transform(pulse.time);
        f.adjoint() * r * f
    }

    pub fn events(&self) -> Vec<UnitaryEvent> {
        self.schedule.pulses.iter().map(|p| UnitaryEvent { time: p.time, unitary: self.pulse_unitary(p) }).collect()
    }

    /// Lab-frame unitary of a phase `exp(iθ_k)` on each dressed state `k`
    /// applied at `time`.
    pub fn frame_phase_event(&self, time: f64, phases: &[f64]) -> UnitaryEvent {
        let f = self.frame.transform(time);
        let mut d = f.clone();
        for (k, &theta) in phases.iter().enumerate() {
            let z = C64::from_polar(1.0, theta);
            for j in 0..d.ncols() {
                d[(k, j)] *= z;
            }
        }
        UnitaryEvent { time, unitary: f.adjoint() * d }
    }

    /// Pulse events plus `extra`; at equal times pulses come first.
    fn all_events(&self, extra: &[UnitaryEvent]) -> Vec<UnitaryEvent> {
        let mut events = self.events();
        events.extend(extra.iter().cloned());
        events
    }

    /// Closed evolution of `psi0` through the whole schedule.
    pub fn run(&self, psi0: &LabeledState, dt: f64) -> Result<LabeledState> {
        let mut cols = ComplexMatrix::from_column_slice(psi0.amplitudes.len(), 1, psi0.amplitudes.as_slice());
        self.run_columns(&mut cols, dt)?;
        LabeledState::new(cols.column(0).into_owned(), psi0.basis.clone())
    }

    /// Closed evolution of several columns at once.
    pub fn run_columns(&self, cols: &mut ComplexMatrix, dt: f64) -> Result<()> {
        self.run_columns_with(cols, dt, &[])
    }

    /// Closed evolution with additional unitary events.
    pub fn run_columns_with(&self, cols: &mut ComplexMatrix, dt: f64, extra: &[UnitaryEvent]) -> Result<()> {
        evolve_columns_with_events(self, cols, (0.0, self.schedule.duration()), dt, &self.all_events(extra))
    }

    /// Open evolution of `rho0` through the whole schedule.
    pub fn run_open(
        &self,
        rho0: &ComplexMatrix,
        noise: &NoiseModel,
        realizations: usize,
        seed: u64,
        dt: f64,
    ) -> Result<ComplexMatrix> {
        self.run_open_with(rho0, noise, realizations, seed, dt, &[])
    }

    /// Open evolution with additional unitary events.
    pub fn run_open_with(
        &self,
        rho0: &ComplexMatrix,
        noise: &NoiseModel,
        realizations: usize,
        seed: u64,
        dt: f64,
        extra: &[UnitaryEvent],
    ) -> Result<ComplexMatrix> {
        propagate_open_with_events(
            self,
            rho0,
            noise,
            realizations,
            seed,
            (0.0, self.schedule.duration()),
            dt,
            &self.all_events(extra),
        )
    }
}

impl TimeDependentHamiltonian for ScheduledSystem {
    fn at(&self, t: f64) -> ComplexMatrix {
        let [a, b] = self.schedule.frequencies(t);
        self.model.hamiltonian(a, b)
    }

    fn blocks(&self) -> Option<&[Vec<usize>]> {
        Some(self.model.basis().blocks())
    }

    fn block_at(&self, block: usize, t: f64) -> ComplexMatrix {
        let [a, b] = self.schedule.frequencies(t);
        self.model.block_hamiltonian(block, a, b)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.schedule.breakpoints()
    }

    fn is_constant_on(&self, t0: f64, t1: f64) -> bool {
        self.schedule.trajectories.iter().all(|tr| tr.constant_on(t0, t1))
    }
}

impl NoisySystem for ScheduledSystem {
    fn basis(&self) -> &Basis {
        self.model.basis()
    }

    fn block_hamiltonian(&self, block: usize, t: f64, detuning: [f64; 2]) -> ComplexMatrix {
        let [a, b] = self.schedule.frequencies(t);
        self.model.block_hamiltonian(block, a + detuning[0], b + detuning[1])
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.schedule.breakpoints()
    }

    fn is_constant_on(&self, t0: f64, t1: f64) -> bool {
        TimeDependentHamiltonian::is_constant_on(self, t0, t1)
    }
}

/// `exp(−iθ/2 (cos φ σx + sin φ σy))` on the g–e subspace of `qubit`,
/// identity on every other level.
pub fn qubit_rotation(basis: &Basis, qubit: usize, phi: f64, theta: f64) -> ComplexMatrix {
    let dim = basis.dim();
    let mut r = ComplexMatrix::zeros(dim, dim);
    let (c, s) = ((0.5 * theta).cos(), (0.5 * theta).sin());
    // in (g, e) order cos φ σx + sin φ σy = [[0, e^{iφ}], [e^{−iφ}, 0]]
    let ge = C64::new(0.0, -s) * C64::from_polar(1.0, phi);
    let eg = C64::new(0.0, -s) * C64::from_polar(1.0, -phi);
    for (k, label) in basis.labels().iter().enumerate() {
        match label.qubits[qubit] {
            0 => {
                r[(k, k)] = C64::new(c, 0.0);
                let mut up = label.clone();
                up.qubits[qubit] = 1;
                if let Some(j) = basis.index_of(&up) {
                    r[(j, k)] = eg;
                } else {
                    // partner truncated away: keep the map unitary on this state
                    r[(k, k)] = C64::new(1.0, 0.0);
                }
            }
            1 => {
                r[(k, k)] = C64::new(c, 0.0);
                let mut down = label.clone();
                down.qubits[qubit] = 0;
                if let Some(j) = basis.index_of(&down) {
                    r[(j, k)] = ge;
                } else {
                    r[(k, k)] = C64::new(1.0, 0.0);
                }
            }
            _ => r[(k, k)] = C64::new(1.0, 0.0),
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::DeviceParams;

    const DT: f64 = 0.01;

    fn model() -> Arc<QubitFilterModel> {
        Arc::new(QubitFilterModel::with_cap(&DeviceParams::fitted(), 2).unwrap())
    }

    fn sweep() -> PulseSchedule {
        let q1 = Trajectory::starting_at(6.2).ramp_to(7.3, 7.0).hold(3.0).ramp_to(6.9, 4.0);
        let q2 = Trajectory::starting_at(6.15).hold(2.0).ramp_to(6.8, 5.0);
        PulseSchedule::new([q1, q2], Vec::new()).unwrap()
    }

    #[test]
    fn trajectory_interpolates_and_pads() {
        let tr = Trajectory::starting_at(6.0).ramp_to(7.0, 10.0).hold(5.0);
        assert!((tr.frequency(5.0) - 6.5).abs() < 1e-12);
        assert!((tr.frequency(12.0) - 7.0).abs() < 1e-12);
        assert_eq!(tr.end_time(), 15.0);
        let s = sweep();
        assert!((s.trajectories[1].end_time() - s.duration()).abs() < 1e-12);
        assert_eq!(s.reference, [6.2, 6.15]);
    }

    #[test]
    fn zero_length_ramp_is_a_step() {
        let tr = Trajectory::starting_at(6.0).ramp_to(7.0, 0.0).hold(1.0);
        assert_eq!(tr.end_frequency(), 7.0);
        assert!((tr.frequency(0.5) - 7.0).abs() < 1e-12);
    }

    #[test]
    fn pulses_outside_schedule_rejected() {
        let [a, b] = sweep().trajectories;
        let late = MicrowavePulse::new(100.0, 0, RotationAxis::X, PI);
        assert!(PulseSchedule::new([a.clone(), b.clone()], vec![late]).is_err());
        let third = MicrowavePulse::new(1.0, 2, RotationAxis::X, PI);
        assert!(PulseSchedule::new([a, b], vec![third]).is_err());
    }

    #[test]
    fn reversed_schedule_undoes_conjugated_evolution() {
        let m = model();
        let s = sweep();
        let forward = ScheduledSystem::new(m.clone(), s.clone()).unwrap();
        let backward = ScheduledSystem::new(m.clone(), s.reversed().unwrap()).unwrap();
        let dim = m.dim();
        let psi0 = ComplexVector::from_fn(dim, |k, _| C64::new((k as f64 * 0.7).sin(), (k as f64 * 0.3).cos()));
        let psi0 = &psi0 / C64::new(psi0.norm(), 0.0);
        let mut cols = ComplexMatrix::from_column_slice(dim, 1, psi0.as_slice());
        forward.run_columns(&mut cols, DT).unwrap();
        assert!((cols.column(0).norm() - 1.0).abs() < 1e-9);
        let mut back = cols.map(|c| c.conj());
        backward.run_columns(&mut back, DT).unwrap();
        let psi = back.column(0).map(|c| c.conj());
        let f = (psi0.adjoint() * psi)[(0, 0)].norm_sqr();
        assert!(f > 1.0 - 1e-6, "{f}");
    }

    #[test]
    fn pulses_are_unitary_and_rotate_dressed_states() {
        let m = model();
        let pulse = MicrowavePulse::new(3.0, 1, RotationAxis::Y, -0.5 * PI);
        let [a, b] = sweep().trajectories;
        let sys = ScheduledSystem::new(m.clone(), PulseSchedule::new([a, b], vec![pulse]).unwrap()).unwrap();
        let u = sys.pulse_unitary(&pulse);
        assert!((u.adjoint() * &u - ComplexMatrix::identity(m.dim(), m.dim())).norm() < 1e-10);
        // Y(−π/2) takes the dressed ground state to an equal superposition
        let frame = sys.idle_frame();
        let gg = frame.state(m.basis().qubit_state(0, 0).unwrap());
        let out = frame.to_frame(&(u * frame.transform(3.0).adjoint() * frame.to_frame(&gg, 0.0)), 3.0);
        let ge = m.basis().qubit_state(0, 1).unwrap();
        let g0 = m.basis().qubit_state(0, 0).unwrap();
        assert!((out[g0].norm_sqr() - 0.5).abs() < 1e-10);
        assert!((out[ge].norm_sqr() - 0.5).abs() < 1e-10);
        assert!((out[ge] / out[g0] - C64::new(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn frame_phase_event_multiplies_dressed_amplitudes() {
        let m = model();
        let sys = ScheduledSystem::new(m.clone(), sweep()).unwrap();
        let dim = m.dim();
        let phases: Vec<f64> = (0..dim).map(|k| 0.1 * k as f64).collect();
        let ev = sys.frame_phase_event(4.0, &phases);
        let psi = ComplexVector::from_fn(dim, |k, _| C64::new(1.0 + k as f64, 0.5));
        let before = sys.idle_frame().to_frame(&psi, 4.0);
        let after = sys.idle_frame().to_frame(&(&ev.unitary * &psi), 4.0);
        for k in 0..dim {
            assert!((after[k] - before[k] * C64::from_polar(1.0, phases[k])).norm() < 1e-9);
        }
    }

    #[test]
    fn idle_frame_labels_photon_free_states() {
        let m = model();
        let frame = IdleFrame::dressed(&m, [6.2, 6.15]).unwrap();
        let v = frame.vectors();
        assert!((v.adjoint() * v - ComplexMatrix::identity(m.dim(), m.dim())).norm() < 1e-9);
        for (q1, q2) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let k = m.basis().qubit_state(q1, q2).unwrap();
            assert!(v[(k, k)].re > 0.9 && v[(k, k)].im.abs() < 1e-12);
        }
    }
}
