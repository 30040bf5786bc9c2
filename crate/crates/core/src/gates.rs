//! Photon-mediated controlled-Z gate: qubit 1 loads its excitation into the
//! lowest filter mode, qubit 2 approaches the filter from below to pick up a
//! state-dependent Stark phase, and the photon is returned to qubit 1.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::artifacts::write_csv;
use crate::device::DeviceParams;
use crate::dynamics::{filter_band, LoadRamp, OpenSystem};
use crate::error::{Error, Result};
use crate::hamiltonian::QubitFilterModel;
use crate::linalg::{eig_hermitian, ComplexMatrix, ComplexVector, C64};
use crate::optimize::{bisect, golden_section};
use crate::propagate::{evolve_columns, UnitaryEvent, DEFAULT_DT};
use crate::schedule::{IdleFrame, MicrowavePulse, PulseSchedule, RotationAxis, ScheduledSystem, Trajectory};
use crate::tomography::{
    all_settings, bootstrap, concurrence, exact_frequencies, reconstruct_state, simulate_measurements,
    BootstrapSummary, DensityMatrix, SettingFrequencies, TomographyReport, DEFAULT_RESAMPLES,
};

/// Leakage above which phases are not extracted.
pub const LEAKAGE_LIMIT: f64 = 0.05;
/// Calibration target tolerance on the conditional phase (rad).
pub const PHASE_TOL: f64 = 0.02;

/// Computational states in the order `gg, ge, eg, ee` (qubit 1 first).
pub const COMPUTATIONAL: [(u8, u8); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];
const NAMES: [&str; 4] = ["gg", "ge", "eg", "ee"];

/// Flux sequence of the gate. Qubit 1 loads its excitation with `load`,
/// qubit 2 ramps from `qubit2_idle` to `interaction_nu`, holds for
/// `interaction_time`, ramps back, and qubit 1 retrieves the photon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CzSchedule {
    pub load: LoadRamp,
    pub load_time: f64,
    pub retrieve_time: f64,
    pub qubit2_idle: f64,
    pub interaction_nu: f64,
    pub qubit2_ramp_time: f64,
    pub interaction_time: f64,
    /// Virtual-Z phases applied to qubits 1 and 2 after the gate (rad).
    pub virtual_z: [f64; 2],
}

impl Default for CzSchedule {
    fn default() -> Self {
        Self {
            load: LoadRamp::default(),
            load_time: 35.0,
            retrieve_time: 35.0,
            qubit2_idle: 6.15,
            interaction_nu: 6.7,
            qubit2_ramp_time: 8.0,
            interaction_time: 0.0,
            virtual_z: [0.0, 0.0],
        }
    }
}

impl CzSchedule {
    pub fn total_time(&self) -> f64 {
        self.load_time + 2.0 * self.qubit2_ramp_time + self.interaction_time + self.retrieve_time
    }

    /// Start of the interaction hold.
    pub fn hold_start(&self) -> f64 {
        self.load_time + self.qubit2_ramp_time
    }

    pub fn validate(&self, p: &DeviceParams) -> Result<()> {
        self.load.validate(p)?;
        for (name, v) in [
            ("load_time", self.load_time),
            ("retrieve_time", self.retrieve_time),
            ("qubit2_ramp_time", self.qubit2_ramp_time),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.interaction_time >= 0.0 && self.interaction_time.is_finite()) {
            return Err(Error::invalid(format!(
                "interaction_time must be non-negative, got {}",
                self.interaction_time
            )));
        }
        let (lowest, _) = filter_band(p);
        if !(self.interaction_nu < lowest) {
            return Err(Error::invalid(format!(
                "interaction frequency {} GHz is not below the lowest filter mode {lowest:.4} GHz",
                self.interaction_nu
            )));
        }
        if !(self.qubit2_idle < lowest) {
            return Err(Error::invalid(format!("qubit 2 idle {} GHz is not below the filter", self.qubit2_idle)));
        }
        Ok(())
    }

    /// Idle frequencies of both qubits.
    pub fn idle(&self) -> [f64; 2] {
        [self.load.start_nu, self.qubit2_idle]
    }

    pub fn trajectories(&self) -> [Trajectory; 2] {
        let hold = 2.0 * self.qubit2_ramp_time + self.interaction_time;
        let q1 = self.load.retrieve(
            self.load.load(Trajectory::starting_at(self.load.start_nu), self.load_time).hold(hold),
            self.retrieve_time,
        );
        let q2 = Trajectory::starting_at(self.qubit2_idle)
            .hold(self.load_time)
            .ramp_to(self.interaction_nu, self.qubit2_ramp_time)
            .hold(self.interaction_time)
            .ramp_to(self.qubit2_idle, self.qubit2_ramp_time)
            .hold(self.retrieve_time);
        [q1, q2]
    }

    pub fn pulse_schedule(&self, pulses: Vec<MicrowavePulse>) -> Result<PulseSchedule> {
        Ok(PulseSchedule::new(self.trajectories(), pulses)?.with_reference(self.idle()))
    }

    fn with_interaction_time(&self, tau: f64) -> Self {
        Self { interaction_time: tau, ..self.clone() }
    }
}

/// Phase of each computational state after the gate, in the frame of the
/// dressed idle energies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComputationalPhases {
    pub gg: f64,
    pub ge: f64,
    pub eg: f64,
    pub ee: f64,
}

impl ComputationalPhases {
    fn from_matrix(m: &ComplexMatrix) -> Self {
        Self { gg: m[(0, 0)].arg(), ge: m[(1, 1)].arg(), eg: m[(2, 2)].arg(), ee: m[(3, 3)].arg() }
    }

    /// `φ_ee + φ_gg − φ_eg − φ_ge` wrapped to (−π, π].
    pub fn conditional(&self) -> f64 {
        wrap(self.ee + self.gg - self.eg - self.ge)
    }

    /// Virtual-Z angles that cancel the single-qubit phases.
    pub fn cancelling_virtual_z(&self) -> [f64; 2] {
        [wrap(self.gg - self.eg), wrap(self.gg - self.ge)]
    }
}

/// Wraps an angle to (−π, π].
pub fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

/// Decoherence settings used for a report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecoherenceFlags {
    pub enabled: bool,
    pub t1_us: [f64; 2],
    pub ramsey_sigma_ns: [f64; 2],
    pub realizations: usize,
}

/// Bell-state result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BellSummary {
    pub fidelity: f64,
    pub concurrence: f64,
    /// Fidelity and concurrence of the simulated state before sampling.
    pub exact_fidelity: f64,
    pub exact_concurrence: f64,
    pub shots_per_setting: u64,
    pub tomography: TomographyReport,
}

/// Everything known about one gate schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateReport {
    pub schedule: CzSchedule,
    pub total_time: f64,
    pub conditional_phase: f64,
    pub phases: ComputationalPhases,
    /// Population leaving the computational subspace, per input.
    pub leakage: [f64; 4],
    /// Largest population swapped between `ge` and `eg`.
    pub exchange: f64,
    /// Average gate fidelity against CZ after virtual-Z correction.
    pub average_gate_fidelity: f64,
    /// Frobenius distance to CZ after virtual-Z and global-phase correction.
    pub cz_distance: f64,
    /// Single-qubit phases left after the virtual-Z correction.
    pub virtual_z_residual: [f64; 2],
    pub bell: Option<BellSummary>,
    pub decoherence: DecoherenceFlags,
}

impl GateReport {
    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        crate::artifacts::write_json(out, self)
    }
}

/// The model and dressed frame used for gate simulations: qubits as given
/// by `p` (three levels by default) and at most two excitations.
#[derive(Debug, Clone)]
pub struct GateModel {
    model: Arc<QubitFilterModel>,
    frame: Arc<IdleFrame>,
    comp: [usize; 4],
    idle: [f64; 2],
    dt: f64,
}

/// Propagator split around the interaction hold, so that different hold
/// durations cost one small matrix product each.
struct FactoredGate {
    /// `V_c†·U_after`, computational rows.
    left: ComplexMatrix,
    /// `U_before·V_c`, computational columns.
    right: ComplexMatrix,
    hold_vectors: ComplexMatrix,
    hold_values: Vec<f64>,
    energies: [f64; 4],
    /// Schedule length without the hold.
    base_time: f64,
}

impl FactoredGate {
    fn matrix(&self, tau: f64) -> ComplexMatrix {
        let w = &self.hold_vectors;
        let mut inner = w.adjoint() * &self.right;
        for (k, &l) in self.hold_values.iter().enumerate() {
            let z = C64::from_polar(1.0, -TAU * l * tau);
            for j in 0..inner.ncols() {
                inner[(k, j)] *= z;
            }
        }
        let mut m = &self.left * w * inner;
        let t = self.base_time + tau;
        for (j, &e) in self.energies.iter().enumerate() {
            let z = C64::from_polar(1.0, TAU * e * t);
            for k in 0..4 {
                m[(j, k)] *= z;
            }
        }
        m
    }

    fn conditional(&self, tau: f64) -> f64 {
        let m = self.matrix(tau);
        (m[(3, 3)] * m[(0, 0)] * m[(2, 2)].conj() * m[(1, 1)].conj()).arg()
    }
}

impl GateModel {
    pub fn new(p: &DeviceParams, idle: [f64; 2], dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        let model = Arc::new(QubitFilterModel::with_cap(p, 2)?);
        let frame = Arc::new(IdleFrame::dressed(&model, idle)?);
        let basis = model.basis();
        let comp = COMPUTATIONAL.map(|(a, b)| basis.qubit_state(a, b).expect("computational states are in the basis"));
        Ok(Self { model, frame, comp, idle, dt })
    }

    pub fn for_schedule(p: &DeviceParams, s: &CzSchedule, dt: f64) -> Result<Self> {
        Self::new(p, s.idle(), dt)
    }

    pub fn model(&self) -> &Arc<QubitFilterModel> {
        &self.model
    }

    pub fn frame(&self) -> &Arc<IdleFrame> {
        &self.frame
    }

    /// Basis indices of `gg, ge, eg, ee`.
    pub fn computational(&self) -> [usize; 4] {
        self.comp
    }

    pub fn system(&self, s: &CzSchedule, pulses: Vec<MicrowavePulse>) -> Result<ScheduledSystem> {
        self.check_idle(s)?;
        Ok(ScheduledSystem::with_frame(self.model.clone(), s.pulse_schedule(pulses)?, self.frame.clone()))
    }

    fn check_idle(&self, s: &CzSchedule) -> Result<()> {
        if s.idle() != self.idle {
            return Err(Error::invalid(format!(
                "schedule idles at {:?} GHz but the model frame was built at {:?} GHz",
                s.idle(),
                self.idle
            )));
        }
        Ok(())
    }

    fn computational_columns(&self) -> ComplexMatrix {
        let dim = self.model.dim();
        ComplexMatrix::from_fn(dim, 4, |i, k| self.frame.vectors()[(i, self.comp[k])])
    }

    /// Dressed rotating-frame 4×4 block of the gate by direct propagation.
    pub fn matrix(&self, s: &CzSchedule) -> Result<ComplexMatrix> {
        self.check_idle(s)?;
        self.schedule_matrix(&s.pulse_schedule(Vec::new())?)
    }

    /// Dressed rotating-frame 4×4 block of an arbitrary schedule idling at
    /// the model's reference frequencies.
    pub fn schedule_matrix(&self, schedule: &PulseSchedule) -> Result<ComplexMatrix> {
        if schedule.reference != self.idle {
            return Err(Error::invalid("schedule reference differs from the model frame"));
        }
        let sys = ScheduledSystem::with_frame(self.model.clone(), schedule.clone(), self.frame.clone());
        let mut cols = self.computational_columns();
        sys.run_columns(&mut cols, self.dt)?;
        let f = self.frame.transform(schedule.duration());
        Ok(ComplexMatrix::from_fn(4, 4, |j, k| (f.row(self.comp[j]) * cols.column(k))[(0, 0)]))
    }

    fn factored(&self, s: &CzSchedule) -> Result<FactoredGate> {
        let base = s.with_interaction_time(0.0);
        let sys = self.system(&base, Vec::new())?;
        let split = base.hold_start();
        let end = base.total_time();
        let dim = self.model.dim();
        let mut right = self.computational_columns();
        evolve_columns(&sys, &mut right, (0.0, split), self.dt)?;
        let mut after = ComplexMatrix::identity(dim, dim);
        evolve_columns(&sys, &mut after, (split, end), self.dt)?;
        let vc = self.computational_columns();
        let left = vc.adjoint() * after;
        let hold = eig_hermitian(&self.model.hamiltonian(s.load.top_nu, s.interaction_nu))?;
        let e = self.frame.energies();
        Ok(FactoredGate {
            left,
            right,
            hold_vectors: hold.vectors,
            hold_values: hold.values.to_vec(),
            energies: self.comp.map(|k| e[k]),
            base_time: end,
        })
    }

    /// Phases, leakage and fidelity of a schedule under ideal dynamics.
    pub fn evaluate(&self, s: &CzSchedule) -> Result<GateReport> {
        let m = self.factored(s)?.matrix(s.interaction_time);
        report_from_matrix(s, &m)
    }
}

fn virtual_z_matrix(theta: [f64; 2]) -> ComplexMatrix {
    let d: Vec<C64> =
        COMPUTATIONAL.iter().map(|&(a, b)| C64::from_polar(1.0, theta[0] * a as f64 + theta[1] * b as f64)).collect();
    ComplexMatrix::from_diagonal(&ComplexVector::from_vec(d))
}

fn cz() -> ComplexMatrix {
    virtual_z_matrix([0.0, 0.0])
        - ComplexMatrix::from_fn(4, 4, |i, j| if i == 3 && j == 3 { C64::new(2.0, 0.0) } else { C64::new(0.0, 0.0) })
}

/// `(Tr(M†M) + |Tr(U†M)|²) / 20` for a possibly non-unitary 4×4 `m`.
pub fn average_gate_fidelity(m: &ComplexMatrix, target: &ComplexMatrix) -> f64 {
    let a = (m.adjoint() * m).trace().re;
    let b = (target.adjoint() * m).trace().norm_sqr();
    ((a + b) / 20.0).clamp(0.0, 1.0)
}

fn report_from_matrix(s: &CzSchedule, m: &ComplexMatrix) -> Result<GateReport> {
    let leakage: [f64; 4] = std::array::from_fn(|k| (1.0 - m.column(k).norm_squared()).max(0.0));
    let phases = ComputationalPhases::from_matrix(m);
    let corrected = virtual_z_matrix(s.virtual_z) * m;
    let after = ComputationalPhases::from_matrix(&corrected);
    let target = cz();
    let overlap = (target.adjoint() * &corrected).trace();
    let global = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { C64::new(1.0, 0.0) };
    Ok(GateReport {
        schedule: s.clone(),
        total_time: s.total_time(),
        conditional_phase: phases.conditional(),
        phases,
        leakage,
        exchange: m[(1, 2)].norm_sqr().max(m[(2, 1)].norm_sqr()),
        average_gate_fidelity: average_gate_fidelity(&corrected, &target),
        cz_distance: (corrected - target * global).norm(),
        virtual_z_residual: [wrap(after.eg - after.gg), wrap(after.ge - after.gg)],
        bell: None,
        decoherence: DecoherenceFlags {
            enabled: false,
            t1_us: [f64::INFINITY; 2],
            ramsey_sigma_ns: [f64::INFINITY; 2],
            realizations: 0,
        },
    })
}

fn check_leakage(r: &GateReport) -> Result<()> {
    for (k, &l) in r.leakage.iter().enumerate() {
        if l > LEAKAGE_LIMIT {
            return Err(Error::Leakage { input: NAMES[k].into(), leakage: l });
        }
    }
    Ok(())
}

/// Conditional phase and per-state phases of `s` under ideal dynamics.
/// Fails if any computational input leaks more than 5%.
pub fn conditional_phase(p: &DeviceParams, s: &CzSchedule, dt: f64) -> Result<GateReport> {
    s.validate(p)?;
    let r = GateModel::for_schedule(p, s, dt)?.evaluate(s)?;
    check_leakage(&r)?;
    Ok(r)
}

/// Quasi-static conditional phase: `−2π∫(E_ee + E_gg − E_eg − E_ge)dt` over
/// instantaneous eigenenergies, relative to their idle values. Each state is
/// followed by overlap with a reference eigenvector refreshed whenever a
/// qubit has moved by `resolution` (GHz), so crossings narrower than that are
/// passed diabatically and wider ones adiabatically.
pub fn adiabatic_conditional_phase(p: &DeviceParams, s: &CzSchedule, resolution: f64, step: f64) -> Result<f64> {
    s.validate(p)?;
    if !(resolution > 0.0 && step > 0.0) {
        return Err(Error::invalid("resolution and step must be positive"));
    }
    let gm = GateModel::for_schedule(p, s, DEFAULT_DT)?;
    let sched = s.pulse_schedule(Vec::new())?;
    let basis = gm.model.basis().clone();
    let mut tracked: Vec<(usize, ComplexVector)> = gm
        .comp
        .iter()
        .map(|&g| {
            let b = basis.blocks().iter().position(|idx| idx.contains(&g)).expect("state in a block");
            let idx = &basis.blocks()[b];
            (b, ComplexVector::from_fn(idx.len(), |i, _| gm.frame.vectors()[(idx[i], g)]))
        })
        .collect();
    let idle: Vec<f64> = gm.comp.iter().map(|&g| gm.frame.energies()[g]).collect();
    let total = s.total_time();
    let n = ((total / step).ceil() as usize).max(1);
    let h = total / n as f64;
    let mut anchor = s.idle();
    let mut integral = [0.0; 4];
    for k in 0..n {
        let nus = sched.frequencies((k as f64 + 0.5) * h);
        let refresh = (nus[0] - anchor[0]).abs().max((nus[1] - anchor[1]).abs()) >= resolution;
        for (j, (blk, v)) in tracked.iter_mut().enumerate() {
            let eig = eig_hermitian(&gm.model.block_hamiltonian(*blk, nus[0], nus[1]))?;
            let (best, _) = (0..eig.values.len())
                .map(|c| (c, (eig.vectors.column(c).adjoint() * &*v)[(0, 0)].norm()))
                .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if refresh {
                *v = eig.vectors.column(best).into_owned();
            }
            integral[j] += (eig.values[best] - idle[j]) * h;
        }
        if refresh {
            anchor = nus;
        }
    }
    Ok(-TAU * (integral[3] + integral[0] - integral[2] - integral[1]))
}

/// State-dependent Stark rate `E(e,1) + E(g,0) − E(g,1) − E(e,0)` (GHz) of
/// one photon in the lowest filter mode and qubit 2, with qubit 1 parked at
/// `nu_q1` above the filter. States are the eigenstates of largest overlap
/// with the photon-free qubit-2 states and the lowest mode.
pub fn stark_rate(p: &DeviceParams, nu_q1: f64, nu_q2: f64) -> Result<f64> {
    let model = QubitFilterModel::with_cap(p, 2)?;
    let basis = model.basis();
    let modes = crate::hamiltonian::filter_normal_modes(p);
    let lowest = &modes[0];
    let block_energy = |block: usize, target: &ComplexVector| -> Result<f64> {
        let idx = &basis.blocks()[block];
        let eig = eig_hermitian(&model.block_hamiltonian(block, nu_q1, nu_q2))?;
        let local = ComplexVector::from_fn(idx.len(), |i, _| target[idx[i]]);
        let k = (0..idx.len())
            .map(|k| (k, (eig.vectors.column(k).adjoint() * &local)[(0, 0)].norm_sqr()))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc })
            .0;
        Ok(eig.values[k])
    };
    // photon in the lowest mode on top of the qubit-2 level `q2`
    let photon = |q2: u8| {
        let mut v = ComplexVector::zeros(basis.dim());
        for (site, &a) in lowest.amplitudes.iter().enumerate() {
            let mut photons = vec![0u8; basis.n_sites()];
            photons[site] = 1;
            if let Some(k) = basis.index_of(&crate::state::BasisLabel::new(0, q2, photons)) {
                v[k] = C64::new(a, 0.0);
            }
        }
        v
    };
    let bare = |q2: u8| {
        let mut v = ComplexVector::zeros(basis.dim());
        v[basis.qubit_state(0, q2).expect("qubit state")] = C64::new(1.0, 0.0);
        v
    };
    Ok(block_energy(2, &photon(1))? + block_energy(0, &bare(0))?
        - block_energy(1, &photon(0))?
        - block_energy(1, &bare(1))?)
}

/// Bounds and step sizes for the calibration search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationOptions {
    pub load_time: (f64, f64),
    pub retrieve_time: (f64, f64),
    pub qubit2_ramp_time: (f64, f64),
    pub interaction_nu: (f64, f64),
    pub max_interaction_time: f64,
    /// Scan step of the interaction-time search (ns).
    pub scan_step: f64,
    pub time_tol: f64,
    pub frequency_tol: f64,
    /// Coordinate-descent stops once a sweep improves fidelity by less.
    pub min_gain: f64,
    pub max_sweeps: usize,
    /// Run the coordinate-descent refinement after the phase calibration.
    pub refine: bool,
    pub dt: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            load_time: (10.0, 40.0),
            retrieve_time: (10.0, 40.0),
            qubit2_ramp_time: (2.0, 15.0),
            interaction_nu: (6.4, 6.9),
            max_interaction_time: 60.0,
            scan_step: 0.1,
            time_tol: 0.1,
            frequency_tol: 2e-3,
            min_gain: 1e-4,
            max_sweeps: 6,
            refine: true,
            dt: DEFAULT_DT,
        }
    }
}

/// One point of the phase-versus-duration trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhasePoint {
    pub interaction_time: f64,
    /// Unwrapped conditional phase (rad).
    pub conditional_phase: f64,
}

/// One accepted coordinate-descent step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementStep {
    pub sweep: usize,
    pub variable: String,
    pub value: f64,
    pub interaction_time: f64,
    pub fidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub schedule: CzSchedule,
    pub report: GateReport,
    /// Phase trace of the final interaction-time search.
    pub trace: Vec<PhasePoint>,
    pub history: Vec<RefinementStep>,
    pub sweeps: usize,
}

impl Calibration {
    pub fn write_trace_csv<W: Write>(&self, out: W, config_hash: Option<&str>) -> Result<()> {
        let rows: Vec<Vec<f64>> = self.trace.iter().map(|p| vec![p.interaction_time, p.conditional_phase]).collect();
        write_csv(out, config_hash, &["interaction_time_ns".into(), "conditional_phase_rad".into()], &rows)
    }
}

/// Shortest interaction time with conditional phase π (mod 2π), with the
/// unwrapped phase trace of the scan.
fn solve_interaction_time(f: &FactoredGate, opts: &CalibrationOptions) -> Result<(f64, Vec<PhasePoint>)> {
    let n = (opts.max_interaction_time / opts.scan_step).ceil() as usize;
    let mut trace = Vec::with_capacity(n + 1);
    let mut prev = f.conditional(0.0);
    trace.push(PhasePoint { interaction_time: 0.0, conditional_phase: prev });
    let mut found = None;
    for k in 1..=n {
        let tau = (k as f64 * opts.scan_step).min(opts.max_interaction_time);
        let raw = f.conditional(tau);
        let phi = prev + wrap(raw - prev);
        let before = trace.last().expect("trace starts non-empty").interaction_time;
        // π + 2πm crossed between the previous and this point
        if found.is_none() && ((prev - PI) / TAU).floor() != ((phi - PI) / TAU).floor()
            || (phi - PI).rem_euclid(TAU) == 0.0
        {
            found.get_or_insert((before, tau));
        }
        trace.push(PhasePoint { interaction_time: tau, conditional_phase: phi });
        prev = phi;
    }
    let Some((a, b)) = found else {
        let (min, max) = trace.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.conditional_phase), hi.max(p.conditional_phase))
        });
        return Err(Error::PhaseUnreachable { min, max });
    };
    let tau = bisect(|t| wrap(f.conditional(t) - PI), a, b, 1e-9).unwrap_or(0.5 * (a + b));
    Ok((tau, trace))
}

fn calibrate_fixed(
    gm: &GateModel,
    s: &CzSchedule,
    opts: &CalibrationOptions,
) -> Result<(CzSchedule, GateReport, Vec<PhasePoint>)> {
    let f = gm.factored(s)?;
    let (tau, trace) = solve_interaction_time(&f, opts)?;
    let mut out = s.with_interaction_time(tau);
    let m = f.matrix(tau);
    out.virtual_z = ComputationalPhases::from_matrix(&m).cancelling_virtual_z();
    let r = report_from_matrix(&out, &m)?;
    check_leakage(&r)?;
    Ok((out, r, trace))
}

const VARIABLES: [&str; 4] = ["load_time", "retrieve_time", "qubit2_ramp_time", "interaction_nu"];

fn get(s: &CzSchedule, k: usize) -> f64 {
    match k {
        0 => s.load_time,
        1 => s.retrieve_time,
        2 => s.qubit2_ramp_time,
        _ => s.interaction_nu,
    }
}

fn set(s: &CzSchedule, k: usize, v: f64) -> CzSchedule {
    let mut out = s.clone();
    match k {
        0 => out.load_time = v,
        1 => out.retrieve_time = v,
        2 => out.qubit2_ramp_time = v,
        _ => out.interaction_nu = v,
    }
    out
}

/// Calibrates the interaction time to a conditional phase of π, cancels the
/// single-qubit phases with virtual Z, then refines ramp times and the
/// interaction frequency by coordinate descent on the average gate fidelity.
pub fn calibrate_cz(p: &DeviceParams, initial: &CzSchedule, opts: &CalibrationOptions) -> Result<Calibration> {
    initial.validate(p)?;
    let (lowest, _) = filter_band(p);
    if !(opts.interaction_nu.1 < lowest) {
        return Err(Error::invalid(format!("interaction_nu upper bound must be below {lowest:.4} GHz")));
    }
    let gm = GateModel::for_schedule(p, initial, opts.dt)?;
    let (mut best, mut report, mut trace) = calibrate_fixed(&gm, initial, opts)?;
    let mut history = Vec::new();
    let mut sweeps = 0;
    if opts.refine {
        let bounds = [opts.load_time, opts.retrieve_time, opts.qubit2_ramp_time, opts.interaction_nu];
        let tols = [opts.time_tol, opts.time_tol, opts.time_tol, opts.frequency_tol];
        while sweeps < opts.max_sweeps {
            sweeps += 1;
            let start = report.average_gate_fidelity;
            for k in 0..VARIABLES.len() {
                let base = best.clone();
                let score = |v: f64| {
                    let trial = set(&base, k, v);
                    match trial.validate(p).and_then(|_| calibrate_fixed(&gm, &trial, opts)) {
                        Ok((_, r, _)) => -r.average_gate_fidelity,
                        Err(_) => 0.0,
                    }
                };
                let (v, _) = golden_section(score, bounds[k].0, bounds[k].1, tols[k]);
                let trial = set(&base, k, v);
                if let Ok((s, r, t)) = trial.validate(p).and_then(|_| calibrate_fixed(&gm, &trial, opts)) {
                    if r.average_gate_fidelity > report.average_gate_fidelity {
                        history.push(RefinementStep {
                            sweep: sweeps,
                            variable: VARIABLES[k].into(),
                            value: get(&s, k),
                            interaction_time: s.interaction_time,
                            fidelity: r.average_gate_fidelity,
                        });
                        best = s;
                        report = r;
                        trace = t;
                    }
                }
            }
            if report.average_gate_fidelity - start < opts.min_gain {
                break;
            }
        }
    }
    Ok(Calibration { schedule: best, report, trace, history, sweeps })
}

/// Settings of the Bell-state experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BellOptions {
    pub open: OpenSystem,
    pub shots: u64,
    pub bootstrap_resamples: usize,
    pub dt: f64,
}

impl Default for BellOptions {
    fn default() -> Self {
        Self { open: OpenSystem::default(), shots: 10_000, bootstrap_resamples: DEFAULT_RESAMPLES, dt: DEFAULT_DT }
    }
}

/// Bell state prepared and measured through the gate.
#[derive(Debug, Clone)]
pub struct BellOutcome {
    pub report: GateReport,
    /// Two-qubit state before sampling.
    pub exact: DensityMatrix,
    /// Tomographic reconstruction (exact when `shots` is zero).
    pub reconstructed: DensityMatrix,
    pub bootstrap: Option<BootstrapSummary>,
}

/// Two-qubit density matrix in the dressed frame: photons traced out,
/// population outside `g, e` dropped and the rest renormalized.
pub fn reduce_to_qubits(gm: &GateModel, rho_frame: &ComplexMatrix) -> Result<DensityMatrix> {
    let basis = gm.model.basis();
    let mut out = ComplexMatrix::zeros(4, 4);
    for (i, li) in basis.labels().iter().enumerate() {
        for (j, lj) in basis.labels().iter().enumerate() {
            if li.photons != lj.photons || li.qubits.iter().chain(&lj.qubits).any(|&q| q > 1) {
                continue;
            }
            let a = 2 * li.qubits[0] as usize + li.qubits[1] as usize;
            let b = 2 * lj.qubits[0] as usize + lj.qubits[1] as usize;
            out[(a, b)] += rho_frame[(i, j)];
        }
    }
    let tr = out.trace().re;
    if !(tr > 0.5) {
        return Err(Error::Leakage { input: "bell".into(), leakage: 1.0 - tr });
    }
    out /= C64::new(tr, 0.0);
    let out = (&out + out.adjoint()) * C64::new(0.5, 0.0);
    crate::tomography::project_to_density(&out)
}

/// π/2 rotations on both qubits, the gate, virtual Z, and a π/2 rotation on
/// qubit 2, followed by simulated tomography. Noise uses the device T1 and
/// Ramsey values when `opts.open.enabled`.
pub fn bell_experiment(p: &DeviceParams, s: &CzSchedule, opts: &BellOptions, seed: u64) -> Result<BellOutcome> {
    s.validate(p)?;
    let gm = GateModel::for_schedule(p, s, opts.dt)?;
    let mut report = gm.evaluate(s)?;
    let total = s.total_time();
    let pre = |q| MicrowavePulse::new(0.0, q, RotationAxis::Y, -FRAC_PI_2);
    let sys = gm.system(s, vec![pre(0), pre(1)])?;
    let basis = gm.model.basis();
    let theta: Vec<f64> = basis
        .labels()
        .iter()
        .map(|l| s.virtual_z[0] * l.qubits[0] as f64 + s.virtual_z[1] * l.qubits[1] as f64)
        .collect();
    let post = MicrowavePulse::new(total, 1, RotationAxis::Y, FRAC_PI_2);
    let extra: Vec<UnitaryEvent> =
        vec![sys.frame_phase_event(total, &theta), UnitaryEvent { time: total, unitary: sys.pulse_unitary(&post) }];
    let psi0 = gm.frame.state(gm.comp[0]);
    let rho_lab = if opts.open.enabled {
        let rho0 = &psi0 * psi0.adjoint();
        sys.run_open_with(&rho0, &p.noise(), opts.open.realizations, opts.open.seed, opts.dt, &extra)?
    } else {
        let mut cols = ComplexMatrix::from_column_slice(psi0.len(), 1, psi0.as_slice());
        sys.run_columns_with(&mut cols, opts.dt, &extra)?;
        &cols * cols.adjoint()
    };
    let exact = reduce_to_qubits(&gm, &gm.frame.rho_to_frame(&rho_lab, total))?;
    let (reconstructed, boot) = if opts.shots == 0 {
        let data: Vec<SettingFrequencies> = exact_frequencies(&exact);
        (reconstruct_state(&data)?, None)
    } else {
        let records = simulate_measurements(&exact, &all_settings(), opts.shots, seed)?;
        let data: Vec<SettingFrequencies> = records.iter().map(Into::into).collect();
        let boot = if opts.bootstrap_resamples >= 2 {
            Some(bootstrap(&records, opts.bootstrap_resamples, seed.wrapping_add(1))?)
        } else {
            None
        };
        (reconstruct_state(&data)?, boot)
    };
    let tomography = TomographyReport::new(&reconstructed, opts.shots, &all_settings(), boot)?;
    report.bell = Some(BellSummary {
        fidelity: tomography.fidelity,
        concurrence: tomography.concurrence,
        exact_fidelity: crate::tomography::bell_fidelity(&exact),
        exact_concurrence: concurrence(&exact)?,
        shots_per_setting: opts.shots,
        tomography,
    });
    let noise = p.noise();
    report.decoherence = DecoherenceFlags {
        enabled: opts.open.enabled,
        t1_us: if opts.open.enabled { noise.t1_us } else { [f64::INFINITY; 2] },
        ramsey_sigma_ns: if opts.open.enabled { noise.ramsey_sigma_ns } else { [f64::INFINITY; 2] },
        realizations: if opts.open.enabled { opts.open.realizations } else { 0 },
    };
    Ok(BellOutcome { report, exact, reconstructed, bootstrap: boot })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tomography::bell_fidelity;

    fn quick() -> CzSchedule {
        CzSchedule {
            load_time: 20.0,
            retrieve_time: 20.0,
            qubit2_ramp_time: 6.0,
            interaction_time: 5.0,
            ..Default::default()
        }
    }

    #[test]
    fn wrap_is_half_open() {
        assert!((wrap(PI) - PI).abs() < 1e-12);
        assert!((wrap(-PI) - PI).abs() < 1e-12);
        assert!((wrap(3.0 * TAU + 0.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_couplings_give_zero_conditional_phase() {
        let p = DeviceParams { g_q1f: 0.0, g_q2f: 0.0, ..DeviceParams::fitted() };
        let r = conditional_phase(&p, &quick(), DEFAULT_DT).unwrap();
        assert!(r.conditional_phase.abs() < 1e-9, "{}", r.conditional_phase);
        assert!(r.leakage.iter().all(|&l| l < 1e-9));
    }

    #[test]
    fn idle_schedule_has_zero_phases() {
        let p = DeviceParams::fitted();
        let s = CzSchedule::default();
        let gm = GateModel::for_schedule(&p, &s, DEFAULT_DT).unwrap();
        let idle = [Trajectory::starting_at(s.idle()[0]).hold(40.0), Trajectory::starting_at(s.idle()[1]).hold(40.0)];
        let m = gm.schedule_matrix(&PulseSchedule::new(idle, Vec::new()).unwrap()).unwrap();
        assert!((m - ComplexMatrix::identity(4, 4)).norm() < 1e-9);
    }

    #[test]
    fn factored_propagator_matches_direct() {
        let p = DeviceParams::fitted();
        let s = quick();
        let gm = GateModel::for_schedule(&p, &s, DEFAULT_DT).unwrap();
        let direct = gm.matrix(&s).unwrap();
        let fact = gm.factored(&s).unwrap().matrix(s.interaction_time);
        assert!((direct - fact).norm() < 1e-9);
    }

    #[test]
    fn step_size_converged() {
        let p = DeviceParams::fitted();
        let s = quick();
        let run = |dt: f64| {
            let gm = GateModel::for_schedule(&p, &s, dt).unwrap();
            let sys = gm.system(&s, Vec::new()).unwrap();
            let mut cols = gm.computational_columns();
            sys.run_columns(&mut cols, dt).unwrap();
            cols
        };
        let (a, b) = (run(DEFAULT_DT), run(0.5 * DEFAULT_DT));
        for k in 0..4 {
            let f = (a.column(k).adjoint() * b.column(k))[(0, 0)].norm_sqr();
            assert!(1.0 - f < 1e-8, "column {k}: {}", 1.0 - f);
            assert!((a.column(k).norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn slow_schedule_matches_energy_integral() {
        let p = DeviceParams::fitted();
        for (ramp, q2, tau) in [(150.0, 40.0, 20.0), (200.0, 50.0, 30.0)] {
            let s = CzSchedule {
                load_time: ramp,
                retrieve_time: ramp,
                qubit2_ramp_time: q2,
                interaction_time: tau,
                ..Default::default()
            };
            let dynamic = conditional_phase(&p, &s, DEFAULT_DT).unwrap().conditional_phase;
            let oracle = wrap(adiabatic_conditional_phase(&p, &s, 0.01, DEFAULT_DT).unwrap());
            assert!(wrap(dynamic - oracle).abs() < 0.05 * oracle.abs(), "dynamic {dynamic}, oracle {oracle}");
        }
    }

    #[test]
    fn hold_rate_matches_stark_rate() {
        let p = DeviceParams::fitted();
        let s = CzSchedule { load_time: 60.0, retrieve_time: 60.0, qubit2_ramp_time: 20.0, ..Default::default() };
        let f = GateModel::for_schedule(&p, &s, DEFAULT_DT).unwrap().factored(&s).unwrap();
        let rate = wrap(f.conditional(1.0) - f.conditional(0.0)) / -TAU;
        let oracle = stark_rate(&p, s.load.top_nu, s.interaction_nu).unwrap();
        assert!((rate - oracle).abs() < 0.05 * oracle.abs(), "rate {rate}, oracle {oracle}");
    }

    #[test]
    fn stark_rate_is_odd_in_detuning_for_single_mode() {
        let p = DeviceParams::single_mode(7.0, 0.05).with_two_level_qubits();
        for delta in [0.2, 0.3, 0.5] {
            let below = stark_rate(&p, 8.1, 7.0 - delta).unwrap();
            let above = stark_rate(&p, 8.1, 7.0 + delta).unwrap();
            assert!(below < 0.0 && above > 0.0, "{below} {above}");
            assert!((below + above).abs() < 0.05 * above, "delta {delta}: {below} {above}");
            // Jaynes-Cummings: (√(Δ² + 8g²) − |Δ|)/2
            let jc = 0.5 * ((delta * delta + 8.0 * 0.05f64.powi(2)).sqrt() - delta);
            assert!((above - jc).abs() < 0.05 * jc, "{above} vs {jc}");
        }
    }

    #[test]
    fn calibration_hits_pi_and_cancels_single_qubit_phases() {
        let p = DeviceParams::fitted();
        let c = calibrate_cz(&p, &CzSchedule::default(), &CalibrationOptions { refine: false, ..Default::default() })
            .unwrap();
        assert!(wrap(c.report.conditional_phase - PI).abs() < PHASE_TOL);
        assert!(c.report.virtual_z_residual.iter().all(|r| r.abs() < 1e-3));
        assert!(c.trace.len() > 10);
        let direct = GateModel::for_schedule(&p, &c.schedule, DEFAULT_DT).unwrap().matrix(&c.schedule).unwrap();
        assert!(wrap(ComputationalPhases::from_matrix(&direct).conditional() - PI).abs() < PHASE_TOL);
    }

    #[test]
    fn unreachable_phase_reports_range() {
        let p = DeviceParams::fitted();
        let opts = CalibrationOptions { refine: false, max_interaction_time: 1.0, ..Default::default() };
        match calibrate_cz(&p, &CzSchedule::default(), &opts) {
            Err(Error::PhaseUnreachable { min, max }) => assert!(min <= max && max < PI),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_schedules_rejected() {
        let p = DeviceParams::fitted();
        let bad = [
            CzSchedule { interaction_nu: 7.1, ..Default::default() },
            CzSchedule { load_time: 0.0, ..Default::default() },
            CzSchedule { interaction_time: -1.0, ..Default::default() },
        ];
        for s in bad {
            assert!(s.validate(&p).is_err(), "{s:?}");
        }
        let r = conditional_phase(
            &p,
            &CzSchedule { load_time: 10.0, retrieve_time: 10.0, ..Default::default() },
            DEFAULT_DT,
        );
        assert!(matches!(r, Err(Error::Leakage { .. })), "{r:?}");
    }

    #[test]
    fn average_gate_fidelity_examples() {
        let u = cz();
        assert!((average_gate_fidelity(&u, &u) - 1.0).abs() < 1e-12);
        let id = ComplexMatrix::identity(4, 4);
        // |Tr(CZ)|² = 4
        assert!((average_gate_fidelity(&id, &u) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn without_coupling_no_bell_state() {
        let p = DeviceParams { g_q1f: 0.0, g_q2f: 0.0, ..DeviceParams::fitted() };
        let opts = BellOptions { shots: 10_000, bootstrap_resamples: 0, ..Default::default() };
        let out = bell_experiment(&p, &quick(), &opts, 3).unwrap();
        let b = out.report.bell.unwrap();
        // separable states stay at or below one half
        assert!(bell_fidelity(&out.exact) <= 0.5 + 1e-9);
        assert!(b.fidelity <= 0.5 + 0.02);
        assert!(b.exact_concurrence < 1e-6);
    }
}
