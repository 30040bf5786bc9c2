//! Time-domain experiments: Landau–Zener ramp interference, photon loading
//! and retrieval, and the single-photon Stark Ramsey measurement.
//!
//! Qubit states are prepared and read out in the dressed eigenbasis of the
//! idle Hamiltonian, which is what a microwave pulse resonant with the dressed
//! transition and a dispersive readout address.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::io::Write;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifacts::write_csv;
use crate::device::DeviceParams;
use crate::error::{Error, Result};
use crate::hamiltonian::{filter_normal_modes, QubitFilterModel};
use crate::linalg::{eig_hermitian, ComplexMatrix, ComplexVector, C64};
use crate::optimize::golden_section;
use crate::propagate::DEFAULT_DT;
use crate::schedule::{IdleFrame, MicrowavePulse, PulseSchedule, RampShape, RotationAxis, ScheduledSystem, Trajectory};
use crate::state::{Basis, LabeledState};
use crate::transmon::TransmonParams;

/// Observable on a one-dimensional grid plus run metadata.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub parameter: String,
    pub grid: Vec<f64>,
    pub observable: String,
    pub values: Vec<f64>,
    /// Additional named columns aligned with `grid`.
    pub diagnostics: Vec<(String, Vec<f64>)>,
    pub dt: f64,
    pub decoherence: bool,
    pub realizations: usize,
}

impl ExperimentResult {
    pub fn write_csv<W: Write>(&self, out: W, config_hash: Option<&str>) -> Result<()> {
        let mut header = vec![self.parameter.clone(), self.observable.clone()];
        header.extend(self.diagnostics.iter().map(|(n, _)| n.clone()));
        let rows: Vec<Vec<f64>> = (0..self.grid.len())
            .map(|k| {
                let mut r = vec![self.grid[k], self.values[k]];
                r.extend(self.diagnostics.iter().map(|(_, v)| v[k]));
                r
            })
            .collect();
        write_csv(out, config_hash, &header, &rows)
    }

    pub fn diagnostic(&self, name: &str) -> Option<&[f64]> {
        self.diagnostics.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }
}

/// Decoherence settings shared by the time-domain experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OpenSystem {
    pub enabled: bool,
    pub realizations: usize,
    pub seed: u64,
}

impl Default for OpenSystem {
    fn default() -> Self {
        Self { enabled: false, realizations: 400, seed: 7 }
    }
}

impl OpenSystem {
    fn realizations_used(&self) -> usize {
        if self.enabled {
            self.realizations
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LzRampConfig {
    /// Ramp durations t (ns).
    pub t_ramps: Vec<f64>,
    /// Fixed total time T (ns); the hold lasts T − 2t.
    pub total_time: f64,
    /// Qubit 1 idle frequency below the band (GHz).
    pub start_nu: f64,
    /// Qubit 1 frequency above the band (GHz).
    pub top_nu: f64,
    /// Qubit 2 parking frequency (GHz).
    pub qubit2_nu: f64,
    pub shape: RampShape,
    pub dt: f64,
}

impl Default for LzRampConfig {
    fn default() -> Self {
        Self {
            t_ramps: (1..=110).map(|k| 0.5 * k as f64).collect(),
            total_time: 110.0,
            start_nu: 6.2,
            top_nu: 8.1,
            qubit2_nu: 5.0,
            shape: RampShape::LinearFrequency,
            dt: DEFAULT_DT,
        }
    }
}

fn single_excitation_model(p: &DeviceParams) -> Result<Arc<QubitFilterModel>> {
    Ok(Arc::new(QubitFilterModel::with_cap(p, 1)?))
}

/// Lowest and highest filter normal-mode frequencies.
pub fn filter_band(p: &DeviceParams) -> (f64, f64) {
    let modes = filter_normal_modes(p);
    (modes[0].frequency, modes[modes.len() - 1].frequency)
}

fn check_traversal(p: &DeviceParams, start_nu: f64, top_nu: f64) -> Result<()> {
    let (low, high) = filter_band(p);
    if !(top_nu > high) {
        return Err(Error::invalid(format!(
            "top frequency {top_nu} GHz is not above the filter band (highest mode {high:.4} GHz)"
        )));
    }
    if !(start_nu < low) {
        return Err(Error::invalid(format!(
            "start frequency {start_nu} GHz is not below the filter band (lowest mode {low:.4} GHz)"
        )));
    }
    Ok(())
}

/// Population of the dressed states in which `qubit` is excited.
pub fn dressed_excitation(frame: &IdleFrame, basis: &Basis, psi: &ComplexVector, qubit: usize) -> f64 {
    frame.populations(psi).iter().zip(basis.labels()).filter(|(_, l)| l.qubits[qubit] == 1).map(|(p, _)| p).sum()
}

/// As [`dressed_excitation`] for a density matrix.
pub fn dressed_excitation_rho(frame: &IdleFrame, basis: &Basis, rho: &ComplexMatrix, qubit: usize) -> f64 {
    let v = frame.vectors();
    let d = v.adjoint() * rho * v;
    basis.labels().iter().enumerate().filter(|(_, l)| l.qubits[qubit] == 1).map(|(k, _)| d[(k, k)].re).sum()
}

/// Up-ramp in `t`, hold `T − 2t`, down-ramp in `t` for qubit 1.
pub fn lz_schedule(cfg: &LzRampConfig, t_ramp: f64, transmon: Option<&TransmonParams>) -> Result<PulseSchedule> {
    if !(t_ramp > 0.0) || 2.0 * t_ramp > cfg.total_time + 1e-9 {
        return Err(Error::invalid(format!(
            "ramp time {t_ramp} ns must be positive and at most half the total time {} ns",
            cfg.total_time
        )));
    }
    let q1 = Trajectory::starting_at(cfg.start_nu)
        .ramp_with(cfg.shape, cfg.top_nu, t_ramp, transmon)?
        .hold(cfg.total_time - 2.0 * t_ramp)
        .ramp_with(cfg.shape, cfg.start_nu, t_ramp, transmon)?;
    let q2 = Trajectory::starting_at(cfg.qubit2_nu).hold(cfg.total_time);
    PulseSchedule::new([q1, q2], Vec::new())
}

/// Final qubit-1 excited population after the ramp–hold–ramp sequence, one
/// point per ramp time.
pub fn lz_ramp_experiment(
    p: &DeviceParams,
    cfg: &LzRampConfig,
    transmon: Option<&TransmonParams>,
    open: &OpenSystem,
) -> Result<ExperimentResult> {
    check_traversal(p, cfg.start_nu, cfg.top_nu)?;
    let model = single_excitation_model(p)?;
    let basis = model.basis().clone();
    let frame = Arc::new(IdleFrame::dressed(&model, [cfg.start_nu, cfg.qubit2_nu])?);
    let start = LabeledState::new(frame.state(basis.qubit_state(1, 0).expect("|eg⟩ in basis")), basis.clone())?;
    let noise = p.noise();
    let values: Vec<f64> = cfg
        .t_ramps
        .par_iter()
        .map(|&t| {
            let sys = ScheduledSystem::with_frame(model.clone(), lz_schedule(cfg, t, transmon)?, frame.clone());
            if open.enabled {
                let rho0 = outer(&start.amplitudes);
                let rho = sys.run_open(&rho0, &noise, open.realizations, open.seed, cfg.dt)?;
                Ok(dressed_excitation_rho(&frame, &basis, &rho, 0))
            } else {
                Ok(dressed_excitation(&frame, &basis, &sys.run(&start, cfg.dt)?.amplitudes, 0))
            }
        })
        .collect::<Result<_>>()?;
    Ok(ExperimentResult {
        parameter: "t_ramp".into(),
        grid: cfg.t_ramps.clone(),
        observable: "p_e".into(),
        values,
        diagnostics: Vec::new(),
        dt: cfg.dt,
        decoherence: open.enabled,
        realizations: open.realizations_used(),
    })
}

/// Dressed qubit-1 population remaining after one linear up-ramp of length
/// `t_ramp`, read out in the eigenbasis at the top frequency.
pub fn single_passage_residual(p: &DeviceParams, cfg: &LzRampConfig, t_ramp: f64) -> Result<f64> {
    check_traversal(p, cfg.start_nu, cfg.top_nu)?;
    let model = single_excitation_model(p)?;
    let basis = model.basis().clone();
    let q1 = Trajectory::starting_at(cfg.start_nu).ramp_to(cfg.top_nu, t_ramp);
    let q2 = Trajectory::starting_at(cfg.qubit2_nu).hold(t_ramp);
    let sys = ScheduledSystem::new(model.clone(), PulseSchedule::new([q1, q2], Vec::new())?)?;
    let start = LabeledState::new(sys.idle_frame().state(basis.qubit_state(1, 0).expect("|eg⟩")), basis.clone())?;
    let out = sys.run(&start, cfg.dt)?;
    let top = IdleFrame::dressed(&model, [cfg.top_nu, cfg.qubit2_nu])?;
    Ok(dressed_excitation(&top, &basis, &out.amplitudes, 0))
}

/// Transfer probability `1 − exp(−(2π)²g²/v)` for one linear passage through
/// an avoided crossing of half-gap `g` (GHz) at sweep rate `v` (GHz/ns).
pub fn landau_zener_formula(g: f64, v: f64) -> f64 {
    1.0 - (-(TAU * TAU) * g * g / v).exp()
}

/// Numerically propagated transfer for the same two-level sweep, started and
/// stopped at detuning ±2000·2g so the finite-time ripple stays well below 1%.
pub fn landau_zener_transfer(g: f64, v: f64) -> Result<f64> {
    if !(g > 0.0 && v > 0.0) {
        return Err(Error::invalid("coupling and sweep rate must be positive"));
    }
    let span = 4000.0 * g / v;
    let basis = Arc::new(Basis::truncated(2, 0, 0, 1));
    let a = basis.qubit_state(1, 0).expect("|eg⟩");
    let b = basis.qubit_state(0, 1).expect("|ge⟩");
    let dim = basis.dim();
    let h = move |t: f64| {
        let d = v * t;
        let mut m = ComplexMatrix::zeros(dim, dim);
        m[(a, a)] = C64::new(d / 2.0, 0.0);
        m[(b, b)] = C64::new(-d / 2.0, 0.0);
        m[(a, b)] = C64::new(g, 0.0);
        m[(b, a)] = C64::new(g, 0.0);
        m
    };
    let psi = LabeledState::basis_state(basis.clone(), basis.label(a))?;
    let dt = (0.002 / v.sqrt()).min(0.02);
    let out = crate::propagate::propagate(&h, &psi, (-span, span), dt)?;
    Ok(out.amplitudes[b].norm_sqr())
}

/// `|ψ⟩⟨ψ|`.
pub fn outer(psi: &ComplexVector) -> ComplexMatrix {
    psi * psi.adjoint()
}

/// Frequency in `[f_min, f_max]` maximising the discrete Fourier amplitude of
/// the mean-subtracted samples, scanned on a grid of `resolution`.
pub fn fourier_peak(t: &[f64], y: &[f64], f_min: f64, f_max: f64, resolution: f64) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let steps = ((f_max - f_min) / resolution).ceil().max(1.0) as usize;
    let mut best = (f_min, -1.0);
    for k in 0..=steps {
        let f = f_min + (f_max - f_min) * k as f64 / steps as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (ti, yi) in t.iter().zip(y) {
            let ph = TAU * f * ti;
            re += (yi - mean) * ph.cos();
            im += (yi - mean) * ph.sin();
        }
        let a = re * re + im * im;
        if a > best.1 {
            best = (f, a);
        }
    }
    best.0
}

/// Residuals of a least-squares straight line through `(t, y)`.
pub fn detrend(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len() as f64;
    let (mt, my) = (t.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = t.iter().map(|x| (x - mt).powi(2)).sum();
    let sxy: f64 = t.iter().zip(y).map(|(x, v)| (x - mt) * (v - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    t.iter().zip(y).map(|(x, v)| v - my - slope * (x - mt)).collect()
}

/// Fourier peak of the detrended observable restricted to `grid > t_min`.
pub fn slow_fringe_frequency(result: &ExperimentResult, t_min: f64, f_min: f64, f_max: f64) -> Result<f64> {
    let (t, y): (Vec<f64>, Vec<f64>) =
        result.grid.iter().zip(&result.values).filter(|(t, _)| **t > t_min).map(|(a, b)| (*a, *b)).unzip();
    if t.len() < 8 {
        return Err(Error::invalid(format!("only {} grid points above {t_min} ns", t.len())));
    }
    Ok(fourier_peak(&t, &detrend(&t, &y), f_min, f_max, 1e-4))
}

/// Piecewise-linear qubit-1 trajectory that crosses the filter band slowly and
/// the regions outside it quickly. Each edge leg takes `edge_fraction` of the
/// ramp time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoadRamp {
    pub start_nu: f64,
    pub enter_nu: f64,
    pub exit_nu: f64,
    pub top_nu: f64,
    pub edge_fraction: f64,
}

impl Default for LoadRamp {
    fn default() -> Self {
        Self { start_nu: 6.2, enter_nu: 6.85, exit_nu: 7.6, top_nu: 8.1, edge_fraction: 0.2 }
    }
}

impl LoadRamp {
    pub fn validate(&self, p: &DeviceParams) -> Result<()> {
        if !(self.start_nu < self.enter_nu && self.enter_nu < self.exit_nu && self.exit_nu < self.top_nu) {
            return Err(Error::invalid("load ramp needs start_nu < enter_nu < exit_nu < top_nu"));
        }
        if !(self.edge_fraction > 0.0 && self.edge_fraction < 0.5) {
            return Err(Error::invalid(format!("edge_fraction {} not in (0, 0.5)", self.edge_fraction)));
        }
        check_traversal(p, self.start_nu, self.top_nu)
    }

    /// Appends the load legs, from `start_nu` up to `top_nu`.
    pub fn load(&self, tr: Trajectory, ramp_time: f64) -> Trajectory {
        let e = self.edge_fraction * ramp_time;
        tr.ramp_to(self.enter_nu, e).ramp_to(self.exit_nu, ramp_time - 2.0 * e).ramp_to(self.top_nu, e)
    }

    /// Appends the time-reversed legs, from `top_nu` down to `start_nu`.
    pub fn retrieve(&self, tr: Trajectory, ramp_time: f64) -> Trajectory {
        let e = self.edge_fraction * ramp_time;
        tr.ramp_to(self.exit_nu, e).ramp_to(self.enter_nu, ramp_time - 2.0 * e).ramp_to(self.start_nu, e)
    }
}

/// Outcome of a load or retrieve ramp.
#[derive(Debug, Clone)]
pub struct PhotonTransfer {
    pub state: LabeledState,
    /// Population of each photon-like dressed state, lowest mode first.
    pub mode_populations: Vec<f64>,
    /// Dressed qubit-1 excitation.
    pub qubit_population: f64,
}

impl PhotonTransfer {
    pub fn filter_population(&self) -> f64 {
        self.mode_populations.iter().sum()
    }
}

/// Decomposes the single-excitation part of `psi` over the eigenstates at
/// `nus`: photon-like states by ascending energy, then qubit 1.
fn single_excitation_readout(model: &QubitFilterModel, nus: [f64; 2], psi: &ComplexVector) -> Result<(Vec<f64>, f64)> {
    let basis = model.basis();
    let idx = &basis.blocks()[1];
    let eig = eig_hermitian(&model.block_hamiltonian(1, nus[0], nus[1]))?;
    let pos = |q1, q2| {
        let g = basis.qubit_state(q1, q2).expect("single-excitation qubit state");
        idx.iter().position(|&i| i == g).expect("state in block")
    };
    let (p1, p2) = (pos(1, 0), pos(0, 1));
    let mut modes = Vec::new();
    let mut qubit = 0.0;
    for k in 0..idx.len() {
        let amp: C64 = idx.iter().enumerate().map(|(i, &g)| eig.vectors[(i, k)].conj() * psi[g]).sum();
        let pop = amp.norm_sqr();
        let (w1, w2) = (eig.vectors[(p1, k)].norm_sqr(), eig.vectors[(p2, k)].norm_sqr());
        if w1 >= 0.5 {
            qubit += pop;
        } else if w2 < 0.5 {
            modes.push(pop);
        }
    }
    if modes.len() != model.params().n_modes {
        return Err(Error::BranchTracking(format!(
            "found {} photon-like states for {} modes at ({}, {}) GHz",
            modes.len(),
            model.params().n_modes,
            nus[0],
            nus[1]
        )));
    }
    Ok((modes, qubit))
}

fn transfer(
    model: &Arc<QubitFilterModel>,
    q1: Trajectory,
    qubit2_nu: f64,
    psi0: &LabeledState,
    readout: [f64; 2],
    dt: f64,
) -> Result<PhotonTransfer> {
    let t = q1.end_time();
    let q2 = Trajectory::starting_at(qubit2_nu).hold(t);
    let sys = ScheduledSystem::new(model.clone(), PulseSchedule::new([q1, q2], Vec::new())?)?;
    let state = sys.run(psi0, dt)?;
    let (mode_populations, qubit_population) = single_excitation_readout(model, readout, &state.amplitudes)?;
    Ok(PhotonTransfer { state, mode_populations, qubit_population })
}

/// Converts the dressed qubit-1 excitation into a filter photon.
pub fn load_photon(
    p: &DeviceParams,
    ramp: &LoadRamp,
    qubit2_nu: f64,
    ramp_time: f64,
    dt: f64,
) -> Result<PhotonTransfer> {
    ramp.validate(p)?;
    let model = single_excitation_model(p)?;
    let basis = model.basis().clone();
    let frame = IdleFrame::dressed(&model, [ramp.start_nu, qubit2_nu])?;
    let start = LabeledState::new(frame.state(basis.qubit_state(1, 0).expect("|eg⟩")), basis)?;
    let q1 = ramp.load(Trajectory::starting_at(ramp.start_nu), ramp_time);
    transfer(&model, q1, qubit2_nu, &start, [ramp.top_nu, qubit2_nu], dt)
}

/// Returns a loaded photon to qubit 1 with the time-reversed ramp.
pub fn retrieve_photon(
    p: &DeviceParams,
    ramp: &LoadRamp,
    qubit2_nu: f64,
    ramp_time: f64,
    loaded: &LabeledState,
    dt: f64,
) -> Result<PhotonTransfer> {
    ramp.validate(p)?;
    let model = single_excitation_model(p)?;
    if loaded.basis.dim() != model.dim() {
        return Err(Error::Dimension(format!(
            "state has dimension {}, single-excitation model has {}",
            loaded.basis.dim(),
            model.dim()
        )));
    }
    if loaded.photon_population() < 0.5 {
        return Err(Error::invalid("no photon to retrieve: filter population below 0.5"));
    }
    let q1 = ramp.retrieve(Trajectory::starting_at(ramp.top_nu), ramp_time);
    transfer(&model, q1, qubit2_nu, loaded, [ramp.start_nu, qubit2_nu], dt)
}

/// Stark Ramsey protocol settings. Qubit 2 idles at `reference_nu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StarkConfig {
    /// Qubit-2 interaction frequencies ν_{Q2,f} (GHz).
    pub nu_q2f: Vec<f64>,
    /// Interaction times τ (ns).
    pub taus: Vec<f64>,
    pub reference_nu: f64,
    pub load: LoadRamp,
    pub load_time: f64,
    /// Qubit 2 moves quickly up to here, then sweeps at `sweep_rate`.
    pub approach_nu: f64,
    /// Above here qubit 2 moves quickly again.
    pub sweep_exit_nu: f64,
    /// GHz/ns.
    pub sweep_rate: f64,
    /// Duration of each fast qubit-2 leg (ns).
    pub fast_time: f64,
    /// Phase advance of the final π/2 pulse per ns of τ (GHz).
    pub artificial_detuning: f64,
    pub dt: f64,
}

impl Default for StarkConfig {
    fn default() -> Self {
        let mut nu = vec![5.3, 5.6, 6.0, 6.3, 6.5, 6.7];
        nu.extend((0..=9).map(|k| 6.8 + 0.1 * k as f64));
        nu.extend([7.8, 8.0, 8.2, 8.4, 8.6]);
        Self {
            nu_q2f: nu.into_iter().map(|x| (x * 1e6).round() / 1e6).collect(),
            taus: (0..=80).map(|k| 0.5 * k as f64).collect(),
            reference_nu: 5.3,
            load: LoadRamp::default(),
            load_time: 25.0,
            approach_nu: 6.7,
            sweep_exit_nu: 7.6,
            sweep_rate: 0.025,
            fast_time: 5.0,
            artificial_detuning: 0.05,
            dt: DEFAULT_DT,
        }
    }
}

impl StarkConfig {
    pub fn validate(&self, p: &DeviceParams) -> Result<()> {
        self.load.validate(p)?;
        if self.nu_q2f.is_empty() || self.taus.is_empty() {
            return Err(Error::invalid("stark grids must be non-empty"));
        }
        if self.taus.iter().any(|&t| t < 0.0) {
            return Err(Error::invalid("interaction times must be non-negative"));
        }
        let (low, _) = filter_band(p);
        if !(self.reference_nu < low) {
            return Err(Error::invalid(format!("reference_nu {} must lie below the band", self.reference_nu)));
        }
        if !(self.reference_nu < self.approach_nu && self.approach_nu < self.sweep_exit_nu) {
            return Err(Error::invalid("need reference_nu < approach_nu < sweep_exit_nu"));
        }
        if !(self.sweep_rate > 0.0 && self.fast_time > 0.0 && self.load_time > 0.0) {
            return Err(Error::invalid("sweep_rate, fast_time and load_time must be positive"));
        }
        Ok(())
    }

    /// Qubit-2 legs `(target, duration)` from the reference up to `nu`.
    pub fn qubit2_legs(&self, nu: f64) -> Vec<(f64, f64)> {
        if nu <= self.approach_nu {
            return vec![(nu, self.fast_time)];
        }
        let mid = nu.min(self.sweep_exit_nu);
        let mut legs = vec![(self.approach_nu, self.fast_time), (mid, (mid - self.approach_nu) / self.sweep_rate)];
        if nu > self.sweep_exit_nu {
            legs.push((nu, self.fast_time));
        }
        legs
    }

    fn legs_duration(&self, nu: f64) -> f64 {
        self.qubit2_legs(nu).iter().map(|l| l.1).sum()
    }

    /// Fixed sequence length shared by every grid point.
    pub fn total_time(&self) -> f64 {
        let legs = self.nu_q2f.iter().map(|&nu| self.legs_duration(nu)).fold(0.0, f64::max);
        let tau = self.taus.iter().copied().fold(0.0, f64::max);
        2.0 * self.load_time + 2.0 * legs + tau + 1.0
    }
}

/// Full Ramsey schedule for one `(ν_{Q2,f}, τ)` point.
pub fn stark_schedule(cfg: &StarkConfig, nu: f64, tau: f64) -> Result<PulseSchedule> {
    let total = cfg.total_time();
    let q1 = cfg.load.load(Trajectory::starting_at(cfg.load.start_nu), cfg.load_time).hold_until(total - cfg.load_time);
    let q1 = cfg.load.retrieve(q1, cfg.load_time);
    let legs = cfg.qubit2_legs(nu);
    let mut q2 = Trajectory::starting_at(cfg.reference_nu).hold(cfg.load_time);
    for &(target, d) in &legs {
        q2 = q2.ramp_to(target, d);
    }
    q2 = q2.hold(tau);
    for (k, &(_, d)) in legs.iter().enumerate().rev() {
        let target = if k == 0 { cfg.reference_nu } else { legs[k - 1].0 };
        q2 = q2.ramp_to(target, d);
    }
    let half = MicrowavePulse::new(0.0, 0, RotationAxis::Y, -FRAC_PI_2);
    let close =
        MicrowavePulse::new(total, 0, RotationAxis::Y, -FRAC_PI_2).with_phase(-TAU * cfg.artificial_detuning * tau);
    PulseSchedule::new([q1, q2.hold_until(total)], vec![half, close])
}

/// Least-squares sinusoid `offset + amplitude·cos(2π·f·t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SinusoidFit {
    pub frequency: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub offset: f64,
    /// RMS residual relative to the fitted amplitude.
    pub relative_residual: f64,
}

fn linear_sinusoid(t: &[f64], y: &[f64], f: f64) -> (Vector3<f64>, f64) {
    let mut ata = Matrix3::zeros();
    let mut aty = Vector3::zeros();
    for (ti, yi) in t.iter().zip(y) {
        let ph = TAU * f * ti;
        let row = Vector3::new(1.0, ph.cos(), ph.sin());
        ata += row * row.transpose();
        aty += row * *yi;
    }
    let coef = ata.lu().solve(&aty).unwrap_or_else(Vector3::zeros);
    let ss = t
        .iter()
        .zip(y)
        .map(|(ti, yi)| {
            let ph = TAU * f * ti;
            (yi - coef[0] - coef[1] * ph.cos() - coef[2] * ph.sin()).powi(2)
        })
        .sum();
    (coef, ss)
}

/// Fits a single sinusoid with frequency in `[f_min, f_max]`: the linear
/// coefficients are solved exactly for each trial frequency, which is scanned
/// and then refined by golden-section search.
pub fn fit_sinusoid(t: &[f64], y: &[f64], f_min: f64, f_max: f64) -> Result<SinusoidFit> {
    if t.len() != y.len() || t.len() < 4 {
        return Err(Error::invalid("sinusoid fit needs at least four matching samples"));
    }
    let span = t.iter().copied().fold(f64::NEG_INFINITY, f64::max) - t.iter().copied().fold(f64::INFINITY, f64::min);
    if !(span > 0.0 && f_max > f_min && f_min >= 0.0) {
        return Err(Error::invalid("sinusoid fit needs a positive time span and frequency range"));
    }
    let step = 1.0 / (8.0 * span);
    let n = ((f_max - f_min) / step).ceil() as usize;
    let best = (0..=n)
        .map(|k| f_min + (f_max - f_min) * k as f64 / n as f64)
        .map(|f| (f, linear_sinusoid(t, y, f).1))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty scan");
    let (f, _) =
        golden_section(|f| linear_sinusoid(t, y, f).1, (best.0 - step).max(f_min), (best.0 + step).min(f_max), 1e-10);
    let (c, ss) = linear_sinusoid(t, y, f);
    let amplitude = c[1].hypot(c[2]);
    let rms = (ss / t.len() as f64).sqrt();
    Ok(SinusoidFit {
        frequency: f,
        amplitude,
        phase: (-c[2]).atan2(c[1]),
        offset: c[0],
        relative_residual: if amplitude > 0.0 { rms / amplitude } else { f64::INFINITY },
    })
}

/// Fits above this relative residual are flagged unreliable.
pub const FIT_RESIDUAL_LIMIT: f64 = 0.2;

/// Ramsey fringe `P_e(τ)` of qubit 1 at one interaction frequency.
pub fn stark_fringe(p: &DeviceParams, cfg: &StarkConfig, nu: f64, open: &OpenSystem) -> Result<Vec<f64>> {
    cfg.validate(p)?;
    let model = single_excitation_model(p)?;
    stark_fringe_with(&model, p, cfg, nu, open)
}

fn stark_fringe_with(
    model: &Arc<QubitFilterModel>,
    p: &DeviceParams,
    cfg: &StarkConfig,
    nu: f64,
    open: &OpenSystem,
) -> Result<Vec<f64>> {
    let basis = model.basis().clone();
    let frame = Arc::new(IdleFrame::dressed(model, [cfg.load.start_nu, cfg.reference_nu])?);
    let ground = LabeledState::new(frame.state(basis.qubit_state(0, 0).expect("|gg⟩")), basis.clone())?;
    let noise = p.noise();
    cfg.taus
        .par_iter()
        .map(|&tau| {
            let sys = ScheduledSystem::with_frame(model.clone(), stark_schedule(cfg, nu, tau)?, frame.clone());
            if open.enabled {
                let rho = sys.run_open(&outer(&ground.amplitudes), &noise, open.realizations, open.seed, cfg.dt)?;
                Ok(dressed_excitation_rho(&frame, &basis, &rho, 0))
            } else {
                Ok(dressed_excitation(&frame, &basis, &sys.run(&ground, cfg.dt)?.amplitudes, 0))
            }
        })
        .collect()
}

/// Static oracle: energy of the photon branch with qubit 2 at `nu` minus its
/// energy with qubit 2 at the reference, qubit 1 parked at the top.
pub fn stark_oracle(p: &DeviceParams, cfg: &StarkConfig, nu: f64) -> Result<f64> {
    let model = single_excitation_model(p)?;
    stark_oracle_with(&model, cfg, nu)
}

fn stark_oracle_with(model: &QubitFilterModel, cfg: &StarkConfig, nu: f64) -> Result<f64> {
    // with qubit 2 below the band the photon branch is the second-lowest
    // single-excitation state and stays second under adiabatic following
    let e = |x: f64| -> Result<f64> { Ok(eig_hermitian(&model.block_hamiltonian(1, cfg.load.top_nu, x))?.values[1]) };
    Ok(e(nu)? - e(cfg.reference_nu)?)
}

/// Fringe frequency per interaction frequency, reported relative to the
/// reference point, with the static oracle alongside.
pub fn stark_ramsey(p: &DeviceParams, cfg: &StarkConfig, open: &OpenSystem) -> Result<ExperimentResult> {
    cfg.validate(p)?;
    let model = single_excitation_model(p)?;
    let f_max = cfg.artificial_detuning + 2.0 * p.g_f * std::f64::consts::SQRT_2 + 0.1;
    let reference = {
        let y = stark_fringe_with(&model, p, cfg, cfg.reference_nu, open)?;
        fit_sinusoid(&cfg.taus, &y, 0.0, f_max)?.frequency
    };
    let mut fringe = Vec::new();
    let mut oracle = Vec::new();
    let mut residual = Vec::new();
    let mut reliable = Vec::new();
    let mut shift = Vec::new();
    for &nu in &cfg.nu_q2f {
        let y = stark_fringe_with(&model, p, cfg, nu, open)?;
        let fit = fit_sinusoid(&cfg.taus, &y, 0.0, f_max)?;
        fringe.push(fit.frequency);
        shift.push(fit.frequency - reference);
        oracle.push(stark_oracle_with(&model, cfg, nu)?);
        residual.push(fit.relative_residual);
        reliable.push(if fit.relative_residual > FIT_RESIDUAL_LIMIT { 0.0 } else { 1.0 });
    }
    Ok(ExperimentResult {
        parameter: "nu_q2f".into(),
        grid: cfg.nu_q2f.clone(),
        observable: "stark_shift".into(),
        values: shift,
        diagnostics: vec![
            ("fringe_frequency".into(), fringe),
            ("oracle_shift".into(), oracle),
            ("fit_residual".into(), residual),
            ("reliable".into(), reliable),
        ],
        dt: cfg.dt,
        decoherence: open.enabled,
        realizations: open.realizations_used(),
    })
}

/// Mean shift over grid points at least `margin` GHz above the highest mode.
pub fn stark_plateau(p: &DeviceParams, result: &ExperimentResult, margin: f64) -> Result<f64> {
    let (_, high) = filter_band(p);
    let v: Vec<f64> =
        result.grid.iter().zip(&result.values).filter(|(nu, _)| **nu >= high + margin).map(|(_, s)| *s).collect();
    if v.is_empty() {
        return Err(Error::invalid(format!("no grid point {margin} GHz above the band")));
    }
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}
