//! Time evolution by midpoint exponentiation.
//!
//! Each step samples `H` at the step midpoint, diagonalises it and applies
//! `exp(-2πi·H·dt)` exactly, so every step is unitary to round-off.
//! Intervals on which `H` is constant are exponentiated in one shot.

use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, ComplexMatrix, HermitianEigen, C64, ZERO};
use crate::state::{Basis, LabeledState};

/// Default time step (ns).
pub const DEFAULT_DT: f64 = 0.01;

/// Norm drift beyond which propagation is treated as failed.
pub const NORM_DRIFT_LIMIT: f64 = 1e-6;

/// A Hamiltonian `H(t)` in GHz.
pub trait TimeDependentHamiltonian: Sync {
    fn at(&self, t: f64) -> ComplexMatrix;

    /// Invariant subspaces (index sets) on which `H` is block diagonal.
    fn blocks(&self) -> Option<&[Vec<usize>]> {
        None
    }

    fn block_at(&self, block: usize, t: f64) -> ComplexMatrix {
        let idx = &self.blocks().expect("block_at requires blocks()")[block];
        submatrix(&self.at(t), idx)
    }

    /// Times at which the piecewise structure of `H` changes.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Whether `H` is constant on `[t0, t1]`.
    fn is_constant_on(&self, _t0: f64, _t1: f64) -> bool {
        false
    }
}

impl<F> TimeDependentHamiltonian for F
where
    F: Fn(f64) -> ComplexMatrix + Sync,
{
    fn at(&self, t: f64) -> ComplexMatrix {
        self(t)
    }
}

/// A qubit system whose Hamiltonian accepts static per-qubit detunings; used
/// for quasi-static noise averaging and amplitude damping.
pub trait NoisySystem: Sync {
    fn basis(&self) -> &Basis;
    fn block_hamiltonian(&self, block: usize, t: f64, detuning: [f64; 2]) -> ComplexMatrix;
    fn breakpoints(&self) -> Vec<f64>;
    fn is_constant_on(&self, t0: f64, t1: f64) -> bool;
}

/// A [`NoisySystem`] viewed as a closed Hamiltonian at a fixed detuning.
pub struct Detuned<'a, S: NoisySystem + ?Sized> {
    pub system: &'a S,
    pub detuning: [f64; 2],
}

impl<S: NoisySystem + ?Sized> TimeDependentHamiltonian for Detuned<'_, S> {
    fn at(&self, t: f64) -> ComplexMatrix {
        let basis = self.system.basis();
        let mut full = ComplexMatrix::zeros(basis.dim(), basis.dim());
        for (b, idx) in basis.blocks().iter().enumerate() {
            let h = self.system.block_hamiltonian(b, t, self.detuning);
            scatter_block(&mut full, idx, &h);
        }
        full
    }

    fn blocks(&self) -> Option<&[Vec<usize>]> {
        Some(self.system.basis().blocks())
    }

    fn block_at(&self, block: usize, t: f64) -> ComplexMatrix {
        self.system.block_hamiltonian(block, t, self.detuning)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.system.breakpoints()
    }

    fn is_constant_on(&self, t0: f64, t1: f64) -> bool {
        self.system.is_constant_on(t0, t1)
    }
}

pub(crate) fn submatrix(m: &ComplexMatrix, idx: &[usize]) -> ComplexMatrix {
    ComplexMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

fn scatter_block(full: &mut ComplexMatrix, idx: &[usize], block: &ComplexMatrix) {
    for (i, &r) in idx.iter().enumerate() {
        for (j, &c) in idx.iter().enumerate() {
            full[(r, c)] = block[(i, j)];
        }
    }
}

/// Split `[t0, t1]` at breakpoints.
fn intervals(breaks: Vec<f64>, t0: f64, t1: f64) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = breaks.into_iter().filter(|&b| b > t0 + 1e-12 && b < t1 - 1e-12).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut start = t0;
    for c in cuts {
        out.push((start, c));
        start = c;
    }
    out.push((start, t1));
    out
}

/// Blocks with any nonzero row in `m`.
fn active_blocks(blocks: &[Vec<usize>], m: &ComplexMatrix) -> Vec<usize> {
    blocks
        .iter()
        .enumerate()
        .filter(|(_, idx)| idx.iter().any(|&r| m.row(r).iter().any(|z| *z != ZERO)))
        .map(|(b, _)| b)
        .collect()
}

/// One exponentiated block: indices plus the block propagator.
struct BlockStep {
    indices: Vec<usize>,
    unitary: ComplexMatrix,
}

fn block_steps<H: TimeDependentHamiltonian + ?Sized>(
    h: &H,
    blocks: &[Vec<usize>],
    active: &[usize],
    t_mid: f64,
    dt: f64,
) -> Result<Vec<BlockStep>> {
    active
        .iter()
        .map(|&b| {
            let hb = if h.blocks().is_some() { h.block_at(b, t_mid) } else { h.at(t_mid) };
            let eig: HermitianEigen = eig_hermitian(&hb)?;
            Ok(BlockStep { indices: blocks[b].clone(), unitary: eig.evolution(dt) })
        })
        .collect()
}

/// `m ← U m` restricted to the rows of each block.
fn apply_left(steps: &[BlockStep], m: &mut ComplexMatrix) {
    for s in steps {
        let sub = ComplexMatrix::from_fn(s.indices.len(), m.ncols(), |i, j| m[(s.indices[i], j)]);
        let out = &s.unitary * sub;
        for (i, &r) in s.indices.iter().enumerate() {
            for j in 0..m.ncols() {
                m[(r, j)] = out[(i, j)];
            }
        }
    }
}

/// `ρ ← U ρ U†` for a block-diagonal `U` given by `steps`.
fn apply_conjugation(steps: &[BlockStep], dim: usize, rho: &mut ComplexMatrix) {
    let mut u = ComplexMatrix::zeros(dim, dim);
    let mut covered = vec![false; dim];
    for s in steps {
        scatter_block(&mut u, &s.indices, &s.unitary);
        for &i in &s.indices {
            covered[i] = true;
        }
    }
    // inactive blocks carry no population; identity keeps them untouched
    for (i, c) in covered.iter().enumerate() {
        if !c {
            u[(i, i)] = C64::new(1.0, 0.0);
        }
    }
    let tmp = &u * &*rho;
    *rho = tmp * u.adjoint();
}

fn step_count(len: f64, dt: f64) -> usize {
    ((len / dt) - 1e-9).ceil().max(1.0) as usize
}

/// Evolve every column of `cols` (rows indexed by the full basis) over
/// `t_span`. A column can be a state vector or a column of a propagator.
pub fn evolve_columns<H: TimeDependentHamiltonian + ?Sized>(
    h: &H,
    cols: &mut ComplexMatrix,
    t_span: (f64, f64),
    dt: f64,
) -> Result<()> {
    let (t0, t1) = t_span;
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    if t1 < t0 {
        return Err(Error::invalid(format!("t_span ({t0}, {t1}) is reversed")));
    }
    if t1 - t0 < 1e-12 {
        return Ok(());
    }
    let dim = cols.nrows();
    let whole = [(0..dim).collect::<Vec<_>>()];
    let blocks: &[Vec<usize>] = h.blocks().unwrap_or(&whole);
    let norms0: Vec<f64> = cols.column_iter().map(|c| c.norm()).collect();
    let active = active_blocks(blocks, cols);

    for (a, b) in intervals(h.breakpoints(), t0, t1) {
        if h.is_constant_on(a, b) {
            let steps = block_steps(h, blocks, &active, 0.5 * (a + b), b - a)?;
            apply_left(&steps, cols);
            continue;
        }
        let n = step_count(b - a, dt);
        let step = (b - a) / n as f64;
        for k in 0..n {
            let t_mid = a + (k as f64 + 0.5) * step;
            let steps = block_steps(h, blocks, &active, t_mid, step)?;
            apply_left(&steps, cols);
        }
    }

    for (c, n0) in cols.column_iter().zip(norms0) {
        let drift = (c.norm() - n0).abs();
        if drift > NORM_DRIFT_LIMIT {
            return Err(Error::NormDrift { drift });
        }
    }
    Ok(())
}

/// Closed-system propagation of a labelled state from `t_span.0` to `t_span.1`.
pub fn propagate<H: TimeDependentHamiltonian + ?Sized>(
    h: &H,
    psi0: &LabeledState,
    t_span: (f64, f64),
    dt: f64,
) -> Result<LabeledState> {
    let mut cols = ComplexMatrix::from_column_slice(psi0.amplitudes.len(), 1, psi0.amplitudes.as_slice());
    evolve_columns(h, &mut cols, t_span, dt)?;
    LabeledState::new(cols.column(0).into_owned(), psi0.basis.clone())
}

/// Full propagator `U(t1, t0)` as a dense matrix.
pub fn propagator<H: TimeDependentHamiltonian + ?Sized>(
    h: &H,
    dim: usize,
    t_span: (f64, f64),
    dt: f64,
) -> Result<ComplexMatrix> {
    let mut u = ComplexMatrix::identity(dim, dim);
    evolve_columns(h, &mut u, t_span, dt)?;
    Ok(u)
}

/// Per-qubit decoherence parameters. `f64::INFINITY` disables a channel.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NoiseModel {
    /// Energy relaxation time per qubit (µs).
    pub t1_us: [f64; 2],
    /// Gaussian Ramsey decay constant per qubit (ns), `exp(-t²/2σ²)`.
    pub ramsey_sigma_ns: [f64; 2],
}

impl NoiseModel {
    pub fn ideal() -> Self {
        Self { t1_us: [f64::INFINITY; 2], ramsey_sigma_ns: [f64::INFINITY; 2] }
    }

    pub fn has_dephasing(&self) -> bool {
        self.ramsey_sigma_ns.iter().any(|s| s.is_finite())
    }

    pub fn has_damping(&self) -> bool {
        self.t1_us.iter().any(|t| t.is_finite())
    }

    /// Standard deviation (GHz) of the quasi-static detuning of each qubit.
    /// A Gaussian detuning of std `s` gives a Ramsey envelope
    /// `exp(-(2π s t)²/2)`, so `s = 1/(2πσ)`.
    pub fn detuning_std(&self) -> [f64; 2] {
        self.ramsey_sigma_ns.map(|s| if s.is_finite() { 1.0 / (TAU * s) } else { 0.0 })
    }
}

/// Latin-hypercube Gaussian detunings, one row per realization.
pub fn sample_detunings(noise: &NoiseModel, realizations: usize, seed: u64) -> Vec<[f64; 2]> {
    let std = noise.detuning_std();
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = vec![[0.0; 2]; realizations];
    for q in 0..2 {
        let mut strata: Vec<usize> = (0..realizations).collect();
        strata.shuffle(&mut rng);
        for (r, row) in rows.iter_mut().enumerate() {
            let u = (strata[r] as f64 + rng.random::<f64>()) / realizations as f64;
            let u = u.clamp(1e-12, 1.0 - 1e-12);
            row[q] = std[q] * unit.inverse_cdf(u);
        }
    }
    rows
}

/// Amplitude-damping Kraus maps for one qubit over one step.
struct DampingChannel {
    /// For each jump count k: (source, destination, coefficient).
    terms: Vec<Vec<(usize, usize, f64)>>,
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl DampingChannel {
    /// Exact ladder damping over `dt` with survival `η = exp(-dt/T1)`:
    /// `K_k|m⟩ = √C(m,k) (1-η)^{k/2} η^{(m-k)/2} |m-k⟩`.
    fn new(basis: &Basis, qubit: usize, dt_ns: f64, t1_us: f64) -> Self {
        let eta = (-dt_ns / (t1_us * 1000.0)).exp();
        let levels = basis.qubit_levels() as u32;
        let mut terms = vec![Vec::new(); levels as usize];
        for (src, label) in basis.labels().iter().enumerate() {
            let m = label.qubits[qubit] as u32;
            for k in 0..=m {
                let mut lowered = label.clone();
                lowered.qubits[qubit] = (m - k) as u8;
                let Some(dst) = basis.index_of(&lowered) else { continue };
                let c = (binomial(m, k) * (1.0 - eta).powi(k as i32) * eta.powi((m - k) as i32)).sqrt();
                terms[k as usize].push((src, dst, c));
            }
        }
        Self { terms }
    }

    fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(rho.nrows(), rho.ncols());
        for terms in &self.terms {
            for &(sa, da, ca) in terms {
                for &(sb, db, cb) in terms {
                    let v = rho[(sa, sb)];
                    if v != ZERO {
                        out[(da, db)] += v * (ca * cb);
                    }
                }
            }
        }
        out
    }
}

fn evolve_density<S: NoisySystem + ?Sized>(
    system: &S,
    rho: &mut ComplexMatrix,
    detuning: [f64; 2],
    noise: &NoiseModel,
    t_span: (f64, f64),
    dt: f64,
) -> Result<()> {
    let (t0, t1) = t_span;
    if t1 - t0 < 1e-12 {
        return Ok(());
    }
    let h = Detuned { system, detuning };
    let basis = system.basis();
    let blocks = basis.blocks();
    let dim = basis.dim();

    for (a, b) in intervals(system.breakpoints(), t0, t1) {
        let n = step_count(b - a, dt);
        let step = (b - a) / n as f64;
        let channels: Vec<DampingChannel> = (0..2)
            .filter(|&q| noise.t1_us[q].is_finite())
            .map(|q| DampingChannel::new(basis, q, step, noise.t1_us[q]))
            .collect();
        let constant = system.is_constant_on(a, b);
        if channels.is_empty() && constant {
            let active = active_blocks(blocks, rho);
            let steps = block_steps(&h, blocks, &active, 0.5 * (a + b), b - a)?;
            apply_conjugation(&steps, dim, rho);
            continue;
        }
        let mut cached: Option<(Vec<usize>, Vec<BlockStep>)> = None;
        for k in 0..n {
            let active = active_blocks(blocks, rho);
            let reuse = constant && cached.as_ref().is_some_and(|(prev, _)| *prev == active);
            if !reuse {
                let t_mid = a + (k as f64 + 0.5) * step;
                let steps = block_steps(&h, blocks, &active, t_mid, step)?;
                cached = Some((active, steps));
            }
            let (_, steps) = cached.as_ref().expect("step cache filled above");
            apply_conjugation(steps, dim, rho);
            for ch in &channels {
                *rho = ch.apply(rho);
            }
        }
    }
    Ok(())
}

/// Density-matrix evolution with per-qubit amplitude damping (first-order
/// splitting after each unitary step) and quasi-static Gaussian detunings
/// averaged over `realizations`.
pub fn propagate_open<S: NoisySystem + ?Sized>(
    system: &S,
    rho0: &ComplexMatrix,
    noise: &NoiseModel,
    realizations: usize,
    seed: u64,
    t_span: (f64, f64),
    dt: f64,
) -> Result<ComplexMatrix> {
    propagate_open_with_events(system, rho0, noise, realizations, seed, t_span, dt, &[])
}

/// An instantaneous unitary applied to the full state at `time`.
#[derive(Debug, Clone)]
pub struct UnitaryEvent {
    pub time: f64,
    pub unitary: ComplexMatrix,
}

/// As [`propagate_open`], with instantaneous unitaries interleaved at their
/// times. Each noise realization keeps its detuning across the events.
#[allow(clippy::too_many_arguments)]
pub fn propagate_open_with_events<S: NoisySystem + ?Sized>(
    system: &S,
    rho0: &ComplexMatrix,
    noise: &NoiseModel,
    realizations: usize,
    seed: u64,
    t_span: (f64, f64),
    dt: f64,
    events: &[UnitaryEvent],
) -> Result<ComplexMatrix> {
    if realizations == 0 {
        return Err(Error::invalid("realizations must be at least 1"));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    let dim = system.basis().dim();
    if rho0.shape() != (dim, dim) {
        return Err(Error::Dimension(format!(
            "density matrix is {}x{}, basis has dimension {dim}",
            rho0.nrows(),
            rho0.ncols()
        )));
    }
    let events = sorted_events(events, t_span, dim)?;
    let detunings = if noise.has_dephasing() { sample_detunings(noise, realizations, seed) } else { vec![[0.0; 2]] };
    let results: Vec<Result<ComplexMatrix>> = detunings
        .par_iter()
        .map(|&d| {
            let mut rho = rho0.clone();
            let mut t = t_span.0;
            for ev in &events {
                evolve_density(system, &mut rho, d, noise, (t, ev.time), dt)?;
                rho = &ev.unitary * &rho * ev.unitary.adjoint();
                t = ev.time;
            }
            evolve_density(system, &mut rho, d, noise, (t, t_span.1), dt)?;
            Ok(rho)
        })
        .collect();
    let mut sum = ComplexMatrix::zeros(dim, dim);
    for r in results {
        sum += r?;
    }
    let avg = sum / C64::new(detunings.len() as f64, 0.0);
    let drift = (avg.trace() - rho0.trace()).norm();
    if drift > NORM_DRIFT_LIMIT {
        return Err(Error::NormDrift { drift });
    }
    Ok(avg)
}

/// Closed-system evolution of the columns of `cols` with events interleaved.
pub fn evolve_columns_with_events<H: TimeDependentHamiltonian + ?Sized>(
    h: &H,
    cols: &mut ComplexMatrix,
    t_span: (f64, f64),
    dt: f64,
    events: &[UnitaryEvent],
) -> Result<()> {
    let events = sorted_events(events, t_span, cols.nrows())?;
    let mut t = t_span.0;
    for ev in &events {
        evolve_columns(h, cols, (t, ev.time), dt)?;
        *cols = &ev.unitary * &*cols;
        t = ev.time;
    }
    evolve_columns(h, cols, (t, t_span.1), dt)
}

fn sorted_events(events: &[UnitaryEvent], t_span: (f64, f64), dim: usize) -> Result<Vec<UnitaryEvent>> {
    let mut events = events.to_vec();
    for ev in &events {
        if ev.time < t_span.0 - 1e-12 || ev.time > t_span.1 + 1e-12 {
            return Err(Error::invalid(format!("event at {} ns outside ({}, {})", ev.time, t_span.0, t_span.1)));
        }
        if ev.unitary.shape() != (dim, dim) {
            return Err(Error::Dimension(format!("event unitary is not {dim}x{dim}")));
        }
    }
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    for ev in &mut events {
        ev.time = ev.time.clamp(t_span.0, t_span.1);
    }
    Ok(events)
}
