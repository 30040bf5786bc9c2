//! Eigenvalue sweeps against one qubit's frequency or flux, avoided-crossing
//! extraction and the exchange-rate scan.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::artifacts::write_csv;
use crate::coupling::{approx_j, numeric_j};
use crate::device::DeviceParams;
use crate::error::{Error, Result};
use crate::hamiltonian::QubitFilterModel;
use crate::linalg::{eig_hermitian, ComplexMatrix};
use crate::transmon::TransmonParams;

/// Frequency of the qubit that is not swept, when none is given.
pub const DEFAULT_OTHER_QUBIT_NU: f64 = 5.0;

/// What the sweep grid parameterises.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepAxis {
    /// `ν01` of `qubit` (0 or 1) in GHz.
    Frequency { qubit: usize },
    /// Flux of `qubit` in flux quanta, converted through its transmon model.
    Flux { qubit: usize, transmon: TransmonParams },
}

impl SweepAxis {
    pub fn qubit(&self) -> usize {
        match *self {
            SweepAxis::Frequency { qubit } | SweepAxis::Flux { qubit, .. } => qubit,
        }
    }

    fn name(&self) -> String {
        match self {
            SweepAxis::Frequency { qubit } => format!("nu_q{}", qubit + 1),
            SweepAxis::Flux { qubit, .. } => format!("flux_q{}", qubit + 1),
        }
    }

    fn frequency(&self, x: f64) -> Result<f64> {
        match self {
            SweepAxis::Frequency { .. } => Ok(x),
            SweepAxis::Flux { transmon, .. } => transmon.nu01(x),
        }
    }
}

/// Eigenvalues along a sweep, with branches tracked by eigenvector overlap.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumTable {
    pub parameter: String,
    pub grid: Vec<f64>,
    /// Swept qubit frequency at each grid point (equals the grid on a frequency axis).
    pub qubit_frequency: Vec<f64>,
    /// `eigenvalues[k][b]`: branch `b` at grid point `k` (GHz).
    pub eigenvalues: Vec<Vec<f64>>,
    /// Probability that the swept qubit is excited in branch `b` at point `k`.
    pub overlaps: Vec<Vec<f64>>,
}

impl SpectrumTable {
    pub fn branch_count(&self) -> usize {
        self.eigenvalues.first().map_or(0, Vec::len)
    }

    pub fn branch(&self, b: usize) -> Vec<f64> {
        self.eigenvalues.iter().map(|row| row[b]).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W, config_hash: Option<&str>) -> Result<()> {
        let nb = self.branch_count();
        let mut header = vec![self.parameter.clone(), "nu_swept".to_string()];
        header.extend((0..nb).map(|b| format!("e{b}")));
        header.extend((0..nb).map(|b| format!("w{b}")));
        let rows: Vec<Vec<f64>> = (0..self.grid.len())
            .map(|k| {
                let mut r = vec![self.grid[k], self.qubit_frequency[k]];
                r.extend(&self.eigenvalues[k]);
                r.extend(&self.overlaps[k]);
                r
            })
            .collect();
        write_csv(out, config_hash, &header, &rows)
    }
}

/// Diagonalise excitation sector `block` along `grid`, with the other qubit
/// parked at `other_nu`.
pub fn eigen_sweep(
    p: &DeviceParams,
    axis: &SweepAxis,
    grid: &[f64],
    block: usize,
    other_nu: f64,
) -> Result<SpectrumTable> {
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("sweep grid must be strictly increasing"));
    }
    if block > p.excitation_cap {
        return Err(Error::invalid(format!("block {block} exceeds the excitation cap {}", p.excitation_cap)));
    }
    let qubit = axis.qubit();
    if qubit > 1 {
        return Err(Error::invalid(format!("qubit index {qubit} must be 0 or 1")));
    }
    let model = QubitFilterModel::with_cap(p, block)?;
    let idx = &model.basis().blocks()[block];
    let excited: Vec<bool> = idx.iter().map(|&k| model.basis().label(k).qubits[qubit] > 0).collect();

    let points: Vec<(f64, Vec<f64>, ComplexMatrix)> = grid
        .par_iter()
        .map(|&x| {
            let nu = axis.frequency(x)?;
            let (nu1, nu2) = if qubit == 0 { (nu, other_nu) } else { (other_nu, nu) };
            let e = eig_hermitian(&model.block_hamiltonian(block, nu1, nu2))?;
            Ok((nu, e.values, e.vectors))
        })
        .collect::<Result<_>>()?;

    let mut table = SpectrumTable {
        parameter: axis.name(),
        grid: grid.to_vec(),
        qubit_frequency: Vec::with_capacity(grid.len()),
        eigenvalues: Vec::with_capacity(grid.len()),
        overlaps: Vec::with_capacity(grid.len()),
    };
    let mut previous: Option<ComplexMatrix> = None;
    for (nu, values, vectors) in points {
        let order = match &previous {
            None => (0..values.len()).collect(),
            Some(prev) => match_branches(prev, &vectors),
        };
        let tracked = ComplexMatrix::from_fn(vectors.nrows(), vectors.ncols(), |i, b| vectors[(i, order[b])]);
        table.qubit_frequency.push(nu);
        table.eigenvalues.push(order.iter().map(|&c| values[c]).collect());
        table.overlaps.push(
            (0..tracked.ncols())
                .map(|b| {
                    tracked
                        .column(b)
                        .iter()
                        .zip(&excited)
                        .filter(|(_, &x)| x)
                        .map(|(a, _)| a.norm_sqr())
                        .sum::<f64>()
                        .min(1.0)
                })
                .collect(),
        );
        previous = Some(tracked);
    }
    Ok(table)
}

/// `order[b]` is the current eigenvector column continuing previous branch `b`,
/// chosen greedily by largest squared overlap.
fn match_branches(prev: &ComplexMatrix, current: &ComplexMatrix) -> Vec<usize> {
    let n = prev.ncols();
    let overlap = prev.adjoint() * current;
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for b in 0..n {
        for c in 0..n {
            pairs.push((overlap[(b, c)].norm_sqr(), b, c));
        }
    }
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut order = vec![usize::MAX; n];
    let mut taken = vec![false; n];
    for (_, b, c) in pairs {
        if order[b] == usize::MAX && !taken[c] {
            order[b] = c;
            taken[c] = true;
        }
    }
    order
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AvoidedCrossing {
    /// Sweep-parameter value of the minimum separation.
    pub location: f64,
    /// Minimum separation (GHz).
    pub gap: f64,
}

/// Minimum separation of branches `pair` with a parabolic refinement of the
/// squared separation around the smallest sampled value.
pub fn find_avoided_crossing(table: &SpectrumTable, pair: (usize, usize)) -> Result<AvoidedCrossing> {
    let nb = table.branch_count();
    if pair.0 >= nb || pair.1 >= nb || pair.0 == pair.1 {
        return Err(Error::invalid(format!("branch pair {pair:?} invalid for {nb} branches")));
    }
    let sq: Vec<f64> = table.eigenvalues.iter().map(|r| (r[pair.0] - r[pair.1]).powi(2)).collect();
    let k = sq
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .ok_or_else(|| Error::invalid("empty spectrum table"))?;
    if k == 0 || k + 1 == sq.len() {
        return Err(Error::GridEdge { index: k });
    }
    let (x0, x1, x2) = (table.grid[k - 1], table.grid[k], table.grid[k + 1]);
    let (y0, y1, y2) = (sq[k - 1], sq[k], sq[k + 1]);
    // Lagrange parabola through the three points
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    if !(a > 0.0) {
        return Ok(AvoidedCrossing { location: x1, gap: y1.sqrt() });
    }
    let b = d01 - a * (x0 + x1);
    let xv = (-b / (2.0 * a)).clamp(x0, x2);
    let yv = y1 + (xv - x1) * (d01 + a * (xv - x0));
    Ok(AvoidedCrossing { location: xv, gap: yv.max(0.0).sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExchangeRow {
    /// Qubit 1 frequency held while qubit 2 sweeps through it (GHz).
    pub center: f64,
    /// Detuning from the bare filter frequency (GHz).
    pub delta: f64,
    pub j_numeric: f64,
    /// `|J|` from the closed-form multimode estimate.
    pub j_multimode: f64,
    /// Single-mode reference `g_Q²/|Δ|`.
    pub j_single_mode: f64,
}

/// Exchange rate versus detuning, with both reference laws.
pub fn exchange_scan(p: &DeviceParams, centers: &[f64]) -> Result<Vec<ExchangeRow>> {
    let gq = p.mean_qubit_coupling();
    centers
        .par_iter()
        .map(|&c| {
            let delta = c - p.nu_f;
            Ok(ExchangeRow {
                center: c,
                delta,
                j_numeric: numeric_j(p, c)?,
                j_multimode: approx_j(p, delta)?.abs(),
                j_single_mode: gq * gq / delta.abs(),
            })
        })
        .collect()
}

pub fn write_exchange_csv<W: Write>(rows: &[ExchangeRow], out: W, config_hash: Option<&str>) -> Result<()> {
    let header: Vec<String> =
        ["center", "delta", "j_numeric", "j_multimode", "j_single_mode"].iter().map(|s| s.to_string()).collect();
    let data: Vec<Vec<f64>> =
        rows.iter().map(|r| vec![r.center, r.delta, r.j_numeric, r.j_multimode, r.j_single_mode]).collect();
    write_csv(out, config_hash, &header, &data)
}

/// `n` evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::filter_normal_modes;

    fn freq(q: usize) -> SweepAxis {
        SweepAxis::Frequency { qubit: q }
    }

    #[test]
    fn zero_coupling_gives_straight_lines() {
        let p = DeviceParams { g_q1f: 0.0, g_q2f: 0.0, excitation_cap: 1, ..DeviceParams::fitted() };
        let grid = linspace(6.61, 7.71, 111);
        let t = eigen_sweep(&p, &freq(0), &grid, 1, 5.0).unwrap();
        // the branch that starts as the bare qubit stays on the diagonal line
        let b = (0..t.branch_count()).find(|&b| t.overlaps[0][b] > 0.99).unwrap();
        for (k, x) in grid.iter().enumerate() {
            assert!((t.eigenvalues[k][b] - x).abs() < 1e-12);
            assert!((t.overlaps[k][b] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_mode_resonance_gap_is_two_g() {
        let g = 0.05;
        let p = DeviceParams { excitation_cap: 1, g_q2f: 0.0, ..DeviceParams::single_mode(7.0, g) };
        let t = eigen_sweep(&p, &freq(0), &linspace(6.8, 7.2, 41), 1, 5.0).unwrap();
        let c = find_avoided_crossing(&t, (1, 2)).unwrap();
        assert!((c.gap - 2.0 * g).abs() < 1e-6, "{}", c.gap);
        assert!((c.location - 7.0).abs() < 1e-6);
    }

    #[test]
    fn two_by_two_gap_exact() {
        let j = 0.003;
        let grid = linspace(-0.1, 0.13, 24);
        let eigenvalues = grid
            .iter()
            .map(|&x: &f64| {
                let r = (x * x / 4.0 + j * j).sqrt();
                vec![-r, r]
            })
            .collect();
        let t = SpectrumTable {
            parameter: "x".into(),
            qubit_frequency: grid.clone(),
            overlaps: vec![vec![0.5, 0.5]; grid.len()],
            grid,
            eigenvalues,
        };
        let c = find_avoided_crossing(&t, (0, 1)).unwrap();
        assert!((c.gap - 2.0 * j).abs() < 1e-9);
        assert!(c.location.abs() < 1e-9);
    }

    #[test]
    fn exact_crossing_has_zero_gap() {
        let grid = linspace(-1.0, 1.0, 21);
        let t = SpectrumTable {
            parameter: "x".into(),
            qubit_frequency: grid.clone(),
            overlaps: vec![vec![1.0, 0.0]; grid.len()],
            eigenvalues: grid.iter().map(|&x| vec![x, -x]).collect(),
            grid,
        };
        let c = find_avoided_crossing(&t, (0, 1)).unwrap();
        assert!(c.gap < 1e-12);
        assert!(c.location.abs() < 1e-12);
    }

    #[test]
    fn edge_minimum_rejected() {
        let p = DeviceParams { excitation_cap: 1, ..DeviceParams::single_mode(7.0, 0.05) };
        let t = eigen_sweep(&p, &freq(0), &linspace(7.0, 7.3, 11), 1, 5.0).unwrap();
        assert!(matches!(find_avoided_crossing(&t, (1, 2)), Err(Error::GridEdge { index: 0 })));
    }

    #[test]
    fn weak_coupling_gaps_are_twice_mode_couplings() {
        // crossings are isolated once the couplings are small against the mode spacing
        let p = DeviceParams { g_q1f: 0.02, g_q2f: 0.0, excitation_cap: 1, ..DeviceParams::fitted() };
        let modes = filter_normal_modes(&p);
        let t = eigen_sweep(&p, &freq(0), &linspace(6.6, 7.7, 1101), 1, 5.0).unwrap();
        let sorted: Vec<Vec<f64>> = t
            .eigenvalues
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.sort_by(f64::total_cmp);
                r
            })
            .collect();
        let adiabatic = SpectrumTable { eigenvalues: sorted, ..t };
        for (i, m) in modes.iter().enumerate() {
            let c = find_avoided_crossing(&adiabatic, (i + 1, i + 2)).unwrap();
            assert!((c.gap / (2.0 * m.g_q1) - 1.0).abs() < 0.02, "mode {i}: {c:?} vs {}", m.g_q1);
        }
    }

    #[test]
    fn default_device_shows_three_qubit_mode_crossings() {
        let p = DeviceParams { excitation_cap: 1, ..DeviceParams::fitted() };
        let t = eigen_sweep(&p, &freq(0), &linspace(6.6, 7.7, 1101), 1, 5.0).unwrap();
        // adiabatic levels above the parked qubit 2: the qubit-1 weight hops
        // between them at three local separation minima
        let mut levels: Vec<Vec<f64>> = t.eigenvalues.clone();
        levels.iter_mut().for_each(|r| r.sort_by(f64::total_cmp));
        let adiabatic = SpectrumTable { eigenvalues: levels, ..t };
        let modes = filter_normal_modes(&p);
        for (i, mode) in modes.iter().enumerate() {
            let c = find_avoided_crossing(&adiabatic, (i + 1, i + 2)).unwrap();
            assert!(c.gap > 0.08 && c.gap < 2.0 * mode.g_q1 * 1.02, "{c:?}");
            assert!((c.location - mode.frequency).abs() < 0.1);
        }
    }

    #[test]
    fn qubit_qubit_gap_matches_numeric_j() {
        let p = DeviceParams { excitation_cap: 1, ..DeviceParams::fitted() };
        let center = 6.5;
        let j = numeric_j(&p, center).unwrap();
        let t = eigen_sweep(&p, &freq(1), &linspace(6.45, 6.55, 101), 1, center).unwrap();
        let c = find_avoided_crossing(&t, (0, 1)).unwrap();
        assert!((c.gap / (2.0 * j) - 1.0).abs() < 0.01, "{} vs {}", c.gap, 2.0 * j);
        let fine = eigen_sweep(&p, &freq(1), &linspace(6.45, 6.55, 201), 1, center).unwrap();
        let c2 = find_avoided_crossing(&fine, (0, 1)).unwrap();
        assert!((c2.gap / c.gap - 1.0).abs() < 0.005);
    }

    #[test]
    fn branches_are_continuous() {
        let p = DeviceParams { excitation_cap: 1, ..DeviceParams::fitted() };
        let grid = linspace(6.6, 7.7, 221);
        let t = eigen_sweep(&p, &freq(0), &grid, 1, 5.0).unwrap();
        let step = grid[1] - grid[0];
        for b in 0..t.branch_count() {
            let e = t.branch(b);
            assert!(e.windows(2).all(|w| (w[1] - w[0]).abs() < 10.0 * step), "branch {b}");
        }
        for row in &t.overlaps {
            assert!(row.iter().all(|&w| (0.0..=1.0).contains(&w)));
        }
    }

    #[test]
    fn flux_axis_uses_transmon_frequency() {
        let tr = TransmonParams::default();
        let p = DeviceParams { excitation_cap: 1, ..DeviceParams::fitted() };
        let grid = linspace(0.1, 0.2, 5);
        let t = eigen_sweep(&p, &SweepAxis::Flux { qubit: 0, transmon: tr }, &grid, 1, 5.0).unwrap();
        for (x, nu) in grid.iter().zip(&t.qubit_frequency) {
            assert!((tr.nu01(*x).unwrap() - nu).abs() < 1e-12);
        }
        assert_eq!(t.parameter, "flux_q1");
    }

    #[test]
    fn exchange_scan_single_mode_law() {
        let g = 0.05;
        let p = DeviceParams::single_mode(7.0, g);
        let rows = exchange_scan(&p, &[6.5, 6.0, 5.5]).unwrap();
        for r in rows {
            assert!((r.j_numeric / r.j_single_mode - 1.0).abs() < 0.02, "{r:?}");
        }
        assert!(exchange_scan(&p, &[]).unwrap().is_empty());
    }

    #[test]
    fn spectrum_csv_layout() {
        let p = DeviceParams { excitation_cap: 1, ..DeviceParams::single_mode(7.0, 0.05) };
        let t = eigen_sweep(&p, &freq(0), &[6.0, 6.5], 1, 5.0).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf, Some("h")).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# config_hash: h");
        assert_eq!(lines[1], "nu_q1,nu_swept,e0,e1,e2,w0,w1,w2");
        assert_eq!(lines.len(), 4);
    }
}
