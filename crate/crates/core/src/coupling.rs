//! Residual qubit–qubit couplings mediated by the filter: closed-form
//! estimates and exact values from diagonalising the full Hamiltonian.

use serde::Serialize;

use crate::device::DeviceParams;
use crate::error::{Error, Result};
use crate::hamiltonian::{filter_normal_modes, QubitFilterModel};
use crate::linalg::eig_hermitian;
use crate::optimize::golden_section;
use crate::state::BasisLabel;

/// Half-width of the window over which qubit 2 is swept in [`numeric_j`].
const J_SWEEP_HALF_WIDTH: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectiveCouplings {
    /// Exchange rate J (GHz).
    pub j: f64,
    /// Controlled-phase rate ξ (GHz), coefficient of σZ⊗σZ.
    pub xi: f64,
    /// Mean qubit detuning from the bare filter frequency (GHz).
    pub delta: f64,
}

/// `Δ = (ν_Q1 + ν_Q2 − 2ν_F)/2`.
pub fn mean_detuning(p: &DeviceParams, nu_q1: f64, nu_q2: f64) -> f64 {
    0.5 * (nu_q1 + nu_q2 - 2.0 * p.nu_f)
}

/// `J ≈ (g_Q²/g_F)(g_F/Δ)^n` with `g_Q` the mean qubit coupling.
pub fn approx_j(p: &DeviceParams, delta: f64) -> Result<f64> {
    if delta == 0.0 || !delta.is_finite() {
        return Err(Error::invalid(format!("detuning must be finite and nonzero, got {delta}")));
    }
    let gq = p.mean_qubit_coupling();
    // written without dividing by g_F so that n = 1 with g_F = 0 is well defined
    Ok(gq * gq * p.g_f.powi(p.n_modes as i32 - 1) / delta.powi(p.n_modes as i32))
}

/// `ξ ≈ 4nJ²/Δ`.
pub fn approx_xi(p: &DeviceParams, delta: f64) -> Result<f64> {
    let j = approx_j(p, delta)?;
    Ok(4.0 * p.n_modes as f64 * j * j / delta)
}

pub fn approx_couplings(p: &DeviceParams, delta: f64) -> Result<EffectiveCouplings> {
    Ok(EffectiveCouplings { j: approx_j(p, delta)?, xi: approx_xi(p, delta)?, delta })
}

/// Gap between the two most qubit-like single-excitation eigenstates.
pub(crate) fn qubit_branch_gap(model: &QubitFilterModel, nu_q1: f64, nu_q2: f64) -> Result<f64> {
    let n = model.params().n_modes;
    let (_, a) = model.block_position(&BasisLabel::qubits_only(1, 0, n)).expect("|eg⟩ in basis");
    let (_, b) = model.block_position(&BasisLabel::qubits_only(0, 1, n)).expect("|ge⟩ in basis");
    let eig = eig_hermitian(&model.block_hamiltonian(1, nu_q1, nu_q2))?;
    let mut weights: Vec<(f64, f64)> = (0..eig.dim())
        .map(|k| {
            let v = eig.vectors.column(k);
            (v[a].norm_sqr() + v[b].norm_sqr(), eig.values[k])
        })
        .collect();
    weights.sort_by(|x, y| y.0.total_cmp(&x.0));
    let (w1, e1) = weights[0];
    let (w2, e2) = weights[1];
    if w2 < 0.5 {
        return Err(Error::BranchTracking(format!(
            "qubit-like weights {w1:.3}, {w2:.3} at ({nu_q1}, {nu_q2}) GHz; too close to the filter band"
        )));
    }
    Ok((e1 - e2).abs())
}

/// Exchange rate from the minimum splitting of the qubit branches as qubit 2
/// is swept through qubit 1 held at `nu_q_center`.
pub fn numeric_j(p: &DeviceParams, nu_q_center: f64) -> Result<f64> {
    numeric_j_sweeping(p, nu_q_center, 1)
}

/// As [`numeric_j`], sweeping qubit `swept` (0 or 1) past the other.
pub(crate) fn numeric_j_sweeping(p: &DeviceParams, nu_q_center: f64, swept: usize) -> Result<f64> {
    let modes = filter_normal_modes(p);
    let (low, high) = (modes[0].frequency, modes[modes.len() - 1].frequency);
    if (low..=high).contains(&nu_q_center) {
        return Err(Error::BranchTracking(format!(
            "center {nu_q_center} GHz lies inside the filter band [{low:.4}, {high:.4}] GHz"
        )));
    }
    let model = QubitFilterModel::with_cap(p, 1)?;
    let lo = nu_q_center - J_SWEEP_HALF_WIDTH;
    let hi = nu_q_center + J_SWEEP_HALF_WIDTH;
    let mut failure = None;
    let (x, gap) = golden_section(
        |nu| {
            let (nu1, nu2) = if swept == 1 { (nu_q_center, nu) } else { (nu, nu_q_center) };
            match qubit_branch_gap(&model, nu1, nu2) {
                Ok(g) => g,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::INFINITY
                }
            }
        },
        lo,
        hi,
        1e-13,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    if (x - lo).abs() < 1e-9 || (hi - x).abs() < 1e-9 {
        return Err(Error::BranchTracking(format!(
            "minimum splitting at the sweep edge {x} GHz; dressed qubits do not cross near {nu_q_center} GHz"
        )));
    }
    Ok(0.5 * gap)
}

/// `ξ = (E_ee + E_gg − E_eg − E_ge)/4` from the dressed states with the
/// largest overlap on each bare computational state.
pub fn numeric_xi(p: &DeviceParams, nu_q1: f64, nu_q2: f64) -> Result<f64> {
    if p.excitation_cap < 2 {
        return Err(Error::invalid("numeric_xi needs excitation_cap >= 2"));
    }
    let model = QubitFilterModel::with_cap(p, 2)?;
    let mut energies = [0.0; 4];
    for (slot, (q1, q2)) in [(0u8, 0u8), (1, 0), (0, 1), (1, 1)].into_iter().enumerate() {
        energies[slot] = dressed_energy(&model, q1, q2, nu_q1, nu_q2)?;
    }
    let [gg, eg, ge, ee] = energies;
    Ok((ee + gg - eg - ge) / 4.0)
}

pub(crate) fn dressed_energy(model: &QubitFilterModel, q1: u8, q2: u8, nu_q1: f64, nu_q2: f64) -> Result<f64> {
    let label = BasisLabel::qubits_only(q1, q2, model.params().n_modes);
    let (block, pos) =
        model.block_position(&label).ok_or_else(|| Error::invalid(format!("{label} is not in the basis")))?;
    let eig = eig_hermitian(&model.block_hamiltonian(block, nu_q1, nu_q2))?;
    let (k, overlap) = (0..eig.dim())
        .map(|k| (k, eig.vectors[(pos, k)].norm_sqr()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty block");
    if overlap < 0.5 {
        return Err(Error::AmbiguousAssignment { label: label.to_string(), overlap });
    }
    Ok(eig.values[k])
}

pub fn numeric_couplings(p: &DeviceParams, nu_q1: f64, nu_q2: f64) -> Result<EffectiveCouplings> {
    Ok(EffectiveCouplings {
        j: numeric_j(p, nu_q1)?,
        xi: numeric_xi(p, nu_q1, nu_q2)?,
        delta: mean_detuning(p, nu_q1, nu_q2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fitted() -> DeviceParams {
        DeviceParams::fitted()
    }

    #[test]
    fn approx_j_single_mode_is_g_squared_over_delta() {
        let p = DeviceParams::single_mode(7.0, 0.1);
        assert!((approx_j(&p, -1.0).unwrap() + 0.01).abs() < 1e-15);
    }

    #[test]
    fn approx_j_cubic_law() {
        let p = fitted();
        let r = approx_j(&p, -0.4).unwrap() / approx_j(&p, -0.8).unwrap();
        assert!((r - 8.0).abs() < 1e-12);
        assert!(approx_j(&p, 0.0).is_err());
    }

    #[test]
    fn uncoupled_qubit_gives_zero_j() {
        let p = DeviceParams { g_q2f: 0.0, ..fitted() };
        assert!(numeric_j(&p, 6.4).unwrap() < 1e-10);
    }

    #[test]
    fn single_mode_j_matches_perturbation() {
        let g = 0.05;
        let p = DeviceParams::single_mode(7.0, g);
        let delta = -10.0 * g;
        let j = numeric_j(&p, 7.0 + delta).unwrap();
        let want = g * g / delta.abs();
        assert!((j / want - 1.0).abs() < 0.02, "{j} vs {want}");
    }

    #[test]
    fn j_scaling_slope_is_cubic() {
        let p = fitted();
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for k in 0..=16 {
            let nu = 6.0 + 0.05 * k as f64;
            let delta = nu - p.nu_f;
            let ratio = delta.abs() / p.g_f;
            if !(4.0..=8.0).contains(&ratio) {
                continue;
            }
            let j = numeric_j(&p, nu).unwrap();
            let approx = approx_j(&p, delta).unwrap().abs();
            assert!(j / approx > 0.5 && j / approx < 2.0, "ratio {} at {nu}", j / approx);
            xs.push(delta.abs().ln());
            ys.push(j.ln());
        }
        let slope = least_squares_slope(&xs, &ys);
        assert!((slope + 3.0).abs() < 0.3, "slope {slope}");
    }

    fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        sxy / sxx
    }

    #[test]
    fn approx_j_at_600_mhz_within_factor_two() {
        let p = fitted();
        let nu = p.nu_f - 0.6;
        let j = numeric_j(&p, nu).unwrap();
        let a = approx_j(&p, -0.6).unwrap().abs();
        assert!(j / a > 0.5 && j / a < 2.0);
    }

    #[test]
    fn approx_converges_far_from_band() {
        let p = fitted().with_two_level_qubits();
        let delta = -20.0 * p.g_f;
        let j = numeric_j(&p, p.nu_f + delta).unwrap();
        let a = approx_j(&p, delta).unwrap().abs();
        assert!((j / a - 1.0).abs() < 0.2, "{}", j / a);
    }

    #[test]
    fn j_symmetric_under_qubit_exchange() {
        let p = DeviceParams { g_q1f: 0.14, g_q2f: 0.14, ..fitted() };
        let a = numeric_j_sweeping(&p, 6.5, 1).unwrap();
        let b = numeric_j_sweeping(&p, 6.5, 0).unwrap();
        assert!((a - b).abs() < 1e-9 * a, "{a} vs {b}");
    }

    #[test]
    fn j_decreases_away_from_band() {
        let p = fitted();
        let js: Vec<f64> = (0..8).map(|k| numeric_j(&p, 6.7 - 0.1 * k as f64).unwrap()).collect();
        assert!(js.windows(2).all(|w| w[1] < w[0]), "{js:?}");
    }

    #[test]
    fn center_inside_band_is_rejected() {
        assert!(matches!(numeric_j(&fitted(), 7.169), Err(Error::BranchTracking(_))));
    }

    #[test]
    fn zero_couplings_give_zero_xi() {
        let p = DeviceParams { g_q1f: 0.0, g_q2f: 0.0, ..fitted() };
        assert_eq!(numeric_xi(&p, 6.4, 6.35).unwrap(), 0.0);
    }

    #[test]
    fn single_mode_xi_matches_fourth_order() {
        // two-level qubits at detunings Δ1, Δ2 from one mode have the ZZ shift
        // E_ee + E_gg − E_eg − E_ge = 2g⁴(1/Δ1 + 1/Δ2)²/(Δ1 + Δ2) = 4ξ
        let g = 0.05;
        let p = DeviceParams { excitation_cap: 2, ..DeviceParams::single_mode(7.0, g) }.with_two_level_qubits();
        let (d1, d2) = (-20.0 * g, -22.0 * g);
        let xi = numeric_xi(&p, 7.0 + d1, 7.0 + d2).unwrap();
        let zz = 2.0 * g.powi(4) * (1.0 / d1 + 1.0 / d2).powi(2) / (d1 + d2);
        assert!((4.0 * xi / zz - 1.0).abs() < 0.05, "{xi} vs {}", zz / 4.0);
        // the closed form 4nJ²/Δ has the size of the full ZZ shift, i.e. 4ξ
        let eq = approx_xi(&p, mean_detuning(&p, 7.0 + d1, 7.0 + d2)).unwrap();
        let ratio = 4.0 * xi / eq;
        assert!(ratio > 1.0 / 3.0 && ratio < 3.0, "{ratio}");
    }

    #[test]
    fn default_device_xi_below_ten_khz() {
        for levels in [2, 3] {
            let p = DeviceParams { qubit_levels: levels, ..fitted() };
            let xi = numeric_xi(&p, 6.4, 6.35).unwrap();
            assert!(xi.abs() < 1e-5, "levels {levels}: {xi}");
        }
    }

    #[test]
    fn xi_inside_band_is_ambiguous() {
        let p = fitted();
        assert!(matches!(numeric_xi(&p, 7.169, 6.3), Err(Error::AmbiguousAssignment { .. })));
    }
}
