//! Charge-basis transmon spectrum and flux tuning of a symmetric SQUID.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::eig_symmetric_real;

const CUTOFF_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmonParams {
    /// Charging energy (GHz).
    pub e_c: f64,
    /// Josephson energy at zero flux (GHz).
    pub e_j_max: f64,
    /// Charge basis runs over `-charge_cutoff..=charge_cutoff`.
    pub charge_cutoff: usize,
    /// Offset charge in units of 2e.
    pub n_g: f64,
}

impl Default for TransmonParams {
    /// Stand-in parameters putting the top of the tuning arc near 9 GHz.
    fn default() -> Self {
        Self { e_c: 0.25, e_j_max: 41.0, charge_cutoff: 20, n_g: 0.5 }
    }
}

impl TransmonParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.e_c > 0.0) {
            return Err(Error::invalid(format!("e_c must be positive, got {}", self.e_c)));
        }
        if !(self.e_j_max > 0.0) {
            return Err(Error::invalid(format!("e_j_max must be positive, got {}", self.e_j_max)));
        }
        if self.charge_cutoff < 10 {
            return Err(Error::invalid(format!("charge_cutoff must be at least 10, got {}", self.charge_cutoff)));
        }
        Ok(())
    }

    /// Symmetric-SQUID Josephson energy `E_J,max·|cos(π·Φ)|`.
    pub fn flux_to_ej(&self, phi: f64) -> f64 {
        self.e_j_max * (PI * phi).cos().abs()
    }

    /// Lowest `k` levels at Josephson energy `e_j`, referenced to the ground state.
    pub fn levels(&self, e_j: f64, k: usize) -> Result<Vec<f64>> {
        transmon_levels(self, e_j, k)
    }

    /// 0→1 transition frequency at flux `phi` (in flux quanta).
    pub fn nu01(&self, phi: f64) -> Result<f64> {
        let l = self.levels(self.flux_to_ej(phi), 2)?;
        Ok(l[1])
    }

    /// `ν12 − ν01` at flux `phi`.
    pub fn anharmonicity(&self, phi: f64) -> Result<f64> {
        let l = self.levels(self.flux_to_ej(phi), 3)?;
        Ok((l[2] - l[1]) - l[1])
    }

    /// Achievable `ν01` band `[ν01(Φ=½), ν01(Φ=0)]`.
    pub fn band(&self) -> Result<(f64, f64)> {
        Ok((self.nu01(0.5)?, self.nu01(0.0)?))
    }

    pub fn frequency_to_flux(&self, target_nu: f64) -> Result<f64> {
        frequency_to_flux(self, target_nu)
    }
}

fn charge_hamiltonian(p: &TransmonParams, e_j: f64, cutoff: usize) -> DMatrix<f64> {
    let n = 2 * cutoff + 1;
    DMatrix::from_fn(n, n, |i, j| {
        let charge = i as f64 - cutoff as f64;
        if i == j {
            4.0 * p.e_c * (charge - p.n_g).powi(2)
        } else if i.abs_diff(j) == 1 {
            -0.5 * e_j
        } else {
            0.0
        }
    })
}

fn raw_levels(p: &TransmonParams, e_j: f64, cutoff: usize) -> Vec<f64> {
    eig_symmetric_real(charge_hamiltonian(p, e_j, cutoff)).0
}

/// Eigenvalues of the tridiagonal charge-basis Hamiltonian
/// `4E_C(n − n_g)²` with hopping `−E_J/2`, ground-referenced, lowest `k`.
///
/// The cutoff is accepted only if raising it by 5 moves the lowest four
/// levels by less than 1e-9 relative.
pub fn transmon_levels(p: &TransmonParams, e_j: f64, k: usize) -> Result<Vec<f64>> {
    p.validate()?;
    if !(e_j >= 0.0) {
        return Err(Error::invalid(format!("e_j must be non-negative, got {e_j}")));
    }
    let size = 2 * p.charge_cutoff + 1;
    if k > size {
        return Err(Error::invalid(format!("requested {k} levels from a {size}-state basis")));
    }
    let coarse = raw_levels(p, e_j, p.charge_cutoff);
    let fine = raw_levels(p, e_j, p.charge_cutoff + 5);
    let change = coarse.iter().zip(&fine).take(4).map(|(a, b)| (a - b).abs() / b.abs().max(p.e_c)).fold(0.0, f64::max);
    if change > CUTOFF_TOL {
        return Err(Error::ChargeCutoff { cutoff: p.charge_cutoff, change });
    }
    let e0 = coarse[0];
    Ok(coarse.into_iter().take(k).map(|e| e - e0).collect())
}

/// Flux in `[0, 0.5]` at which `ν01` equals `target_nu`, by bisection.
pub fn frequency_to_flux(p: &TransmonParams, target_nu: f64) -> Result<f64> {
    let (low, high) = p.band()?;
    if !(target_nu >= low && target_nu <= high) {
        return Err(Error::OutOfBand { target: target_nu, low, high });
    }
    if target_nu == high {
        return Ok(0.0);
    }
    let (mut a, mut b) = (0.0_f64, 0.5_f64);
    for _ in 0..64 {
        let mid = 0.5 * (a + b);
        if p.nu01(mid)? > target_nu {
            a = mid;
        } else {
            b = mid;
        }
        if b - a < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_charge_levels() {
        let p = TransmonParams { n_g: 0.0, ..Default::default() };
        let l = p.levels(0.0, 5).unwrap();
        let ec = p.e_c;
        let expected = [0.0, 4.0 * ec, 4.0 * ec, 16.0 * ec, 16.0 * ec];
        for (a, b) in l.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{l:?}");
        }
    }

    #[test]
    fn transmon_asymptotics() {
        let p = TransmonParams { e_c: 0.25, e_j_max: 12.5, ..Default::default() };
        let l = p.levels(12.5, 3).unwrap();
        let nu01 = l[1];
        let asym = (8.0 * p.e_c * 12.5_f64).sqrt() - p.e_c;
        assert!((nu01 / asym - 1.0).abs() < 0.02, "{nu01} vs {asym}");
        let alpha = (l[2] - l[1]) - l[1];
        assert!(alpha < 0.0);
        assert!((alpha / -p.e_c - 1.0).abs() < 0.15, "alpha = {alpha}");
    }

    #[test]
    fn flux_to_ej_values() {
        let p = TransmonParams::default();
        assert_eq!(p.flux_to_ej(0.0), p.e_j_max);
        assert!(p.flux_to_ej(0.5) < 1e-12);
        assert!((p.flux_to_ej(0.25) - p.e_j_max / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn frequency_to_flux_round_trip() {
        let p = TransmonParams::default();
        assert_eq!(p.frequency_to_flux(p.nu01(0.0).unwrap()).unwrap(), 0.0);
        let phi = p.frequency_to_flux(p.nu01(0.3).unwrap()).unwrap();
        assert!((phi - 0.3).abs() < 1e-6);
        for target in [1.5, 4.0, 6.2, 7.169, 8.5] {
            let phi = p.frequency_to_flux(target).unwrap();
            assert!((p.nu01(phi).unwrap() - target).abs() < 1e-6);
        }
    }

    #[test]
    fn out_of_band_rejected() {
        let p = TransmonParams::default();
        match p.frequency_to_flux(12.0) {
            Err(Error::OutOfBand { high, .. }) => assert!(high < 9.5),
            other => panic!("expected OutOfBand, got {other:?}"),
        }
    }

    #[test]
    fn nu01_strictly_decreasing_and_covers_band() {
        let p = TransmonParams::default();
        let freqs: Vec<f64> = (0..1000).map(|k| p.nu01(0.5 * k as f64 / 1000.0).unwrap()).collect();
        assert!(freqs.windows(2).all(|w| w[1] < w[0]));
        assert!(freqs[0] > 8.5 && freqs[0] < 9.5);
        assert!(*freqs.last().unwrap() < 1.0);
    }

    #[test]
    fn small_cutoff_detected() {
        let p = TransmonParams { e_j_max: 2000.0, e_c: 0.05, charge_cutoff: 10, n_g: 0.5 };
        assert!(matches!(p.levels(2000.0, 3), Err(Error::ChargeCutoff { .. })));
        let bad = TransmonParams { charge_cutoff: 5, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn gate_charge_symmetry() {
        let base = TransmonParams { n_g: 0.2, ..Default::default() };
        let ej = 5.0;
        let a = base.levels(ej, 4).unwrap();
        let b = TransmonParams { n_g: -0.2, ..base }.levels(ej, 4).unwrap();
        let c = TransmonParams { n_g: 1.2, ..base }.levels(ej, 4).unwrap();
        for k in 0..4 {
            assert!((a[k] - b[k]).abs() < 1e-9 * a[3]);
            assert!((a[k] - c[k]).abs() < 1e-9 * a[3]);
        }
    }

    #[test]
    fn cutoff_converged_for_defaults() {
        let p = TransmonParams::default();
        let a = raw_levels(&p, p.e_j_max, p.charge_cutoff);
        let b = raw_levels(&p, p.e_j_max, p.charge_cutoff + 5);
        for k in 0..4 {
            assert!((a[k] - b[k]).abs() < 1e-9 * b[k].abs());
        }
    }
}
