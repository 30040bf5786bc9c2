//! Qubit–filter Hamiltonian in the rotating-wave form, with ground-referenced
//! qubit energies: level `m` of qubit k sits at `m·ν_k + α_k·m(m−1)/2`.
//! For two-level qubits this equals `ν σZ/2` up to a constant, so every
//! spectrum difference and conditional phase is unchanged.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::device::DeviceParams;
use crate::error::{Error, Result};
use crate::linalg::{eig_symmetric_real, ensure_hermitian, ComplexMatrix, C64};
use crate::propagate::submatrix;
use crate::state::{Basis, BasisLabel};

/// Hermiticity tolerance applied to constructed Hamiltonians.
pub const HAMILTONIAN_HERMITIAN_TOL: f64 = 1e-12;

/// Precomputed pieces of `H(ν1, ν2) = H_static + ν1·N1 + ν2·N2`.
#[derive(Debug, Clone)]
pub struct QubitFilterModel {
    params: DeviceParams,
    basis: Arc<Basis>,
    static_h: ComplexMatrix,
    static_blocks: Vec<ComplexMatrix>,
    /// Qubit level of each basis element, per qubit.
    levels: [Vec<f64>; 2],
}

impl QubitFilterModel {
    pub fn new(p: &DeviceParams) -> Result<Self> {
        Self::with_cap(p, p.excitation_cap)
    }

    /// Same device with a smaller excitation cap; experiments that never
    /// leave the lowest sectors use this to keep the basis small.
    pub fn with_cap(p: &DeviceParams, cap: usize) -> Result<Self> {
        p.validate()?;
        let cap = cap.min(p.excitation_cap);
        let dim_estimate = estimate_dim(p, cap);
        if dim_estimate > p.max_basis_dim {
            return Err(Error::BasisTooLarge { dim: dim_estimate, limit: p.max_basis_dim });
        }
        let basis = Basis::truncated(p.qubit_levels, p.n_modes, p.photon_cutoff, cap);
        if basis.dim() > p.max_basis_dim {
            return Err(Error::BasisTooLarge { dim: basis.dim(), limit: p.max_basis_dim });
        }
        let static_h = static_hamiltonian(p, &basis);
        ensure_hermitian(&static_h, HAMILTONIAN_HERMITIAN_TOL)?;
        let static_blocks = basis.blocks().iter().map(|idx| submatrix(&static_h, idx)).collect();
        let levels = [0, 1].map(|q| basis.labels().iter().map(|l| l.qubits[q] as f64).collect());
        Ok(Self { params: p.clone(), basis: Arc::new(basis), static_h, static_blocks, levels })
    }

    pub fn params(&self) -> &DeviceParams {
        &self.params
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn hamiltonian(&self, nu_q1: f64, nu_q2: f64) -> ComplexMatrix {
        let mut h = self.static_h.clone();
        for k in 0..self.dim() {
            h[(k, k)] += C64::new(nu_q1 * self.levels[0][k] + nu_q2 * self.levels[1][k], 0.0);
        }
        h
    }

    /// Hamiltonian restricted to the sector with `block` excitations.
    pub fn block_hamiltonian(&self, block: usize, nu_q1: f64, nu_q2: f64) -> ComplexMatrix {
        let idx = &self.basis.blocks()[block];
        let mut h = self.static_blocks[block].clone();
        for (i, &k) in idx.iter().enumerate() {
            h[(i, i)] += C64::new(nu_q1 * self.levels[0][k] + nu_q2 * self.levels[1][k], 0.0);
        }
        h
    }

    /// Position of basis element `label` inside its excitation block.
    pub fn block_position(&self, label: &BasisLabel) -> Option<(usize, usize)> {
        let k = self.basis.index_of(label)?;
        let b = label.excitations();
        let pos = self.basis.blocks()[b].iter().position(|&i| i == k)?;
        Some((b, pos))
    }
}

fn estimate_dim(p: &DeviceParams, cap: usize) -> usize {
    // stars and bars over (2 qubits + n sites) modes, ignoring per-mode limits
    let modes = p.n_modes + 2;
    let mut total: f64 = 0.0;
    for k in 0..=cap {
        let mut c = 1.0;
        for i in 0..k {
            c *= (modes + i) as f64 / (i + 1) as f64;
        }
        total += c;
    }
    total.min(usize::MAX as f64) as usize
}

fn static_hamiltonian(p: &DeviceParams, basis: &Basis) -> ComplexMatrix {
    let dim = basis.dim();
    let n = p.n_modes;
    let mut h = ComplexMatrix::zeros(dim, dim);
    let couple = |h: &mut ComplexMatrix, from: usize, to: &BasisLabel, amp: f64| {
        if let Some(j) = basis.index_of(to) {
            h[(j, from)] += C64::new(amp, 0.0);
            h[(from, j)] += C64::new(amp, 0.0);
        }
    };
    for (k, label) in basis.labels().iter().enumerate() {
        let mut diag = 0.0;
        for q in 0..2 {
            let m = label.qubits[q] as f64;
            diag += p.anharmonicity[q] * m * (m - 1.0) / 2.0;
        }
        diag += p.nu_f * label.photon_count() as f64;
        h[(k, k)] = C64::new(diag, 0.0);

        // hopping g_F a†_i a_{i-1}; the Hermitian partner is added with it
        for i in 1..n {
            let from = label.photons[i - 1];
            if from == 0 {
                continue;
            }
            let mut to = label.clone();
            to.photons[i - 1] -= 1;
            to.photons[i] += 1;
            let amp = p.g_f * (from as f64).sqrt() * (to.photons[i] as f64).sqrt();
            couple(&mut h, k, &to, amp);
        }

        // qubit lowering with photon creation on its end site
        for (q, site, g) in [(0usize, 0usize, p.g_q1f), (1, n - 1, p.g_q2f)] {
            let m = label.qubits[q];
            if m == 0 || g == 0.0 {
                continue;
            }
            let mut to = label.clone();
            to.qubits[q] -= 1;
            to.photons[site] += 1;
            let amp = g * (m as f64).sqrt() * (to.photons[site] as f64).sqrt();
            couple(&mut h, k, &to, amp);
        }
    }
    h
}

/// Full Hamiltonian and basis at fixed qubit frequencies.
pub fn build_hamiltonian(p: &DeviceParams, nu_q1: f64, nu_q2: f64) -> Result<(ComplexMatrix, Arc<Basis>)> {
    if !(nu_q1 > 0.0 && nu_q2 > 0.0) {
        return Err(Error::invalid(format!("qubit frequencies must be positive, got ({nu_q1}, {nu_q2})")));
    }
    let model = QubitFilterModel::new(p)?;
    let h = model.hamiltonian(nu_q1, nu_q2);
    ensure_hermitian(&h, HAMILTONIAN_HERMITIAN_TOL)?;
    Ok((h, model.basis.clone()))
}

/// One normal mode of the resonator chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalMode {
    /// Mode frequency (GHz).
    pub frequency: f64,
    /// Site amplitudes, sign fixed so the first nonzero entry is positive.
    pub amplitudes: Vec<f64>,
    /// Coupling of qubit 1 to this mode (GHz).
    pub g_q1: f64,
    /// Coupling of qubit 2 to this mode (GHz).
    pub g_q2: f64,
}

impl NormalMode {
    pub fn first_site_amplitude(&self) -> f64 {
        self.amplitudes[0]
    }

    pub fn last_site_amplitude(&self) -> f64 {
        *self.amplitudes.last().expect("at least one site")
    }
}

/// Diagonalise the tridiagonal chain; modes ascending in frequency.
pub fn filter_normal_modes(p: &DeviceParams) -> Vec<NormalMode> {
    let n = p.n_modes;
    let chain = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            p.nu_f
        } else if i.abs_diff(j) == 1 {
            p.g_f
        } else {
            0.0
        }
    });
    let (values, vectors) = eig_symmetric_real(chain);
    values
        .into_iter()
        .enumerate()
        .map(|(k, frequency)| {
            let mut amplitudes: Vec<f64> = vectors.column(k).iter().copied().collect();
            if let Some(first) = amplitudes.iter().find(|a| a.abs() > 1e-12) {
                if *first < 0.0 {
                    amplitudes.iter_mut().for_each(|a| *a = -*a);
                }
            }
            NormalMode {
                frequency,
                g_q1: p.g_q1f * amplitudes[0].abs(),
                g_q2: p.g_q2f * amplitudes[n - 1].abs(),
                amplitudes,
            }
        })
        .collect()
}
