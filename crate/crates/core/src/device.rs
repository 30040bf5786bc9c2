//! Device constants for two qubits coupled through an n-site resonator chain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagate::NoiseModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceParams {
    /// Number of filter resonators.
    pub n_modes: usize,
    /// Bare resonator frequency (GHz).
    pub nu_f: f64,
    /// Nearest-neighbour resonator coupling (GHz).
    pub g_f: f64,
    /// Qubit 1 to first-resonator coupling (GHz).
    pub g_q1f: f64,
    /// Qubit 2 to last-resonator coupling (GHz).
    pub g_q2f: f64,
    /// 2 or 3 levels per qubit.
    pub qubit_levels: u8,
    /// `ν12 − ν01` per qubit (GHz), used when `qubit_levels = 3`.
    pub anharmonicity: [f64; 2],
    /// Maximum photon number per resonator.
    pub photon_cutoff: u8,
    /// Maximum total excitation number kept in the basis.
    pub excitation_cap: usize,
    /// Energy relaxation time per qubit (µs).
    pub t1_us: [f64; 2],
    /// Gaussian Ramsey decay constant per qubit (ns).
    pub ramsey_sigma_ns: [f64; 2],
    /// Largest basis dimension accepted by the builder.
    pub max_basis_dim: usize,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self::fitted()
    }
}

impl DeviceParams {
    /// Fitted three-resonator device: ν_F = 7.169 GHz, g_F = 118 MHz,
    /// g_Q1F = 135 MHz, g_Q2F = 144 MHz, T1 = 2.36/2.14 µs, σ = 312/492 ns.
    ///
    /// The anharmonicity is the charge-basis value of the default
    /// [`TransmonParams`](crate::transmon::TransmonParams) at 6.8 GHz.
    pub fn fitted() -> Self {
        Self {
            n_modes: 3,
            nu_f: 7.169,
            g_f: 0.118,
            g_q1f: 0.135,
            g_q2f: 0.144,
            qubit_levels: 3,
            anharmonicity: [DEFAULT_ANHARMONICITY; 2],
            photon_cutoff: 3,
            excitation_cap: 3,
            t1_us: [2.36, 2.14],
            ramsey_sigma_ns: [312.0, 492.0],
            max_basis_dim: 20_000,
        }
    }

    /// Single-resonator device with equal couplings `g`.
    pub fn single_mode(nu_f: f64, g: f64) -> Self {
        Self { n_modes: 1, nu_f, g_f: 0.0, g_q1f: g, g_q2f: g, ..Self::fitted() }
    }

    pub fn with_two_level_qubits(mut self) -> Self {
        self.qubit_levels = 2;
        self
    }

    pub fn noise(&self) -> NoiseModel {
        NoiseModel { t1_us: self.t1_us, ramsey_sigma_ns: self.ramsey_sigma_ns }
    }

    /// Arithmetic mean of the two qubit–filter couplings.
    pub fn mean_qubit_coupling(&self) -> f64 {
        0.5 * (self.g_q1f + self.g_q2f)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |path: &str, reason: String| Err(Error::Config { path: path.into(), reason });
        if self.n_modes < 1 {
            return fail("device.n_modes", "must be at least 1".into());
        }
        if !(self.nu_f > 0.0) {
            return fail("device.nu_f", format!("must be positive, got {}", self.nu_f));
        }
        for (name, g) in [("g_f", self.g_f), ("g_q1f", self.g_q1f), ("g_q2f", self.g_q2f)] {
            if !(g >= 0.0) {
                return fail(&format!("device.{name}"), format!("must be non-negative, got {g}"));
            }
        }
        if !(2..=3).contains(&self.qubit_levels) {
            return fail("device.qubit_levels", format!("must be 2 or 3, got {}", self.qubit_levels));
        }
        if self.photon_cutoff < 1 {
            return fail("device.photon_cutoff", "must be at least 1".into());
        }
        if self.excitation_cap < 1 {
            return fail("device.excitation_cap", "must be at least 1".into());
        }
        for q in 0..2 {
            if !(self.t1_us[q] > 0.0) {
                return fail("device.t1_us", format!("must be positive, got {}", self.t1_us[q]));
            }
            if !(self.ramsey_sigma_ns[q] > 0.0) {
                return fail("device.ramsey_sigma_ns", format!("must be positive, got {}", self.ramsey_sigma_ns[q]));
            }
        }
        Ok(())
    }
}

/// `ν12 − ν01` of the default transmon at ν01 = 6.8 GHz.
pub const DEFAULT_ANHARMONICITY: f64 = -0.2743;
