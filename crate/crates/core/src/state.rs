//! Truncated tensor-product basis for two qubits and an n-site filter, and
//! state vectors labelled by that basis.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{ComplexVector, C64, ZERO};

/// Occupation label of one basis element: qubit levels then photon numbers
/// per filter site (site 1 first).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct BasisLabel {
    pub qubits: [u8; 2],
    pub photons: Vec<u8>,
}

impl BasisLabel {
    pub fn new(q1: u8, q2: u8, photons: Vec<u8>) -> Self {
        Self { qubits: [q1, q2], photons }
    }

    /// Both qubits in the given levels with the filter empty.
    pub fn qubits_only(q1: u8, q2: u8, n_sites: usize) -> Self {
        Self::new(q1, q2, vec![0; n_sites])
    }

    pub fn excitations(&self) -> usize {
        self.qubits.iter().map(|&q| q as usize).sum::<usize>() + self.photons.iter().map(|&n| n as usize).sum::<usize>()
    }

    pub fn photon_count(&self) -> usize {
        self.photons.iter().map(|&n| n as usize).sum()
    }
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = |q: u8| match q {
            0 => 'g',
            1 => 'e',
            2 => 'f',
            _ => '?',
        };
        write!(f, "|{}{};", level(self.qubits[0]), level(self.qubits[1]))?;
        for n in &self.photons {
            write!(f, "{n}")?;
        }
        write!(f, "⟩")
    }
}

#[derive(Debug, Clone)]
pub struct Basis {
    labels: Vec<BasisLabel>,
    index: HashMap<BasisLabel, usize>,
    blocks: Vec<Vec<usize>>,
    n_sites: usize,
    qubit_levels: u8,
}

impl Basis {
    /// Tensor basis `qubit1 ⊗ qubit2 ⊗ site1 ⊗ … ⊗ site_n` in lexicographic
    /// order, keeping elements whose total excitation number is at most `cap`.
    pub fn truncated(qubit_levels: u8, n_sites: usize, photon_cutoff: u8, cap: usize) -> Self {
        let mut labels = Vec::new();
        let mut photons = vec![0u8; n_sites];
        for q1 in 0..qubit_levels {
            for q2 in 0..qubit_levels {
                photons.iter_mut().for_each(|n| *n = 0);
                loop {
                    let label = BasisLabel::new(q1, q2, photons.clone());
                    if label.excitations() <= cap {
                        labels.push(label);
                    }
                    // odometer increment, last site fastest
                    let mut site = n_sites;
                    loop {
                        if site == 0 {
                            break;
                        }
                        site -= 1;
                        if photons[site] < photon_cutoff {
                            photons[site] += 1;
                            break;
                        }
                        photons[site] = 0;
                    }
                    if photons.iter().all(|&n| n == 0) {
                        break;
                    }
                }
            }
        }
        Self::from_labels(labels, n_sites, qubit_levels)
    }

    fn from_labels(labels: Vec<BasisLabel>, n_sites: usize, qubit_levels: u8) -> Self {
        let index = labels.iter().cloned().enumerate().map(|(k, l)| (l, k)).collect();
        let max_exc = labels.iter().map(BasisLabel::excitations).max().unwrap_or(0);
        let mut blocks = vec![Vec::new(); max_exc + 1];
        for (k, l) in labels.iter().enumerate() {
            blocks[l.excitations()].push(k);
        }
        Self { labels, index, blocks, n_sites, qubit_levels }
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn qubit_levels(&self) -> u8 {
        self.qubit_levels
    }

    pub fn labels(&self) -> &[BasisLabel] {
        &self.labels
    }

    pub fn label(&self, k: usize) -> &BasisLabel {
        &self.labels[k]
    }

    pub fn index_of(&self, label: &BasisLabel) -> Option<usize> {
        self.index.get(label).copied()
    }

    /// Basis indices grouped by total excitation number.
    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Index of `|q1 q2; 0…0⟩`.
    pub fn qubit_state(&self, q1: u8, q2: u8) -> Option<usize> {
        self.index_of(&BasisLabel::qubits_only(q1, q2, self.n_sites))
    }

    /// Index of the state with both qubits in `g` and one photon on `site`.
    pub fn single_photon(&self, site: usize) -> Option<usize> {
        let mut photons = vec![0; self.n_sites];
        photons[site] = 1;
        self.index_of(&BasisLabel::new(0, 0, photons))
    }
}

/// Complex amplitudes over an explicit [`Basis`].
#[derive(Debug, Clone)]
pub struct LabeledState {
    pub amplitudes: ComplexVector,
    pub basis: Arc<Basis>,
}

impl LabeledState {
    pub fn new(amplitudes: ComplexVector, basis: Arc<Basis>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::Dimension(format!(
                "{} amplitudes for a basis of dimension {}",
                amplitudes.len(),
                basis.dim()
            )));
        }
        Ok(Self { amplitudes, basis })
    }

    pub fn basis_state(basis: Arc<Basis>, label: &BasisLabel) -> Result<Self> {
        let k = basis.index_of(label).ok_or_else(|| Error::invalid(format!("{label} is not in the basis")))?;
        let mut amplitudes = ComplexVector::from_element(basis.dim(), ZERO);
        amplitudes[k] = C64::new(1.0, 0.0);
        Ok(Self { amplitudes, basis })
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn amplitude(&self, label: &BasisLabel) -> C64 {
        self.basis.index_of(label).map_or(ZERO, |k| self.amplitudes[k])
    }

    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Probability that `qubit` (0 or 1) is found in `level`.
    pub fn qubit_population(&self, qubit: usize, level: u8) -> f64 {
        self.basis
            .labels()
            .iter()
            .zip(self.amplitudes.iter())
            .filter(|(l, _)| l.qubits[qubit] == level)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Total population in states with at least one photon.
    pub fn photon_population(&self) -> f64 {
        self.basis
            .labels()
            .iter()
            .zip(self.amplitudes.iter())
            .filter(|(l, _)| l.photon_count() > 0)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &LabeledState) -> f64 {
        self.amplitudes.dotc(&other.amplitudes).norm_sqr()
    }
}
