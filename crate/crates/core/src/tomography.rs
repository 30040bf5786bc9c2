//! Two-qubit state tomography from simulated Pauli-basis measurements, with
//! fidelity and concurrence.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig_hermitian, kron, pauli_x, pauli_y, ComplexMatrix, ComplexVector, C64, ONE, ZERO};

/// Single-qubit measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliBasis {
    X,
    Y,
    Z,
}

impl PauliBasis {
    pub const ALL: [PauliBasis; 3] = [PauliBasis::X, PauliBasis::Y, PauliBasis::Z];

    pub fn matrix(self) -> ComplexMatrix {
        match self {
            PauliBasis::X => pauli_x(),
            PauliBasis::Y => pauli_y(),
            // (g, e) order: outcome +1 is g
            PauliBasis::Z => ComplexMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        }
    }

    /// Eigenvectors for outcomes `+1` and `−1`, in that order.
    fn eigenvectors(self) -> [ComplexVector; 2] {
        let e = eig_hermitian(&self.matrix()).expect("Pauli matrices are Hermitian");
        // eigenvalues ascend: column 1 is +1
        [e.vectors.column(1).into_owned(), e.vectors.column(0).into_owned()]
    }
}

impl fmt::Display for PauliBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            PauliBasis::X => "X",
            PauliBasis::Y => "Y",
            PauliBasis::Z => "Z",
        };
        f.write_str(c)
    }
}

/// Measurement basis for qubit 1 and qubit 2.
pub type Setting = [PauliBasis; 2];

/// The nine settings `{X, Y, Z}²`.
pub fn all_settings() -> Vec<Setting> {
    PauliBasis::ALL.iter().flat_map(|&a| PauliBasis::ALL.iter().map(move |&b| [a, b])).collect()
}

/// Hermitian, unit-trace, positive semidefinite 4×4 matrix in the order
/// `gg, ge, eg, ee` (qubit 1 first).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

/// Tolerance for the density-matrix invariants.
pub const DENSITY_TOL: f64 = 1e-9;

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if matrix.shape() != (4, 4) {
            return Err(Error::Dimension(format!(
                "density matrix is {}x{}, expected 4x4",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let herm = (&matrix - matrix.adjoint()).norm();
        if herm > DENSITY_TOL {
            return Err(Error::NotHermitian { defect: herm, scale: matrix.norm() });
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > DENSITY_TOL || tr.im.abs() > DENSITY_TOL {
            return Err(Error::invalid(format!("density matrix trace {tr} is not 1")));
        }
        let min = eig_hermitian(&matrix)?.values[0];
        if min < -DENSITY_TOL {
            return Err(Error::invalid(format!("density matrix has eigenvalue {min:.3e}")));
        }
        Ok(Self { matrix })
    }

    pub fn from_pure(psi: &ComplexVector) -> Result<Self> {
        let n = psi.norm();
        if n == 0.0 {
            return Err(Error::invalid("zero state vector"));
        }
        let v = psi / C64::new(n, 0.0);
        Self::new(&v * v.adjoint())
    }

    pub fn maximally_mixed() -> Self {
        Self { matrix: ComplexMatrix::identity(4, 4) * C64::new(0.25, 0.0) }
    }

    /// `p·|ψ⟩⟨ψ| + (1 − p)·I/4`.
    pub fn werner(psi: &ComplexVector, p: f64) -> Result<Self> {
        let pure = Self::from_pure(psi)?;
        Self::new(pure.matrix * C64::new(p, 0.0) + ComplexMatrix::identity(4, 4) * C64::new(0.25 * (1.0 - p), 0.0))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Born probabilities of the four outcomes `++, +−, −+, −−`.
    pub fn probabilities(&self, setting: Setting) -> [f64; 4] {
        let a = setting[0].eigenvectors();
        let b = setting[1].eigenvectors();
        let mut p = [0.0; 4];
        for (i, va) in a.iter().enumerate() {
            for (j, vb) in b.iter().enumerate() {
                let v = kron_vec(va, vb);
                p[2 * i + j] = (v.adjoint() * &self.matrix * &v)[(0, 0)].re.max(0.0);
            }
        }
        let s: f64 = p.iter().sum();
        p.map(|x| x / s)
    }

    /// `U ρ U†` for a two-qubit unitary.
    pub fn transformed(&self, u: &ComplexMatrix) -> Result<Self> {
        Self::new(u * &self.matrix * u.adjoint())
    }
}

fn kron_vec(a: &ComplexVector, b: &ComplexVector) -> ComplexVector {
    ComplexVector::from_fn(a.len() * b.len(), |k, _| a[k / b.len()] * b[k % b.len()])
}

/// Outcome frequencies (or counts) per measurement setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub setting: Setting,
    /// Counts of `++, +−, −+, −−`.
    pub counts: [u64; 4],
}

/// Samples `shots` outcomes per setting from the Born probabilities by
/// sequential binomial draws. Deterministic for a fixed seed.
pub fn simulate_measurements(
    rho: &DensityMatrix,
    settings: &[Setting],
    shots: u64,
    seed: u64,
) -> Result<Vec<MeasurementRecord>> {
    if shots == 0 {
        return Err(Error::invalid("shots must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    settings
        .iter()
        .map(|&setting| {
            let counts = sample_multinomial(&rho.probabilities(setting), shots, &mut rng)?;
            Ok(MeasurementRecord { setting, counts })
        })
        .collect()
}

fn sample_multinomial(p: &[f64; 4], shots: u64, rng: &mut ChaCha8Rng) -> Result<[u64; 4]> {
    let mut counts = [0u64; 4];
    let mut left = shots;
    let mut mass = 1.0;
    for k in 0..3 {
        if left == 0 {
            break;
        }
        let q = if mass > 0.0 { (p[k] / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = Binomial::new(left, q).map_err(|e| Error::invalid(e.to_string()))?.sample(rng);
        counts[k] = draw;
        left -= draw;
        mass -= p[k];
    }
    counts[3] = left;
    Ok(counts)
}

/// Outcome probabilities per setting; counts are normalized by their total.
#[derive(Debug, Clone, PartialEq)]
pub struct SettingFrequencies {
    pub setting: Setting,
    pub frequencies: [f64; 4],
}

impl From<&MeasurementRecord> for SettingFrequencies {
    fn from(r: &MeasurementRecord) -> Self {
        let total: u64 = r.counts.iter().sum();
        let n = total.max(1) as f64;
        Self { setting: r.setting, frequencies: r.counts.map(|c| c as f64 / n) }
    }
}

/// Exact probabilities for every setting (the infinite-shot limit).
pub fn exact_frequencies(rho: &DensityMatrix) -> Vec<SettingFrequencies> {
    all_settings().into_iter().map(|s| SettingFrequencies { setting: s, frequencies: rho.probabilities(s) }).collect()
}

const SIGN: [f64; 2] = [1.0, -1.0];

/// Linear inversion from Pauli expectation values followed by the Frobenius
/// projection onto unit-trace positive semidefinite matrices.
pub fn reconstruct_state(data: &[SettingFrequencies]) -> Result<DensityMatrix> {
    let missing: Vec<String> = all_settings()
        .into_iter()
        .filter(|s| !data.iter().any(|d| d.setting == *s))
        .map(|s| format!("{}{}", s[0], s[1]))
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingSettings(missing));
    }
    let id = ComplexMatrix::identity(2, 2);
    let mut rho = kron(&id, &id) * C64::new(0.25, 0.0);
    // correlators ⟨A⊗B⟩
    for a in PauliBasis::ALL {
        for b in PauliBasis::ALL {
            let d = data.iter().filter(|d| d.setting == [a, b]);
            let vals: Vec<f64> =
                d.map(|d| (0..4).map(|k| SIGN[k / 2] * SIGN[k % 2] * d.frequencies[k]).sum()).collect();
            let e = vals.iter().sum::<f64>() / vals.len() as f64;
            rho += kron(&a.matrix(), &b.matrix()) * C64::new(0.25 * e, 0.0);
        }
    }
    // marginals ⟨A⊗I⟩ and ⟨I⊗B⟩ averaged over the settings that contain them
    for a in PauliBasis::ALL {
        let q1: Vec<f64> = data
            .iter()
            .filter(|d| d.setting[0] == a)
            .map(|d| (0..4).map(|k| SIGN[k / 2] * d.frequencies[k]).sum())
            .collect();
        let q2: Vec<f64> = data
            .iter()
            .filter(|d| d.setting[1] == a)
            .map(|d| (0..4).map(|k| SIGN[k % 2] * d.frequencies[k]).sum())
            .collect();
        let e1 = q1.iter().sum::<f64>() / q1.len() as f64;
        let e2 = q2.iter().sum::<f64>() / q2.len() as f64;
        rho += kron(&a.matrix(), &id) * C64::new(0.25 * e1, 0.0);
        rho += kron(&id, &a.matrix()) * C64::new(0.25 * e2, 0.0);
    }
    project_to_density(&rho)
}

/// Nearest unit-trace PSD matrix in Frobenius norm: eigenvalues are projected
/// onto the probability simplex, eigenvectors kept.
pub fn project_to_density(m: &ComplexMatrix) -> Result<DensityMatrix> {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let e = eig_hermitian(&h)?;
    let lambda = project_simplex(e.values.as_slice());
    let d = ComplexMatrix::from_diagonal(&ComplexVector::from_iterator(
        lambda.len(),
        lambda.iter().map(|&l| C64::new(l, 0.0)),
    ));
    let rho = &e.vectors * d * e.vectors.adjoint();
    let rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
    DensityMatrix::new(rho)
}

/// Euclidean projection of `v` onto `{x ≥ 0, Σx = 1}`.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// `⟨ψ|ρ|ψ⟩` for a normalized target.
pub fn state_fidelity(rho: &DensityMatrix, target: &ComplexVector) -> f64 {
    let t = target / C64::new(target.norm(), 0.0);
    (t.adjoint() * &rho.matrix * &t)[(0, 0)].re.clamp(0.0, 1.0)
}

/// Fidelity to `(|gg⟩ + e^{iΦ}|ee⟩)/√2` maximized over Φ.
pub fn bell_fidelity(rho: &DensityMatrix) -> f64 {
    let m = &rho.matrix;
    (0.5 * (m[(0, 0)].re + m[(3, 3)].re) + m[(0, 3)].norm()).clamp(0.0, 1.0)
}

/// The Φ maximizing [`bell_fidelity`].
pub fn bell_phase(rho: &DensityMatrix) -> f64 {
    // ⟨Ψ|ρ|Ψ⟩ contains Re(e^{iΦ} ρ_{gg,ee}); the optimum cancels its phase
    -rho.matrix[(0, 3)].arg()
}

/// Wootters concurrence.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    let yy = kron(&pauli_y(), &pauli_y());
    let tilde = &yy * rho.matrix.map(|c| c.conj()) * &yy;
    let s = sqrt_psd(&rho.matrix)?;
    let r = &s * tilde * &s;
    let r = (&r + r.adjoint()) * C64::new(0.5, 0.0);
    let mut l: Vec<f64> = eig_hermitian(&r)?.values.iter().map(|x| x.max(0.0).sqrt()).collect();
    l.sort_by(|a, b| b.total_cmp(a));
    Ok((l[0] - l[1] - l[2] - l[3]).max(0.0))
}

fn sqrt_psd(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let e = eig_hermitian(m)?;
    let d = ComplexVector::from_iterator(e.values.len(), e.values.iter().map(|&x| C64::new(x.max(0.0).sqrt(), 0.0)));
    Ok(&e.vectors * ComplexMatrix::from_diagonal(&d) * e.vectors.adjoint())
}

/// Summary statistics of a bootstrap distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub mean: f64,
    pub std: f64,
    pub low: f64,
    pub high: f64,
}

impl Interval {
    fn from_samples(mut v: Vec<f64>) -> Self {
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let q = |p: f64| v[((p * (n - 1.0)).round() as usize).min(v.len() - 1)];
        Self { mean, std: var.sqrt(), low: q(0.025), high: q(0.975) }
    }
}

/// Parametric bootstrap over the measured counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BootstrapSummary {
    pub resamples: usize,
    pub fidelity: Interval,
    pub concurrence: Interval,
}

/// Default number of bootstrap resamples.
pub const DEFAULT_RESAMPLES: usize = 200;

/// Resamples each setting's counts from its observed frequencies, then
/// reconstructs and scores every resample.
pub fn bootstrap(records: &[MeasurementRecord], resamples: usize, seed: u64) -> Result<BootstrapSummary> {
    if resamples < 2 {
        return Err(Error::invalid("bootstrap needs at least two resamples"));
    }
    let scores: Vec<(f64, f64)> = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64 + 1);
            let data: Vec<SettingFrequencies> = records
                .iter()
                .map(|rec| {
                    let f = SettingFrequencies::from(rec).frequencies;
                    let shots = rec.counts.iter().sum();
                    let counts = sample_multinomial(&f, shots, &mut rng)?;
                    Ok(SettingFrequencies::from(&MeasurementRecord { setting: rec.setting, counts }))
                })
                .collect::<Result<_>>()?;
            let rho = reconstruct_state(&data)?;
            Ok((bell_fidelity(&rho), concurrence(&rho)?))
        })
        .collect::<Result<_>>()?;
    Ok(BootstrapSummary {
        resamples,
        fidelity: Interval::from_samples(scores.iter().map(|s| s.0).collect()),
        concurrence: Interval::from_samples(scores.iter().map(|s| s.1).collect()),
    })
}

/// JSON view of a reconstruction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TomographyReport {
    pub rho_real: Vec<Vec<f64>>,
    pub rho_imag: Vec<Vec<f64>>,
    pub shots_per_setting: u64,
    pub settings: Vec<String>,
    pub fidelity: f64,
    pub bell_phase: f64,
    pub concurrence: f64,
    pub bootstrap: Option<BootstrapSummary>,
}

impl TomographyReport {
    pub fn new(
        rho: &DensityMatrix,
        shots: u64,
        settings: &[Setting],
        bootstrap: Option<BootstrapSummary>,
    ) -> Result<Self> {
        let m = rho.matrix();
        Ok(Self {
            rho_real: (0..4).map(|i| (0..4).map(|j| m[(i, j)].re).collect()).collect(),
            rho_imag: (0..4).map(|i| (0..4).map(|j| m[(i, j)].im).collect()).collect(),
            shots_per_setting: shots,
            settings: settings.iter().map(|s| format!("{}{}", s[0], s[1])).collect(),
            fidelity: bell_fidelity(rho),
            bell_phase: bell_phase(rho),
            concurrence: concurrence(rho)?,
            bootstrap,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bell() -> ComplexVector {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        ComplexVector::from_vec(vec![C64::new(s, 0.0), ZERO, ZERO, C64::new(s, 0.0)])
    }

    fn su2(a: f64, b: f64, c: f64) -> ComplexMatrix {
        // exp(-i a Z/2) exp(-i b Y/2) exp(-i c Z/2)
        let rz = |t: f64| {
            ComplexMatrix::from_row_slice(
                2,
                2,
                &[C64::from_polar(1.0, -t / 2.0), ZERO, ZERO, C64::from_polar(1.0, t / 2.0)],
            )
        };
        let ry = ComplexMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new((b / 2.0).cos(), 0.0),
                C64::new(-(b / 2.0).sin(), 0.0),
                C64::new((b / 2.0).sin(), 0.0),
                C64::new((b / 2.0).cos(), 0.0),
            ],
        );
        rz(a) * ry * rz(c)
    }

    fn random_rho(seed: u64) -> DensityMatrix {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = ComplexMatrix::from_fn(4, 4, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let m = &a * a.adjoint();
        let t = m.trace();
        DensityMatrix::new(m / t).unwrap()
    }

    #[test]
    fn ground_state_zz_counts_in_plus_plus() {
        let gg = ComplexVector::from_vec(vec![ONE, ZERO, ZERO, ZERO]);
        let rho = DensityMatrix::from_pure(&gg).unwrap();
        let rec = simulate_measurements(&rho, &[[PauliBasis::Z, PauliBasis::Z]], 1000, 1).unwrap();
        assert_eq!(rec[0].counts, [1000, 0, 0, 0]);
    }

    #[test]
    fn maximally_mixed_counts_are_uniform() {
        let rho = DensityMatrix::maximally_mixed();
        let shots = 40_000u64;
        let rec = simulate_measurements(&rho, &all_settings(), shots, 3).unwrap();
        let sigma = (shots as f64 * 0.25 * 0.75).sqrt();
        for r in rec {
            for c in r.counts {
                assert!((c as f64 - shots as f64 / 4.0).abs() < 4.0 * sigma, "{:?}", r.counts);
            }
        }
    }

    #[test]
    fn bell_xx_parity() {
        let rho = DensityMatrix::from_pure(&bell()).unwrap();
        let rec = simulate_measurements(&rho, &[[PauliBasis::X, PauliBasis::X]], 5000, 9).unwrap();
        assert_eq!(rec[0].counts[1] + rec[0].counts[2], 0);
        assert_eq!(rec[0].counts[0] + rec[0].counts[3], 5000);
    }

    #[test]
    fn sampling_is_deterministic() {
        let rho = random_rho(5);
        let a = simulate_measurements(&rho, &all_settings(), 777, 42).unwrap();
        let b = simulate_measurements(&rho, &all_settings(), 777, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exact_probabilities_invert_exactly() {
        for seed in 0..20 {
            let rho = random_rho(seed);
            let back = reconstruct_state(&exact_frequencies(&rho)).unwrap();
            assert!((back.matrix() - rho.matrix()).norm() < 1e-9, "seed {seed}");
        }
    }

    #[test]
    fn missing_settings_are_listed() {
        let rho = random_rho(1);
        let mut data = exact_frequencies(&rho);
        data.retain(|d| d.setting != [PauliBasis::X, PauliBasis::Y]);
        match reconstruct_state(&data) {
            Err(Error::MissingSettings(s)) => assert_eq!(s, vec!["XY".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bell_with_finite_shots() {
        let rho = DensityMatrix::from_pure(&bell()).unwrap();
        let rec = simulate_measurements(&rho, &all_settings(), 10_000, 11).unwrap();
        let data: Vec<SettingFrequencies> = rec.iter().map(Into::into).collect();
        let back = reconstruct_state(&data).unwrap();
        assert!(state_fidelity(&back, &bell()) >= 0.99);
    }

    #[test]
    fn adversarial_counts_project_to_density() {
        // every correlator pinned to +1 is not a physical state
        let data: Vec<SettingFrequencies> = all_settings()
            .into_iter()
            .map(|s| SettingFrequencies { setting: s, frequencies: [1.0, 0.0, 0.0, 0.0] })
            .collect();
        let rho = reconstruct_state(&data).unwrap();
        let e = eig_hermitian(rho.matrix()).unwrap();
        assert!(e.values[0] >= -1e-9);
        assert!((rho.matrix().trace().re - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fidelity_examples() {
        let rho = DensityMatrix::from_pure(&bell()).unwrap();
        assert!((state_fidelity(&rho, &bell()) - 1.0).abs() < 1e-12);
        assert!((state_fidelity(&DensityMatrix::maximally_mixed(), &bell()) - 0.25).abs() < 1e-12);
        for p in [0.0, 0.3, 0.7, 1.0] {
            let w = DensityMatrix::werner(&bell(), p).unwrap();
            assert!((state_fidelity(&w, &bell()) - (p + (1.0 - p) / 4.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn concurrence_examples() {
        let prod = kron_vec(
            &ComplexVector::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]),
            &ComplexVector::from_vec(vec![ONE, ZERO]),
        );
        assert!(concurrence(&DensityMatrix::from_pure(&prod).unwrap()).unwrap() < 1e-7);
        assert!((concurrence(&DensityMatrix::from_pure(&bell()).unwrap()).unwrap() - 1.0).abs() < 1e-9);
        for k in 0..=20 {
            let p = k as f64 / 20.0;
            let w = DensityMatrix::werner(&bell(), p).unwrap();
            let c = concurrence(&w).unwrap();
            assert!((c - (1.5 * p - 0.5).max(0.0)).abs() < 1e-9, "p {p}: {c}");
        }
    }

    #[test]
    fn bell_phase_recovers_relative_phase() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = ComplexVector::from_vec(vec![C64::new(s, 0.0), ZERO, ZERO, C64::from_polar(s, 0.9)]);
        let rho = DensityMatrix::from_pure(&psi).unwrap();
        assert!((bell_fidelity(&rho) - 1.0).abs() < 1e-12);
        assert!((bell_phase(&rho) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn bootstrap_brackets_estimate() {
        let rho = DensityMatrix::werner(&bell(), 0.9).unwrap();
        let rec = simulate_measurements(&rho, &all_settings(), 2000, 4).unwrap();
        let b = bootstrap(&rec, 50, 8).unwrap();
        let expected = 0.9 + 0.1 / 4.0;
        assert!(b.fidelity.low <= b.fidelity.high);
        assert!((b.fidelity.mean - expected).abs() < 5.0 * b.fidelity.std + 0.01);
        assert_eq!(b, bootstrap(&rec, 50, 8).unwrap());
    }

    proptest! {
        #[test]
        fn concurrence_invariant_under_local_unitaries(
            seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0,
            d in -3.0f64..3.0, e in -3.0f64..3.0, f in -3.0f64..3.0,
        ) {
            let rho = random_rho(seed);
            let u = kron(&su2(a, b, c), &su2(d, e, f));
            let c0 = concurrence(&rho).unwrap();
            let c1 = concurrence(&rho.transformed(&u).unwrap()).unwrap();
            prop_assert!((c0 - c1).abs() < 1e-9);
        }

        #[test]
        fn fidelity_bounded_by_largest_eigenvalue(seed in 0u64..1000, re in proptest::collection::vec(-1.0f64..1.0, 8)) {
            let rho = random_rho(seed);
            let psi = ComplexVector::from_fn(4, |k, _| C64::new(re[2 * k], re[2 * k + 1]));
            prop_assume!(psi.norm() > 1e-3);
            let lmax = eig_hermitian(rho.matrix()).unwrap().values[3];
            prop_assert!(state_fidelity(&rho, &psi) <= lmax + 1e-12);
        }

        #[test]
        fn round_trip_improves_with_shots(seed in 0u64..50) {
            let rho = random_rho(seed);
            let truth = eig_hermitian(rho.matrix()).unwrap();
            let top = truth.vectors.column(3).into_owned();
            for shots in [1_000u64, 100_000] {
                let rec = simulate_measurements(&rho, &all_settings(), shots, seed).unwrap();
                let data: Vec<SettingFrequencies> = rec.iter().map(Into::into).collect();
                let back = reconstruct_state(&data).unwrap();
                let bound = 5.0 / (shots as f64).sqrt();
                prop_assert!((back.matrix() - rho.matrix()).norm() < bound * 4.0);
                prop_assert!((state_fidelity(&back, &top) - state_fidelity(&rho, &top)).abs() < bound);
            }
        }
    }
}
