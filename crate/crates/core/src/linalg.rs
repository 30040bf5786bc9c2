//! Dense complex linear algebra shared by the rest of the crate.
//!
//! Energies are in GHz with h = 1, times in ns, so a phase is `2π·E·t`.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

/// Relative tolerance used when validating Hermitian inputs.
pub const HERMITIAN_TOL: f64 = 1e-10;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Tensor product with the left factor outermost.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = ComplexMatrix::zeros(ra * rb, ca * cb);
    for i in 0..ra {
        for j in 0..ca {
            let aij = a[(i, j)];
            if aij == ZERO {
                continue;
            }
            for k in 0..rb {
                for l in 0..cb {
                    out[(i * rb + k, j * cb + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn dagger(m: &ComplexMatrix) -> ComplexMatrix {
    m.adjoint()
}

/// Frobenius norm of `h - h†` together with the Frobenius norm of `h`.
pub fn hermiticity_defect(h: &ComplexMatrix) -> (f64, f64) {
    let n = h.nrows();
    let mut defect = 0.0;
    for i in 0..n {
        for j in 0..n {
            defect += (h[(i, j)] - h[(j, i)].conj()).norm_sqr();
        }
    }
    (defect.sqrt(), h.norm())
}

pub fn is_hermitian(h: &ComplexMatrix, rel_tol: f64) -> bool {
    if !h.is_square() {
        return false;
    }
    let (defect, scale) = hermiticity_defect(h);
    defect <= rel_tol * scale.max(1.0)
}

pub fn ensure_hermitian(h: &ComplexMatrix, rel_tol: f64) -> Result<()> {
    if !h.is_square() {
        return Err(Error::Dimension(format!("expected a square matrix, got {}x{}", h.nrows(), h.ncols())));
    }
    let (defect, scale) = hermiticity_defect(h);
    if defect > rel_tol * scale.max(1.0) {
        return Err(Error::NotHermitian { defect, scale });
    }
    Ok(())
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the same order as `values`.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> ComplexVector {
        self.vectors.column(k).into_owned()
    }

    /// `exp(-2πi·H·t)` rebuilt from the decomposition.
    pub fn evolution(&self, t: f64) -> ComplexMatrix {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for (k, &e) in self.values.iter().enumerate() {
            let phase = C64::from_polar(1.0, -TAU * e * t);
            for r in 0..n {
                scaled[(r, k)] *= phase;
            }
        }
        &scaled * self.vectors.adjoint()
    }
}

pub fn eig_hermitian(h: &ComplexMatrix) -> Result<HermitianEigen> {
    ensure_hermitian(h, HERMITIAN_TOL)?;
    Ok(eig_hermitian_unchecked(h))
}

/// Same as [`eig_hermitian`] without the Hermiticity check; the input is
/// symmetrised first so round-off in the lower triangle is ignored.
pub fn eig_hermitian_unchecked(h: &ComplexMatrix) -> HermitianEigen {
    let n = h.nrows();
    if n == 1 {
        return HermitianEigen { values: vec![h[(0, 0)].re], vectors: ComplexMatrix::identity(1, 1) };
    }
    let sym = (h + h.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    HermitianEigen { values, vectors }
}

/// Eigenvalues of a real symmetric matrix, ascending, with eigenvectors.
pub fn eig_symmetric_real(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// `exp(-2πi·H·t)` for Hermitian `H`.
pub fn expm_hermitian(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    Ok(eig_hermitian(h)?.evolution(t))
}

/// Largest deviation of `U†U` from the identity.
pub fn unitarity_defect(u: &ComplexMatrix) -> f64 {
    let prod = u.adjoint() * u;
    let n = prod.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { ONE } else { ZERO };
            worst = worst.max((prod[(i, j)] - target).norm());
        }
    }
    worst
}

pub fn from_real_diagonal(diag: &[f64]) -> ComplexMatrix {
    let n = diag.len();
    let mut m = ComplexMatrix::zeros(n, n);
    for (k, &d) in diag.iter().enumerate() {
        m[(k, k)] = C64::new(d, 0.0);
    }
    m
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

/// `σZ` in the (e, g) ordering, so `σZ|e⟩ = +|e⟩`.
pub fn pauli_z_eg() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(rng.random_range(-1.0..1.0), 0.0);
            for j in (i + 1)..n {
                let z = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        m
    }

    #[test]
    fn kron_identities() {
        let i2 = ComplexMatrix::identity(2, 2);
        assert_eq!(kron(&i2, &i2), ComplexMatrix::identity(4, 4));
        let z = kron(&pauli_z_eg(), &i2);
        let expected = from_real_diagonal(&[1.0, 1.0, -1.0, -1.0]);
        assert_eq!(z, expected);
    }

    #[test]
    fn kron_matches_four_index_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_hermitian(2, &mut rng);
        let b = random_hermitian(3, &mut rng);
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (6, 6));
        for i in 0..2 {
            for j in 0..2 {
                for p in 0..3 {
                    for q in 0..3 {
                        assert_eq!(k[(3 * i + p, 3 * j + q)], a[(i, j)] * b[(p, q)]);
                    }
                }
            }
        }
    }

    #[test]
    fn eig_small_cases() {
        let d = from_real_diagonal(&[3.0, 1.0, 2.0]);
        let e = eig_hermitian(&d).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);

        let x = pauli_x();
        let e = eig_hermitian(&x).unwrap();
        assert_abs_diff_eq!(e.values[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn eig_three_site_chain() {
        let (nu, g) = (7.169, 0.118);
        let mut h = ComplexMatrix::zeros(3, 3);
        for k in 0..3 {
            h[(k, k)] = C64::new(nu, 0.0);
        }
        for k in 0..2 {
            h[(k, k + 1)] = C64::new(g, 0.0);
            h[(k + 1, k)] = C64::new(g, 0.0);
        }
        let e = eig_hermitian(&h).unwrap();
        for (got, want) in e.values.iter().zip([7.002, 7.169, 7.336]) {
            assert!((got - want).abs() < 1e-3, "{got} vs {want}");
        }
    }

    #[test]
    fn eig_residual_and_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2, 5, 15, 21] {
            let h = random_hermitian(n, &mut rng);
            let e = eig_hermitian(&h).unwrap();
            let scale = h.norm();
            for k in 0..n {
                let v = e.vector(k);
                let r = &h * &v - &v * C64::new(e.values[k], 0.0);
                assert!(r.norm() < 1e-9 * scale);
            }
            assert!(unitarity_defect(&e.vectors) < 1e-9);
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]);
        match eig_hermitian(&m) {
            Err(Error::NotHermitian { defect, .. }) => assert!(defect > 1.0),
            other => panic!("expected NotHermitian, got {other:?}"),
        }
    }

    #[test]
    fn evolution_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_hermitian(8, &mut rng);
        let u = expm_hermitian(&h, 1.7).unwrap();
        assert!(unitarity_defect(&u) < 1e-9);
    }
}
