//! Dense complex linear algebra shared by every module.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Largest entrywise modulus of `m - m†`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Largest singular value.
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order. Equal eigenvalues keep the solver's original order, so
/// the first column is a deterministic choice within a degenerate top space.
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

pub fn eigh(m: &CMatrix) -> Eigh {
    let n = m.nrows();
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        fix_phase(&mut col);
        vectors.set_column(dst, &col);
    }
    Eigh { values, vectors }
}

/// Rotate the global phase so the first entry of largest modulus is real
/// and positive.
pub fn fix_phase(v: &mut CVector) {
    let mut best = 0usize;
    let mut best_norm = -1.0;
    for (k, z) in v.iter().enumerate() {
        if z.norm() > best_norm + 1e-12 {
            best = k;
            best_norm = z.norm();
        }
    }
    if best_norm > 0.0 {
        let phase = v[best].conj() / best_norm;
        v.iter_mut().for_each(|z| *z *= phase);
    }
}

/// `V diag(sign(λ)) V†` for the Hermitian part of `m`, with zero mapped to +1.
/// Returns the matrix together with `Σ|λ|`.
pub fn eigen_sign(m: &CMatrix) -> (CMatrix, f64) {
    let h = hermitian_part(m);
    let n = h.nrows();
    let eig = eigh(&h);
    let scale = eig.values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let mut out = CMatrix::zeros(n, n);
    let mut objective = 0.0;
    for (k, &lambda) in eig.values.iter().enumerate() {
        let sign = if lambda < -1e-14 * scale { -1.0 } else { 1.0 };
        objective += lambda.abs();
        let v = eig.vectors.column(k);
        out += (&v * v.adjoint()).scale(sign);
    }
    (hermitian_part(&out), objective)
}

/// Complex vector with independent standard complex Gaussian entries
/// (real and imaginary parts of variance 1/2).
pub fn complex_gaussian_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    CVector::from_fn(n, |_, _| complex_gaussian(rng))
}

pub fn complex_gaussian_matrix<R: Rng + ?Sized>(r: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(r, cols, |_, _| complex_gaussian(rng))
}

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_unit_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    let v = complex_gaussian_vector(n, rng);
    let norm = v.norm();
    v.unscale(norm)
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigh_sorts_descending_and_reconstructs() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0, 0.0), c(5.0, 0.0), c(3.0, 0.0)]));
        let e = eigh(&m);
        assert_eq!(e.values.len(), 3);
        assert!((e.values[0] - 5.0).abs() < 1e-12);
        assert!((e.values[2] - 1.0).abs() < 1e-12);
        assert!((e.vectors[(1, 0)] - ONE).norm() < 1e-12);
    }

    #[test]
    fn eigen_sign_of_pauli_y_is_itself() {
        let (s, obj) = eigen_sign(&pauli_y());
        assert!(max_abs_diff(&s, &pauli_y()) < 1e-12);
        assert!((obj - 2.0).abs() < 1e-12);
    }

    #[test]
    fn op_norm_of_unitary_is_one() {
        let h = (pauli_x() + pauli_z()).scale(std::f64::consts::FRAC_1_SQRT_2);
        assert!((op_norm(&h) - 1.0).abs() < 1e-12);
    }
}
