//! Named Bell functionals and their textbook witnesses.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{pauli_x, pauli_y, CVector, ONE};
use crate::rng::stream_rng;
use crate::tensor_core::{for_each_index, BellFunctional, Observable, ObservableSet, QuantumState};

/// CHSH: the 2×2 Hadamard pattern.
pub fn chsh() -> BellFunctional {
    BellFunctional::new(vec![2, 2], vec![1.0, 1.0, 1.0, -1.0]).expect("valid")
}

/// `a0 b0 c1 + a0 b1 c0 + a1 b0 c0 - a1 b1 c1`, the imaginary part of
/// `(a0 + i a1)(b0 + i b1)(c0 + i c1)`.
pub fn mermin3() -> BellFunctional {
    mermin(3, |k| match k % 4 {
        1 => 1.0,
        3 => -1.0,
        _ => 0.0,
    })
}

/// Real part of `Π_j (a^j_0 + i a^j_1)` over four parties.
pub fn mermin4() -> BellFunctional {
    mermin(4, |k| match k % 4 {
        0 => 1.0,
        2 => -1.0,
        _ => 0.0,
    })
}

fn mermin(parties: usize, coeff_of_ones: impl Fn(usize) -> f64) -> BellFunctional {
    let settings = vec![2; parties];
    let mut coeffs = Vec::with_capacity(1 << parties);
    for_each_index(&settings, |idx| {
        coeffs.push(coeff_of_ones(idx.iter().sum()));
    });
    BellFunctional::new(settings, coeffs).expect("valid")
}

/// Functional with i.i.d. standard Gaussian coefficients.
pub fn random_gaussian(parties: usize, settings: usize, seed: u64) -> Result<BellFunctional> {
    random_gaussian_shape(vec![settings; parties], seed)
}

pub fn random_gaussian_shape(settings: Vec<usize>, seed: u64) -> Result<BellFunctional> {
    if settings.len() < 2 || settings.contains(&0) {
        return Err(Error::InvalidParameter(format!(
            "random functional needs ≥ 2 parties with ≥ 1 setting, got {settings:?}"
        )));
    }
    let mut rng = stream_rng(seed, 0);
    let size = settings.iter().product();
    let coeffs = (0..size).map(|_| StandardNormal.sample(&mut rng)).collect();
    BellFunctional::new(settings, coeffs)
}

/// GHZ_2 with settings `(−Y, −X)` for the first party and `(Y, X)` for the
/// others; attains 4 on [`mermin3`].
pub fn mermin3_witness() -> (QuantumState, ObservableSet) {
    let y = Observable::new(pauli_y()).expect("valid");
    let x = Observable::new(pauli_x()).expect("valid");
    let ny = Observable::new(-pauli_y()).expect("valid");
    let nx = Observable::new(-pauli_x()).expect("valid");
    let obs = ObservableSet::new(vec![
        vec![ny, nx],
        vec![y.clone(), x.clone()],
        vec![y, x],
    ])
    .expect("valid");
    (ghz_qubits(3), obs)
}

/// GHZ_2 on four qubits with `(X, Y)` everywhere; attains 8 on [`mermin4`].
pub fn mermin4_witness() -> (QuantumState, ObservableSet) {
    let x = Observable::new(pauli_x()).expect("valid");
    let y = Observable::new(pauli_y()).expect("valid");
    let obs = ObservableSet::new(vec![vec![x, y]; 4]).expect("valid");
    (ghz_qubits(4), obs)
}

/// Tsirelson point for [`chsh`]: `|Φ+⟩`, Alice `(Z, X)`, Bob `(Z±X)/√2`.
pub fn chsh_witness() -> (QuantumState, ObservableSet) {
    let z = crate::linalg::pauli_z();
    let x = pauli_x();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let obs = ObservableSet::new(vec![
        vec![
            Observable::new(z.clone()).expect("valid"),
            Observable::new(x.clone()).expect("valid"),
        ],
        vec![
            Observable::new((&z + &x).scale(s)).expect("valid"),
            Observable::new((&z - &x).scale(s)).expect("valid"),
        ],
    ])
    .expect("valid");
    let mut v = CVector::zeros(4);
    v[0] = ONE;
    v[3] = ONE;
    let state = QuantumState::pure_normalized(vec![2, 2], v).expect("valid");
    (state, obs)
}

fn ghz_qubits(parties: usize) -> QuantumState {
    let dim = 1 << parties;
    let mut v = CVector::zeros(dim);
    v[0] = ONE;
    v[dim - 1] = ONE;
    QuantumState::pure_normalized(vec![2; parties], v).expect("valid")
}
