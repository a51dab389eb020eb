#![allow(dead_code)]

use bellviol_core::linalg::{self, CMatrix};
use bellviol_core::rng::Rng;
use bellviol_core::{BellFunctional, Observable, ObservableSet};

pub fn random_hermitian(dim: usize, rng: &mut Rng) -> CMatrix {
    linalg::hermitian_part(&linalg::complex_gaussian_matrix(dim, dim, rng))
}

/// Hermitian matrix rescaled to operator norm `≤ 1`.
pub fn random_contraction(dim: usize, rng: &mut Rng) -> Observable {
    let h = random_hermitian(dim, rng);
    let n = linalg::op_norm(&h).max(1e-12);
    Observable::new(h.unscale(n * (1.0 + 1e-12))).unwrap()
}

pub fn random_observables(t: &BellFunctional, dims: &[usize], rng: &mut Rng) -> ObservableSet {
    let parties = t
        .settings()
        .iter()
        .zip(dims)
        .map(|(&m, &d)| (0..m).map(|_| random_contraction(d, rng)).collect())
        .collect();
    ObservableSet::new(parties).unwrap()
}

/// Exhaustive maximum of `|Σ T_x Π s|` over all sign assignments.
pub fn brute_force_classical(t: &BellFunctional) -> f64 {
    let total: usize = t.settings().iter().sum();
    assert!(total <= 22);
    let strides = t.strides();
    let mut best: f64 = 0.0;
    for mask in 0u64..1 << total {
        let mut offs = Vec::new();
        let mut o = 0;
        for &m in t.settings() {
            offs.push(o);
            o += m;
        }
        let sign = |party: usize, s: usize| if mask >> (offs[party] + s) & 1 == 1 { -1.0 } else { 1.0 };
        let v: f64 = t
            .coeffs()
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                let mut p = c;
                for (party, (&st, &m)) in strides.iter().zip(t.settings()).enumerate() {
                    p *= sign(party, k / st % m);
                }
                p
            })
            .sum();
        best = best.max(v.abs());
    }
    best
}
