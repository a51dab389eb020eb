mod common;

use bellviol_core::bounds_lab::{sqrt_d_envelope, DEFAULT_ENVELOPE_C, GROTHENDIECK_UPPER};
use bellviol_core::functionals::{self, random_gaussian_shape};
use bellviol_core::linalg::{self, CMatrix};
use bellviol_core::quantum_value::{optimal_observable_step, optimal_state_step, seesaw, SeesawConfig, MONOTONE_RTOL};
use bellviol_core::rng::stream_rng;
use bellviol_core::tensor_core::DEFAULT_BUDGET_DIM;
use proptest::prelude::*;
use std::f64::consts::PI;

/// `max Re tr(E A)` over the extreme Hermitian contractions of `M_2`:
/// `±𝟙` and `n·σ` with `n` on a (θ, φ) grid.
fn observable_grid_oracle(e: &CMatrix) -> f64 {
    let h = linalg::hermitian_part(e);
    let val = |a: &CMatrix| (&h * a).trace().re;
    let mut best = val(&linalg::identity(2)).max(-val(&linalg::identity(2)));
    let steps = 200;
    for i in 0..=steps {
        let th = PI * i as f64 / steps as f64;
        for j in 0..2 * steps {
            let ph = PI * j as f64 / steps as f64;
            let a = linalg::pauli_x().scale(th.sin() * ph.cos())
                + linalg::pauli_y().scale(th.sin() * ph.sin())
                + linalg::pauli_z().scale(th.cos());
            best = best.max(val(&a));
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn observable_step_matches_grid(seed in any::<u64>()) {
        let mut rng = stream_rng(seed, 0);
        let e = linalg::complex_gaussian_matrix(2, 2, &mut rng);
        let (a, v) = optimal_observable_step(&e).unwrap();
        let grid = observable_grid_oracle(&e);
        let scale = linalg::op_norm(&e).max(1.0);
        prop_assert!(v >= grid - 1e-12 * scale);
        prop_assert!(v <= grid + 1e-3 * scale);
        prop_assert!(((&linalg::hermitian_part(&e) * a.matrix()).trace().re - v).abs() <= 1e-12 * scale);
        prop_assert!(a.is_dichotomic(1e-10));
    }

    #[test]
    fn state_step_value_is_top_eigenvalue(seed in any::<u64>()) {
        let mut rng = stream_rng(seed, 1);
        let b = common::random_hermitian(6, &mut rng);
        let (state, v) = optimal_state_step(&b, &[2, 3]).unwrap();
        let psi = state.as_pure().unwrap();
        prop_assert!((psi.dotc(&(&b * psi)).re - v).abs() <= 1e-10);
        let e = linalg::eigh(&b);
        prop_assert!((e.values[0] - v).abs() <= 1e-10);
    }

    #[test]
    fn seesaw_reports_are_certificates(seed in any::<u64>(), m in 2usize..=3, d in 2usize..=3) {
        let t = random_gaussian_shape(vec![m, m], seed).unwrap();
        let mut cfg = SeesawConfig::new(vec![d, d], 3, seed);
        cfg.max_iters = 300;
        let r = seesaw(&t, &cfg, None).unwrap();
        let v = r.verify(DEFAULT_BUDGET_DIM).unwrap();
        prop_assert!((v - r.quantum_value).abs() <= 1e-9 * v.abs().max(1.0));
        prop_assert!(r.ratio >= 1.0 - 1e-9);
        for tr in &r.traces {
            prop_assert!(tr.monotone);
            for w in tr.objective.windows(2) {
                prop_assert!(w[1] >= w[0] - MONOTONE_RTOL * w[0].abs().max(1.0));
            }
        }
    }
}

#[test]
fn bipartite_ratios_stay_below_grothendieck() {
    for k in 0..24u64 {
        let m = 2 + (k % 4) as usize;
        let d = 2 + (k % 3) as usize;
        let t = random_gaussian_shape(vec![m, m], 500 + k).unwrap();
        let r = seesaw(&t, &SeesawConfig::new(vec![d, d], 4, k), None).unwrap();
        assert!(r.ratio <= GROTHENDIECK_UPPER + 1e-6, "instance {k}: {}", r.ratio);
    }
}

#[test]
fn mermin_free_seesaw_reaches_four() {
    let r = seesaw(&functionals::mermin3(), &SeesawConfig::new(vec![2, 2, 2], 12, 5), None).unwrap();
    assert!(r.quantum_value >= 4.0 - 1e-6, "{}", r.quantum_value);
    assert!((r.ratio - 2.0).abs() < 1e-6);
    assert!(sqrt_d_envelope(&r, DEFAULT_ENVELOPE_C).pass);
}

#[test]
fn mermin4_witness_value() {
    let (state, obs) = functionals::mermin4_witness();
    let v = bellviol_core::tensor_core::contracted_value(&functionals::mermin4(), &state, &obs).unwrap();
    assert!((v - 8.0).abs() < 1e-12);
}

#[test]
fn seesaw_is_deterministic() {
    let t = random_gaussian_shape(vec![3, 2, 2], 9).unwrap();
    let cfg = SeesawConfig::new(vec![2, 2, 2], 4, 21);
    let a = seesaw(&t, &cfg, None).unwrap();
    let b = seesaw(&t, &cfg, None).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn report_json_round_trip() {
    let r = seesaw(&functionals::chsh(), &SeesawConfig::new(vec![2, 2], 2, 3), None).unwrap();
    let s = serde_json::to_string(&r).unwrap();
    let back: bellviol_core::quantum_value::ViolationReport = serde_json::from_str(&s).unwrap();
    assert_eq!(back, r);
    assert!(back.verify(DEFAULT_BUDGET_DIM).is_ok());
}
