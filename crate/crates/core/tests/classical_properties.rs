mod common;

use bellviol_core::classical_value::{classical_value_exact, classical_value_heuristic, evaluate_strategy, Method};
use bellviol_core::functionals::{random_gaussian, random_gaussian_shape};
use bellviol_core::BellFunctional;
use proptest::prelude::*;

fn small_shape() -> impl Strategy<Value = Vec<usize>> {
    (2usize..=4).prop_flat_map(|n| prop::collection::vec(1usize..=3, n))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_matches_exhaustive_oracle(settings in small_shape(), seed in any::<u64>()) {
        let t = random_gaussian_shape(settings, seed).unwrap();
        let r = classical_value_exact(&t).unwrap();
        prop_assert!(close(r.value, common::brute_force_classical(&t)));
        prop_assert!((evaluate_strategy(&t, &r.strategy).unwrap().abs() - r.value).abs() <= 1e-12 * r.value.max(1.0));
        prop_assert_eq!(r.method, Method::Exact);
    }

    #[test]
    fn exact_is_invariant_under_negation(settings in small_shape(), seed in any::<u64>()) {
        let t = random_gaussian_shape(settings, seed).unwrap();
        let neg = t.scaled(-1.0).unwrap();
        prop_assert!(close(classical_value_exact(&t).unwrap().value, classical_value_exact(&neg).unwrap().value));
    }

    #[test]
    fn exact_is_homogeneous(settings in small_shape(), seed in any::<u64>(), factor in -5.0f64..5.0) {
        prop_assume!(factor.abs() > 1e-3);
        let t = random_gaussian_shape(settings, seed).unwrap();
        let v = classical_value_exact(&t).unwrap().value;
        let vs = classical_value_exact(&t.scaled(factor).unwrap()).unwrap().value;
        prop_assert!(close(vs, factor.abs() * v));
    }

    #[test]
    fn exact_is_invariant_under_party_permutation(settings in small_shape(), seed in any::<u64>(), rot in 0usize..4) {
        let t = random_gaussian_shape(settings, seed).unwrap();
        let n = t.num_parties();
        let perm: Vec<usize> = (0..n).map(|k| (k + rot) % n).rev().collect();
        let p = t.permute_parties(&perm).unwrap();
        prop_assert!(close(classical_value_exact(&t).unwrap().value, classical_value_exact(&p).unwrap().value));
    }

    #[test]
    fn exact_is_invariant_under_setting_permutation(settings in small_shape(), seed in any::<u64>(), party in 0usize..4) {
        let t = random_gaussian_shape(settings, seed).unwrap();
        let party = party % t.num_parties();
        let m = t.settings()[party];
        let perm: Vec<usize> = (0..m).rev().collect();
        let p = t.permute_settings(party, &perm).unwrap();
        prop_assert!(close(classical_value_exact(&t).unwrap().value, classical_value_exact(&p).unwrap().value));
    }

    #[test]
    fn heuristic_never_exceeds_exact(settings in small_shape(), seed in any::<u64>()) {
        let t = random_gaussian_shape(settings, seed).unwrap();
        let e = classical_value_exact(&t).unwrap().value;
        let h = classical_value_heuristic(&t, 4, seed).unwrap();
        prop_assert!(h.value <= e * (1.0 + 1e-12) + 1e-12);
        prop_assert_eq!(h.method, Method::Heuristic);
    }
}

#[test]
fn heuristic_equals_exact_on_small_instances() {
    // Σ_{j≥2} M_j ≤ 12 with 32 restarts
    let shapes: [(usize, usize); 4] = [(2, 6), (3, 4), (3, 6), (4, 4)];
    let mut total = 0;
    let mut equal = 0;
    for (parties, m) in shapes {
        for s in 0..25u64 {
            let t = random_gaussian(parties, m, 1000 + s).unwrap();
            let e = classical_value_exact(&t).unwrap().value;
            let h = classical_value_heuristic(&t, 32, s).unwrap().value;
            total += 1;
            if (e - h).abs() <= 1e-10 * e {
                equal += 1;
            }
        }
    }
    assert!(equal * 100 >= total * 95, "{equal}/{total}");
}

#[test]
fn deterministic_across_runs() {
    let t = random_gaussian_shape(vec![4, 5, 3, 4], 77).unwrap();
    let a = classical_value_exact(&t).unwrap();
    let b = classical_value_exact(&t).unwrap();
    assert_eq!(a, b);
    let h1 = classical_value_heuristic(&t, 8, 3).unwrap();
    let h2 = classical_value_heuristic(&t, 8, 3).unwrap();
    assert_eq!(h1, h2);
}

#[test]
fn single_coefficient_value_is_its_magnitude() {
    let t = BellFunctional::new(vec![1, 1], vec![-2.5]).unwrap();
    assert_eq!(classical_value_exact(&t).unwrap().value, 2.5);
}
