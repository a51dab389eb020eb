//! Communication-complexity game built on a Bell functional.
//!
//! Each party `i` receives `(x_i, y_i)` with `x ~ |T_x| / Σ|T|` and `y_i`
//! uniform in {±1}. The goal is `F(x, y) = Π_i y_i sign(T_x)`. Every party
//! broadcasts `m_i = y_i a_i`, where `a_i` is its ±1 outcome for setting
//! `x_i`, and everyone outputs `Π m_i`; the round succeeds iff
//! `Π a_i = sign(T_x)`. Hence `P = ½ + Σ_x T_x E_x / (2 Σ|T|)` where `E_x`
//! is the strategy's correlation at `x`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical_value::{classical_value_exact, evaluate_strategy, SignStrategy};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::rng::stream_rng;
use crate::tensor_core::{apply_local, contracted_value, BellFunctional, Observable, ObservableSet, QuantumState};

const BLOCK_ROUNDS: u64 = 1 << 14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Strategy {
    Classical {
        signs: SignStrategy,
    },
    Quantum {
        state: QuantumState,
        observables: ObservableSet,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    pub functional: BellFunctional,
    /// `|T_x| / Σ|T|` in row-major order of `x`.
    pub distribution: Vec<f64>,
    pub strategy: Strategy,
}

impl GameSpec {
    /// Quantum observables are replaced by their eigen-signs so that each
    /// measurement has two outcomes.
    pub fn new(functional: BellFunctional, strategy: Strategy) -> Result<Self> {
        let strategy = match strategy {
            Strategy::Classical { signs } => {
                signs.check_matches(&functional)?;
                Strategy::Classical { signs }
            }
            Strategy::Quantum { state, observables } => {
                observables.check_matches(&functional)?;
                if observables.dims() != state.dims() {
                    return Err(Error::ShapeMismatch(format!(
                        "observable dims {:?} do not match state dims {:?}",
                        observables.dims(),
                        state.dims()
                    )));
                }
                Strategy::Quantum {
                    state,
                    observables: binarize(&observables),
                }
            }
        };
        let l1 = functional.l1_norm();
        let distribution = functional.coeffs().iter().map(|c| c.abs() / l1).collect();
        Ok(Self {
            functional,
            distribution,
            strategy,
        })
    }

    /// Classical spec playing an exact optimal sign strategy.
    pub fn classical_optimal(functional: BellFunctional) -> Result<Self> {
        let best = classical_value_exact(&functional)?;
        Self::new(functional, Strategy::Classical { signs: best.strategy })
    }

    /// `Σ_x T_x E_x`.
    pub fn correlation(&self) -> Result<f64> {
        match &self.strategy {
            Strategy::Classical { signs } => evaluate_strategy(&self.functional, signs),
            Strategy::Quantum { state, observables } => contracted_value(&self.functional, state, observables),
        }
    }
}

/// Replace every observable by the eigen-sign of its matrix (zero → +1).
pub fn binarize(obs: &ObservableSet) -> ObservableSet {
    let parties = obs
        .parties()
        .iter()
        .map(|list| {
            list.iter()
                .map(|a| Observable::new_unchecked(linalg::eigen_sign(a.matrix()).0))
                .collect()
        })
        .collect();
    ObservableSet::new(parties).expect("shapes unchanged")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameResult {
    pub success_probability: f64,
    /// `√(P(1−P)/rounds)`; zero for exact results.
    pub standard_error: f64,
    pub rounds: u64,
    pub successes: u64,
    pub information_gain: f64,
    pub exact: bool,
    pub seed: Option<u64>,
    /// Per party and setting: `[times the outcome was +1, times the setting was used]`.
    pub marginal_tallies: Vec<Vec<[u64; 2]>>,
}

/// `1 − H(P)` with `0·log 0 = 0`.
pub fn information_gain(p: f64) -> f64 {
    let term = |q: f64| if q > 0.0 { q * q.log2() } else { 0.0 };
    1.0 + term(p) + term(1.0 - p)
}

pub fn exact_success(spec: &GameSpec) -> Result<GameResult> {
    let v = spec.correlation()?;
    let p = 0.5 + v / (2.0 * spec.functional.l1_norm());
    Ok(GameResult {
        success_probability: p,
        standard_error: 0.0,
        rounds: 0,
        successes: 0,
        information_gain: information_gain(p),
        exact: true,
        seed: None,
        marginal_tallies: Vec::new(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioCheck {
    /// `(P_K − ½) / (P − ½)`
    pub ratio: f64,
    /// `V_quantum / V_classical`
    pub value_ratio: f64,
}

pub fn ratio_check(classical: &GameSpec, quantum: &GameSpec) -> Result<RatioCheck> {
    if classical.functional != quantum.functional {
        return Err(Error::InvalidParameter(
            "the two games are built on different functionals".into(),
        ));
    }
    let p = exact_success(classical)?.success_probability;
    let pk = exact_success(quantum)?.success_probability;
    let vc = classical.correlation()?;
    if (p - 0.5).abs() < 1e-15 || vc == 0.0 {
        return Err(Error::DegenerateRatio);
    }
    Ok(RatioCheck {
        ratio: (pk - 0.5) / (p - 0.5),
        value_ratio: quantum.correlation()? / vc,
    })
}

/// Outcome table per input: `outcomes[x]` lists the probability of each
/// joint outcome, bit `j` (most significant = party 0) set meaning `a_j = −1`.
fn outcome_tables(spec: &GameSpec) -> Vec<Option<Vec<f64>>> {
    let t = &spec.functional;
    let n = t.num_parties();
    let mut tables = Vec::with_capacity(t.coeffs().len());
    crate::tensor_core::for_each_index(t.settings(), |x| {
        let k = tables.len();
        if t.coeffs()[k] == 0.0 {
            tables.push(None);
            return;
        }
        let probs = match &spec.strategy {
            Strategy::Classical { signs } => {
                let mut out = vec![0.0; 1 << n];
                let mut idx = 0usize;
                for (j, &xj) in x.iter().enumerate() {
                    idx = idx << 1 | usize::from(signs.signs()[j][xj] < 0);
                }
                out[idx] = 1.0;
                out
            }
            Strategy::Quantum { state, observables } => quantum_outcomes(state, observables, x),
        };
        tables.push(Some(probs));
    });
    tables
}

fn quantum_outcomes(state: &QuantumState, obs: &ObservableSet, x: &[usize]) -> Vec<f64> {
    let dims = state.dims().to_vec();
    let n = dims.len();
    // P_± = (𝟙 ± A)/2
    let projectors: Vec<[CMatrix; 2]> = (0..n)
        .map(|j| {
            let a = obs.party(j)[x[j]].matrix();
            let id = linalg::identity(dims[j]);
            [(&id + a).scale(0.5), (&id - a).scale(0.5)]
        })
        .collect();
    let mut probs = vec![0.0; 1 << n];
    for (w, psi) in state.components() {
        for (outcome, p) in probs.iter_mut().enumerate() {
            let mut v: CVector = psi.clone();
            for (j, proj) in projectors.iter().enumerate() {
                let bit = outcome >> (n - 1 - j) & 1;
                v = apply_local(&v, &dims, j, &proj[bit]);
            }
            *p += w * psi.dotc(&v).re;
        }
    }
    probs.iter_mut().for_each(|p| *p = p.max(0.0));
    probs
}

/// Monte Carlo play of `rounds` rounds, split into fixed-size blocks with
/// independent seeded streams.
pub fn simulate_game(spec: &GameSpec, rounds: u64, seed: u64) -> Result<GameResult> {
    if rounds == 0 {
        return Err(Error::InvalidParameter("rounds must be ≥ 1".into()));
    }
    let t = &spec.functional;
    let n = t.num_parties();
    let settings = t.settings().to_vec();
    let strides = t.strides();
    let x_dist = WeightedIndex::new(&spec.distribution)
        .map_err(|e| Error::InvalidParameter(format!("input distribution: {e}")))?;
    let tables = outcome_tables(spec);
    let samplers: Vec<Option<WeightedIndex<f64>>> = tables
        .iter()
        .map(|t| t.as_ref().map(|p| WeightedIndex::new(p)).transpose())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Consistency(format!("outcome distribution: {e}")))?;

    let blocks = rounds.div_ceil(BLOCK_ROUNDS);
    let tallies: Vec<(u64, Vec<Vec<[u64; 2]>>)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b);
            let len = BLOCK_ROUNDS.min(rounds - b * BLOCK_ROUNDS);
            let mut marg: Vec<Vec<[u64; 2]>> = settings.iter().map(|&m| vec![[0, 0]; m]).collect();
            let mut wins = 0u64;
            for _ in 0..len {
                let xi = x_dist.sample(&mut rng);
                let outcome = samplers[xi].as_ref().expect("positive weight").sample(&mut rng);
                let target = t.coeffs()[xi].signum();
                let mut out = 1.0;
                let mut f = target;
                for j in 0..n {
                    let xj = xi / strides[j] % settings[j];
                    let a = if outcome >> (n - 1 - j) & 1 == 1 { -1.0 } else { 1.0 };
                    let y = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    out *= y * a;
                    f *= y;
                    marg[j][xj][1] += 1;
                    if a > 0.0 {
                        marg[j][xj][0] += 1;
                    }
                }
                if out == f {
                    wins += 1;
                }
            }
            (wins, marg)
        })
        .collect();

    let mut successes = 0;
    let mut marginal: Vec<Vec<[u64; 2]>> = settings.iter().map(|&m| vec![[0, 0]; m]).collect();
    for (w, m) in tallies {
        successes += w;
        for (acc, part) in marginal.iter_mut().zip(m) {
            for (a, p) in acc.iter_mut().zip(part) {
                a[0] += p[0];
                a[1] += p[1];
            }
        }
    }
    let p = successes as f64 / rounds as f64;
    Ok(GameResult {
        success_probability: p,
        standard_error: (p * (1.0 - p) / rounds as f64).sqrt(),
        rounds,
        successes,
        information_gain: information_gain(p),
        exact: false,
        seed: Some(seed),
        marginal_tallies: marginal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals;
    use std::f64::consts::SQRT_2;

    fn quantum(t: BellFunctional, (state, observables): (QuantumState, ObservableSet)) -> GameSpec {
        GameSpec::new(t, Strategy::Quantum { state, observables }).unwrap()
    }

    #[test]
    fn information_gain_values() {
        assert!(information_gain(0.5).abs() < 1e-15);
        assert_eq!(information_gain(1.0), 1.0);
        assert_eq!(information_gain(0.0), 1.0);
        // 1 − H(0.75), H(0.75) = 0.811278124459...
        assert!((information_gain(0.75) - 0.188_721_875_540_867).abs() < 1e-12);
    }

    #[test]
    fn mermin_exact_probabilities() {
        let c = GameSpec::classical_optimal(functionals::mermin3()).unwrap();
        assert!((exact_success(&c).unwrap().success_probability - 0.75).abs() < 1e-15);
        let q = quantum(functionals::mermin3(), functionals::mermin3_witness());
        assert!((exact_success(&q).unwrap().success_probability - 1.0).abs() < 1e-12);
        let r = ratio_check(&c, &q).unwrap();
        assert!((r.ratio - 2.0).abs() < 1e-9);
        assert!((r.ratio - r.value_ratio).abs() < 1e-9);
    }

    #[test]
    fn zero_correlation_is_a_coin_flip() {
        let t = BellFunctional::new(vec![2, 2], vec![1.0, -1.0, 0.0, 0.0]).unwrap();
        let spec = GameSpec::new(t.clone(), Strategy::Classical { signs: SignStrategy::all_plus(&t) }).unwrap();
        assert!((exact_success(&spec).unwrap().success_probability - 0.5).abs() < 1e-15);
        assert!(matches!(ratio_check(&spec, &spec), Err(Error::DegenerateRatio)));
    }

    #[test]
    fn chsh_as_tripartite() {
        let t = functionals::chsh().with_trivial_party();
        let c = GameSpec::classical_optimal(t.clone()).unwrap();
        let (state, obs) = functionals::chsh_witness();
        let state = QuantumState::pure(vec![2, 2, 1], state.as_pure().unwrap().clone()).unwrap();
        let mut parties = obs.parties().to_vec();
        parties.push(vec![Observable::identity(1)]);
        let q = quantum(t, (state, ObservableSet::new(parties).unwrap()));
        assert!((ratio_check(&c, &q).unwrap().ratio - SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn single_coefficient_ratio_one() {
        let t = BellFunctional::new(vec![1, 1, 1], vec![-3.0]).unwrap();
        let c = GameSpec::classical_optimal(t.clone()).unwrap();
        let q = quantum(
            t,
            (
                crate::bounds_lab::ghz_state(2, 3).unwrap(),
                ObservableSet::new(vec![vec![Observable::new(-linalg::identity(2)).unwrap()], vec![Observable::identity(2)], vec![Observable::identity(2)]]).unwrap(),
            ),
        );
        assert!((ratio_check(&c, &q).unwrap().ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn simulated_quantum_mermin_never_fails() {
        let q = quantum(functionals::mermin3(), functionals::mermin3_witness());
        let r = simulate_game(&q, 100_000, 5).unwrap();
        assert_eq!(r.successes, 100_000);
        assert_eq!(r.success_probability, 1.0);
    }

    #[test]
    fn simulated_classical_mermin() {
        let c = GameSpec::classical_optimal(functionals::mermin3()).unwrap();
        let r = simulate_game(&c, 100_000, 9).unwrap();
        assert!((r.success_probability - 0.75).abs() <= 3.0 * r.standard_error);
        assert!(simulate_game(&c, 0, 9).is_err());
    }

    #[test]
    fn simulation_is_deterministic() {
        let c = GameSpec::classical_optimal(functionals::chsh()).unwrap();
        assert_eq!(simulate_game(&c, 40_000, 3).unwrap(), simulate_game(&c, 40_000, 3).unwrap());
    }

    #[test]
    fn binarize_interior_spectrum() {
        let a = Observable::new(linalg::pauli_z().scale(0.3)).unwrap();
        let set = ObservableSet::new(vec![vec![a]]).unwrap();
        let b = binarize(&set);
        assert!(linalg::max_abs_diff(b.party(0)[0].matrix(), &linalg::pauli_z()) < 1e-12);
    }
}
