//! Local-hidden-variable value `||T|| = sup |Σ_i T_i Π_j s^j_{i_j}|` over
//! deterministic ±1 strategies.
//!
//! The party with the most settings is eliminated analytically: for fixed
//! signs of the others, its best response is the sign pattern of the
//! contracted vector `v`, giving `Σ|v|`. The remaining sign bits are
//! enumerated in Gray-code order, so each step updates `v` by one slice of
//! the tensor.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::tensor_core::{strides, BellFunctional};

/// Largest number of enumerated sign bits accepted by the exact solver.
pub const ENUMERATION_BUDGET_BITS: usize = 28;

/// High-order bits fixed per parallel chunk; independent of the thread count
/// so results do not depend on scheduling.
const PREFIX_BITS: usize = 8;

/// Recompute the contracted vector from scratch this often to cap drift.
const RESYNC_INTERVAL: u64 = 1 << 12;

const TIE_RTOL: f64 = 1e-12;

/// One ±1 vector per party, indexed by setting.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<i8>>", into = "Vec<Vec<i8>>")]
pub struct SignStrategy {
    signs: Vec<Vec<i8>>,
}

impl SignStrategy {
    pub fn new(signs: Vec<Vec<i8>>) -> Result<Self> {
        if signs.iter().flatten().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidParameter(
                "sign strategy entries must be exactly ±1".into(),
            ));
        }
        Ok(Self { signs })
    }

    /// All signs +1, shaped like `t`.
    pub fn all_plus(t: &BellFunctional) -> Self {
        Self {
            signs: t.settings().iter().map(|&m| vec![1; m]).collect(),
        }
    }

    pub fn signs(&self) -> &[Vec<i8>] {
        &self.signs
    }

    pub fn check_matches(&self, t: &BellFunctional) -> Result<()> {
        let lens: Vec<usize> = self.signs.iter().map(Vec::len).collect();
        if lens != t.settings() {
            return Err(Error::ShapeMismatch(format!(
                "strategy shape {lens:?} does not match settings {:?}",
                t.settings()
            )));
        }
        Ok(())
    }
}

impl TryFrom<Vec<Vec<i8>>> for SignStrategy {
    type Error = Error;
    fn try_from(v: Vec<Vec<i8>>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SignStrategy> for Vec<Vec<i8>> {
    fn from(s: SignStrategy) -> Self {
        s.signs
    }
}

/// Signed correlation `Σ_i T_i Π_j s^j_{i_j}`.
pub fn evaluate_strategy(t: &BellFunctional, s: &SignStrategy) -> Result<f64> {
    s.check_matches(t)?;
    let mut total = 0.0;
    let mut k = 0;
    crate::tensor_core::for_each_index(t.settings(), |idx| {
        let sign: i32 = idx
            .iter()
            .enumerate()
            .map(|(j, &i)| s.signs[j][i] as i32)
            .product();
        total += sign as f64 * t.coeffs()[k];
        k += 1;
    });
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Heuristic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalResult {
    pub value: f64,
    pub strategy: SignStrategy,
    pub method: Method,
    pub nodes_explored: u64,
}

/// Sign bookkeeping with one party eliminated.
struct Reduced<'a> {
    t: &'a BellFunctional,
    elim: usize,
    strides: Vec<usize>,
    /// (party, setting) for every enumerated bit, in party-then-setting order.
    positions: Vec<(usize, usize)>,
    /// First bit position of each party (unused for `elim`).
    base: Vec<usize>,
}

impl<'a> Reduced<'a> {
    fn new(t: &'a BellFunctional) -> Self {
        let settings = t.settings();
        let mut elim = 0;
        for (j, &m) in settings.iter().enumerate() {
            if m > settings[elim] {
                elim = j;
            }
        }
        let mut positions = Vec::new();
        let mut base = vec![0; settings.len()];
        for (j, &m) in settings.iter().enumerate() {
            base[j] = positions.len();
            if j != elim {
                positions.extend((0..m).map(|k| (j, k)));
            }
        }
        Self {
            t,
            elim,
            strides: strides(settings),
            positions,
            base,
        }
    }

    fn bits(&self) -> usize {
        self.positions.len()
    }

    fn m_elim(&self) -> usize {
        self.t.settings()[self.elim]
    }

    /// `v[i] = Σ T[.., i at elim, ..] Π signs` from scratch.
    fn contract(&self, signs: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.m_elim()];
        let mut k = 0;
        crate::tensor_core::for_each_index(self.t.settings(), |idx| {
            let mut p = 1.0;
            for (j, &i) in idx.iter().enumerate() {
                if j != self.elim {
                    p *= signs[self.base[j] + i];
                }
            }
            v[idx[self.elim]] += p * self.t.coeffs()[k];
            k += 1;
        });
        v
    }

    /// Contribution of bit `pos` to `v` with that bit's own sign removed.
    fn slice(&self, signs: &[f64], pos: usize, out: &mut [f64]) {
        let (party, setting) = self.positions[pos];
        let settings = self.t.settings();
        let rest: Vec<usize> = (0..settings.len())
            .filter(|&j| j != party && j != self.elim)
            .collect();
        let rest_shape: Vec<usize> = rest.iter().map(|&j| settings[j]).collect();
        out.iter_mut().for_each(|x| *x = 0.0);
        let fixed = setting * self.strides[party];
        let es = self.strides[self.elim];
        crate::tensor_core::for_each_index(&rest_shape, |idx| {
            let mut p = 1.0;
            let mut off = fixed;
            for (r, &i) in rest.iter().zip(idx) {
                p *= signs[self.base[*r] + i];
                off += i * self.strides[*r];
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o += p * self.t.coeffs()[off + i * es];
            }
        });
    }

    /// Signs per bit for a key: the most significant bit is position 0 and a
    /// set bit means +1, so the smallest key is the lexicographically
    /// smallest sign vector with −1 < +1.
    fn signs_of_key(&self, key: u64) -> Vec<f64> {
        let b = self.bits();
        (0..b)
            .map(|p| if key >> (b - 1 - p) & 1 == 1 { 1.0 } else { -1.0 })
            .collect()
    }

    fn strategy(&self, signs: &[f64]) -> SignStrategy {
        let v = self.contract(signs);
        let settings = self.t.settings();
        let out = (0..settings.len())
            .map(|j| {
                if j == self.elim {
                    v.iter().map(|&x| if x >= 0.0 { 1 } else { -1 }).collect()
                } else {
                    (0..settings[j])
                        .map(|k| if signs[self.base[j] + k] > 0.0 { 1 } else { -1 })
                        .collect()
                }
            })
            .collect();
        SignStrategy { signs: out }
    }

    fn result(&self, signs: &[f64], method: Method, nodes: u64) -> Result<ClassicalResult> {
        let strategy = self.strategy(signs);
        let value = evaluate_strategy(self.t, &strategy)?.abs();
        Ok(ClassicalResult {
            value,
            strategy,
            method,
            nodes_explored: nodes,
        })
    }
}

#[derive(Clone, Copy)]
struct Best {
    value: f64,
    key: u64,
}

impl Best {
    fn offer(&mut self, value: f64, key: u64, tol: f64) {
        if value > self.value + tol || ((value - self.value).abs() <= tol && key < self.key) {
            self.value = value;
            self.key = key;
        }
    }
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Exact `||T||` by exhaustive enumeration.
pub fn classical_value_exact(t: &BellFunctional) -> Result<ClassicalResult> {
    let red = Reduced::new(t);
    let bits = red.bits();
    if bits > ENUMERATION_BUDGET_BITS {
        return Err(Error::EnumerationBudget {
            bits,
            budget: ENUMERATION_BUDGET_BITS,
        });
    }
    let tol = TIE_RTOL * t.l1_norm();
    let prefix_bits = bits.min(PREFIX_BITS);
    let low_bits = bits - prefix_bits;

    let chunks: Vec<Best> = (0..1u64 << prefix_bits)
        .into_par_iter()
        .map(|prefix| search_chunk(&red, prefix, low_bits, tol))
        .collect();
    let mut best = chunks[0];
    for c in &chunks[1..] {
        best.offer(c.value, c.key, tol);
    }
    red.result(&red.signs_of_key(best.key), Method::Exact, 1u64 << bits)
}

fn search_chunk(red: &Reduced, prefix: u64, low_bits: usize, tol: f64) -> Best {
    let bits = red.bits();
    let mut key = prefix << low_bits;
    let mut signs = red.signs_of_key(key);
    let mut v = red.contract(&signs);
    let mut best = Best {
        value: l1(&v),
        key,
    };
    let mut delta = vec![0.0; v.len()];
    for step in 1..(1u64 << low_bits) {
        let bit = step.trailing_zeros() as usize;
        let pos = bits - 1 - bit;
        red.slice(&signs, pos, &mut delta);
        let old = signs[pos];
        for (x, d) in v.iter_mut().zip(&delta) {
            *x -= 2.0 * old * d;
        }
        signs[pos] = -old;
        key ^= 1 << bit;
        if step % RESYNC_INTERVAL == 0 {
            v = red.contract(&signs);
        }
        best.offer(l1(&v), key, tol);
    }
    best
}

/// Multi-start single-flip local search. A lower bound on `||T||` that
/// needs no enumeration budget.
pub fn classical_value_heuristic(t: &BellFunctional, restarts: usize, seed: u64) -> Result<ClassicalResult> {
    if restarts == 0 {
        return Err(Error::InvalidParameter("restarts must be ≥ 1".into()));
    }
    let red = Reduced::new(t);
    let tol = TIE_RTOL * t.l1_norm();
    let runs: Vec<(f64, Vec<f64>, u64)> = (0..restarts)
        .into_par_iter()
        .map(|r| local_search(&red, seed, r as u64, tol))
        .collect();
    let mut best = 0;
    for (k, run) in runs.iter().enumerate() {
        if run.0 > runs[best].0 + tol {
            best = k;
        }
    }
    let nodes = runs.iter().map(|r| r.2).sum();
    red.result(&runs[best].1, Method::Heuristic, nodes)
}

fn local_search(red: &Reduced, seed: u64, restart: u64, tol: f64) -> (f64, Vec<f64>, u64) {
    use rand::Rng;
    let mut rng = stream_rng(seed, restart);
    let mut signs: Vec<f64> = (0..red.bits())
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let mut v = red.contract(&signs);
    let mut value = l1(&v);
    let mut delta = vec![0.0; v.len()];
    let mut nodes = 1u64;
    loop {
        let mut best: Option<(usize, f64)> = None;
        for pos in 0..red.bits() {
            red.slice(&signs, pos, &mut delta);
            let s = signs[pos];
            let cand: f64 = v.iter().zip(&delta).map(|(x, d)| (x - 2.0 * s * d).abs()).sum();
            nodes += 1;
            if cand > best.map_or(value, |b| b.1) + tol {
                best = Some((pos, cand));
            }
        }
        let Some((pos, _)) = best else { break };
        red.slice(&signs, pos, &mut delta);
        let s = signs[pos];
        for (x, d) in v.iter_mut().zip(&delta) {
            *x -= 2.0 * s * d;
        }
        signs[pos] = -s;
        v = red.contract(&signs);
        value = l1(&v);
    }
    (value, signs, nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals;

    /// Every sign of every party, no elimination.
    fn brute_force(t: &BellFunctional) -> f64 {
        let total_bits: usize = t.settings().iter().sum();
        let mut best = 0.0f64;
        for mask in 0u64..(1 << total_bits) {
            let mut bit = 0;
            let signs = t
                .settings()
                .iter()
                .map(|&m| {
                    (0..m)
                        .map(|_| {
                            let s = if mask >> bit & 1 == 1 { -1 } else { 1 };
                            bit += 1;
                            s
                        })
                        .collect()
                })
                .collect();
            let s = SignStrategy::new(signs).unwrap();
            best = best.max(evaluate_strategy(t, &s).unwrap().abs());
        }
        best
    }

    #[test]
    fn chsh_is_two() {
        let t = functionals::chsh();
        assert_eq!(brute_force(&t), 2.0);
        let r = classical_value_exact(&t).unwrap();
        assert_eq!(r.value, 2.0);
        assert_eq!(r.method, Method::Exact);
        assert_eq!(evaluate_strategy(&t, &r.strategy).unwrap().abs(), 2.0);
    }

    #[test]
    fn mermin3_is_two() {
        let t = functionals::mermin3();
        assert_eq!(brute_force(&t), 2.0);
        assert_eq!(classical_value_exact(&t).unwrap().value, 2.0);
    }

    #[test]
    fn mermin4_is_four() {
        let t = functionals::mermin4();
        assert_eq!(brute_force(&t), 4.0);
        assert_eq!(classical_value_exact(&t).unwrap().value, 4.0);
    }

    #[test]
    fn single_coefficient() {
        let t = BellFunctional::new(vec![2, 3], vec![0.0, 0.0, 0.0, 0.0, -2.5, 0.0]).unwrap();
        assert_eq!(classical_value_exact(&t).unwrap().value, 2.5);
        assert_eq!(classical_value_heuristic(&t, 1, 0).unwrap().value, 2.5);
    }

    #[test]
    fn matches_brute_force_on_random_functionals() {
        for seed in 0..20 {
            let shape = vec![1 + seed as usize % 3, 2 + seed as usize % 2, 2];
            let t = functionals::random_gaussian_shape(shape, seed).unwrap();
            let exact = classical_value_exact(&t).unwrap();
            let oracle = brute_force(&t);
            assert!((exact.value - oracle).abs() <= 1e-12 * t.l1_norm(), "seed {seed}");
        }
    }

    #[test]
    fn gray_code_path_with_resync_on_product_tensor() {
        // ||u ⊗ v ⊗ w|| = |u|_1 |v|_1 |w|_1; 22 enumerated bits exercise the
        // chunking and the periodic resync.
        let u = [0.3, -1.2, 0.7, 2.0, -0.1, 0.9, -0.4, 1.1, 0.25, -0.6, 0.8];
        let v = [1.0, 0.5, -0.5, 0.2, -2.0, 0.3, 0.3, -0.7, 1.4, 0.05, -0.9];
        let w = [-0.8, 0.6, 0.1, -1.5, 0.4, 0.9, -0.2, 0.75, -1.0, 0.35, 0.5];
        let mut coeffs = Vec::new();
        for a in u {
            for b in v {
                for c in w {
                    coeffs.push(a * b * c);
                }
            }
        }
        let t = BellFunctional::new(vec![11, 11, 11], coeffs).unwrap();
        let expected = l1(&u) * l1(&v) * l1(&w);
        let r = classical_value_exact(&t).unwrap();
        assert!((r.value - expected).abs() <= 1e-12 * expected);
        assert_eq!(r.nodes_explored, 1 << 22);
    }

    #[test]
    fn budget_exceeded() {
        let t = functionals::random_gaussian_shape(vec![15, 15, 15], 1).unwrap();
        assert!(matches!(
            classical_value_exact(&t),
            Err(Error::EnumerationBudget { bits: 30, budget: 28 })
        ));
        assert!(classical_value_heuristic(&t, 2, 0).is_ok());
    }

    #[test]
    fn heuristic_matches_exact_on_chsh() {
        let r = classical_value_heuristic(&functionals::chsh(), 8, 11).unwrap();
        assert_eq!(r.value, 2.0);
        assert_eq!(r.method, Method::Heuristic);
        assert!(classical_value_heuristic(&functionals::chsh(), 0, 11).is_err());
    }

    #[test]
    fn ties_break_to_smallest_key() {
        // every assignment attains 1; the smallest key is all −1
        let t = BellFunctional::new(vec![2, 2], vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let r = classical_value_exact(&t).unwrap();
        assert_eq!(r.strategy.signs()[1], vec![-1, -1]);
        assert_eq!(r.strategy.signs()[0], vec![-1, 1]);
    }

    #[test]
    fn sign_strategy_validation() {
        assert!(SignStrategy::new(vec![vec![1, 0]]).is_err());
        let s = SignStrategy::new(vec![vec![1, -1], vec![1]]).unwrap();
        assert!(s.check_matches(&functionals::chsh()).is_err());
    }
}
