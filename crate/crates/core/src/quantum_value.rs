//! See-saw lower bounds on the quantum value `||T||_cb`.
//!
//! Each block of variables (one party's observables, or the state) is
//! optimized exactly while the others are held fixed:
//!
//! * observables: for the effective operator `E` obtained by contracting the
//!   state with every other party's observables and `T`, the maximizer of
//!   `Re tr(E A)` over Hermitian contractions is the eigen-sign of `Herm(E)`;
//! * state: the maximizer of `tr(ρ B)` over density operators is the
//!   projector onto a top eigenvector of the Bell operator `B`.
//!
//! Both steps can only increase the objective, so every trace is
//! nondecreasing and the final value is attained by the stored state and
//! observables.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical_value::{self, Method};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::random_states::haar_unitary;
use crate::rng::{derive_seed, stream_rng, Rng};
use crate::tensor_core::{
    apply_local, bell_operator_with_budget, contracted_value, local_gram, BellFunctional, Observable,
    ObservableSet, QuantumState, DEFAULT_BUDGET_DIM,
};

/// Relative gain below which an iteration counts as stagnant.
pub const STAGNATION_RTOL: f64 = 1e-10;
/// Consecutive stagnant iterations that end a restart.
pub const STAGNATION_WINDOW: usize = 200;
/// Slack allowed in the per-half-step monotonicity check.
pub const MONOTONE_RTOL: f64 = 1e-9;
/// Restarts used for the heuristic classical value when enumeration is out of budget.
const CLASSICAL_FALLBACK_RESTARTS: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "observables")]
pub enum SeesawInit {
    HaarRandom,
    /// Starting observables for restart 0; later restarts are random.
    Provided(ObservableSet),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeesawConfig {
    pub dims: Vec<usize>,
    pub restarts: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub seed: u64,
    pub init: SeesawInit,
    pub budget_dim: usize,
}

impl SeesawConfig {
    pub fn new(dims: Vec<usize>, restarts: usize, seed: u64) -> Self {
        Self {
            dims,
            restarts,
            max_iters: 2000,
            rel_tol: 1e-9,
            seed,
            init: SeesawInit::HaarRandom,
            budget_dim: DEFAULT_BUDGET_DIM,
        }
    }

    fn validate(&self, t: &BellFunctional) -> Result<()> {
        if self.dims.len() != t.num_parties() {
            return Err(Error::ShapeMismatch(format!(
                "{} local dimensions given for a {}-party functional",
                self.dims.len(),
                t.num_parties()
            )));
        }
        if self.dims.contains(&0) {
            return Err(Error::InvalidParameter("dimensions must be positive".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidParameter("rel_tol must be positive".into()));
        }
        if self.restarts == 0 || self.max_iters == 0 {
            return Err(Error::InvalidParameter(
                "restarts and max_iters must be ≥ 1".into(),
            ));
        }
        if let SeesawInit::Provided(obs) = &self.init {
            obs.check_matches(t)?;
            if obs.dims() != self.dims {
                return Err(Error::ShapeMismatch(format!(
                    "provided observables have dims {:?}, config says {:?}",
                    obs.dims(),
                    self.dims
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartKind {
    Fixed,
    RandomPure,
    MaximallyEntangled,
    /// Top eigenvector of the Bell operator of the provided observables.
    Eigenvector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestartTrace {
    pub restart: usize,
    pub start: StartKind,
    /// Objective after initialization and after every half-step.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub stagnated: bool,
    pub monotone: bool,
}

impl RestartTrace {
    pub fn final_value(&self) -> f64 {
        self.objective.last().copied().unwrap_or(0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub functional: BellFunctional,
    pub dims: Vec<usize>,
    pub classical_value: f64,
    pub classical_method: Method,
    /// Attained by `best_state` and `best_observables`; a lower bound on `||T||_cb`.
    pub quantum_value: f64,
    pub ratio: f64,
    pub best_state: QuantumState,
    pub best_observables: ObservableSet,
    pub best_restart: usize,
    pub traces: Vec<RestartTrace>,
    pub seed: u64,
}

impl ViolationReport {
    /// Recompute the quantum value through the dense Bell operator and check
    /// the stored numbers against it.
    pub fn verify(&self, budget_dim: usize) -> Result<f64> {
        let b = bell_operator_with_budget(&self.functional, &self.best_observables, budget_dim)?;
        let e = crate::tensor_core::expectation(&self.best_state, &b)?;
        if (e.value - self.quantum_value).abs() > 1e-9 * self.quantum_value.abs().max(1.0) {
            return Err(Error::Consistency(format!(
                "stored quantum value {} but the certificate evaluates to {}",
                self.quantum_value, e.value
            )));
        }
        if (self.ratio - self.quantum_value / self.classical_value).abs() > 1e-12 * self.ratio.abs().max(1.0) {
            return Err(Error::Consistency("ratio inconsistent with stored values".into()));
        }
        Ok(e.value)
    }
}

/// Eigen-sign of `Herm(E)`: the Hermitian contraction maximizing
/// `Re tr(E A)`, together with the attained value `Σ|λ_k(Herm E)|`.
pub fn optimal_observable_step(e: &CMatrix) -> Result<(Observable, f64)> {
    if e.nrows() != e.ncols() || e.nrows() == 0 {
        return Err(Error::ShapeMismatch(format!(
            "effective operator must be square, got {}x{}",
            e.nrows(),
            e.ncols()
        )));
    }
    let (a, objective) = linalg::eigen_sign(e);
    Ok((Observable::new_unchecked(a), objective))
}

/// Top eigenvector of a Hermitian `B` as a pure state on `dims`, with `λ_max`.
pub fn optimal_state_step(b: &CMatrix, dims: &[usize]) -> Result<(QuantumState, f64)> {
    let deviation = linalg::hermiticity_defect(b);
    if deviation > 1e-9 {
        return Err(Error::NotHermitian { deviation });
    }
    let eig = linalg::eigh(b);
    let v = eig.vectors.column(0).into_owned();
    Ok((QuantumState::pure_normalized(dims.to_vec(), v)?, eig.values[0]))
}

/// Effective operators `E_i` for every setting `i` of `party`, so that the
/// objective restricted to that party is `Σ_i tr(A_i E_i)`.
pub fn effective_operators(
    t: &BellFunctional,
    components: &[(f64, CVector)],
    obs: &ObservableSet,
    dims: &[usize],
    party: usize,
) -> Vec<CMatrix> {
    let d = dims[party];
    let settings = t.settings();
    let strides = t.strides();
    let mut e = vec![CMatrix::zeros(d, d); settings[party]];
    for (w, psi) in components {
        let mut walk = Walk {
            t,
            obs,
            dims,
            party,
            psi,
            weight: *w,
            strides: &strides,
            out: &mut e,
        };
        walk.descend(0, psi.clone(), 0);
    }
    e
}

struct Walk<'a> {
    t: &'a BellFunctional,
    obs: &'a ObservableSet,
    dims: &'a [usize],
    party: usize,
    psi: &'a CVector,
    weight: f64,
    strides: &'a [usize],
    out: &'a mut Vec<CMatrix>,
}

impl Walk<'_> {
    fn descend(&mut self, level: usize, current: CVector, offset: usize) {
        let n = self.dims.len();
        if level == n {
            let x = local_gram(&current, self.psi, self.dims, self.party);
            let ps = self.strides[self.party];
            for (i, e) in self.out.iter_mut().enumerate() {
                let c = self.t.coeffs()[offset + i * ps];
                if c != 0.0 {
                    *e += x.scale(c * self.weight);
                }
            }
            return;
        }
        if level == self.party {
            self.descend(level + 1, current, offset);
            return;
        }
        for (i, a) in self.obs.party(level).iter().enumerate() {
            let next = apply_local(&current, self.dims, level, a.matrix());
            self.descend(level + 1, next, offset + i * self.strides[level]);
        }
    }
}

/// Random dichotomic observable `V diag(±1) V†` with Haar `V`.
fn random_observable(dim: usize, rng: &mut Rng) -> Observable {
    use rand::Rng as _;
    let v = haar_unitary(dim, rng);
    let signs = CVector::from_fn(dim, |_, _| {
        linalg::c(if rng.random::<bool>() { 1.0 } else { -1.0 }, 0.0)
    });
    let a = &v * CMatrix::from_diagonal(&signs) * v.adjoint();
    Observable::new_unchecked(linalg::hermitian_part(&a))
}

fn random_observables(t: &BellFunctional, dims: &[usize], rng: &mut Rng) -> ObservableSet {
    let parties = t
        .settings()
        .iter()
        .zip(dims)
        .map(|(&m, &d)| (0..m).map(|_| random_observable(d, rng)).collect())
        .collect();
    ObservableSet::new(parties).expect("shapes are consistent")
}

/// Maximally entangled across party 1 versus the rest.
fn maximally_entangled(dims: &[usize]) -> CVector {
    let d1 = dims[0];
    let rest: usize = dims[1..].iter().product();
    let k = d1.min(rest);
    let mut v = CVector::zeros(d1 * rest);
    for i in 0..k {
        v[i * rest + i] = linalg::c(1.0 / (k as f64).sqrt(), 0.0);
    }
    v
}

/// Objective via the effective operators of the last party, which is
/// exactly what the observable update optimizes.
fn objective(t: &BellFunctional, comps: &[(f64, CVector)], obs: &ObservableSet, dims: &[usize]) -> f64 {
    let last = dims.len() - 1;
    effective_operators(t, comps, obs, dims, last)
        .iter()
        .zip(obs.party(last))
        .map(|(e, a)| (a.matrix() * e).trace().re)
        .sum()
}

struct RestartOutcome {
    trace: RestartTrace,
    state: QuantumState,
    observables: ObservableSet,
}

fn run_restart(
    t: &BellFunctional,
    cfg: &SeesawConfig,
    fixed: Option<&QuantumState>,
    restart: usize,
) -> Result<RestartOutcome> {
    let dims = &cfg.dims;
    let total: usize = dims.iter().product();
    let mut rng = stream_rng(cfg.seed, restart as u64);

    let mut obs = match (&cfg.init, restart) {
        (SeesawInit::Provided(o), 0) => o.clone(),
        _ => random_observables(t, dims, &mut rng),
    };
    let (start, mut state) = match fixed {
        Some(s) => (StartKind::Fixed, s.clone()),
        None if matches!(cfg.init, SeesawInit::Provided(_)) && restart == 0 => {
            let b = bell_operator_with_budget(t, &obs, cfg.budget_dim)?;
            (StartKind::Eigenvector, optimal_state_step(&b, dims)?.0)
        }
        None if restart == 0 => (
            StartKind::RandomPure,
            QuantumState::pure(dims.clone(), linalg::random_unit_vector(total, &mut rng))?,
        ),
        None => (
            StartKind::MaximallyEntangled,
            QuantumState::pure(dims.clone(), maximally_entangled(dims))?,
        ),
    };
    let mut comps = state.components();

    let mut trace = RestartTrace {
        restart,
        start,
        objective: vec![objective(t, &comps, &obs, dims)],
        iterations: 0,
        converged: false,
        stagnated: false,
        monotone: true,
    };
    let mut stagnant = 0usize;

    for _ in 0..cfg.max_iters {
        let before = trace.final_value();
        let mut value = before;
        for party in 0..dims.len() {
            let effs = effective_operators(t, &comps, &obs, dims, party);
            let mut new_obs = Vec::with_capacity(effs.len());
            value = 0.0;
            for e in &effs {
                let (a, v) = optimal_observable_step(e)?;
                value += v;
                new_obs.push(a);
            }
            obs.set_party(party, new_obs);
        }
        record(&mut trace, value);
        if fixed.is_none() {
            let b = bell_operator_with_budget(t, &obs, cfg.budget_dim)?;
            let (s, lambda) = optimal_state_step(&b, dims)?;
            state = s;
            comps = state.components();
            record(&mut trace, lambda);
        }
        trace.iterations += 1;
        let after = trace.final_value();
        let gain = (after - before) / before.abs().max(f64::MIN_POSITIVE);
        if gain.abs() < cfg.rel_tol {
            trace.converged = true;
            break;
        }
        stagnant = if gain < STAGNATION_RTOL { stagnant + 1 } else { 0 };
        if stagnant >= STAGNATION_WINDOW {
            trace.stagnated = true;
            break;
        }
    }
    Ok(RestartOutcome {
        trace,
        state,
        observables: obs,
    })
}

fn record(trace: &mut RestartTrace, value: f64) {
    let prev = trace.final_value();
    if value < prev - MONOTONE_RTOL * prev.abs().max(1.0) {
        trace.monotone = false;
    }
    trace.objective.push(value);
}

/// Classical value used as the denominator of the violation ratio.
pub fn classical_reference(t: &BellFunctional, seed: u64) -> Result<(f64, Method)> {
    match classical_value::classical_value_exact(t) {
        Ok(r) => Ok((r.value, r.method)),
        Err(Error::EnumerationBudget { .. }) => {
            let r = classical_value::classical_value_heuristic(t, CLASSICAL_FALLBACK_RESTARTS, seed)?;
            Ok((r.value, r.method))
        }
        Err(e) => Err(e),
    }
}

/// Alternating optimization over observables and (unless `fixed_state` is
/// given) the state; returns the best of `cfg.restarts` runs.
pub fn seesaw(t: &BellFunctional, cfg: &SeesawConfig, fixed_state: Option<&QuantumState>) -> Result<ViolationReport> {
    cfg.validate(t)?;
    let total: usize = cfg.dims.iter().product();
    match fixed_state {
        Some(s) if s.dims() != cfg.dims.as_slice() => {
            return Err(Error::ShapeMismatch(format!(
                "fixed state dims {:?} differ from config dims {:?}",
                s.dims(),
                cfg.dims
            )))
        }
        None if total > cfg.budget_dim => {
            return Err(Error::BudgetExceeded {
                dim: total,
                budget: cfg.budget_dim,
            })
        }
        _ => {}
    }

    let outcomes: Vec<RestartOutcome> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| run_restart(t, cfg, fixed_state, r))
        .collect::<Result<_>>()?;

    let mut best = 0;
    for (k, o) in outcomes.iter().enumerate() {
        if o.trace.final_value() > outcomes[best].trace.final_value() {
            best = k;
        }
    }
    let (classical, method) = classical_reference(t, derive_seed(cfg.seed, u64::MAX))?;
    let mut traces = Vec::with_capacity(outcomes.len());
    let mut best_state = None;
    let mut best_obs = None;
    for (k, o) in outcomes.into_iter().enumerate() {
        if k == best {
            best_state = Some(o.state);
            best_obs = Some(o.observables);
        }
        traces.push(o.trace);
    }
    let best_state = best_state.expect("at least one restart");
    let best_observables = best_obs.expect("at least one restart");
    let quantum = contracted_value(t, &best_state, &best_observables)?;
    Ok(ViolationReport {
        functional: t.clone(),
        dims: cfg.dims.clone(),
        classical_value: classical,
        classical_method: method,
        quantum_value: quantum,
        ratio: quantum / classical,
        best_state,
        best_observables,
        best_restart: best,
        traces,
        seed: cfg.seed,
    })
}
