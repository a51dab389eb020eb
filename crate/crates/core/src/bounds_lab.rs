//! Closed-form constants and the numerical experiments that check them:
//! GHZ boundedness, the row/column norm identity and the √d envelope.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::functionals;
use crate::linalg::{self, c, CMatrix, CVector};
use crate::quantum_value::{seesaw, SeesawConfig, ViolationReport};
use crate::rng::derive_seed;
use crate::tensor_core::{BellFunctional, QuantumState, DEFAULT_BUDGET_DIM};

pub const GROTHENDIECK_LOWER: f64 = 1.676;
pub const GROTHENDIECK_UPPER: f64 = 1.782;
pub const CHSH_K: f64 = SQRT_2;
pub const DEFAULT_ENVELOPE_C: f64 = 10.0;

/// `4√2 K_G` with `K_G = 1.782`.
pub fn ghz_tripartite_bound() -> f64 {
    4.0 * SQRT_2 * GROTHENDIECK_UPPER
}

/// `K_G (2√2)^{N−1}`.
pub fn ghz_nparty_bound(parties: usize) -> f64 {
    GROTHENDIECK_UPPER * (2.0 * SQRT_2).powi(parties as i32 - 1)
}

/// Bound that applies to a GHZ experiment with `parties` parties.
pub fn ghz_bound(parties: usize) -> f64 {
    if parties == 3 {
        ghz_tripartite_bound()
    } else {
        ghz_nparty_bound(parties)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsTable {
    pub grothendieck_lower: f64,
    pub grothendieck_upper: f64,
    pub chsh_k: f64,
    pub ghz_tripartite_bound: f64,
    /// `(N, K_G (2√2)^{N−1})` for a few party counts.
    pub ghz_nparty_bound: Vec<(usize, f64)>,
}

impl BoundsTable {
    pub fn build() -> Self {
        Self {
            grothendieck_lower: GROTHENDIECK_LOWER,
            grothendieck_upper: GROTHENDIECK_UPPER,
            chsh_k: CHSH_K,
            ghz_tripartite_bound: ghz_tripartite_bound(),
            ghz_nparty_bound: (2..=6).map(|n| (n, ghz_nparty_bound(n))).collect(),
        }
    }
}

/// `(1/√n) Σ_i |i…i⟩` on `parties` copies of `C^n`.
pub fn ghz_state(levels: usize, parties: usize) -> Result<QuantumState> {
    if levels == 0 || parties < 2 {
        return Err(Error::InvalidParameter(format!(
            "GHZ state needs n ≥ 1 and N ≥ 2, got n={levels}, N={parties}"
        )));
    }
    let dims = vec![levels; parties];
    let total: usize = dims.iter().product();
    // index of |i…i⟩ is i·(1 + n + n² + …)
    let step: usize = (0..parties).map(|k| levels.pow(k as u32)).sum();
    let mut v = CVector::zeros(total);
    let amp = c(1.0 / (levels as f64).sqrt(), 0.0);
    for i in 0..levels {
        v[i * step] = amp;
    }
    QuantumState::pure(dims, v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GhzExperimentConfig {
    pub levels: usize,
    pub settings: usize,
    pub parties: usize,
    pub trials: usize,
    pub seed: u64,
    pub restarts: usize,
    pub max_iters: usize,
    pub budget_dim: usize,
}

impl GhzExperimentConfig {
    pub fn new(levels: usize, settings: usize, trials: usize, seed: u64) -> Self {
        Self {
            levels,
            settings,
            parties: 3,
            trials,
            seed,
            restarts: 16,
            max_iters: 500,
            budget_dim: DEFAULT_BUDGET_DIM,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GhzTrial {
    pub label: String,
    pub seed: Option<u64>,
    pub classical_value: f64,
    pub quantum_value: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GhzExperimentReport {
    pub config: GhzExperimentConfig,
    pub bound: f64,
    pub max_ratio: f64,
    pub within_bound: bool,
    pub trials: Vec<GhzTrial>,
}

/// Mermin functional for `parties` ∈ {3, 4} padded with zero coefficients to
/// `settings` settings per party.
fn padded_mermin(parties: usize, settings: usize) -> Option<BellFunctional> {
    if settings < 2 {
        return None;
    }
    let base = match parties {
        3 => functionals::mermin3(),
        4 => functionals::mermin4(),
        _ => return None,
    };
    let shape = vec![settings; parties];
    let mut coeffs = Vec::new();
    crate::tensor_core::for_each_index(&shape, |idx| {
        coeffs.push(if idx.iter().all(|&i| i < 2) { base.get(idx) } else { 0.0 });
    });
    BellFunctional::new(shape, coeffs).ok()
}

/// See-saw with the state frozen at `GHZ_n` over random Gaussian functionals
/// (and the Mermin functional where defined); records every ratio against
/// the GHZ bound.
pub fn ghz_violation_experiment(cfg: &GhzExperimentConfig) -> Result<GhzExperimentReport> {
    let total = cfg
        .levels
        .checked_pow(cfg.parties as u32)
        .unwrap_or(usize::MAX);
    if total > cfg.budget_dim {
        return Err(Error::BudgetExceeded {
            dim: total,
            budget: cfg.budget_dim,
        });
    }
    if cfg.settings == 0 {
        return Err(Error::InvalidParameter("settings must be ≥ 1".into()));
    }
    let state = ghz_state(cfg.levels, cfg.parties)?;
    let dims = vec![cfg.levels; cfg.parties];

    let mut jobs: Vec<(String, Option<u64>, BellFunctional)> = (0..cfg.trials as u64)
        .map(|k| {
            let s = derive_seed(cfg.seed, k);
            functionals::random_gaussian(cfg.parties, cfg.settings, s)
                .map(|t| (format!("random#{k}"), Some(s), t))
        })
        .collect::<Result<_>>()?;
    if let Some(t) = padded_mermin(cfg.parties, cfg.settings) {
        jobs.push((format!("mermin{}", cfg.parties), None, t));
    }

    let trials: Vec<GhzTrial> = jobs
        .into_par_iter()
        .enumerate()
        .map(|(k, (label, seed, t))| {
            let mut sc = SeesawConfig::new(dims.clone(), cfg.restarts, derive_seed(cfg.seed ^ 0x9e37_79b9, k as u64));
            sc.max_iters = cfg.max_iters;
            sc.budget_dim = cfg.budget_dim;
            let r = seesaw(&t, &sc, Some(&state))?;
            Ok(GhzTrial {
                label,
                seed,
                classical_value: r.classical_value,
                quantum_value: r.quantum_value,
                ratio: r.ratio,
            })
        })
        .collect::<Result<_>>()?;

    let bound = ghz_bound(cfg.parties);
    let max_ratio = trials.iter().map(|t| t.ratio).fold(f64::MIN, f64::max);
    Ok(GhzExperimentReport {
        config: cfg.clone(),
        bound,
        max_ratio,
        within_bound: max_ratio <= bound,
        trials,
    })
}

/// The four terms of the row/column intersection norm of
/// `Σ_{ij} A_ij ⊗ |ij⟩` and their maximum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RcNorm {
    /// `||Σ A_ij A_ij†||^{1/2}`
    pub row: f64,
    /// `||Σ A_ij† A_ij||^{1/2}`
    pub column: f64,
    /// `||Σ A_ij ⊗ |i⟩⟨j| ||`
    pub ij: f64,
    /// `||Σ A_ij ⊗ |j⟩⟨i| ||`
    pub ji: f64,
    pub value: f64,
}

impl RcNorm {
    /// Norm with the pair `(i, j)` read as one flat index, i.e. only the
    /// row and column terms.
    pub fn flat(&self) -> f64 {
        self.row.max(self.column)
    }
}

fn check_family(family: &[Vec<CMatrix>]) -> Result<usize> {
    let n = family.len();
    let m = family
        .first()
        .and_then(|r| r.first())
        .map(|a| a.nrows())
        .ok_or_else(|| Error::ShapeMismatch("empty matrix family".into()))?;
    for (i, row) in family.iter().enumerate() {
        if row.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "row {i} of the family has {} entries, expected {n}",
                row.len()
            )));
        }
        for (j, a) in row.iter().enumerate() {
            if a.nrows() != m || a.ncols() != m {
                return Err(Error::ShapeMismatch(format!(
                    "A[{i}][{j}] is {}x{}, expected {m}x{m}",
                    a.nrows(),
                    a.ncols()
                )));
            }
        }
    }
    Ok(m)
}

/// `family[i][j] = A_ij`, an `N × N` grid of `m × m` matrices.
pub fn rc_norm(family: &[Vec<CMatrix>]) -> Result<RcNorm> {
    let m = check_family(family)?;
    let n = family.len();
    let mut aa = CMatrix::zeros(m, m);
    let mut ata = CMatrix::zeros(m, m);
    let mut ij = CMatrix::zeros(m * n, m * n);
    let mut ji = CMatrix::zeros(m * n, m * n);
    for (i, row) in family.iter().enumerate() {
        for (j, a) in row.iter().enumerate() {
            aa += a * a.adjoint();
            ata += a.adjoint() * a;
            ij += linalg::kron(a, &matrix_unit(n, i, j));
            ji += linalg::kron(a, &matrix_unit(n, j, i));
        }
    }
    let row = linalg::op_norm(&aa).sqrt();
    let column = linalg::op_norm(&ata).sqrt();
    let ij = linalg::op_norm(&ij);
    let ji = linalg::op_norm(&ji);
    Ok(RcNorm {
        row,
        column,
        ij,
        ji,
        value: row.max(column).max(ij).max(ji),
    })
}

pub fn matrix_unit(n: usize, i: usize, j: usize) -> CMatrix {
    let mut e = CMatrix::zeros(n, n);
    e[(i, j)] = c(1.0, 0.0);
    e
}

/// `A_ij = |i⟩⟨j|` in `M_N`.
pub fn matrix_unit_family(n: usize) -> Vec<Vec<CMatrix>> {
    (0..n)
        .map(|i| (0..n).map(|j| matrix_unit(n, i, j)).collect())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCheck {
    pub d: usize,
    pub ratio: f64,
    pub limit: f64,
    pub margin: f64,
    pub pass: bool,
}

/// `ratio ≤ C √d_1`, where `d_1` is the first party's dimension.
pub fn sqrt_d_envelope(report: &ViolationReport, c_const: f64) -> EnvelopeCheck {
    envelope(report.dims[0], report.ratio, c_const)
}

pub fn envelope(d: usize, ratio: f64, c_const: f64) -> EnvelopeCheck {
    let limit = c_const * (d as f64).sqrt();
    EnvelopeCheck {
        d,
        ratio,
        limit,
        margin: limit - ratio,
        pass: ratio <= limit,
    }
}
