use thiserror::Error;

/// Everything that can go wrong when validating inputs or running an experiment.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Bell functional: {0}")]
    InvalidFunctional(String),

    #[error("observable is not Hermitian (max entry deviation {deviation:.3e} > 1e-12)")]
    NotHermitian { deviation: f64 },

    #[error("observable is not a contraction (operator norm {norm:.12} > 1 + 1e-9)")]
    NotContraction { norm: f64 },

    #[error("invalid quantum state: {0}")]
    InvalidState(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("Hilbert space dimension {dim} exceeds the budget of {budget}; raise BELLVIOL_BUDGET_DIM to override")]
    BudgetExceeded { dim: usize, budget: usize },

    #[error(
        "exact enumeration needs {bits} sign bits but the budget is {budget}; use the heuristic solver"
    )]
    EnumerationBudget { bits: usize, budget: usize },

    #[error("observable {setting} of party {party} is not traceless (|tr| = {trace:.3e}); project it with make_traceless first")]
    NotTraceless {
        party: usize,
        setting: usize,
        trace: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("ratio undefined: classical success probability is exactly 1/2")]
    DegenerateRatio,

    #[error("numerical consistency check failed: {0}")]
    Consistency(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
