//! `bellviol` command-line front end.
//!
//! Every subcommand writes one JSON (or CSV) payload to `--output` or stdout.
//! When `--output` is given a sidecar `<output>.manifest.json` records the
//! argument vector, seed, tool version, wall-clock time and the SHA-256 of
//! the payload.

mod builtin;
mod manifest;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use bellviol_core::bounds_lab::{self, GhzExperimentConfig};
use bellviol_core::classical_value::{classical_value_exact, classical_value_heuristic};
use bellviol_core::comm_game::{exact_success, ratio_check, simulate_game, GameSpec, RatioCheck, Strategy};
use bellviol_core::noise_robustness::noisy_violation_with_classical;
use bellviol_core::quantum_value::{seesaw, SeesawConfig, ViolationReport};
use bellviol_core::random_states::{self, random_tripartite_state};
use bellviol_core::tensor_core::DEFAULT_BUDGET_DIM;
use bellviol_core::{BellFunctional, QuantumState};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

pub use builtin::builtin_functional;
pub use manifest::{OutputDigest, RunManifest};

pub const BUDGET_ENV: &str = "BELLVIOL_BUDGET_DIM";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] bellviol_core::Error),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Read { .. } => 2,
            CliError::Core(bellviol_core::Error::Consistency(_)) => 1,
            CliError::Core(_) => 2,
            CliError::Write { .. } | CliError::Internal(_) => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "bellviol", version, about = "Numerical lab for multipartite correlation Bell inequalities")]
struct Cli {
    /// Master seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Payload format; inferred from the output extension when absent.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct FunctionalSource {
    /// Bell functional JSON file.
    #[arg(long, conflicts_with = "builtin")]
    input: Option<PathBuf>,
    /// Named functional: chsh, mermin3, mermin4 or random(N,M,seed).
    #[arg(long)]
    builtin: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classical (local hidden variable) value.
    Classical {
        #[command(flatten)]
        source: FunctionalSource,
        #[arg(long, conflicts_with = "heuristic")]
        exact: bool,
        #[arg(long)]
        heuristic: bool,
        #[arg(long, default_value_t = 32)]
        restarts: usize,
    },
    /// See-saw lower bound on the quantum value.
    Quantum {
        #[command(flatten)]
        source: FunctionalSource,
        /// Local dimensions, e.g. 2,2,2.
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 32)]
        restarts: usize,
        #[arg(long, default_value_t = 2000)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-9)]
        rel_tol: f64,
        /// `ghz` or a state JSON file.
        #[arg(long)]
        fixed_state: Option<String>,
    },
    /// Random tripartite state built from Haar unitaries.
    Randstate {
        #[arg(long = "n")]
        n: usize,
        #[arg(long = "N")]
        big_n: usize,
    },
    /// Monte Carlo of the injective norm against its expected-value bound.
    Chevet {
        #[arg(long = "n")]
        n: usize,
        #[arg(long = "N")]
        big_n: usize,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = random_states::DEFAULT_EPS_RESTARTS)]
        restarts: usize,
    },
    /// GHZ-fixed see-saw over random functionals against the GHZ bound.
    GhzBound {
        #[arg(long = "n")]
        n: usize,
        #[arg(long = "M")]
        m: usize,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 3)]
        parties: usize,
        #[arg(long, default_value_t = 16)]
        restarts: usize,
        #[arg(long, default_value_t = 500)]
        max_iters: usize,
    },
    /// Row/column norm of the matrix-unit family.
    RcCheck {
        #[arg(long = "N")]
        big_n: usize,
    },
    /// White-noise robustness of a see-saw report.
    Noise {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        p: f64,
    },
    /// Communication-complexity game on a functional.
    Ccgame {
        #[command(flatten)]
        source: FunctionalSource,
        #[arg(long, value_enum)]
        strategy: GameStrategy,
        /// See-saw report supplying the quantum strategy.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = 100_000)]
        rounds: u64,
    },
    /// Print a named functional.
    Builtin { name: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum GameStrategy {
    Classical,
    Quantum,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Classical { .. } => "classical",
            Command::Quantum { .. } => "quantum",
            Command::Randstate { .. } => "randstate",
            Command::Chevet { .. } => "chevet",
            Command::GhzBound { .. } => "ghz-bound",
            Command::RcCheck { .. } => "rc-check",
            Command::Noise { .. } => "noise",
            Command::Ccgame { .. } => "ccgame",
            Command::Builtin { .. } => "builtin",
        }
    }
}

enum Payload {
    Json(Value),
    Csv(Vec<u8>),
}

struct Outcome {
    payload: Payload,
    /// Set when the run completed but its result violates a hard bound.
    failure: Option<String>,
}

impl Outcome {
    fn json<T: Serialize>(value: &T) -> CliResult<Self> {
        let v = serde_json::to_value(value).map_err(|e| CliError::Internal(format!("serialization failed: {e}")))?;
        Ok(Self { payload: Payload::Json(v), failure: None })
    }
}

/// Parse `argv` (program name first), execute, and return the exit code:
/// 0 on success, 2 on invalid input, 1 on internal failure.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    match execute(&cli, &argv) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("bellviol {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli, argv: &[OsString]) -> CliResult<i32> {
    let budget = budget_from_env()?;
    let started = Instant::now();
    let outcome = match cli.threads {
        Some(0) => return Err(CliError::Validation("--threads must be ≥ 1".into())),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?
            .install(|| dispatch(cli, budget))?,
        None => dispatch(cli, budget)?,
    };

    let format = cli.format.unwrap_or(match cli.output.as_deref().and_then(Path::extension) {
        Some(ext) if ext == "csv" => Format::Csv,
        _ => Format::Json,
    });
    let bytes = match (&outcome.payload, format) {
        (Payload::Json(v), Format::Json) => {
            let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Internal(e.to_string()))?;
            s.push('\n');
            s.into_bytes()
        }
        (Payload::Csv(b), Format::Csv) => b.clone(),
        (Payload::Json(_), Format::Csv) => {
            return Err(CliError::Validation(format!(
                "{} produces JSON only; use --format json",
                cli.command.name()
            )))
        }
        (Payload::Csv(_), Format::Json) => unreachable!("CSV payloads are only built on request"),
    };

    match &cli.output {
        Some(path) => {
            write_file(path, &bytes)?;
            let m = RunManifest::new(cli.command.name(), argv, cli.seed, started.elapsed(), &[(path.as_path(), &bytes)]);
            let mut s = serde_json::to_string_pretty(&m).map_err(|e| CliError::Internal(e.to_string()))?;
            s.push('\n');
            write_file(&manifest::sidecar_path(path), s.as_bytes())?;
        }
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(&bytes)
                .map_err(|source| CliError::Write { path: "<stdout>".into(), source })?;
        }
    }
    if let Some(msg) = outcome.failure {
        eprintln!("bellviol {}: {msg}", cli.command.name());
        return Ok(1);
    }
    Ok(0)
}

fn budget_from_env() -> CliResult<usize> {
    match std::env::var(BUDGET_ENV) {
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&b| b > 0)
            .ok_or_else(|| CliError::Validation(format!("{BUDGET_ENV}={s:?} is not a positive integer"))),
        Err(_) => Ok(DEFAULT_BUDGET_DIM),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|source| CliError::Write { path: path.to_path_buf(), source })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn load_functional(src: &FunctionalSource) -> CliResult<BellFunctional> {
    match (&src.input, &src.builtin) {
        (Some(p), _) => read_json(p),
        (None, Some(name)) => builtin_functional(name),
        (None, None) => Err(CliError::Validation("one of --input or --builtin is required".into())),
    }
}

fn dispatch(cli: &Cli, budget: usize) -> CliResult<Outcome> {
    let seed = cli.seed;
    let wants_csv = cli.format == Some(Format::Csv)
        || (cli.format.is_none() && cli.output.as_deref().and_then(Path::extension).is_some_and(|e| e == "csv"));
    match &cli.command {
        Command::Classical { source, heuristic, restarts, .. } => {
            let t = load_functional(source)?;
            let r = if *heuristic {
                classical_value_heuristic(&t, *restarts, seed)?
            } else {
                classical_value_exact(&t)?
            };
            Outcome::json(&r)
        }
        Command::Quantum { source, dims, restarts, max_iters, rel_tol, fixed_state } => {
            let t = load_functional(source)?;
            let mut cfg = SeesawConfig::new(dims.clone(), *restarts, seed);
            cfg.max_iters = *max_iters;
            cfg.rel_tol = *rel_tol;
            cfg.budget_dim = budget;
            let fixed = fixed_state.as_deref().map(|s| load_fixed_state(s, dims)).transpose()?;
            let report = seesaw(&t, &cfg, fixed.as_ref())?;
            report.verify(budget)?;
            Outcome::json(&report)
        }
        Command::Randstate { n, big_n } => {
            let (state, family) = random_tripartite_state(*n, *big_n, seed)?;
            Outcome::json(&json!({
                "n": n,
                "N": big_n,
                "seed": seed,
                "state": state,
                "family": family,
            }))
        }
        Command::Chevet { n, big_n, samples, restarts } => {
            let s = random_states::chevet_montecarlo_with(*n, *big_n, *samples, seed, *restarts)?;
            if wants_csv {
                let mut w = csv::Writer::from_writer(Vec::new());
                let csv_err = |e: csv::Error| CliError::Internal(format!("csv: {e}"));
                w.write_record(["sample", "eps_norm", "bound"]).map_err(csv_err)?;
                for (k, v) in s.values.iter().enumerate() {
                    w.write_record([k.to_string(), v.to_string(), s.bound.to_string()]).map_err(csv_err)?;
                }
                let bytes = w.into_inner().map_err(|e| CliError::Internal(format!("csv: {e}")))?;
                let failure = (s.max > s.bound).then(|| format!("max ε-norm {} exceeds the bound {}", s.max, s.bound));
                return Ok(Outcome { payload: Payload::Csv(bytes), failure });
            }
            let mut out = Outcome::json(&s)?;
            out.failure = (s.max > s.bound).then(|| format!("max ε-norm {} exceeds the bound {}", s.max, s.bound));
            Ok(out)
        }
        Command::GhzBound { n, m, trials, parties, restarts, max_iters } => {
            let mut cfg = GhzExperimentConfig::new(*n, *m, *trials, seed);
            cfg.parties = *parties;
            cfg.restarts = *restarts;
            cfg.max_iters = *max_iters;
            cfg.budget_dim = budget;
            let r = bounds_lab::ghz_violation_experiment(&cfg)?;
            let mut out = Outcome::json(&r)?;
            if !r.within_bound {
                out.failure = Some(format!("ratio {} exceeds the GHZ bound {}", r.max_ratio, r.bound));
            }
            Ok(out)
        }
        Command::RcCheck { big_n } => {
            if *big_n == 0 {
                return Err(CliError::Validation("--N must be ≥ 1".into()));
            }
            let r = bounds_lab::rc_norm(&bounds_lab::matrix_unit_family(*big_n))?;
            Outcome::json(&json!({
                "N": big_n,
                "value": r.flat(),
                "sqrt_n": (*big_n as f64).sqrt(),
                "four_term_value": r.value,
                "terms": r,
            }))
        }
        Command::Noise { report, p } => {
            let r: ViolationReport = read_json(report)?;
            let n = noisy_violation_with_classical(&r.functional, &r.best_state, &r.best_observables, *p, r.classical_value)?;
            Outcome::json(&n)
        }
        Command::Ccgame { source, strategy, report, rounds } => ccgame(source, *strategy, report.as_deref(), *rounds, seed),
        Command::Builtin { name } => Outcome::json(&builtin_functional(name)?),
    }
}

fn load_fixed_state(spec: &str, dims: &[usize]) -> CliResult<QuantumState> {
    if spec == "ghz" {
        let d = dims[0];
        if dims.iter().any(|&x| x != d) {
            return Err(CliError::Validation(format!("--fixed-state ghz needs equal local dimensions, got {dims:?}")));
        }
        return Ok(bounds_lab::ghz_state(d, dims.len())?);
    }
    read_json(Path::new(spec))
}

#[derive(Serialize)]
struct GameOutput {
    strategy: GameStrategy,
    exact: bellviol_core::comm_game::GameResult,
    simulated: bellviol_core::comm_game::GameResult,
    ratio: Option<RatioCheck>,
}

fn ccgame(source: &FunctionalSource, strategy: GameStrategy, report: Option<&Path>, rounds: u64, seed: u64) -> CliResult<Outcome> {
    let report: Option<ViolationReport> = report.map(read_json).transpose()?;
    let t = match (&source.input, &source.builtin, &report) {
        (None, None, Some(r)) => r.functional.clone(),
        _ => load_functional(source)?,
    };
    let spec = match strategy {
        GameStrategy::Classical => GameSpec::classical_optimal(t.clone())?,
        GameStrategy::Quantum => {
            let r = report.ok_or_else(|| CliError::Validation("--strategy quantum needs --report".into()))?;
            if r.functional != t {
                return Err(CliError::Validation("the report was produced for a different functional".into()));
            }
            GameSpec::new(
                t.clone(),
                Strategy::Quantum {
                    state: r.best_state,
                    observables: r.best_observables,
                },
            )?
        }
    };
    let ratio = match strategy {
        GameStrategy::Quantum => Some(ratio_check(&GameSpec::classical_optimal(t)?, &spec)?),
        GameStrategy::Classical => None,
    };
    Outcome::json(&GameOutput {
        strategy,
        exact: exact_success(&spec)?,
        simulated: simulate_game(&spec, rounds, seed)?,
        ratio,
    })
}
