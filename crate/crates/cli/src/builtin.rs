use bellviol_core::functionals;
use bellviol_core::BellFunctional;

use crate::{CliError, CliResult};

/// `chsh`, `mermin3`, `mermin4` or `random(N,M,seed)`.
pub fn builtin_functional(name: &str) -> CliResult<BellFunctional> {
    let name = name.trim();
    match name {
        "chsh" => return Ok(functionals::chsh()),
        "mermin3" => return Ok(functionals::mermin3()),
        "mermin4" => return Ok(functionals::mermin4()),
        _ => {}
    }
    let args = name
        .strip_prefix("random(")
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| CliError::Validation(format!("unknown functional {name:?}; expected chsh, mermin3, mermin4 or random(N,M,seed)")))?;
    let parts: Vec<&str> = args.split(',').map(str::trim).collect();
    let bad = || CliError::Validation(format!("cannot parse {name:?}; expected random(N,M,seed)"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let parties: usize = parts[0].parse().map_err(|_| bad())?;
    let settings: usize = parts[1].parse().map_err(|_| bad())?;
    let seed: u64 = parts[2].parse().map_err(|_| bad())?;
    Ok(functionals::random_gaussian(parties, settings, seed)?)
}
