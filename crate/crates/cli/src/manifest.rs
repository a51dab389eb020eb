use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub argv: Vec<String>,
    pub seed: u64,
    pub version: String,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<OutputDigest>,
}

impl RunManifest {
    pub fn new(subcommand: &str, argv: &[OsString], seed: u64, elapsed: Duration, outputs: &[(&Path, &[u8])]) -> Self {
        let now = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
        Self {
            subcommand: subcommand.to_string(),
            argv: argv.iter().map(|a| a.to_string_lossy().into_owned()).collect(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: now.saturating_sub(elapsed).as_secs(),
            wall_clock_seconds: elapsed.as_secs_f64(),
            outputs: outputs
                .iter()
                .map(|(p, bytes)| OutputDigest {
                    path: p.display().to_string(),
                    sha256: sha256_hex(bytes),
                })
                .collect(),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub(crate) fn sidecar_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(sidecar_path(Path::new("out/r.json")), PathBuf::from("out/r.json.manifest.json"));
    }
}
