//! Run manifests. Every output directory gets exactly one `manifest.json`
//! recording the resolved configuration, seed, input digests, tool version,
//! wall-clock time, and failure log. The manifest alone is enough to rerun
//! the command bit-identically via `--from-manifest`: the stored config is
//! replayed and the recorded input digests are verified first.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Prefix marking inputs that ship inside the binary rather than on disk.
pub const BUNDLED_PREFIX: &str = "bundled:";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub created_utc: String,
    pub wall_clock_seconds: f64,
    pub seed: Option<u64>,
    pub inputs: Vec<InputDigest>,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
    pub failures: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| {
        CliError::usage(format!("cannot read input {}: {e}", path.display()))
    })?;
    Ok(sha256_hex(&bytes))
}

/// Collects manifest fields while a command runs and writes `manifest.json`
/// last, so a crash never leaves a manifest describing missing outputs.
pub struct CommandRun {
    manifest: RunManifest,
    started: Instant,
    out: PathBuf,
}

impl CommandRun {
    pub fn new(command: &str, out: &Path, config: &impl Serialize) -> Result<Self, CliError> {
        std::fs::create_dir_all(out).map_err(|e| {
            CliError::usage(format!(
                "cannot create output directory {}: {e}",
                out.display()
            ))
        })?;
        Ok(Self {
            manifest: RunManifest {
                tool: "spillover".to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                command: command.to_string(),
                created_utc: chrono::Utc::now().format("%Y-%m-%dT%H:%M:%SZ").to_string(),
                wall_clock_seconds: 0.0,
                seed: None,
                inputs: Vec::new(),
                config: serde_json::to_value(config)?,
                outputs: Vec::new(),
                failures: Vec::new(),
            },
            started: Instant::now(),
            out: out.to_path_buf(),
        })
    }

    pub fn record_input_file(&mut self, path: &Path) -> Result<(), CliError> {
        self.manifest.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    pub fn record_bundled_input(&mut self, name: &str, text: &str) {
        self.manifest.inputs.push(InputDigest {
            path: format!("{BUNDLED_PREFIX}{name}"),
            sha256: sha256_hex(text.as_bytes()),
        });
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.manifest.seed = Some(seed);
    }

    pub fn add_failure(&mut self, line: String) {
        self.manifest.failures.push(line);
    }

    /// Writes one output file into the run directory and registers it.
    pub fn write_output(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.out.join(name);
        std::fs::write(&path, bytes)
            .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))?;
        self.manifest.outputs.push(name.to_string());
        Ok(path)
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.manifest.wall_clock_seconds = self.started.elapsed().as_secs_f64();
        let path = self.out.join("manifest.json");
        let mut bytes = serde_json::to_vec_pretty(&self.manifest)?;
        bytes.push(b'\n');
        std::fs::write(&path, bytes)
            .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))?;
        Ok(())
    }
}

/// Loads a manifest for `--from-manifest`, checks it belongs to `command`,
/// verifies every recorded input digest, and returns the stored config.
/// `bundled` resolves `bundled:<name>` inputs to their embedded text.
pub fn load_rerun<C: DeserializeOwned>(
    path: &Path,
    command: &str,
    bundled: impl Fn(&str) -> Option<&'static str>,
) -> Result<C, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read manifest {}: {e}", path.display())))?;
    let manifest: RunManifest = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("malformed manifest {}: {e}", path.display())))?;
    if manifest.command != command {
        return Err(CliError::usage(format!(
            "manifest {} was written by '{} {}', not '{} {command}'",
            path.display(),
            manifest.tool,
            manifest.command,
            manifest.tool,
        )));
    }
    for input in &manifest.inputs {
        let now = match input.path.strip_prefix(BUNDLED_PREFIX) {
            Some(name) => {
                let text = bundled(name).ok_or_else(|| {
                    CliError::usage(format!("manifest references unknown bundled input '{name}'"))
                })?;
                sha256_hex(text.as_bytes())
            }
            None => sha256_file(Path::new(&input.path))?,
        };
        if now != input.sha256 {
            return Err(CliError::usage(format!(
                "input {} changed since the manifest was written (digest {} != {})",
                input.path, now, input.sha256
            )));
        }
    }
    serde_json::from_value(manifest.config).map_err(|e| {
        CliError::usage(format!(
            "manifest {} carries an incompatible config: {e}",
            path.display()
        ))
    })
}
