//! Optional `key = value` configuration file. Lines starting with `#` and
//! blank lines are ignored. Keys use the flag spelling (`window`, `rv-power`,
//! ...) and are validated against the invoking subcommand's allowed set, so
//! typos fail loudly. Explicit command-line flags always win over the file.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

pub struct FileConfig {
    entries: BTreeMap<String, String>,
    origin: String,
}

impl FileConfig {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
            origin: String::new(),
        }
    }

    pub fn load(path: Option<&Path>, allowed_keys: &[&str]) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::empty());
        };
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config file {origin}: {e}")))?;
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::usage(format!("{origin}:{}: expected 'key = value'", i + 1))
            })?;
            let (key, value) = (key.trim().to_string(), value.trim().to_string());
            if !allowed_keys.contains(&key.as_str()) {
                return Err(CliError::usage(format!(
                    "{origin}:{}: unknown key '{key}' for this subcommand",
                    i + 1
                )));
            }
            if entries.insert(key.clone(), value).is_some() {
                return Err(CliError::usage(format!(
                    "{origin}:{}: duplicate key '{key}'",
                    i + 1
                )));
            }
        }
        Ok(Self { entries, origin })
    }

    /// The raw string for `key`, if the file sets it.
    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Parses the file's value for `key` when present.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                CliError::usage(format!(
                    "{}: cannot parse '{raw}' for key '{key}'",
                    self.origin
                ))
            }),
        }
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>, CliError> {
        self.get::<bool>(key)
    }
}

/// Three-layer resolution: explicit flag, then config file, then default.
pub fn resolve<T: FromStr>(
    flag: Option<T>,
    file: &FileConfig,
    key: &str,
    default: T,
) -> Result<T, CliError> {
    match flag {
        Some(v) => Ok(v),
        None => Ok(file.get(key)?.unwrap_or(default)),
    }
}

/// Like `resolve`, without a default.
pub fn resolve_opt<T: FromStr>(
    flag: Option<T>,
    file: &FileConfig,
    key: &str,
) -> Result<Option<T>, CliError> {
    match flag {
        Some(v) => Ok(Some(v)),
        None => file.get(key),
    }
}

/// Boolean that a bare flag can only switch on.
pub fn resolve_switch(
    flag_on: bool,
    file: &FileConfig,
    key: &str,
    default: bool,
) -> Result<bool, CliError> {
    if flag_on {
        return Ok(true);
    }
    Ok(file.get_bool(key)?.unwrap_or(default))
}

/// Boolean that a bare `--no-...` flag can only switch off; the config key
/// keeps the positive spelling.
pub fn resolve_off_switch(
    flag_off: bool,
    file: &FileConfig,
    key: &str,
    default: bool,
) -> Result<bool, CliError> {
    if flag_off {
        return Ok(false);
    }
    Ok(file.get_bool(key)?.unwrap_or(default))
}
