//! Flat `key = value` config files. Keys are the long flag names without the
//! leading dashes; flags given on the command line win over the file.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

pub const KNOWN_KEYS: &[&str] = &[
    "seed", "format", "workers", "out",
    "l1", "l2", "arm", "ratio", "d", "threshold", "delta-theta", "pitch", "cover-mode",
    "rings", "targets", "region", "region-scale", "iters", "distribution", "kernel", "elbow",
    "final-target", "z", "early-stop",
    "arm-range", "ratio-range", "pitch-range", "random", "grid", "sample-seed", "method", "heatmaps",
    "lambda", "split-seed", "test-fraction", "raw",
    "positioners", "pose-seed", "naive",
];

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: HashMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = HashMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", n + 1)))?;
            let key = key.trim().trim_start_matches("--").to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage(format!("config line {}: unknown key '{key}'", n + 1)));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self { values })
    }

    /// Flag value if given, else the parsed config entry, else `None`.
    pub fn get<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| CliError::Usage(format!("config key '{key}': {e}"))),
        }
    }

    pub fn or<T>(&self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key, flag)?.unwrap_or(default))
    }

    /// Boolean switches: on when the flag is set or the file says `true`.
    pub fn switch(&self, key: &str, flag: bool) -> Result<bool, CliError> {
        Ok(flag || self.get::<bool>(key, None)?.unwrap_or(false))
    }
}
