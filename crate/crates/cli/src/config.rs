//! Flat `key = value` configuration files.
//!
//! One setting per line, `#` starts a comment, keys are the long flag names
//! without the leading dashes (`beta-star = 0.5`). List settings take
//! comma-separated values. Command-line flags win over the file, the file
//! wins over built-in defaults.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{CliError, Result};

/// Every key any subcommand reads. A key outside this list is a typo.
pub const KNOWN_KEYS: &[&str] = &[
    "banks",
    "beta-star",
    "bis-impute",
    "blocks",
    "countries",
    "data",
    "density",
    "ensemble",
    "epsilon",
    "first-year",
    "ground-in-density",
    "instances",
    "ipf",
    "ipf-max-iter",
    "ipf-tolerance",
    "last-year",
    "link-prob",
    "max-steps",
    "min-prob",
    "networks",
    "out",
    "phi",
    "pooling",
    "retry-cap",
    "runs",
    "seed",
    "sigma",
    "sizes",
    "stress-year",
    "surplus",
    "trajectories",
    "variant",
    "years",
    "z-mode",
];

#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    origin: Option<PathBuf>,
    entries: BTreeMap<String, (usize, String)>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                let mut cfg = Self::parse(&text)
                    .map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?;
                cfg.origin = Some(p.to_path_buf());
                Ok(cfg)
            }
        }
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut entries = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`", k + 1))?;
            let key = key.trim().replace('_', "-");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(format!("line {}: unknown key `{key}`", k + 1));
            }
            if entries.insert(key.clone(), (k + 1, value.trim().to_string())).is_some() {
                return Err(format!("line {}: `{key}` set twice", k + 1));
            }
        }
        Ok(Self { origin: None, entries })
    }

    fn invalid(&self, key: &str, line: usize, msg: impl Display) -> CliError {
        let origin = self.origin.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "config".into());
        CliError::Validation(format!("{origin}:{line}: {key}: {msg}"))
    }

    fn parse_value<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|e| self.invalid(key, *line, e)),
        }
    }

    /// Flag, then file, then default.
    pub fn get<T>(&self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.get_opt(key, flag)?.unwrap_or(default))
    }

    pub fn get_opt<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.parse_value(key),
        }
    }

    /// Comma-separated list; an empty flag list defers to the file.
    pub fn get_list<T>(&self, key: &str, flag: Vec<T>, default: Vec<T>) -> Result<Vec<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        if !flag.is_empty() {
            return Ok(flag);
        }
        match self.entries.get(key) {
            None => Ok(default),
            Some((line, v)) => {
                let items = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<T>().map_err(|e| self.invalid(key, *line, e)))
                    .collect::<Result<Vec<T>>>()?;
                if items.is_empty() {
                    return Err(self.invalid(key, *line, "empty list"));
                }
                Ok(items)
            }
        }
    }

    pub fn path(&self, key: &str, flag: Option<PathBuf>) -> Result<Option<PathBuf>> {
        Ok(flag.or_else(|| self.entries.get(key).map(|(_, v)| PathBuf::from(v))))
    }

    pub fn require_path(&self, key: &str, flag: Option<PathBuf>) -> Result<PathBuf> {
        self.path(key, flag)?
            .ok_or_else(|| CliError::Validation(format!("missing --{key} (flag or config file)")))
    }

    /// Boolean switch: a `--no-*` flag forces false, otherwise the file or the default.
    pub fn switch(&self, key: &str, disabled_by_flag: bool, default: bool) -> Result<bool> {
        if disabled_by_flag {
            return Ok(false);
        }
        Ok(self.parse_value::<bool>(key)?.unwrap_or(default))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_is_flag_then_file_then_default() {
        let cfg = ConfigFile::parse("density = 0.2\n# comment\nphi=2 # trailing\n").unwrap();
        assert_eq!(cfg.get("density", Some(0.4), 0.3).unwrap(), 0.4);
        assert_eq!(cfg.get("density", None, 0.3).unwrap(), 0.2);
        assert_eq!(cfg.get("epsilon", None, 1.0).unwrap(), 1.0);
        assert_eq!(cfg.get("phi", None, 1.0).unwrap(), 2.0);
    }

    #[test]
    fn lists_and_switches() {
        let cfg = ConfigFile::parse("beta-star = 0.1, 0.5,1\nblocks = false\n").unwrap();
        assert_eq!(cfg.get_list("beta-star", vec![], vec![0.5]).unwrap(), vec![0.1, 0.5, 1.0]);
        assert_eq!(cfg.get_list("beta-star", vec![2.0], vec![0.5]).unwrap(), vec![2.0]);
        assert!(!cfg.switch("blocks", false, true).unwrap());
        assert!(cfg.switch("ipf", false, true).unwrap());
        assert!(!cfg.switch("ipf", true, true).unwrap());
    }

    #[test]
    fn rejects_malformed_files() {
        assert!(ConfigFile::parse("densty = 0.3").unwrap_err().contains("unknown key"));
        assert!(ConfigFile::parse("density 0.3").is_err());
        assert!(ConfigFile::parse("seed = 1\nseed = 2").unwrap_err().contains("twice"));
        let cfg = ConfigFile::parse("density = lots").unwrap();
        assert!(matches!(cfg.get::<f64>("density", None, 0.3), Err(CliError::Validation(_))));
        let cfg = ConfigFile::parse("phi =").unwrap();
        assert!(cfg.get_list::<f64>("phi", vec![], vec![1.0]).is_err());
    }

    #[test]
    fn underscores_are_accepted() {
        let cfg = ConfigFile::parse("max_steps = 7").unwrap();
        assert_eq!(cfg.get("max-steps", None, 50usize).unwrap(), 7);
    }
}
