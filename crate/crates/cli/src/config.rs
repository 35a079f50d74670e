//! Flat `key = value` configuration files. Keys are the long flag names;
//! a flag given on the command line overrides the file.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use clap::ValueEnum;

use crate::error::CliError;

pub const KNOWN_KEYS: &[&str] = &[
    "gamma-a",
    "gamma-b",
    "delta1",
    "delta2",
    "omega-a",
    "delta-ab",
    "rho",
    "c",
    "t",
    "tol",
    "format",
    "out",
    "grid-modes",
    "grid-width",
    "dt",
    "oracle-tol",
    "param",
    "min",
    "max",
    "count",
    "scale",
    "panel",
    "points",
    "kind",
    "r-min",
    "r-max",
    "timing",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    /// Parses `key = value` lines. Blank lines and lines starting with `#`
    /// or `;` are skipped; `[section]` headers are ignored.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty()
                || line.starts_with('#')
                || line.starts_with(';')
                || line.starts_with('[')
            {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::config(format!("line {}: expected key=value, got `{line}`", i + 1))
            })?;
            let key = key.trim().replace('_', "-");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::config(format!(
                    "line {}: unknown key `{key}`",
                    i + 1
                )));
            }
            if entries
                .insert(key.clone(), value.trim().to_string())
                .is_some()
            {
                return Err(CliError::config(format!(
                    "line {}: duplicate key `{key}`",
                    i + 1
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// The flag if given, otherwise the parsed file entry.
    pub fn pick<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::config(format!("`{key}` = `{v}`: {e}")))
            })
            .transpose()
    }

    /// Like [`pick`](Self::pick) for clap value enums.
    pub fn pick_enum<T: ValueEnum>(
        &self,
        key: &str,
        flag: Option<T>,
    ) -> Result<Option<T>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        self.get(key)
            .map(|v| {
                T::from_str(v, true).map_err(|e| CliError::config(format!("`{key}` = `{v}`: {e}")))
            })
            .transpose()
    }
}
