//! Layered run settings: built-in default, then config file, then flag.
//!
//! Config files are UTF-8 text with one `key = value` pair per line. Blank
//! lines are skipped and `#` starts a comment that runs to the end of the
//! line. Keys are the long flag names, with `-` and `_` interchangeable, so
//! `batch_size = 32` and `batch-size = 32` both set `--batch-size`. A key
//! that names no flag, or appears twice, is rejected with its line number.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use gridsentry::{Error, Result};
use serde::Serialize;

#[derive(Debug, Default)]
pub struct ConfigFile {
    source: String,
    entries: BTreeMap<String, (String, usize)>,
}

pub fn canonical_key(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl ConfigFile {
    pub fn parse(text: &str, source: &str, known: &BTreeSet<String>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("{source}: line {line_no}: expected `key = value`, got `{line}`"))
            })?;
            let key = canonical_key(key);
            if key.is_empty() {
                return Err(Error::Config(format!("{source}: line {line_no}: missing key")));
            }
            if !known.contains(&key) {
                return Err(Error::Config(format!("{source}: line {line_no}: unknown key `{key}`")));
            }
            if let Some((_, first)) = entries.get(&key) {
                return Err(Error::Config(format!(
                    "{source}: line {line_no}: duplicate key `{key}` (first set on line {first})"
                )));
            }
            entries.insert(key, (value.trim().to_string(), line_no));
        }
        Ok(Self {
            source: source.to_string(),
            entries,
        })
    }

    pub fn load(path: &Path, known: &BTreeSet<String>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text, &path.display().to_string(), known)
    }
}

/// Resolves each setting once and remembers the effective value for the
/// report.
#[derive(Debug, Default)]
pub struct Settings {
    file: ConfigFile,
    effective: BTreeMap<String, serde_json::Value>,
}

impl Settings {
    pub fn new(file: ConfigFile) -> Self {
        Self {
            file,
            effective: BTreeMap::new(),
        }
    }

    fn file_value<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.file.entries.get(key) {
            None => Ok(None),
            Some((raw, line)) => raw.parse::<T>().map(Some).map_err(|e| {
                Error::Config(format!(
                    "{}: line {line}: bad value `{raw}` for `{key}`: {e}",
                    self.file.source
                ))
            }),
        }
    }

    fn record<T: Serialize>(&mut self, key: &str, value: &T) {
        let v = serde_json::to_value(value).expect("setting serializes");
        self.effective.insert(key.to_string(), v);
    }

    /// Flag, else config file, else `default`.
    pub fn value<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Serialize,
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => v,
            None => self.file_value(key)?.unwrap_or(default),
        };
        self.record(key, &v);
        Ok(v)
    }

    /// Like [`Settings::value`] without a default; absent settings echo as null.
    pub fn optional<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + Serialize,
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => Some(v),
            None => self.file_value(key)?,
        };
        self.record(key, &v);
        Ok(v)
    }

    pub fn required<T>(&mut self, key: &str, flag: Option<T>) -> Result<T>
    where
        T: FromStr + Serialize,
        T::Err: Display,
    {
        self.optional(key, flag)?.ok_or_else(|| {
            Error::Usage(format!("--{} is required (flag or config key `{key}`)", key.replace('_', "-")))
        })
    }

    pub fn effective(&self) -> &BTreeMap<String, serde_json::Value> {
        &self.effective
    }
}

/// Comma-separated list value such as `64,128`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: Display,
{
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.trim().is_empty() {
            return Ok(List(Vec::new()));
        }
        s.split(',')
            .map(|p| p.trim().parse::<T>().map_err(|e| format!("`{}`: {e}", p.trim())))
            .collect::<std::result::Result<Vec<T>, String>>()
            .map(List)
    }
}
