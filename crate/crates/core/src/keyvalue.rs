//! Flat `key: value` text used for configuration, model files and prototype
//! sidecars. Blank lines and lines starting with `#` are ignored; the first
//! `:` separates key from value; whitespace around both is trimmed.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KeyValueError {
    #[error("line {line}: expected `key: value`")]
    Syntax { line: usize },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("missing key `{0}`")]
    Missing(String),
    #[error("key `{key}`: cannot parse {value:?}")]
    BadValue { key: String, value: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: Vec<(String, String)>,
}

impl KeyValues {
    pub fn new() -> Self {
        KeyValues::default()
    }

    pub fn parse(text: &str) -> Result<Self, KeyValueError> {
        let mut kv = KeyValues::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once(':').ok_or(KeyValueError::Syntax { line: i + 1 })?;
            let k = k.trim();
            if k.is_empty() {
                return Err(KeyValueError::Syntax { line: i + 1 });
            }
            if kv.get(k).is_some() {
                return Err(KeyValueError::Duplicate { line: i + 1, key: k.to_string() });
            }
            kv.entries.push((k.to_string(), v.trim().to_string()));
        }
        Ok(kv)
    }

    pub fn load(path: &Path) -> Result<Self, KeyValueError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| KeyValueError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        let key = key.into();
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key, value)),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn require(&self, key: &str) -> Result<&str, KeyValueError> {
        self.get(key).ok_or_else(|| KeyValueError::Missing(key.to_string()))
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, KeyValueError> {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|_| KeyValueError::BadValue { key: key.into(), value: v.into() }))
            .transpose()
    }

    pub fn required<T: FromStr>(&self, key: &str) -> Result<T, KeyValueError> {
        self.parsed(key)?.ok_or_else(|| KeyValueError::Missing(key.to_string()))
    }

    /// Comma-separated list of numbers.
    pub fn vector(&self, key: &str) -> Result<Vec<f64>, KeyValueError> {
        let raw = self.require(key)?;
        if raw.is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|p| {
                p.trim().parse::<f64>().map_err(|_| KeyValueError::BadValue { key: key.into(), value: raw.into() })
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k}: {v}");
        }
        out
    }
}

/// Joins numbers with commas using the shortest exact representation.
pub fn join_vector(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_writes() {
        let kv = KeyValues::parse("# c\n a : 1 \n\nb: x:y\nv: 1.5, -2,3e-1\n").unwrap();
        assert_eq!(kv.get("a"), Some("1"));
        assert_eq!(kv.get("b"), Some("x:y"));
        assert_eq!(kv.vector("v").unwrap(), vec![1.5, -2.0, 0.3]);
        assert_eq!(kv.required::<u32>("a").unwrap(), 1);
        assert!(kv.required::<u32>("b").is_err());
        assert_eq!(KeyValues::parse(&kv.to_text()).unwrap(), kv);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(matches!(KeyValues::parse("novalue"), Err(KeyValueError::Syntax { line: 1 })));
        assert!(matches!(KeyValues::parse("a:1\na:2"), Err(KeyValueError::Duplicate { line: 2, .. })));
        assert!(matches!(KeyValues::parse(": x"), Err(KeyValueError::Syntax { .. })));
    }
}
