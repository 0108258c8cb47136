//! `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are unique.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("duplicate key `{0}`")]
    Duplicate(String),
    #[error("unknown key `{0}`")]
    Unknown(String),
    #[error("invalid value for `{key}`: {value}")]
    Value { key: String, value: String },
}

#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: i + 1 })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax { line: i + 1 });
            }
            if entries
                .insert(key.to_string(), value.trim().to_string())
                .is_some()
            {
                return Err(ConfigError::Duplicate(key.to_string()));
            }
        }
        Ok(KeyValues { entries })
    }

    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Remove and parse `key`, if present.
    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(value) => value.parse().map(Some).map_err(|_| ConfigError::Value {
                key: key.to_string(),
                value,
            }),
        }
    }

    /// Remove and parse a comma-separated list.
    pub fn take_list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>, ConfigError> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(value) => value
                .split(',')
                .map(|part| part.trim().parse())
                .collect::<Result<Vec<T>, _>>()
                .map(Some)
                .map_err(|_| ConfigError::Value {
                    key: key.to_string(),
                    value,
                }),
        }
    }

    /// Fail on the first key nobody consumed.
    pub fn finish(self) -> Result<(), ConfigError> {
        match self.entries.into_keys().next() {
            Some(key) => Err(ConfigError::Unknown(key)),
            None => Ok(()),
        }
    }
}

pub(crate) fn invalid(key: &str, value: impl ToString) -> ConfigError {
    ConfigError::Value {
        key: key.to_string(),
        value: value.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_consumes() {
        let mut kv = KeyValues::parse("# c\n a = 1 \n\nlist=1, 2,3\n").unwrap();
        assert_eq!(kv.take::<u32>("a").unwrap(), Some(1));
        assert_eq!(kv.take_list::<u8>("list").unwrap(), Some(vec![1, 2, 3]));
        assert_eq!(kv.take::<u32>("missing").unwrap(), None);
        kv.finish().unwrap();
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            KeyValues::parse("novalue"),
            Err(ConfigError::Syntax { line: 1 })
        ));
        assert!(matches!(
            KeyValues::parse("a=1\na=2"),
            Err(ConfigError::Duplicate(_))
        ));
        let mut kv = KeyValues::parse("a = x\nb = 1").unwrap();
        assert!(kv.take::<f64>("a").is_err());
        assert!(matches!(kv.finish(), Err(ConfigError::Unknown(k)) if k == "b"));
    }
}
