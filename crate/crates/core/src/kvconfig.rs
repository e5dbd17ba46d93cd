//! Flat `key = value` configuration files.
//!
//! Blank lines and `#` comments are ignored. Every key must be known to the
//! target config; a misspelled key is an error naming it.

use std::str::FromStr;

use crate::error::{Error, Result};

pub trait KeyValueConfig {
    /// Applies one entry; unknown keys are an error.
    fn set(&mut self, key: &str, value: &str) -> Result<()>;

    fn validate(&self) -> Result<()> {
        Ok(())
    }
}

/// `(line, key, value)` entries in file order.
pub fn parse_entries(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out: Vec<(usize, String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
        let key = k.trim().to_string();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        if out.iter().any(|(_, seen, _)| *seen == key) {
            return Err(Error::Config(format!("line {}: key `{key}` given twice", i + 1)));
        }
        out.push((i + 1, key, v.trim().to_string()));
    }
    Ok(out)
}

/// Applies a config file on top of `base` and validates the result.
pub fn load<T: KeyValueConfig>(mut base: T, text: &str) -> Result<T> {
    for (line, key, value) in parse_entries(text)? {
        base.set(&key, &value).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("line {line}: {m}")),
            other => other,
        })?;
    }
    base.validate()?;
    Ok(base)
}

pub fn value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::Config(format!("invalid value `{raw}` for key `{key}`")))
}

pub fn bool_value(key: &str, raw: &str) -> Result<bool> {
    match raw.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean `{raw}` for key `{key}`"))),
    }
}

/// Comma-separated list of numbers.
pub fn list_value(key: &str, raw: &str) -> Result<Vec<f64>> {
    raw.split(',').map(|s| value(key, s.trim())).collect()
}

pub fn unknown_key(key: &str) -> Error {
    Error::Config(format!("unknown key `{key}`"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Default, Debug)]
    struct Demo {
        a: f64,
        flag: bool,
    }

    impl KeyValueConfig for Demo {
        fn set(&mut self, key: &str, v: &str) -> Result<()> {
            match key {
                "a" => self.a = value(key, v)?,
                "flag" => self.flag = bool_value(key, v)?,
                _ => return Err(unknown_key(key)),
            }
            Ok(())
        }
    }

    #[test]
    fn loads_values_and_comments() {
        let d = load(Demo::default(), "# c\na = 2.5  # trailing\n\nflag = true\n").unwrap();
        assert_eq!((d.a, d.flag), (2.5, true));
    }

    #[test]
    fn misspelled_key_is_named() {
        let e = load(Demo::default(), "a = 1\nflg = 1\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("`flg`") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn malformed_entries() {
        assert!(load(Demo::default(), "a 1").is_err());
        assert!(load(Demo::default(), "a = x").is_err());
        assert!(load(Demo::default(), "a = 1\na = 2").is_err());
    }
}
