//! Flat `key = value` configuration files and value parsers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::Complex;

/// Environment variable that overrides the output directory of the file.
pub const OUT_DIR_ENV: &str = "SLE_OUT_DIR";

/// Parsed `key = value` lines; `#` starts a comment.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
    source: Option<PathBuf>,
}

impl KeyValues {
    pub fn parse(text: &str, source: Option<&Path>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let at = |n: usize| match source {
            Some(p) => format!("{}:{n}", p.display()),
            None => format!("line {n}"),
        };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "{}: expected `key = value`, found `{raw}`",
                    at(i + 1)
                )));
            };
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(Error::Config(format!("{}: empty key", at(i + 1))));
            }
            if entries.insert(k.to_string(), (i + 1, v.to_string())).is_some() {
                return Err(Error::Config(format!("{}: duplicate key `{k}`", at(i + 1))));
            }
        }
        Ok(Self {
            entries,
            source: source.map(Path::to_path_buf),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, Some(path))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Rejects keys outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        let unknown: Vec<&str> = self.keys().filter(|k| !allowed.contains(k)).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "unknown key(s): {}; allowed: {}",
                unknown.join(", "),
                allowed.join(", ")
            )))
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    /// Value of `key` parsed with `parse`; `None` when absent.
    pub fn get_with<T>(&self, key: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((n, v)) => parse(v).map(Some).map_err(|e| {
                let src = self
                    .source
                    .as_ref()
                    .map_or(String::new(), |p| format!("{}:", p.display()));
                Error::Config(format!("{src}{n}: key `{key}`: {e}"))
            }),
        }
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get_with(key, |v| parse_value(v))
    }
}

pub fn parse_value<T: FromStr>(v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse `{v}`")))
}

/// A real number or a fraction such as `8/3`.
pub fn parse_kappa(v: &str) -> Result<f64> {
    match v.split_once('/') {
        Some((p, q)) => {
            let (p, q): (f64, f64) = (parse_value(p)?, parse_value(q)?);
            if q == 0.0 {
                return Err(Error::Config(format!("zero denominator in `{v}`")));
            }
            Ok(p / q)
        }
        None => parse_value(v),
    }
}

/// `x+yi`, `x-yi`, `yi` or `x`.
pub fn parse_complex(v: &str) -> Result<Complex> {
    let s: String = v.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::Config(format!("cannot parse complex number `{v}`"));
    let Some(body) = s.strip_suffix('i') else {
        return Ok(Complex::new(parse_value(&s)?, 0.0));
    };
    // Split at the last sign that is not part of an exponent.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => "1",
        "-" => "-1",
        other => other,
    };
    Ok(Complex::new(
        re.parse().map_err(|_| bad())?,
        im.parse().map_err(|_| bad())?,
    ))
}

/// Comma-separated list.
pub fn parse_list<T>(v: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| item(s.trim()))
        .collect()
}

/// Fully resolved settings in file order, written as a manifest that can be
/// fed back through `--config`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn render(&self) -> String {
        let mut s = String::from("# resolved configuration\n");
        for (k, v) in &self.entries {
            writeln!(s, "{k} = {v}").unwrap();
        }
        s
    }
}
