//! Flat `key = value` config files and the grid syntax shared with flags.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Keys and raw values of a config file, in file order of last assignment.
#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("config line {}: expected `key = value`", i + 1)))?;
            let key = key.trim().replace('-', "_");
            if key.is_empty() {
                return Err(usage(format!("config line {}: empty key", i + 1)));
            }
            values.insert(key, value.trim().trim_matches('"').to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    pub fn parsed<T: std::str::FromStr>(&self, key: &str) -> anyhow::Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| usage(format!("config key {key}: cannot parse {v:?}")))
            })
            .transpose()
    }
}

/// `a,b,c` or the geometric range `lo:hi:xM` (`lo, lo·M, …` up to `hi`).
pub fn parse_usize_grid(s: &str) -> anyhow::Result<Vec<usize>> {
    let bad = || usage(format!("cannot parse grid {s:?}; use a,b,c or lo:hi:xM"));
    let s = s.trim();
    let grid: Vec<usize> = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: usize = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: usize = parts[1].trim().parse().map_err(|_| bad())?;
        let m: usize = parts[2]
            .trim()
            .strip_prefix('x')
            .ok_or_else(bad)?
            .parse()
            .map_err(|_| bad())?;
        if lo == 0 || m < 2 || hi < lo {
            return Err(bad());
        }
        std::iter::successors(Some(lo), |&v| v.checked_mul(m))
            .take_while(|&v| v <= hi)
            .collect()
    } else {
        s.split(',')
            .map(|t| t.trim().parse().map_err(|_| bad()))
            .collect::<anyhow::Result<_>>()?
    };
    if grid.is_empty() {
        return Err(bad());
    }
    Ok(grid)
}

pub fn parse_f64_list(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| usage(format!("cannot parse number {t:?} in {s:?}")))
        })
        .collect()
}
