//! The excess-risk CSV shared by the harness, the hard-instance experiment
//! and the curve fit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact header line of every risk CSV.
pub const RISK_HEADER: [&str; 11] = [
    "dataset",
    "objective",
    "z",
    "j",
    "k",
    "n",
    "repeat",
    "seed",
    "sample_cost",
    "full_cost",
    "excess",
];

/// One training run: costs are per point, `excess = full_cost - OPT`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub dataset: String,
    pub objective: String,
    pub z: u32,
    pub j: usize,
    pub k: usize,
    pub n: usize,
    pub repeat: usize,
    pub seed: u64,
    pub sample_cost: f64,
    pub full_cost: f64,
    pub excess: f64,
}

pub fn write_risk_csv(path: &Path, rows: &[RiskRow]) -> Result<()> {
    let mut bytes = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut bytes);
        if rows.is_empty() {
            w.write_record(RISK_HEADER)
                .map_err(|e| csv_error(path, e))?;
        }
        for row in rows {
            w.serialize(row).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_risk_csv(path: &Path) -> Result<Vec<RiskRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().ne(RISK_HEADER) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header {}", RISK_HEADER.join(",")),
        });
    }
    r.deserialize()
        .map(|row| row.map_err(|e| csv_error(path, e)))
        .collect()
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => Error::InconsistentWidth {
            path: path.to_path_buf(),
            line,
            expected: expected_len as usize,
            actual: len as usize,
        },
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Mean, minimum and maximum excess of one `(k, n)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub k: usize,
    pub n: usize,
    pub repeats: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Per-`(k, n)` aggregates, sorted by `k` then `n`.
pub fn summarize(rows: &[RiskRow]) -> Vec<CellSummary> {
    let mut cells: std::collections::BTreeMap<(usize, usize), Vec<f64>> = Default::default();
    for r in rows {
        cells.entry((r.k, r.n)).or_default().push(r.excess);
    }
    cells
        .into_iter()
        .map(|((k, n), xs)| CellSummary {
            k,
            n,
            repeats: xs.len(),
            mean: xs.iter().sum::<f64>() / xs.len() as f64,
            min: xs.iter().copied().fold(f64::INFINITY, f64::min),
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
        .collect()
}
