//! Loading datasets from CSV or LIBSVM files, normalisation into the unit
//! ball, and checksummed downloads.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::objectives::PointSet;
use crate::table::csv_error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Csv,
    Libsvm,
}

impl DataFormat {
    /// Guess from the file extension: `.csv` is CSV, everything else LIBSVM.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => DataFormat::Csv,
            _ => DataFormat::Libsvm,
        }
    }
}

/// Where a CSV file keeps its labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelColumn {
    #[default]
    None,
    Last,
}

/// A dense matrix straight from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub n: usize,
    pub d: usize,
    /// Row-major values.
    pub data: Vec<f64>,
    pub labels: Option<Vec<i64>>,
    pub source: String,
    pub sha256: Option<String>,
}

impl RawDataset {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_value(path: &Path, line: usize, s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| parse_error(path, line, format!("not a number: {s:?}")))?;
    if !v.is_finite() {
        return Err(parse_error(path, line, format!("non-finite value {s:?}")));
    }
    Ok(v)
}

fn parse_label(path: &Path, line: usize, s: &str) -> Result<i64> {
    let v = parse_value(path, line, s)?;
    if v.fract() != 0.0 {
        return Err(parse_error(
            path,
            line,
            format!("label {s:?} is not an integer"),
        ));
    }
    Ok(v as i64)
}

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Reads a dataset. CSV files may start with a non-numeric header line,
/// which is skipped.
pub fn load(path: &Path, format: DataFormat, label_col: LabelColumn) -> Result<RawDataset> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut raw = match format {
        DataFormat::Csv => load_csv(path, &bytes, label_col)?,
        DataFormat::Libsvm => load_libsvm(path, &bytes)?,
    };
    raw.sha256 = Some(sha256_hex(&bytes));
    Ok(raw)
}

fn load_csv(path: &Path, bytes: &[u8], label_col: LabelColumn) -> Result<RawDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    let mut n = 0;
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(i + 1, |p| p.line() as usize);
        if i == 0 && rec.iter().any(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        let cols = rec.len();
        match width {
            None => width = Some(cols),
            Some(w) if w != cols => {
                return Err(Error::InconsistentWidth {
                    path: path.to_path_buf(),
                    line,
                    expected: w,
                    actual: cols,
                })
            }
            _ => {}
        }
        let feature_cols = match label_col {
            LabelColumn::None => cols,
            LabelColumn::Last => {
                if cols < 2 {
                    return Err(parse_error(
                        path,
                        line,
                        "label column needs at least one feature",
                    ));
                }
                labels.push(parse_label(path, line, &rec[cols - 1])?);
                cols - 1
            }
        };
        for f in rec.iter().take(feature_cols) {
            data.push(parse_value(path, line, f)?);
        }
        n += 1;
    }
    let d = match width {
        Some(w) if n > 0 => w - usize::from(label_col == LabelColumn::Last),
        _ => return Err(Error::EmptyInput),
    };
    Ok(RawDataset {
        n,
        d,
        data,
        labels: (label_col == LabelColumn::Last).then_some(labels),
        source: path.display().to_string(),
        sha256: None,
    })
}

fn load_libsvm(path: &Path, bytes: &[u8]) -> Result<RawDataset> {
    let mut sparse: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut d = 0;
    for (i, line) in BufReader::new(bytes).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label = tokens.next().expect("non-empty line has a token");
        labels.push(parse_label(path, lineno, label)?);
        let mut row = Vec::new();
        let mut last = 0;
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| {
                parse_error(path, lineno, format!("expected idx:val, got {tok:?}"))
            })?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_error(path, lineno, format!("bad index {idx:?}")))?;
            if idx == 0 || idx <= last {
                return Err(parse_error(
                    path,
                    lineno,
                    "indices must be 1-based and increasing",
                ));
            }
            last = idx;
            row.push((idx - 1, parse_value(path, lineno, val)?));
            d = d.max(idx);
        }
        sparse.push(row);
    }
    if sparse.is_empty() || d == 0 {
        return Err(Error::EmptyInput);
    }
    let n = sparse.len();
    let mut data = vec![0.0; n * d];
    for (r, row) in sparse.iter().enumerate() {
        for &(c, v) in row {
            data[r * d + c] = v;
        }
    }
    Ok(RawDataset {
        n,
        d,
        data,
        labels: Some(labels),
        source: path.display().to_string(),
        sha256: None,
    })
}

/// Writes `raw` in the given format; labels go last (CSV) or first (LIBSVM).
pub fn write(raw: &RawDataset, path: &Path, format: DataFormat) -> Result<()> {
    let mut out = Vec::new();
    for i in 0..raw.n {
        let row = raw.row(i);
        let label = raw.labels.as_ref().map(|l| l[i]);
        let line = match format {
            DataFormat::Csv => {
                let mut fields: Vec<String> = row.iter().map(f64::to_string).collect();
                fields.extend(label.map(|l| l.to_string()));
                fields.join(",")
            }
            DataFormat::Libsvm => {
                let mut fields = vec![label.unwrap_or(0).to_string()];
                fields.extend(
                    row.iter()
                        .enumerate()
                        .filter(|(_, v)| **v != 0.0)
                        .map(|(c, v)| format!("{}:{v}", c + 1)),
                );
                fields.join(" ")
            }
        };
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Affine map applied by [`normalize_to_unit_ball`]: `x ↦ (x + shift) · scale`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Normalization {
    pub shift: Vec<f64>,
    pub scale: f64,
}

/// Moves the bounding-box midpoint to the origin, then shrinks by the largest
/// norm if that exceeds 1.
pub fn normalize_to_unit_ball(raw: &RawDataset) -> Result<(PointSet, Normalization)> {
    if raw.n == 0 || raw.d == 0 {
        return Err(Error::EmptyInput);
    }
    let d = raw.d;
    let shift: Vec<f64> = (0..d)
        .map(|c| {
            let (lo, hi) = (0..raw.n)
                .map(|r| raw.data[r * d + c])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
            -0.5 * (lo + hi)
        })
        .collect();
    let mut data: Vec<f64> = raw
        .data
        .chunks_exact(d)
        .flat_map(|row| row.iter().zip(&shift).map(|(x, s)| x + s))
        .collect();
    let max_norm = data
        .chunks_exact(d)
        .map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let scale = if max_norm > 1.0 { 1.0 / max_norm } else { 1.0 };
    if scale != 1.0 {
        data.iter_mut().for_each(|x| *x *= scale);
    }
    let name = Path::new(&raw.source)
        .file_name()
        .map_or_else(|| raw.source.clone(), |f| f.to_string_lossy().into_owned());
    Ok((
        PointSet::new(name, raw.n, d, data)?,
        Normalization { shift, scale },
    ))
}

/// Source of remote bytes, so downloads can be tested offline.
pub trait Transport {
    fn get(&self, url: &str) -> Result<Vec<u8>>;
}

/// Plain HTTP(S) downloads.
#[derive(Debug, Default, Clone, Copy)]
pub struct HttpTransport;

impl Transport for HttpTransport {
    fn get(&self, url: &str) -> Result<Vec<u8>> {
        let network = |message: String| Error::Network {
            url: url.to_string(),
            message,
        };
        let mut resp = ureq::get(url).call().map_err(|e| network(e.to_string()))?;
        resp.body_mut()
            .with_config()
            .limit(u64::MAX)
            .read_to_vec()
            .map_err(|e| network(e.to_string()))
    }
}

/// Downloads `url` to `dest` unless a file with the expected SHA-256 is
/// already there. The payload is verified before it is moved into place, so
/// a bad download never leaves a file at `dest`.
pub fn fetch(url: &str, sha256: &str, dest: &Path, transport: &dyn Transport) -> Result<PathBuf> {
    let expected = sha256.to_ascii_lowercase();
    if let Ok(existing) = fs::read(dest) {
        if sha256_hex(&existing) == expected {
            return Ok(dest.to_path_buf());
        }
    }
    let bytes = transport.get(url)?;
    let actual = sha256_hex(&bytes);
    if actual != expected {
        return Err(Error::ChecksumMismatch {
            url: url.to_string(),
            expected,
            actual,
        });
    }
    if let Some(dir) = dest.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = dest.with_extension(format!("part-{}", std::process::id()));
    fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, dest).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(dest, e)
    })?;
    Ok(dest.to_path_buf())
}
