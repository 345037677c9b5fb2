//! Datasets: LIBSVM and CSV loading, synthetic Gaussians, balanced splits
//! and standardization.

use std::fmt::Write as _;
use std::io::{BufRead, Read};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, streams};

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("line {line}: malformed token `{token}`")]
    MalformedToken { line: usize, token: String },
    #[error("line {line}: non-increasing index {index} after {previous}")]
    NonIncreasingIndex { line: usize, index: usize, previous: usize },
    #[error("line {line}: more than two distinct labels (`{label}`)")]
    TooManyLabels { line: usize, label: String },
    #[error("empty input")]
    Empty,
    #[error("row {row}: expected {expected} fields, found {found}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("row {row}, column {column}: non-numeric cell `{cell}`")]
    NonNumeric { row: usize, column: usize, cell: String },
    #[error("label column {column} out of range for {width} columns")]
    LabelColumn { column: usize, width: usize },
    #[error("line {line}: non-finite value `{token}`")]
    NonFinite { line: usize, token: String },
}

/// Dense patterns with ±1 labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub patterns: Array2<f64>,
    pub labels: Vec<i8>,
    pub source: String,
}

impl Dataset {
    pub fn new(patterns: Array2<f64>, labels: Vec<i8>, source: impl Into<String>) -> Result<Self> {
        if patterns.nrows() != labels.len() {
            return Err(Error::Dimension {
                expected: patterns.nrows(),
                got: labels.len(),
            });
        }
        if labels.is_empty() {
            return Err(Error::InvalidInput("dataset has no rows".into()));
        }
        if labels.iter().any(|&y| y != 1 && y != -1) {
            return Err(Error::InvalidInput("labels must be +1 or -1".into()));
        }
        if patterns.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("features must be finite".into()));
        }
        Ok(Dataset {
            patterns,
            labels,
            source: source.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.patterns.ncols()
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&y| y > 0).count();
        (pos, self.len() - pos)
    }

    fn rows_with_label(&self, label: i8) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == label).collect()
    }

    /// LIBSVM text; zeros are omitted and values use shortest round-trip form.
    pub fn to_libsvm(&self) -> String {
        let mut out = String::new();
        for (row, &y) in self.patterns.rows().into_iter().zip(&self.labels) {
            out.push_str(if y > 0 { "+1" } else { "-1" });
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    let _ = write!(out, " {}:{}", j + 1, v);
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Maps the raw labels seen so far to ±1: the smaller of two maps to −1. A
/// single raw label maps to +1 when positive, −1 otherwise.
fn remap_labels(raw: &[f64]) -> Vec<i8> {
    let mut distinct: Vec<f64> = raw.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    raw.iter()
        .map(|&v| match distinct.len() {
            1 => {
                if v > 0.0 {
                    1
                } else {
                    -1
                }
            }
            _ => {
                if v == distinct[0] {
                    -1
                } else {
                    1
                }
            }
        })
        .collect()
}

struct LabelSet(Vec<f64>);

impl LabelSet {
    fn admit(&mut self, value: f64, line: usize, token: &str) -> std::result::Result<(), ParseError> {
        if !self.0.contains(&value) {
            if self.0.len() == 2 {
                return Err(ParseError::TooManyLabels {
                    line,
                    label: token.to_string(),
                });
            }
            self.0.push(value);
        }
        Ok(())
    }
}

fn parse_finite(token: &str, line: usize) -> std::result::Result<f64, ParseError> {
    let v: f64 = token.parse().map_err(|_| ParseError::MalformedToken {
        line,
        token: token.to_string(),
    })?;
    if !v.is_finite() {
        return Err(ParseError::NonFinite {
            line,
            token: token.to_string(),
        });
    }
    Ok(v)
}

/// `<label> <index>:<value> ...` with strictly increasing 1-based indices.
/// Blank lines and `#` comments are skipped.
pub fn parse_libsvm(reader: impl BufRead) -> Result<Dataset> {
    let mut labels = LabelSet(Vec::new());
    let mut raw_labels = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut dim = 0;
    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_token = tokens.next().expect("non-empty line has a token");
        let label = parse_finite(label_token, line_no)?;
        labels.admit(label, line_no, label_token)?;
        let mut entries = Vec::new();
        let mut previous = 0;
        for token in tokens {
            let malformed = || ParseError::MalformedToken {
                line: line_no,
                token: token.to_string(),
            };
            let (idx, val) = token.split_once(':').ok_or_else(malformed)?;
            let index: usize = idx.parse().map_err(|_| malformed())?;
            if index == 0 {
                return Err(malformed().into());
            }
            if index <= previous {
                return Err(ParseError::NonIncreasingIndex {
                    line: line_no,
                    index,
                    previous,
                }
                .into());
            }
            previous = index;
            entries.push((index - 1, parse_finite(val, line_no)?));
        }
        dim = dim.max(previous);
        raw_labels.push(label);
        rows.push(entries);
    }
    if rows.is_empty() {
        return Err(ParseError::Empty.into());
    }
    let mut patterns = Array2::zeros((rows.len(), dim));
    for (i, entries) in rows.iter().enumerate() {
        for &(j, v) in entries {
            patterns[[i, j]] = v;
        }
    }
    Dataset::new(patterns, remap_labels(&raw_labels), "libsvm")
}

/// Rectangular numeric CSV. A first row containing any non-numeric cell is
/// treated as a header and skipped.
pub fn parse_csv(reader: impl Read, label_column: usize) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        records.push(rec);
    }
    if records.first().is_some_and(|r| r.iter().any(|c| c.parse::<f64>().is_err())) {
        records.remove(0);
    }
    let first = records.first().ok_or(ParseError::Empty)?;
    let width = first.len();
    if label_column >= width {
        return Err(ParseError::LabelColumn {
            column: label_column,
            width,
        }
        .into());
    }
    let mut labels = LabelSet(Vec::new());
    let mut raw_labels = Vec::with_capacity(records.len());
    let mut patterns = Array2::zeros((records.len(), width - 1));
    for (i, rec) in records.iter().enumerate() {
        let row = rec.position().map_or(i + 1, |p| p.line() as usize);
        if rec.len() != width {
            return Err(ParseError::Ragged {
                row,
                expected: width,
                found: rec.len(),
            }
            .into());
        }
        let mut col = 0;
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| ParseError::NonNumeric {
                    row,
                    column: j + 1,
                    cell: cell.to_string(),
                })?;
            if j == label_column {
                labels.admit(v, row, cell)?;
                raw_labels.push(v);
            } else {
                patterns[[i, col]] = v;
                col += 1;
            }
        }
    }
    Dataset::new(patterns, remap_labels(&raw_labels), "csv")
}

/// Positives from `N(+μ, I)`, negatives from `N(-μ, I)`, with
/// `μ = (separation / 2) · 1 / √d`, so the class means sit `separation`
/// apart. Positives come first.
pub fn gen_gaussians(d: usize, n_pos: usize, n_neg: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if d == 0 {
        return Err(Error::InvalidInput("dimension must be at least 1".into()));
    }
    if !(separation >= 0.0) || !separation.is_finite() {
        return Err(Error::InvalidInput(format!("separation must be non-negative, got {separation}")));
    }
    let mu = 0.5 * separation / (d as f64).sqrt();
    let mut rng = stream_rng(seed, streams::DATA);
    let n = n_pos + n_neg;
    let mut patterns = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let (y, centre) = if i < n_pos { (1, mu) } else { (-1, -mu) };
        for j in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            patterns[[i, j]] = centre + z;
        }
        labels.push(y);
    }
    Dataset::new(patterns, labels, format!("gauss:{d}:{separation}"))
}

/// Clean training data split by class.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledPool {
    pub positives: Array2<f64>,
    pub negatives: Array2<f64>,
}

impl LabeledPool {
    pub fn new(positives: Array2<f64>, negatives: Array2<f64>) -> Result<Self> {
        if positives.ncols() != negatives.ncols() {
            return Err(Error::Dimension {
                expected: positives.ncols(),
                got: negatives.ncols(),
            });
        }
        Ok(LabeledPool { positives, negatives })
    }

    pub fn dim(&self) -> usize {
        self.positives.ncols()
    }
}

/// Splits off `round(test_fraction · n)` rows as a test set. With
/// `balanced_test` the test set holds equal counts of each class (rounded
/// down to even).
pub fn split(ds: &Dataset, test_fraction: f64, balanced_test: bool, seed: u64) -> Result<(LabeledPool, Dataset)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::InvalidInput(format!("test fraction must lie in [0, 1), got {test_fraction}")));
    }
    let n_test = (test_fraction * ds.len() as f64 + 0.5).floor() as usize;
    if balanced_test {
        split_counts(ds, n_test / 2, n_test / 2, seed)
    } else {
        let (pos, neg) = ds.class_counts();
        let n_test_pos = (n_test as f64 * pos as f64 / ds.len() as f64 + 0.5).floor() as usize;
        let n_test_pos = n_test_pos.min(pos);
        split_counts(ds, n_test_pos, (n_test - n_test_pos).min(neg), seed)
    }
}

/// Splits off exactly `n_test_pos` positives and `n_test_neg` negatives.
pub fn split_counts(ds: &Dataset, n_test_pos: usize, n_test_neg: usize, seed: u64) -> Result<(LabeledPool, Dataset)> {
    let mut rng = stream_rng(seed, streams::SPLIT);
    let mut pos = ds.rows_with_label(1);
    let mut neg = ds.rows_with_label(-1);
    for (have, want, class) in [(pos.len(), n_test_pos, "positive"), (neg.len(), n_test_neg, "negative")] {
        if want > have {
            return Err(Error::Budget(format!(
                "test split needs {want} {class} rows but the dataset has {have}"
            )));
        }
    }
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let (test_pos, train_pos) = pos.split_at(n_test_pos);
    let (test_neg, train_neg) = neg.split_at(n_test_neg);
    let mut test_rows: Vec<usize> = test_pos.iter().chain(test_neg).copied().collect();
    test_rows.sort_unstable();
    let test = Dataset::new(
        ds.patterns.select(Axis(0), &test_rows),
        test_rows.iter().map(|&i| ds.labels[i]).collect(),
        format!("{}:test", ds.source),
    )?;
    let mut train_pos = train_pos.to_vec();
    let mut train_neg = train_neg.to_vec();
    train_pos.sort_unstable();
    train_neg.sort_unstable();
    let pool = LabeledPool::new(ds.patterns.select(Axis(0), &train_pos), ds.patterns.select(Axis(0), &train_neg))?;
    Ok((pool, test))
}

/// Per-feature z-scoring. Constant features are centred only.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub scale: Array1<f64>,
}

impl Standardizer {
    /// Fit on the union of the given row blocks.
    pub fn fit(blocks: &[ArrayView2<'_, f64>]) -> Self {
        let both = ndarray::concatenate(Axis(0), blocks).expect("blocks share a dimension");
        let n = both.nrows().max(1) as f64;
        let mean = both.sum_axis(Axis(0)) / n;
        let var = both
            .rows()
            .into_iter()
            .fold(Array1::zeros(both.ncols()), |acc: Array1<f64>, r| acc + (&r - &mean).mapv(|v| v * v))
            / n;
        let scale = var.mapv(|v| if v > 0.0 { v.sqrt() } else { 1.0 });
        Standardizer { mean, scale }
    }

    pub fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        (x - &self.mean) / &self.scale
    }

    pub fn apply_row(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        (&x - &self.mean) / &self.scale
    }

    pub fn apply_pool(&self, pool: &LabeledPool) -> LabeledPool {
        LabeledPool {
            positives: self.apply(&pool.positives),
            negatives: self.apply(&pool.negatives),
        }
    }

    pub fn apply_dataset(&self, ds: &Dataset) -> Dataset {
        Dataset {
            patterns: self.apply(&ds.patterns),
            labels: ds.labels.clone(),
            source: ds.source.clone(),
        }
    }
}

/// `libsvm:<path>`, `csv:<path>:<labelcol>` or `gauss:<d>:<sep>`.
#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Libsvm(String),
    Csv { path: String, label_column: usize },
    Gauss { d: usize, separation: f64 },
}

impl std::str::FromStr for DataSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("bad data source `{s}`; expected libsvm:<path>, csv:<path>:<labelcol> or gauss:<d>:<sep>"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "libsvm" if !rest.is_empty() => Ok(DataSource::Libsvm(rest.to_string())),
            "csv" => {
                let (path, col) = rest.rsplit_once(':').ok_or_else(bad)?;
                Ok(DataSource::Csv {
                    path: path.to_string(),
                    label_column: col.parse().map_err(|_| bad())?,
                })
            }
            "gauss" => {
                let (d, sep) = rest.split_once(':').ok_or_else(bad)?;
                Ok(DataSource::Gauss {
                    d: d.parse().map_err(|_| bad())?,
                    separation: sep.parse().map_err(|_| bad())?,
                })
            }
            _ => Err(bad()),
        }
    }
}

impl std::fmt::Display for DataSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DataSource::Libsvm(p) => write!(f, "libsvm:{p}"),
            DataSource::Csv { path, label_column } => write!(f, "csv:{path}:{label_column}"),
            DataSource::Gauss { d, separation } => write!(f, "gauss:{d}:{separation}"),
        }
    }
}

impl DataSource {
    /// Loads file sources; synthetic sources draw `n_pos` + `n_neg` points.
    pub fn load(&self, n_pos: usize, n_neg: usize, seed: u64) -> Result<Dataset> {
        let open = |p: &str| -> Result<std::fs::File> {
            std::fs::File::open(p).map_err(|e| Error::from(e).context(format!("opening {p}")))
        };
        match self {
            DataSource::Libsvm(p) => parse_libsvm(std::io::BufReader::new(open(p)?)),
            DataSource::Csv { path, label_column } => parse_csv(open(path)?, *label_column),
            DataSource::Gauss { d, separation } => gen_gaussians(*d, n_pos, n_neg, *separation, seed),
        }
    }
}
