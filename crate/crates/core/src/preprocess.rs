//! Dataset ingestion, log transform, percentile-robust scaling and splits.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream;

/// Floor applied to zero entries before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-12;
/// Percentiles mapped to `−π/2` and `+π/2`.
pub const LOWER_QUANTILE: f64 = 0.01;
pub const UPPER_QUANTILE: f64 = 0.99;

/// Which columns are log-transformed, by name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    #[serde(default)]
    pub log_columns: Vec<String>,
}

impl ColumnMeta {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(File::open(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        writeln!(f)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub columns: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<i8>,
    pub meta: ColumnMeta,
}

impl Dataset {
    pub fn new(columns: Vec<String>, features: Vec<Vec<f64>>, labels: Vec<i8>, meta: ColumnMeta) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: features.len(), got: labels.len() });
        }
        if let Some(row) = features.iter().find(|r| r.len() != columns.len()) {
            return Err(Error::DimensionMismatch { expected: columns.len(), got: row.len() });
        }
        if let Some(l) = labels.iter().find(|l| **l != 1 && **l != -1) {
            return Err(Error::Format(format!("label {l} is not ±1")));
        }
        if let Some(name) = meta.log_columns.iter().find(|c| !columns.contains(c)) {
            return Err(Error::Format(format!("log column {name:?} is not in the dataset")));
        }
        Ok(Self { columns, features, labels, meta })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.features.iter().map(|r| r[j]).collect()
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|l| **l == 1).count();
        (pos, self.len() - pos)
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            columns: self.columns.clone(),
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            meta: self.meta.clone(),
        }
    }

    /// Reads a CSV with a header row and a `label` column holding ±1 or 0/1.
    pub fn read_csv<R: Read>(r: R, meta: ColumnMeta) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(r);
        let header: Vec<String> = reader.headers()?.iter().map(|s| s.trim().to_string()).collect();
        let label_col = header.iter().position(|h| h == "label").ok_or_else(|| Error::Format("missing \"label\" column".into()))?;
        let columns: Vec<String> = header.iter().enumerate().filter(|(i, _)| *i != label_col).map(|(_, h)| h.clone()).collect();
        let mut raw_labels = Vec::new();
        let mut features = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::Format(format!("row {}: cannot parse {s:?}", line + 1)));
            raw_labels.push(parse(&record[label_col])?);
            features.push(record.iter().enumerate().filter(|(i, _)| *i != label_col).map(|(_, s)| parse(s)).collect::<Result<Vec<_>>>()?);
        }
        let zero_one = raw_labels.iter().all(|v| *v == 0.0 || *v == 1.0);
        let labels = raw_labels
            .iter()
            .map(|&v| match v {
                1.0 => Ok(1),
                v if v == -1.0 && !zero_one => Ok(-1),
                v if v == 0.0 && zero_one => Ok(-1),
                v => Err(Error::Format(format!("label {v} is not in {{-1, 1}} or {{0, 1}}"))),
            })
            .collect::<Result<Vec<i8>>>()?;
        Dataset::new(columns, features, labels, meta)
    }

    pub fn load(csv_path: &Path, meta_path: Option<&Path>) -> Result<Self> {
        let meta = meta_path.map(ColumnMeta::load).transpose()?.unwrap_or_default();
        Self::read_csv(File::open(csv_path)?, meta)
    }

    /// Writes `label` first, then the feature columns, with round-trip exact floats.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(w);
        writer.write_record(std::iter::once("label").chain(self.columns.iter().map(String::as_str)))?;
        for (row, label) in self.features.iter().zip(&self.labels) {
            writer.write_record(std::iter::once(label.to_string()).chain(row.iter().map(|v| v.to_string())))?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn save(&self, csv_path: &Path, meta_path: &Path) -> Result<()> {
        self.write_csv(File::create(csv_path)?)?;
        self.meta.save(meta_path)
    }

    /// Applies `log₁₀` to the columns named in the metadata.
    pub fn log_transformed(&self, take_abs: bool) -> Result<Dataset> {
        let mut out = self.clone();
        for (j, name) in self.columns.iter().enumerate() {
            if !self.meta.log_columns.contains(name) {
                continue;
            }
            let col = log_transform(&self.column(j), take_abs).map_err(|e| match e {
                Error::InvalidArgument(msg) => Error::InvalidArgument(format!("column {name:?}: {msg}")),
                e => e,
            })?;
            for (row, v) in out.features.iter_mut().zip(col) {
                row[j] = v;
            }
        }
        out.meta.log_columns.clear();
        Ok(out)
    }
}

/// Elementwise `log₁₀`, optionally of the absolute value. Zeros are floored
/// to [`LOG_FLOOR`].
pub fn log_transform(col: &[f64], take_abs: bool) -> Result<Vec<f64>> {
    col.iter()
        .map(|&x| {
            let v = if take_abs { x.abs() } else { x };
            if v < 0.0 || v.is_nan() {
                return Err(Error::InvalidArgument(format!("cannot take log of {x}")));
            }
            Ok(v.max(LOG_FLOOR).log10())
        })
        .collect()
}

/// Quantile `q` of an ascending slice by linear interpolation between order
/// statistics (`h = (n − 1) q`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty column");
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Maps each column's first percentile to `−π/2` and 99th to `+π/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustScaler {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl RobustScaler {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map(Vec::len).ok_or_else(|| Error::InvalidArgument("cannot fit a scaler on zero rows".into()))?;
        let mut lower = Vec::with_capacity(d);
        let mut upper = Vec::with_capacity(d);
        for j in 0..d {
            let mut col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("column {j} has non-finite values")));
            }
            col.sort_by(f64::total_cmp);
            lower.push(quantile_sorted(&col, LOWER_QUANTILE));
            upper.push(quantile_sorted(&col, UPPER_QUANTILE));
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn transform_value(&self, j: usize, x: f64) -> f64 {
        let span = self.upper[j] - self.lower[j];
        if span > 0.0 {
            PI * (x - self.lower[j]) / span - FRAC_PI_2
        } else {
            0.0
        }
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        for j in 0..self.dim() {
            if self.upper[j] <= self.lower[j] {
                log::warn!("column {j} is constant between its percentiles; mapping it to 0");
            }
        }
        rows.iter()
            .map(|r| {
                if r.len() != self.dim() {
                    return Err(Error::DimensionMismatch { expected: self.dim(), got: r.len() });
                }
                Ok(r.iter().enumerate().map(|(j, &x)| self.transform_value(j, x)).collect())
            })
            .collect()
    }
}

/// Where the scaler is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingMode {
    /// One pass over every ingested row before splitting.
    #[default]
    Global,
    /// Fit on training rows only, then apply to both splits.
    TrainOnly,
}

/// Log transform plus scaling of a train/test split.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledSplit {
    pub train: Vec<Vec<f64>>,
    pub test: Vec<Vec<f64>>,
    pub scaler: RobustScaler,
}

pub fn scale_split(ds: &Dataset, train_idx: &[usize], test_idx: &[usize], mode: ScalingMode, take_abs: bool) -> Result<ScaledSplit> {
    let logged = ds.log_transformed(take_abs)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| logged.features[i].clone()).collect::<Vec<_>>();
    let (train, test) = (pick(train_idx), pick(test_idx));
    let scaler = match mode {
        ScalingMode::Global => RobustScaler::fit(&logged.features)?,
        ScalingMode::TrainOnly => RobustScaler::fit(&train)?,
    };
    Ok(ScaledSplit { train: scaler.transform(&train)?, test: scaler.transform(&test)?, scaler })
}

/// Log-transformed and globally scaled copy of all rows.
pub fn scale_all(ds: &Dataset, take_abs: bool) -> Result<Vec<Vec<f64>>> {
    let logged = ds.log_transformed(take_abs)?;
    RobustScaler::fit(&logged.features)?.transform(&logged.features)
}

fn class_members(y: &[i8], label: i8) -> Vec<usize> {
    (0..y.len()).filter(|&i| y[i] == label).collect()
}

fn draw_balanced(y: &[i8], per_class: usize, seed: u64, key: u64) -> Result<[Vec<usize>; 2]> {
    let mut rng = stream(seed, &[key]);
    let mut draw = |label: i8| {
        let mut members = class_members(y, label);
        if members.len() < per_class {
            return Err(Error::InsufficientClass { label, available: members.len(), required: per_class });
        }
        members.shuffle(&mut rng);
        members.truncate(per_class);
        Ok(members)
    };
    Ok([draw(1)?, draw(-1)?])
}

/// Indices of a class-balanced subset of even `size`, ascending.
pub fn stratified_downsample(y: &[i8], size: usize, seed: u64) -> Result<Vec<usize>> {
    if size == 0 || !size.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("subset size {size} must be positive and even")));
    }
    let [pos, neg] = draw_balanced(y, size / 2, seed, 0x6473)?;
    let mut idx: Vec<usize> = pos.into_iter().chain(neg).collect();
    idx.sort_unstable();
    Ok(idx)
}

/// Disjoint balanced train (`m`) and test (`v`) index sets, each ascending.
pub fn train_test_split(y: &[i8], m: usize, v: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if m == 0 || v == 0 || !m.is_multiple_of(2) || !v.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("split sizes m = {m}, v = {v} must be positive and even")));
    }
    if m + v > y.len() {
        return Err(Error::InvalidArgument(format!("m + v = {} exceeds {} rows", m + v, y.len())));
    }
    let classes = draw_balanced(y, (m + v) / 2, seed, 0x7474)?;
    let mut train = Vec::with_capacity(m);
    let mut test = Vec::with_capacity(v);
    for members in classes {
        let (a, b) = members.split_at(m / 2);
        train.extend_from_slice(a);
        test.extend_from_slice(b);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Columns of the synthetic generator that are exponentiated into lognormals.
pub fn synthetic_log_columns(d: usize) -> Vec<usize> {
    (0..d).filter(|j| j % 4 == 3).collect()
}

/// Two Gaussian clusters at `±class_sep/2` along a random unit direction in
/// `d` dimensions. Every fourth column is exponentiated to a lognormal and
/// flagged for log transformation. Labels alternate `+1, −1`.
pub fn generate_synthetic(m: usize, d: usize, class_sep: f64, seed: u64) -> Result<Dataset> {
    if m == 0 || !m.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("m = {m} must be positive and even")));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("d must be at least 1".into()));
    }
    let mut rng = stream(seed, &[0x7379]);
    let mut direction: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    direction.iter_mut().for_each(|v| *v /= norm);
    let log_cols: BTreeSet<usize> = synthetic_log_columns(d).into_iter().collect();
    let mut features = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for i in 0..m {
        let label: i8 = if i % 2 == 0 { 1 } else { -1 };
        let shift = 0.5 * class_sep * f64::from(label);
        let row = (0..d)
            .map(|j| {
                let z: f64 = StandardNormal.sample(&mut rng);
                let v = z + shift * direction[j];
                if log_cols.contains(&j) {
                    v.exp()
                } else {
                    v
                }
            })
            .collect();
        features.push(row);
        labels.push(label);
    }
    let columns: Vec<String> = (0..d).map(|j| format!("f{j}")).collect();
    let meta = ColumnMeta { log_columns: log_cols.iter().map(|&j| columns[j].clone()).collect() };
    Dataset::new(columns, features, labels, meta)
}
