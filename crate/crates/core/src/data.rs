//! Dataset loading, sensor layout, standardization, splits, and basis
//! expansion.
//!
//! A *sensor* is a priced group of feature columns that is acquired
//! atomically; everything downstream reasons about sensor-id sets, never
//! raw columns directly.

use std::collections::BTreeSet;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A fully materialized labeled dataset. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// N x D feature matrix; every entry is finite.
    pub examples: Array2<f64>,
    /// Dense class ids in 0..C, assigned in first-appearance order.
    pub labels: Vec<usize>,
    /// Feature column names in header order (label column excluded).
    pub column_names: Vec<String>,
    /// Original label strings, indexed by class id.
    pub label_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        examples: Array2<f64>,
        labels: Vec<usize>,
        column_names: Vec<String>,
        label_names: Vec<String>,
    ) -> Result<Self> {
        let (n, d) = examples.dim();
        if n == 0 || d == 0 {
            return Err(Error::EmptyFile);
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: labels.len(),
            });
        }
        let c = label_names.len();
        if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
            return Err(Error::Config(format!(
                "label id {bad} out of range for {c} classes"
            )));
        }
        for (i, row) in examples.rows().into_iter().enumerate() {
            if let Some((j, _)) = row.iter().enumerate().find(|(_, v)| !v.is_finite()) {
                return Err(Error::NonFiniteValue {
                    row: i,
                    column: column_names.get(j).cloned().unwrap_or_default(),
                });
            }
        }
        Ok(Self {
            examples,
            labels,
            column_names,
            label_names,
        })
    }

    pub fn n_examples(&self) -> usize {
        self.examples.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.examples.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.label_names.len()
    }

    /// Copy of the rows at `idx`, in order.
    pub fn select_rows(&self, idx: &[usize]) -> (Array2<f64>, Vec<usize>) {
        let d = self.n_features();
        let mut out = Array2::zeros((idx.len(), d));
        let mut labels = Vec::with_capacity(idx.len());
        for (r, &i) in idx.iter().enumerate() {
            out.row_mut(r).assign(&self.examples.row(i));
            labels.push(self.labels[i]);
        }
        (out, labels)
    }
}

/// Copy of the columns `cols` of `x`, in the given order.
pub fn restrict_columns(x: &Array2<f64>, cols: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((x.nrows(), cols.len()));
    for (j, &c) in cols.iter().enumerate() {
        out.column_mut(j).assign(&x.column(c));
    }
    out
}

/// One priced feature-column group.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Sensor {
    pub name: String,
    pub cost: f64,
    /// 0-based indices into the feature columns (label column excluded).
    pub columns: Vec<usize>,
}

/// The full sensor layout: pairwise-disjoint column groups with costs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SensorSpec {
    pub sensors: Vec<Sensor>,
}

impl SensorSpec {
    /// Validates disjointness, cost sanity, and column range against `d`
    /// feature columns.
    pub fn validate(&self, d: usize) -> Result<()> {
        if self.sensors.len() < 2 {
            return Err(Error::SensorConfig(format!(
                "need at least 2 sensors, got {}",
                self.sensors.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for s in &self.sensors {
            if s.columns.is_empty() {
                return Err(Error::SensorConfig(format!(
                    "sensor {:?} has no columns",
                    s.name
                )));
            }
            if !s.cost.is_finite() || s.cost < 0.0 {
                return Err(Error::SensorConfig(format!(
                    "sensor {:?} has invalid cost {}",
                    s.name, s.cost
                )));
            }
            for &c in &s.columns {
                if c >= d {
                    return Err(Error::SensorConfig(format!(
                        "sensor {:?} references column {c}, dataset has {d} feature columns",
                        s.name
                    )));
                }
                if !seen.insert(c) {
                    return Err(Error::SensorConfig(format!(
                        "column {c} belongs to more than one sensor"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Parses the sensor config JSON document. Missing costs default to 1.0.
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct RawSensor {
            name: String,
            #[serde(default = "default_cost")]
            cost: f64,
            columns: Vec<usize>,
        }
        fn default_cost() -> f64 {
            1.0
        }
        #[derive(Deserialize)]
        struct RawSpec {
            sensors: Vec<RawSensor>,
        }
        let raw: RawSpec = serde_json::from_str(text)
            .map_err(|e| Error::SensorConfig(format!("bad JSON: {e}")))?;
        Ok(Self {
            sensors: raw
                .sensors
                .into_iter()
                .map(|s| Sensor {
                    name: s.name,
                    cost: s.cost,
                    columns: s.columns,
                })
                .collect(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn n_sensors(&self) -> usize {
        self.sensors.len()
    }

    /// Sum of costs over a sensor-id set. Additive, monotone under inclusion.
    pub fn subset_cost(&self, subset: &BTreeSet<usize>) -> f64 {
        subset.iter().map(|&m| self.sensors[m].cost).sum()
    }

    /// Cost of acquiring every sensor.
    pub fn total_cost(&self) -> f64 {
        self.sensors.iter().map(|s| s.cost).sum()
    }

    /// Sorted feature-column indices of a sensor-id set.
    pub fn columns_of(&self, subset: &BTreeSet<usize>) -> Vec<usize> {
        let mut cols: Vec<usize> = subset
            .iter()
            .flat_map(|&m| self.sensors[m].columns.iter().copied())
            .collect();
        cols.sort_unstable();
        cols
    }

    /// Complement of a sensor-id set within 0..L.
    pub fn complement(&self, subset: &BTreeSet<usize>) -> BTreeSet<usize> {
        (0..self.n_sensors()).filter(|m| !subset.contains(m)).collect()
    }
}

/// Polynomial feature expansion settings.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Hash)]
pub struct BasisConfig {
    /// 1 (identity) or 2 (quadratic monomials).
    pub degree: u8,
    /// Degree 2 only: drop the linear terms, keeping pure second-order
    /// monomials.
    pub homogeneous: bool,
    pub include_bias: bool,
}

impl BasisConfig {
    pub fn linear() -> Self {
        Self {
            degree: 1,
            homogeneous: false,
            include_bias: true,
        }
    }

    /// The expansion used by the stock classifiers: second-order
    /// homogeneous monomials plus a bias.
    pub fn quadratic_homogeneous() -> Self {
        Self {
            degree: 2,
            homogeneous: true,
            include_bias: true,
        }
    }

    pub fn from_degree(degree: u8) -> Result<Self> {
        match degree {
            1 => Ok(Self::linear()),
            2 => Ok(Self::quadratic_homogeneous()),
            d => Err(Error::Config(format!("basis degree must be 1 or 2, got {d}"))),
        }
    }

    /// Output length for an input of `d` features. Pure function of (d, cfg).
    pub fn output_len(&self, d: usize) -> usize {
        let mut len = match (self.degree, self.homogeneous) {
            (1, _) => d,
            (2, true) => d * (d + 1) / 2,
            (2, false) => d + d * (d + 1) / 2,
            _ => unreachable!("degree validated at construction"),
        };
        if self.include_bias {
            len += 1;
        }
        len
    }
}

/// Expands `x` into the configured polynomial basis.
///
/// Degree-2 monomials are emitted in lexicographic pair order
/// (x0*x0, x0*x1, ..., x0*x_{d-1}, x1*x1, ...); the bias term, when
/// present, is always last. Inputs with d = 0 are allowed and produce
/// just the bias (or an empty vector).
pub fn expand_basis(x: &[f64], cfg: &BasisConfig) -> Vec<f64> {
    let d = x.len();
    let mut out = Vec::with_capacity(cfg.output_len(d));
    match (cfg.degree, cfg.homogeneous) {
        (1, _) => out.extend_from_slice(x),
        (2, homogeneous) => {
            if !homogeneous {
                out.extend_from_slice(x);
            }
            for a in 0..d {
                for b in a..d {
                    out.push(x[a] * x[b]);
                }
            }
        }
        _ => unreachable!("degree validated at construction"),
    }
    if cfg.include_bias {
        out.push(1.0);
    }
    out
}

/// Expands every row of `x`; rows of the result line up with rows of `x`.
pub fn expand_basis_matrix(x: &Array2<f64>, cfg: &BasisConfig) -> Array2<f64> {
    let n = x.nrows();
    let b = cfg.output_len(x.ncols());
    let mut out = Array2::zeros((n, b));
    for (i, row) in x.rows().into_iter().enumerate() {
        let expanded = expand_basis(row.as_slice().expect("row is contiguous"), cfg);
        out.row_mut(i).assign(&Array1::from_vec(expanded));
    }
    out
}

/// Per-column location/scale fitted on the training split.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Scaler {
    pub mean: Vec<f64>,
    /// Population standard deviation; 1.0 for zero-variance columns so they
    /// pass through unscaled.
    pub std: Vec<f64>,
}

impl Scaler {
    pub fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = x.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|v| (v - self.mean[j]) / self.std[j]);
        }
        out
    }

    pub fn invert(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = x.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|v| v * self.std[j] + self.mean[j]);
        }
        out
    }
}

/// Fits a scaler on `train` and returns it with the standardized matrix.
///
/// Zero-variance columns are passed through with std recorded as 1.
pub fn standardize(train: &Array2<f64>) -> (Scaler, Array2<f64>) {
    let n = train.nrows() as f64;
    let d = train.ncols();
    let mut mean = vec![0.0; d];
    let mut std = vec![1.0; d];
    for (j, col) in train.columns().into_iter().enumerate() {
        let m = col.sum() / n;
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
        mean[j] = m;
        let s = var.sqrt();
        std[j] = if s > 1e-12 { s } else { 1.0 };
    }
    let scaler = Scaler { mean, std };
    let scaled = scaler.apply(train);
    (scaler, scaled)
}

/// A deterministic disjoint train/val/test partition of 0..n.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Split {
    pub train_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub seed: u64,
}

/// Shuffles 0..n with the seeded generator and cuts it into three parts
/// whose sizes differ from n*fraction by less than 1.
pub fn make_split(n: usize, fractions: (f64, f64, f64), seed: u64) -> Result<Split> {
    let f = [fractions.0, fractions.1, fractions.2];
    if f.iter().any(|&v| v <= 0.0) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::BadSplitFractions(f));
    }
    if n < 3 {
        return Err(Error::TooFewExamples(n));
    }
    let mut sizes = [0usize; 3];
    let mut remainders: Vec<(usize, f64)> = Vec::new();
    let mut assigned = 0;
    for (i, &frac) in f.iter().enumerate() {
        let exact = n as f64 * frac;
        sizes[i] = exact.floor() as usize;
        assigned += sizes[i];
        remainders.push((i, exact - exact.floor()));
    }
    // Hand leftover slots to the largest fractional parts (ties: train first).
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for k in 0..(n - assigned) {
        sizes[remainders[k % 3].0] += 1;
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let train_idx = order[..sizes[0]].to_vec();
    let val_idx = order[sizes[0]..sizes[0] + sizes[1]].to_vec();
    let test_idx = order[sizes[0] + sizes[1]..].to_vec();
    Ok(Split {
        train_idx,
        val_idx,
        test_idx,
        seed,
    })
}

/// Loads a CSV dataset: first row is the header, one column holds labels,
/// all other columns are numeric features.
pub fn load_dataset(path: &Path, label_column: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|s| s.to_string()).collect();
    if headers.is_empty() {
        return Err(Error::EmptyFile);
    }
    let label_pos = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingLabelColumn(label_column.to_string()))?;
    let column_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_pos)
        .map(|(_, h)| h.clone())
        .collect();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut label_names: Vec<String> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let mut features = Vec::with_capacity(column_names.len());
        let mut feature_col = 0usize;
        for (i, cell) in record.iter().enumerate() {
            if i == label_pos {
                let id = match label_names.iter().position(|l| l == cell) {
                    Some(id) => id,
                    None => {
                        label_names.push(cell.to_string());
                        label_names.len() - 1
                    }
                };
                labels.push(id);
                continue;
            }
            let column = column_names
                .get(feature_col)
                .cloned()
                .unwrap_or_else(|| format!("col{i}"));
            let value: f64 = cell.parse().map_err(|_| Error::NonNumericCell {
                row: row_idx,
                column: column.clone(),
                value: cell.to_string(),
            })?;
            if !value.is_finite() {
                return Err(Error::NonFiniteValue {
                    row: row_idx,
                    column,
                });
            }
            features.push(value);
            feature_col += 1;
        }
        if features.len() != column_names.len() {
            return Err(Error::DimensionMismatch {
                expected: column_names.len(),
                got: features.len(),
            });
        }
        rows.push(features);
    }
    if rows.is_empty() {
        return Err(Error::EmptyFile);
    }
    let n = rows.len();
    let d = column_names.len();
    let mut examples = Array2::zeros((n, d));
    for (i, row) in rows.into_iter().enumerate() {
        examples.row_mut(i).assign(&Array1::from_vec(row));
    }
    Dataset::new(examples, labels, column_names, label_names)
}
