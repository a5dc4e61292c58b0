//! Labeled datasets: CSV ingestion, standardization and stratified splits.
//!
//! Labels are dense zero-based class indices; index `g` names
//! `class_names[g]`. Files and reports use one-based numbering.

use std::collections::HashMap;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// The 21 cardiotocography features, in file order.
pub const CTG_FEATURES: [&str; 21] = [
    "LB", "AC", "FM", "UC", "DL", "DS", "DP", "ASTV", "MSTV", "ALTV", "MLTV", "Width", "Min",
    "Max", "Nmax", "Nzeros", "Mode", "Mean", "Median", "Variance", "Tendency",
];

/// Same features under the column names of the widely mirrored `fetal_health.csv` export.
pub const FETAL_HEALTH_FEATURES: [&str; 21] = [
    "baseline value",
    "accelerations",
    "fetal_movement",
    "uterine_contractions",
    "light_decelerations",
    "severe_decelerations",
    "prolongued_decelerations",
    "abnormal_short_term_variability",
    "mean_value_of_short_term_variability",
    "percentage_of_time_with_abnormal_long_term_variability",
    "mean_value_of_long_term_variability",
    "histogram_width",
    "histogram_min",
    "histogram_max",
    "histogram_number_of_peaks",
    "histogram_number_of_zeroes",
    "histogram_mode",
    "histogram_mean",
    "histogram_median",
    "histogram_variance",
    "histogram_tendency",
];

pub const CTG_CLASSES: [&str; 3] = ["Normal", "Suspect", "Pathologic"];

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    feature_names: Vec<String>,
    class_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let (n, d) = features.dim();
        if n == 0 {
            return Err(Error::invalid("features", "dataset has no rows"));
        }
        if d == 0 {
            return Err(Error::invalid("features", "dataset has no feature columns"));
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: labels.len(),
            });
        }
        if feature_names.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: feature_names.len(),
            });
        }
        if class_names.len() < 2 {
            return Err(Error::invalid("class_names", "need at least two classes"));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= class_names.len()) {
            return Err(Error::invalid(
                "labels",
                format!("label index {bad} outside 0..{}", class_names.len()),
            ));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("features", "non-finite value"));
        }
        Ok(Self {
            features,
            labels,
            feature_names,
            class_names,
        })
    }

    /// Same labels and classes, new feature matrix (e.g. after projection).
    pub fn with_features(&self, features: Array2<f64>, feature_names: Vec<String>) -> Result<Self> {
        Dataset::new(
            features,
            self.labels.clone(),
            feature_names,
            self.class_names.clone(),
        )
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Dataset::new(
            self.features.select(Axis(0), indices),
            indices.iter().map(|&i| self.labels[i]).collect(),
            self.feature_names.clone(),
            self.class_names.clone(),
        )
    }

    /// The first `n` rows.
    pub fn head(&self, n: usize) -> Result<Self> {
        let idx: Vec<usize> = (0..n.min(self.n_rows())).collect();
        self.subset(&idx)
    }
}

/// One admissible label value in a file and the class it denotes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub value: String,
    pub name: String,
}

/// Expected layout of a labeled CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub feature_columns: Vec<String>,
    pub label_column: String,
    pub classes: Vec<ClassSpec>,
}

impl Schema {
    pub fn new(
        feature_columns: Vec<String>,
        label_column: impl Into<String>,
        classes: Vec<ClassSpec>,
    ) -> Self {
        Self {
            feature_columns,
            label_column: label_column.into(),
            classes,
        }
    }

    /// Cardiotocography: 21 features plus `NSP` in {1, 2, 3}.
    pub fn ctg() -> Self {
        Self::with_nsp_classes(&CTG_FEATURES, "NSP")
    }

    /// The `fetal_health.csv` layout of the same data (label `fetal_health`).
    pub fn fetal_health() -> Self {
        Self::with_nsp_classes(&FETAL_HEALTH_FEATURES, "fetal_health")
    }

    fn with_nsp_classes(features: &[&str], label: &str) -> Self {
        Self::new(
            features.iter().map(|s| s.to_string()).collect(),
            label,
            CTG_CLASSES
                .iter()
                .enumerate()
                .map(|(i, name)| ClassSpec {
                    value: (i + 1).to_string(),
                    name: name.to_string(),
                })
                .collect(),
        )
    }

    /// Every column except `label_column` is a feature; classes are the
    /// distinct label values in order of first appearance.
    pub fn infer(path: &Path, label_column: &str) -> Result<Self> {
        let mut reader = open_reader(path)?;
        let header = read_header(&mut reader, path)?;
        let label_pos = header
            .iter()
            .position(|h| h.eq_ignore_ascii_case(label_column))
            .ok_or_else(|| Error::MissingColumn(label_column.to_string()))?;
        let mut classes: Vec<ClassSpec> = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Csv {
                row: row + 1,
                message: e.to_string(),
            })?;
            let value = record.get(label_pos).unwrap_or("").trim().to_string();
            if !classes.iter().any(|c| c.value == value) {
                classes.push(ClassSpec {
                    name: value.clone(),
                    value,
                });
            }
        }
        let features = header
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != label_pos)
            .map(|(_, h)| h.clone())
            .collect();
        Ok(Self::new(features, header[label_pos].clone(), classes))
    }

    /// Class index of a label written either as a schema value or a class name.
    pub fn resolve_class(&self, raw: &str) -> Option<usize> {
        self.class_of(raw).or_else(|| {
            self.classes
                .iter()
                .position(|c| c.name.eq_ignore_ascii_case(raw.trim()))
        })
    }

    fn class_of(&self, raw: &str) -> Option<usize> {
        let raw = raw.trim();
        if let Some(g) = self.classes.iter().position(|c| c.value == raw) {
            return Some(g);
        }
        // "1.0" written by numeric exporters should still match "1".
        let x: f64 = raw.parse().ok()?;
        self.classes
            .iter()
            .position(|c| c.value.parse::<f64>().map(|v| v == x).unwrap_or(false))
    }
}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn read_header(reader: &mut csv::Reader<std::fs::File>, path: &Path) -> Result<Vec<String>> {
    let header = reader.headers().map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e.to_string()),
        },
        _ => Error::Csv {
            row: 0,
            message: e.to_string(),
        },
    })?;
    Ok(header.iter().map(|h| h.trim().to_string()).collect())
}

/// Reads a labeled CSV file. Columns may appear in any order but must match
/// the schema exactly (up to ASCII case). Row order is preserved.
pub fn load_csv(path: &Path, schema: &Schema) -> Result<Dataset> {
    let mut reader = open_reader(path)?;
    let header = read_header(&mut reader, path)?;

    let find = |name: &str| header.iter().position(|h| h.eq_ignore_ascii_case(name));
    let mut feature_pos = Vec::with_capacity(schema.feature_columns.len());
    for name in &schema.feature_columns {
        feature_pos.push(find(name).ok_or_else(|| Error::MissingColumn(name.clone()))?);
    }
    let label_pos =
        find(&schema.label_column).ok_or_else(|| Error::MissingColumn(schema.label_column.clone()))?;
    for (i, h) in header.iter().enumerate() {
        if i != label_pos && !feature_pos.contains(&i) {
            return Err(Error::UnexpectedColumn(h.clone()));
        }
    }

    let d = feature_pos.len();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let row = row + 1;
        let record = record.map_err(|e| Error::Csv {
            row,
            message: e.to_string(),
        })?;
        for (j, &pos) in feature_pos.iter().enumerate() {
            let cell = record.get(pos).unwrap_or("");
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(Error::BadCell {
                        row,
                        column: schema.feature_columns[j].clone(),
                        value: cell.to_string(),
                    })
                }
            }
        }
        let raw = record.get(label_pos).unwrap_or("");
        let g = schema.class_of(raw).ok_or_else(|| Error::UnknownLabel {
            row,
            value: raw.to_string(),
        })?;
        labels.push(g);
    }
    let n = labels.len();
    let features = Array2::from_shape_vec((n, d), values).expect("row-major buffer of n*d cells");
    Dataset::new(
        features,
        labels,
        schema.feature_columns.clone(),
        schema.classes.iter().map(|c| c.name.clone()).collect(),
    )
}

/// Column-wise z-scoring learned on one dataset and replayable on others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    /// Indices (into the original columns) of the retained features.
    pub kept: Vec<usize>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub dropped: Vec<String>,
}

impl StandardizationParams {
    pub fn input_dim(&self) -> usize {
        self.kept.len() + self.dropped.len()
    }

    pub fn apply(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(self
            .kept
            .iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(&j, (&m, &s))| (x[j] - m) / s)
            .collect())
    }

    pub fn apply_dataset(&self, data: &Dataset) -> Result<Dataset> {
        let mut out = Array2::zeros((data.n_rows(), self.kept.len()));
        for (i, row) in data.features().rows().into_iter().enumerate() {
            out.row_mut(i).assign(&self.apply(row)?);
        }
        let names = self
            .kept
            .iter()
            .map(|&j| data.feature_names()[j].clone())
            .collect();
        data.with_features(out, names)
    }
}

/// Centers each column and scales it to unit sample standard deviation
/// (denominator n-1). Constant columns are dropped.
pub fn standardize(data: &Dataset) -> Result<(Dataset, StandardizationParams)> {
    let n = data.n_rows();
    if n < 2 {
        return Err(Error::invalid("data", "standardization needs at least two rows"));
    }
    let mut params = StandardizationParams {
        kept: Vec::new(),
        means: Vec::new(),
        stds: Vec::new(),
        dropped: Vec::new(),
    };
    for (j, col) in data.features().columns().into_iter().enumerate() {
        let mean = col.sum() / n as f64;
        let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
        let std = (ss / (n - 1) as f64).sqrt();
        if std <= 1e-12 * (1.0 + mean.abs()) {
            params.dropped.push(data.feature_names()[j].clone());
        } else {
            params.kept.push(j);
            params.means.push(mean);
            params.stds.push(std);
        }
    }
    if params.kept.is_empty() {
        return Err(Error::Degenerate("every feature column is constant".into()));
    }
    let out = params.apply_dataset(data)?;
    Ok((out, params))
}

/// How many rows of each class go to the training side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrainSize {
    /// `round(fraction * class size)` per class.
    Fraction(f64),
    /// Exact per-class counts, indexed by class.
    Counts(Vec<usize>),
}

#[derive(Debug, Clone)]
pub struct Split {
    /// Training rows in stream order (shuffled across classes).
    pub train: Dataset,
    pub test: Dataset,
    pub train_indices: Vec<usize>,
    /// Test rows in ascending original order.
    pub test_indices: Vec<usize>,
}

pub fn train_counts(size: &TrainSize, class_sizes: &[usize]) -> Result<Vec<usize>> {
    match size {
        TrainSize::Fraction(f) => {
            if !(*f > 0.0 && *f < 1.0) {
                return Err(Error::invalid("train_fraction", format!("{f} is not in (0, 1)")));
            }
            Ok(class_sizes
                .iter()
                .map(|&s| (f * s as f64).round() as usize)
                .collect())
        }
        TrainSize::Counts(c) => {
            if c.len() != class_sizes.len() {
                return Err(Error::invalid(
                    "train_counts",
                    format!("{} counts given for {} classes", c.len(), class_sizes.len()),
                ));
            }
            for (g, (&want, &have)) in c.iter().zip(class_sizes).enumerate() {
                if want > have {
                    return Err(Error::invalid(
                        "train_counts",
                        format!("class {} requests {want} training rows but has {have}", g + 1),
                    ));
                }
            }
            Ok(c.clone())
        }
    }
}

/// Per-class random partition into train and test.
pub fn stratified_split(data: &Dataset, size: &TrainSize, rng: &SeededRng) -> Result<Split> {
    let class_sizes = data.class_counts();
    if let Some(g) = class_sizes.iter().position(|&s| s < 2) {
        return Err(Error::invalid(
            "data",
            format!("class `{}` has fewer than two rows", data.class_names()[g]),
        ));
    }
    let counts = train_counts(size, &class_sizes)?;

    let mut by_class: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, &y) in data.labels().iter().enumerate() {
        by_class.entry(y).or_default().push(i);
    }
    let mut gen = rng.generator();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for g in 0..data.n_classes() {
        let mut idx = by_class.remove(&g).unwrap_or_default();
        idx.shuffle(&mut gen);
        let (tr, te) = idx.split_at(counts[g]);
        train.extend_from_slice(tr);
        test.extend_from_slice(te);
    }
    train.shuffle(&mut gen);
    test.sort_unstable();

    Ok(Split {
        train: data.subset(&train)?,
        test: data.subset(&test)?,
        train_indices: train,
        test_indices: test,
    })
}
