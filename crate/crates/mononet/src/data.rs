//! Dataset plumbing: CSV ingestion, z-score normalization, deterministic
//! splits, built-in dataset descriptors, and the synthetic benchmark
//! generator.
//!
//! Descriptors name raw CSV columns and their monotone directions;
//! categorical columns expand to one-hot groups at load time, so the model
//! width can exceed the raw column count. The benchmark CSVs themselves are
//! not bundled; see `data/README.md` in the repository root for download and
//! conversion instructions.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layer::MonotonicityIndicator;

/// Prediction task; selects loss, head, and reporting metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::Regression => "regression",
            Task::Classification => "classification",
        })
    }
}

/// One raw CSV column: its monotone direction and, for categorical codes,
/// the full list of values to one-hot against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    /// -1, 0, or +1. One-hot expansions inherit 0.
    pub monotonicity: i8,
    /// When set, the column expands to one 0/1 feature per listed code.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub one_hot: Option<Vec<f64>>,
}

impl FeatureSpec {
    pub fn free(name: &str) -> Self {
        Self {
            name: name.into(),
            monotonicity: 0,
            one_hot: None,
        }
    }

    pub fn monotone(name: &str, direction: i8) -> Self {
        Self {
            name: name.into(),
            monotonicity: direction,
            one_hot: None,
        }
    }

    pub fn categorical(name: &str, codes: &[f64]) -> Self {
        Self {
            name: name.into(),
            monotonicity: 0,
            one_hot: Some(codes.to_vec()),
        }
    }
}

/// Target column and its load-time transforms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub name: String,
    /// Classification targets coded 0..k: map any value > 0 to 1.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub binarize_positive: bool,
    /// Keep only rows whose target lies below this empirical quantile.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub below_quantile: Option<f64>,
}

impl TargetSpec {
    pub fn plain(name: &str) -> Self {
        Self {
            name: name.into(),
            binarize_positive: false,
            below_quantile: None,
        }
    }
}

/// Per-feature affine statistics fitted on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub target_mean: f64,
    pub target_std: f64,
}

impl Normalization {
    pub fn normalize_features(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.feature_mean.iter().zip(&self.feature_std))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect()
    }

    pub fn normalize_target(&self, y: f64) -> f64 {
        (y - self.target_mean) / self.target_std
    }

    pub fn denormalize_target(&self, y: f64) -> f64 {
        y * self.target_std + self.target_mean
    }
}

/// Names one dataset: its columns, monotone directions, target, task, and
/// (after fitting) the normalization in force.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub name: String,
    pub task: Task,
    pub features: Vec<FeatureSpec>,
    pub target: TargetSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<Normalization>,
}

impl DatasetDescriptor {
    /// Raw column names, pre one-hot expansion.
    pub fn column_names(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.name.as_str()).collect()
    }

    /// Per raw column.
    pub fn indicator(&self) -> MonotonicityIndicator {
        MonotonicityIndicator::new(self.features.iter().map(|f| f.monotonicity).collect())
            .expect("feature specs hold only -1/0/+1")
    }

    /// Model-facing feature names after one-hot expansion
    /// (`col=code` per expanded value).
    pub fn expanded_feature_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for f in &self.features {
            match &f.one_hot {
                None => names.push(f.name.clone()),
                Some(codes) => {
                    for c in codes {
                        names.push(format!("{}={}", f.name, c));
                    }
                }
            }
        }
        names
    }

    /// Per model-facing feature after one-hot expansion.
    pub fn expanded_indicator(&self) -> MonotonicityIndicator {
        let mut t = Vec::new();
        for f in &self.features {
            match &f.one_hot {
                None => t.push(f.monotonicity),
                Some(codes) => t.extend(std::iter::repeat_n(0, codes.len())),
            }
        }
        MonotonicityIndicator::new(t).expect("feature specs hold only -1/0/+1")
    }

    pub fn expanded_width(&self) -> usize {
        self.features
            .iter()
            .map(|f| f.one_hot.as_ref().map_or(1, Vec::len))
            .sum()
    }
}

/// An in-memory table: expanded feature rows plus targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    pub descriptor: DatasetDescriptor,
    /// Row-major, one inner vector per example, expanded width.
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    /// Rows discarded for missing values during ingestion.
    pub dropped_rows: usize,
    /// Rows discarded by the target quantile filter.
    pub filtered_rows: usize,
}

impl TabularDataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.features
            .first()
            .map_or(self.descriptor.expanded_width(), Vec::len)
    }

    pub fn row(&self, i: usize) -> (&[f64], f64) {
        (&self.features[i], self.targets[i])
    }

    /// New dataset holding the given rows, in order.
    pub fn subset(&self, indices: &[usize]) -> TabularDataset {
        TabularDataset {
            descriptor: self.descriptor.clone(),
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            dropped_rows: 0,
            filtered_rows: 0,
        }
    }

    /// Writes the expanded table back out as a header-first CSV; floats use
    /// the shortest exact decimal form, so a reload reproduces the data.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::new();
        let mut header: Vec<String> = self.descriptor.expanded_feature_names();
        header.push(self.descriptor.target.name.clone());
        let _ = writeln!(out, "{}", header.join(","));
        for (x, y) in self.features.iter().zip(&self.targets) {
            for v in x {
                let _ = write!(out, "{v},");
            }
            let _ = writeln!(out, "{y}");
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

fn missing(cell: &str) -> bool {
    let cell = cell.trim();
    cell.is_empty() || cell == "?"
}

/// Reads a header-first CSV through a descriptor: finds each named column,
/// drops rows with missing cells, expands one-hot columns, and applies the
/// target transforms. Cells outside the missing-value convention that fail
/// to parse are reported with their row and column.
pub fn load_csv(path: impl AsRef<Path>, descriptor: &DatasetDescriptor) -> Result<TabularDataset> {
    let path_str = path.as_ref().display().to_string();
    let file_err = |message: String| Error::CsvFile {
        path: path_str.clone(),
        message,
    };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())
        .map_err(|e| file_err(e.to_string()))?;

    let headers = reader
        .headers()
        .map_err(|e| file_err(e.to_string()))?
        .clone();
    let col_index = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| file_err(format!("column '{name}' not found in header")))
    };
    let feature_cols: Vec<usize> = descriptor
        .features
        .iter()
        .map(|f| col_index(&f.name))
        .collect::<Result<_>>()?;
    let target_col = col_index(&descriptor.target.name)?;

    let mut features: Vec<Vec<f64>> = Vec::new();
    let mut targets: Vec<f64> = Vec::new();
    let mut dropped = 0usize;

    'rows: for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| file_err(e.to_string()))?;
        let cell = |col: usize| record.get(col).unwrap_or("");

        for &col in feature_cols.iter().chain(std::iter::once(&target_col)) {
            if missing(cell(col)) {
                dropped += 1;
                continue 'rows;
            }
        }

        let parse = |col: usize, name: &str| -> Result<f64> {
            let raw = cell(col);
            raw.parse::<f64>().map_err(|_| Error::CsvCell {
                path: path_str.clone(),
                row: row_idx,
                col: name.into(),
                message: format!("cannot parse '{raw}' as a number"),
            })
        };

        let mut row = Vec::with_capacity(descriptor.expanded_width());
        for (spec, &col) in descriptor.features.iter().zip(&feature_cols) {
            let value = parse(col, &spec.name)?;
            match &spec.one_hot {
                None => row.push(value),
                Some(codes) => {
                    let hit =
                        codes
                            .iter()
                            .position(|&c| c == value)
                            .ok_or_else(|| Error::CsvCell {
                                path: path_str.clone(),
                                row: row_idx,
                                col: spec.name.clone(),
                                message: format!("value {value} not among one-hot codes {codes:?}"),
                            })?;
                    for k in 0..codes.len() {
                        row.push(if k == hit { 1.0 } else { 0.0 });
                    }
                }
            }
        }
        let mut y = parse(target_col, &descriptor.target.name)?;
        if descriptor.target.binarize_positive {
            y = if y > 0.0 { 1.0 } else { 0.0 };
        }
        features.push(row);
        targets.push(y);
    }

    let mut data = TabularDataset {
        descriptor: descriptor.clone(),
        features,
        targets,
        dropped_rows: dropped,
        filtered_rows: 0,
    };
    if let Some(q) = descriptor.target.below_quantile {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidConfig(format!(
                "target quantile must lie in [0, 1], got {q}"
            )));
        }
        let threshold = quantile(&data.targets, q);
        let keep: Vec<usize> = (0..data.len())
            .filter(|&i| data.targets[i] < threshold)
            .collect();
        let filtered = data.len() - keep.len();
        let mut kept = data.subset(&keep);
        kept.dropped_rows = data.dropped_rows;
        kept.filtered_rows = filtered;
        data = kept;
    }
    Ok(data)
}

/// Empirical quantile: the sorted value at index `floor(q * n)` (clamped).
fn quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("targets are finite"));
    let idx = ((q * sorted.len() as f64).floor() as usize).min(sorted.len().saturating_sub(1));
    sorted[idx]
}

/// Fits z-score statistics on `train` (features always; target only for
/// regression) and returns the normalized dataset plus the statistics.
/// Constant columns get std clamped to 1, so they map to all zeros.
pub fn normalize(train: &TabularDataset) -> Result<(TabularDataset, Normalization)> {
    if train.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "normalization needs at least 2 rows, got {}",
            train.len()
        )));
    }
    let d = train.num_features();
    let n = train.len() as f64;
    let mut mean = vec![0.0; d];
    for row in &train.features {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v / n;
        }
    }
    let mut std = vec![0.0; d];
    for row in &train.features {
        for (s, (&v, &m)) in std.iter_mut().zip(row.iter().zip(&mean)) {
            *s += (v - m) * (v - m) / n;
        }
    }
    for s in &mut std {
        *s = s.sqrt();
        if *s < 1e-12 {
            *s = 1.0;
        }
    }

    let (target_mean, target_std) = match train.descriptor.task {
        Task::Classification => (0.0, 1.0),
        Task::Regression => {
            let tm = train.targets.iter().sum::<f64>() / n;
            let tv = train
                .targets
                .iter()
                .map(|&y| (y - tm) * (y - tm))
                .sum::<f64>()
                / n;
            let ts = tv.sqrt();
            (tm, if ts < 1e-12 { 1.0 } else { ts })
        }
    };

    let stats = Normalization {
        feature_mean: mean,
        feature_std: std,
        target_mean,
        target_std,
    };
    Ok((apply_normalization(train, &stats), stats))
}

/// Applies previously fitted statistics (for test splits and fresh inputs).
pub fn apply_normalization(data: &TabularDataset, stats: &Normalization) -> TabularDataset {
    let mut descriptor = data.descriptor.clone();
    descriptor.normalization = Some(stats.clone());
    TabularDataset {
        descriptor,
        features: data
            .features
            .iter()
            .map(|row| stats.normalize_features(row))
            .collect(),
        targets: data
            .targets
            .iter()
            .map(|&y| stats.normalize_target(y))
            .collect(),
        dropped_rows: data.dropped_rows,
        filtered_rows: data.filtered_rows,
    }
}

/// Seeded permutation split: `floor(0.8 * n)` rows to train, rest to test.
pub fn split_80_20(data: &TabularDataset, seed: u64) -> Result<(TabularDataset, TabularDataset)> {
    if data.len() < 5 {
        return Err(Error::InvalidConfig(format!(
            "an 80/20 split needs at least 5 rows, got {}",
            data.len()
        )));
    }
    let mut indices: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let cut = (data.len() as f64 * 0.8).floor() as usize;
    Ok((data.subset(&indices[..cut]), data.subset(&indices[cut..])))
}

/// Descriptors for the five benchmark tables. Column naming follows the
/// conversion recipes in `data/README.md`; monotone directions are part of
/// each problem statement (e.g. fuel economy cannot rise with vehicle
/// weight, credit risk cannot fall with debt-to-income).
pub fn builtin_descriptor(name: &str) -> Result<DatasetDescriptor> {
    match name {
        "auto-mpg" => Ok(DatasetDescriptor {
            name: name.into(),
            task: Task::Regression,
            features: vec![
                FeatureSpec::free("cylinders"),
                FeatureSpec::monotone("displacement", -1),
                FeatureSpec::monotone("horsepower", -1),
                FeatureSpec::monotone("weight", -1),
                FeatureSpec::free("acceleration"),
                FeatureSpec::free("model_year"),
                FeatureSpec::free("origin"),
            ],
            target: TargetSpec::plain("mpg"),
            normalization: None,
        }),
        "heart-disease" => Ok(DatasetDescriptor {
            name: name.into(),
            task: Task::Classification,
            features: vec![
                FeatureSpec::free("age"),
                FeatureSpec::free("sex"),
                FeatureSpec::categorical("cp", &[1.0, 2.0, 3.0, 4.0]),
                FeatureSpec::monotone("trestbps", 1),
                FeatureSpec::monotone("chol", 1),
                FeatureSpec::free("fbs"),
                FeatureSpec::categorical("restecg", &[0.0, 1.0, 2.0]),
                FeatureSpec::free("thalach"),
                FeatureSpec::free("exang"),
                FeatureSpec::free("oldpeak"),
                FeatureSpec::categorical("slope", &[1.0, 2.0, 3.0]),
                FeatureSpec::free("ca"),
                FeatureSpec::categorical("thal", &[3.0, 6.0, 7.0]),
            ],
            target: TargetSpec {
                name: "num".into(),
                binarize_positive: true,
                below_quantile: None,
            },
            normalization: None,
        }),
        "compas" => Ok(DatasetDescriptor {
            name: name.into(),
            task: Task::Classification,
            features: vec![
                FeatureSpec::free("age"),
                FeatureSpec::monotone("priors_count", 1),
                FeatureSpec::monotone("juv_fel_count", 1),
                FeatureSpec::monotone("juv_misd_count", 1),
                FeatureSpec::monotone("juv_other_count", 1),
                FeatureSpec::free("sex"),
                FeatureSpec::free("race_african_american"),
                FeatureSpec::free("race_caucasian"),
                FeatureSpec::free("race_hispanic"),
                FeatureSpec::free("race_other"),
                FeatureSpec::free("c_charge_degree_f"),
                FeatureSpec::free("c_charge_degree_m"),
                FeatureSpec::free("days_b_screening_arrest"),
            ],
            target: TargetSpec::plain("two_year_recid"),
            normalization: None,
        }),
        "blog-feedback" => {
            let monotone = ["A51", "A52", "A53", "A54", "A56", "A57", "A58", "A59"];
            let features = (1..=280)
                .map(|i| {
                    let name = format!("A{i}");
                    let direction = i8::from(monotone.contains(&name.as_str()));
                    FeatureSpec {
                        name,
                        monotonicity: direction,
                        one_hot: None,
                    }
                })
                .collect();
            Ok(DatasetDescriptor {
                name: name.into(),
                task: Task::Regression,
                features,
                target: TargetSpec {
                    name: "target".into(),
                    binarize_positive: false,
                    below_quantile: Some(0.9),
                },
                normalization: None,
            })
        }
        "loan-defaulter" => Ok(DatasetDescriptor {
            name: name.into(),
            task: Task::Classification,
            features: vec![
                FeatureSpec::monotone("credit_score", -1),
                FeatureSpec::monotone("employment_length", -1),
                FeatureSpec::monotone("annual_income", -1),
                FeatureSpec::monotone("dti", 1),
                FeatureSpec::monotone("bankruptcies", 1),
                FeatureSpec::free("loan_amount"),
                FeatureSpec::free("interest_rate"),
                FeatureSpec::free("term_months"),
                FeatureSpec::free("open_accounts"),
                FeatureSpec::free("delinquencies_2y"),
            ],
            target: TargetSpec::plain("defaulted"),
            normalization: None,
        }),
        "synthetic" => Ok(synthetic_descriptor()),
        other => Err(Error::UnknownDataset(other.into())),
    }
}

pub const SYNTH_A: f64 = 0.5;
pub const SYNTH_B: f64 = 0.35;
pub const SYNTH_C: f64 = 3.3;

/// Noise-free target surface: `sgn(a) * x^3 + b * sin(c*y)`. The cubic term
/// is odd in `x` (concave left of zero, convex right) and non-decreasing for
/// `a > 0`, which is what makes `x` a valid monotone feature; the sine term
/// leaves `y` free.
pub fn synthetic_truth(x: f64, y: f64) -> f64 {
    SYNTH_A.signum() * x.powi(3) + SYNTH_B * (SYNTH_C * y).sin()
}

pub fn synthetic_descriptor() -> DatasetDescriptor {
    DatasetDescriptor {
        name: "synthetic".into(),
        task: Task::Regression,
        features: vec![FeatureSpec::monotone("x", 1), FeatureSpec::free("y")],
        target: TargetSpec::plain("f"),
        normalization: None,
    }
}

/// Samples `(x, y)` uniformly from `(-2.5, 2.5)^2` and adds zero-mean
/// Gaussian noise of the given standard deviation to the target.
pub fn generate_synthetic(n_points: usize, noise_std: f64, seed: u64) -> Result<TabularDataset> {
    if n_points == 0 {
        return Err(Error::InvalidConfig("need at least one point".into()));
    }
    if noise_std.is_nan() || noise_std < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "noise std must be >= 0, got {noise_std}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = if noise_std > 0.0 {
        Some(Normal::new(0.0, noise_std).expect("std checked above"))
    } else {
        None
    };
    let mut features = Vec::with_capacity(n_points);
    let mut targets = Vec::with_capacity(n_points);
    for _ in 0..n_points {
        let x = rng.random_range(-2.5..2.5);
        let y = rng.random_range(-2.5..2.5);
        let mut f = synthetic_truth(x, y);
        if let Some(n) = &noise {
            f += n.sample(&mut rng);
        }
        features.push(vec![x, y]);
        targets.push(f);
    }
    Ok(TabularDataset {
        descriptor: synthetic_descriptor(),
        features,
        targets,
        dropped_rows: 0,
        filtered_rows: 0,
    })
}
