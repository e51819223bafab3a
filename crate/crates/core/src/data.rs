//! Datasets: CSV ingestion, preprocessing, splits and synthetic generators.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss_core::{compensated_sum, GroupPartition};

/// Row-major feature matrix with targets and optional group labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n: usize,
    p: usize,
    targets: Vec<f64>,
    group_labels: Option<Vec<String>>,
    feature_names: Vec<String>,
    target_name: String,
    group_name: String,
}

impl Dataset {
    pub fn from_rows(
        rows: Vec<Vec<f64>>,
        targets: Vec<f64>,
        group_labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        let names = (0..p).map(|j| format!("x{j}")).collect();
        Self::from_parts(rows, targets, group_labels, names)
    }

    pub fn from_parts(
        rows: Vec<Vec<f64>>,
        targets: Vec<f64>,
        group_labels: Option<Vec<String>>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let p = feature_names.len();
        if p == 0 {
            return Err(Error::Data("dataset has no feature columns".into()));
        }
        let mut features = Vec::with_capacity(n * p);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != p {
                return Err(Error::Data(format!(
                    "row {i} has {} features, expected {p}",
                    row.len()
                )));
            }
            features.extend(row);
        }
        if targets.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: targets.len(),
            });
        }
        if let Some(labels) = &group_labels {
            if labels.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: labels.len(),
                });
            }
        }
        if features.iter().chain(&targets).any(|v| !v.is_finite()) {
            return Err(Error::Data("dataset contains non-finite values".into()));
        }
        Ok(Self {
            features,
            n,
            p,
            targets,
            group_labels,
            feature_names,
            target_name: "target".into(),
            group_name: "group".into(),
        })
    }

    pub fn with_target_name(mut self, name: impl Into<String>) -> Self {
        self.target_name = name.into();
        self
    }

    pub fn with_group_name(mut self, name: impl Into<String>) -> Self {
        self.group_name = name.into();
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.p)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn group_labels(&self) -> Option<&[String]> {
        self.group_labels.as_deref()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn group_name(&self) -> &str {
        &self.group_name
    }

    /// Distinct group labels in sorted order.
    pub fn group_names(&self) -> Option<Vec<String>> {
        self.group_labels.as_ref().map(|labels| {
            labels
                .iter()
                .cloned()
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect()
        })
    }

    /// Partition over the given group names; fails if a group is absent.
    pub fn partition(&self, names: &[String]) -> Result<GroupPartition> {
        let labels = self
            .group_labels
            .as_ref()
            .ok_or_else(|| Error::InvalidPartition("dataset has no group labels".into()))?;
        GroupPartition::from_labels(labels, names)
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.p);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Self {
            features,
            n: indices.len(),
            p: self.p,
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            group_labels: self
                .group_labels
                .as_ref()
                .map(|g| indices.iter().map(|&i| g[i].clone()).collect()),
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
            group_name: self.group_name.clone(),
        }
    }

    /// Writes features, target and (if present) group labels as CSV.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = csv::Writer::from_writer(file);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(&self.target_name);
        if self.group_labels.is_some() {
            header.push(&self.group_name);
        }
        writer.write_record(&header)?;
        for i in 0..self.n {
            let mut record: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            record.push(self.targets[i].to_string());
            if let Some(g) = &self.group_labels {
                record.push(g[i].clone());
            }
            writer.write_record(&record)?;
        }
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CsvOptions {
    pub target: String,
    pub group: Option<String>,
    pub positive_label: Option<String>,
    /// Targets must be binary (directly or through `positive_label`).
    pub classification: bool,
}

#[derive(Debug, Clone)]
pub struct CsvLoad {
    pub dataset: Dataset,
    pub dropped_rows: usize,
}

fn is_missing(cell: &str) -> bool {
    cell.trim().is_empty()
}

/// Loads a headered, comma-delimited CSV file.
///
/// Numeric columns pass through; any other feature column is one-hot
/// encoded over its sorted levels with the first level dropped. Rows with an
/// empty cell are dropped.
pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<CsvLoad> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let column = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let target_col = column(&options.target)?;
    let group_col = options.group.as_deref().map(column).transpose()?;

    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut dropped_rows = 0;
    for record in reader.records() {
        let record = record?;
        let cells: Vec<String> = record.iter().map(|c| c.trim().to_string()).collect();
        if cells.len() != header.len() {
            return Err(Error::Data(format!(
                "{}: record has {} fields, header has {}",
                path.display(),
                cells.len(),
                header.len()
            )));
        }
        if cells.iter().any(|c| is_missing(c)) {
            dropped_rows += 1;
            continue;
        }
        rows.push(cells);
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let targets = parse_targets(&rows, target_col, options)?;

    enum Encoding {
        Numeric(usize),
        OneHot(usize, Vec<String>),
    }
    let mut encodings = Vec::new();
    let mut feature_names = Vec::new();
    for (j, name) in header.iter().enumerate() {
        if j == target_col || Some(j) == group_col {
            continue;
        }
        let numeric = rows
            .iter()
            .all(|r| r[j].parse::<f64>().is_ok_and(f64::is_finite));
        if numeric {
            encodings.push(Encoding::Numeric(j));
            feature_names.push(name.clone());
        } else {
            let levels: Vec<String> = rows
                .iter()
                .map(|r| r[j].clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            for level in &levels[1..] {
                feature_names.push(format!("{name}={level}"));
            }
            encodings.push(Encoding::OneHot(j, levels));
        }
    }

    let features: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let mut out = Vec::with_capacity(feature_names.len());
            for enc in &encodings {
                match enc {
                    Encoding::Numeric(j) => {
                        out.push(r[*j].parse::<f64>().expect("checked numeric"))
                    }
                    Encoding::OneHot(j, levels) => {
                        out.extend(levels[1..].iter().map(|l| f64::from(u8::from(&r[*j] == l))))
                    }
                }
            }
            out
        })
        .collect();

    let groups = group_col.map(|g| rows.iter().map(|r| r[g].clone()).collect());
    let mut dataset = Dataset::from_parts(features, targets, groups, feature_names)?
        .with_target_name(options.target.clone());
    if let Some(g) = &options.group {
        dataset = dataset.with_group_name(g.clone());
    }
    Ok(CsvLoad {
        dataset,
        dropped_rows,
    })
}

fn parse_targets(rows: &[Vec<String>], col: usize, options: &CsvOptions) -> Result<Vec<f64>> {
    if let Some(positive) = &options.positive_label {
        return Ok(rows
            .iter()
            .map(|r| f64::from(u8::from(&r[col] == positive)))
            .collect());
    }
    let parsed = rows
        .iter()
        .map(|r| {
            r[col]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    Error::Config(format!(
                        "target `{}` has non-numeric value `{}`; set a positive label",
                        options.target, r[col]
                    ))
                })
        })
        .collect::<Result<Vec<_>>>()?;
    if options.classification && parsed.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Config(format!(
            "target `{}` is not binary; set a positive label",
            options.target
        )));
    }
    Ok(parsed)
}

/// Per-feature affine transform fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Columns with zero variance; they map to 0.
    pub constant: Vec<bool>,
}

impl Standardization {
    pub fn apply(&self, dataset: &Dataset) -> Result<Dataset> {
        if dataset.p() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                found: dataset.p(),
            });
        }
        let mut out = dataset.clone();
        for row in out.features.chunks_exact_mut(out.p) {
            for (j, v) in row.iter_mut().enumerate() {
                *v = if self.constant[j] {
                    0.0
                } else {
                    (*v - self.mean[j]) / self.std[j]
                };
            }
        }
        Ok(out)
    }
}

/// Centers every feature and scales it to unit population standard deviation.
pub fn standardize(dataset: &Dataset) -> Result<(Dataset, Standardization)> {
    if dataset.n() < 2 {
        return Err(Error::Data("standardization needs at least 2 rows".into()));
    }
    let n = dataset.n() as f64;
    let mut mean = Vec::with_capacity(dataset.p());
    let mut std = Vec::with_capacity(dataset.p());
    let mut constant = Vec::with_capacity(dataset.p());
    for j in 0..dataset.p() {
        let col = dataset.column(j);
        let m = compensated_sum(col.iter().copied()) / n;
        let var = compensated_sum(col.iter().map(|v| (v - m) * (v - m))) / n;
        let s = var.sqrt();
        let is_constant = col.iter().all(|&v| v == col[0]) || s <= 1e-12 * (1.0 + m.abs());
        mean.push(m);
        std.push(if is_constant { 1.0 } else { s });
        constant.push(is_constant);
    }
    let transform = Standardization {
        mean,
        std,
        constant,
    };
    Ok((transform.apply(dataset)?, transform))
}

/// Seeded disjoint train/test split. With `stratify`, each group is split
/// separately so group proportions are kept to within one observation.
pub fn split(
    dataset: &Dataset,
    test_fraction: f64,
    seed: u64,
    stratify: bool,
) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    if dataset.n() < 2 {
        return Err(Error::Data("splitting needs at least 2 rows".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let strata: Vec<Vec<usize>> = match (stratify, dataset.group_labels(), dataset.group_names()) {
        (true, Some(labels), Some(names)) => names
            .iter()
            .map(|name| (0..dataset.n()).filter(|&i| &labels[i] == name).collect())
            .collect(),
        _ => vec![(0..dataset.n()).collect()],
    };
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut stratum in strata {
        stratum.shuffle(&mut rng);
        let k = (stratum.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&stratum[..k]);
        train.extend_from_slice(&stratum[k..]);
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "test fraction {test_fraction} leaves an empty split of {} rows",
            dataset.n()
        )));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((dataset.subset(&train), dataset.subset(&test)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticKind {
    LinearNoise,
    TwoGroupLogistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Noise {
    Gaussian {
        sigma: f64,
    },
    /// `Exp(rate) - 1/rate`: mean zero, skewness 2.
    SkewedExponential {
        rate: f64,
    },
}

impl Noise {
    fn sampler(self) -> Result<NoiseSampler> {
        match self {
            Noise::Gaussian { sigma } if sigma >= 0.0 && sigma.is_finite() => Ok(
                NoiseSampler::Gaussian(Normal::new(0.0, sigma).expect("valid sigma")),
            ),
            Noise::SkewedExponential { rate } if rate > 0.0 && rate.is_finite() => Ok(
                NoiseSampler::Exponential(Exp::new(rate).expect("valid rate"), 1.0 / rate),
            ),
            other => Err(Error::InvalidParameter(format!("invalid noise {other:?}"))),
        }
    }
}

enum NoiseSampler {
    Gaussian(Normal<f64>),
    Exponential(Exp<f64>, f64),
}

impl NoiseSampler {
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseSampler::Gaussian(d) => d.sample(rng),
            NoiseSampler::Exponential(d, mean) => d.sample(rng) - mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub kind: SyntheticKind,
    pub n: usize,
    pub p: usize,
    pub noise: Noise,
    /// Fraction of observations in the minority group.
    pub group_imbalance: f64,
    pub seed: u64,
    /// Mean of every (Gaussian, unit variance) feature.
    #[serde(default)]
    pub feature_mean: f64,
    /// Coefficients; drawn from N(0, 1) when absent.
    #[serde(default)]
    pub theta_star: Option<Vec<f64>>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            kind: SyntheticKind::LinearNoise,
            n: 200,
            p: 3,
            noise: Noise::Gaussian { sigma: 1.0 },
            group_imbalance: 0.3,
            seed: 0,
            feature_mean: 0.0,
            theta_star: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticMetadata {
    pub config: SyntheticConfig,
    pub theta_star: Vec<f64>,
    /// Coefficient shift applied to the minority group.
    pub group_shift: Option<Vec<f64>>,
    /// Logit offsets per group (majority, minority).
    pub group_intercepts: Option<[f64; 2]>,
}

impl SyntheticMetadata {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(&mut file, self)?;
        writeln!(file).map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub dataset: Dataset,
    pub metadata: SyntheticMetadata,
}

pub const MAJORITY_GROUP: &str = "majority";
pub const MINORITY_GROUP: &str = "minority";

pub fn generate(config: &SyntheticConfig) -> Result<Synthetic> {
    if config.n == 0 || config.p == 0 {
        return Err(Error::InvalidParameter("n and p must be at least 1".into()));
    }
    if !(config.group_imbalance > 0.0 && config.group_imbalance < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "group imbalance must lie in (0, 1), got {}",
            config.group_imbalance
        )));
    }
    if !config.feature_mean.is_finite() {
        return Err(Error::InvalidParameter(
            "feature mean must be finite".into(),
        ));
    }
    if let Some(theta) = &config.theta_star {
        if theta.len() != config.p || theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "theta_star must hold {} finite values",
                config.p
            )));
        }
    }
    let noise = config.noise.sampler()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");

    let theta_star = config
        .theta_star
        .clone()
        .unwrap_or_else(|| (0..config.p).map(|_| std_normal.sample(&mut rng)).collect());
    let rows: Vec<Vec<f64>> = (0..config.n)
        .map(|_| {
            (0..config.p)
                .map(|_| config.feature_mean + std_normal.sample(&mut rng))
                .collect()
        })
        .collect();
    let dot =
        |row: &[f64], theta: &[f64]| -> f64 { row.iter().zip(theta).map(|(a, b)| a * b).sum() };

    let (targets, groups, group_shift, group_intercepts) = match config.kind {
        SyntheticKind::LinearNoise => {
            let targets = rows
                .iter()
                .map(|r| dot(r, &theta_star) + noise.sample(&mut rng))
                .collect();
            (targets, None, None, None)
        }
        SyntheticKind::TwoGroupLogistic => {
            let minority = ((config.n as f64 * config.group_imbalance).round() as usize)
                .clamp(1.min(config.n), config.n.saturating_sub(1).max(1));
            let mut order: Vec<usize> = (0..config.n).collect();
            order.shuffle(&mut rng);
            let mut in_minority = vec![false; config.n];
            for &i in &order[..minority] {
                in_minority[i] = true;
            }
            let shift: Vec<f64> = (0..config.p).map(|_| std_normal.sample(&mut rng)).collect();
            let theta_minority: Vec<f64> =
                theta_star.iter().zip(&shift).map(|(a, b)| a + b).collect();
            let intercepts = [0.0, -0.5];
            let targets = rows
                .iter()
                .zip(&in_minority)
                .map(|(r, &m)| {
                    let logit = if m {
                        dot(r, &theta_minority) + intercepts[1]
                    } else {
                        dot(r, &theta_star) + intercepts[0]
                    };
                    let prob = 1.0 / (1.0 + (-logit).exp());
                    f64::from(u8::from(rng.random_bool(prob.clamp(0.0, 1.0))))
                })
                .collect();
            let labels = in_minority
                .iter()
                .map(|&m| if m { MINORITY_GROUP } else { MAJORITY_GROUP }.to_string())
                .collect();
            (targets, Some(labels), Some(shift), Some(intercepts))
        }
    };

    let dataset = Dataset::from_rows(rows, targets, groups)?.with_target_name("y");
    Ok(Synthetic {
        dataset,
        metadata: SyntheticMetadata {
            config: config.clone(),
            theta_star,
            group_shift,
            group_intercepts,
        },
    })
}
