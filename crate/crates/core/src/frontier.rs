//! Average-versus-worst-case loss frontiers traced by sweeping the tilt.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::loss_core::{compensated_sum, decompose, GroupPartition, TiltParam};
use crate::models::{loss_profile, ModelSpec};
use crate::solver::{sweep, SolveReport, SolverConfig};

/// Fixed leading CSV columns; one `group_avg_<name>` column per group follows.
pub const CSV_COLUMNS: [&str; 9] = [
    "lambda",
    "model_id",
    "split",
    "avg_individual_loss",
    "max_individual_loss",
    "avg_group_loss",
    "max_group_loss",
    "gamma_hat",
    "converged",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupLoss {
    pub name: String,
    pub avg_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierRecord {
    pub lambda: f64,
    pub model_id: String,
    pub split: Split,
    pub avg_individual_loss: f64,
    pub max_individual_loss: f64,
    pub group_avg_losses: Vec<GroupLoss>,
    pub avg_group_loss: f64,
    pub max_group_loss: f64,
    pub gamma_hat: Option<f64>,
    pub converged: bool,
}

/// Group structure used when scoring a parameter vector.
#[derive(Debug, Clone)]
pub struct Groups<'a> {
    pub partition: &'a GroupPartition,
    pub names: &'a [String],
}

/// Individual and group metrics of `theta` on `dataset`. Without groups the
/// whole sample is one group.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_point(
    spec: &ModelSpec,
    theta: &[f64],
    dataset: &Dataset,
    groups: Option<Groups<'_>>,
    lambda: TiltParam,
    model_id: &str,
    split: Split,
    converged: bool,
) -> Result<FrontierRecord> {
    let profile = loss_profile(spec, theta, dataset)?;
    let decomposition = decompose(&profile, lambda);
    let (group_avg_losses, averages) = match groups {
        Some(g) => {
            if g.names.len() != g.partition.group_count() {
                return Err(Error::DimensionMismatch {
                    expected: g.partition.group_count(),
                    found: g.names.len(),
                });
            }
            let averages = g.partition.group_averages(&profile)?;
            let named = g
                .names
                .iter()
                .zip(&averages)
                .map(|(name, &avg_loss)| GroupLoss {
                    name: name.clone(),
                    avg_loss,
                })
                .collect();
            (named, averages)
        }
        None => (Vec::new(), vec![profile.mean()]),
    };
    let avg_group_loss = compensated_sum(averages.iter().copied()) / averages.len() as f64;
    let max_group_loss = averages.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(FrontierRecord {
        lambda: lambda.value(),
        model_id: model_id.to_string(),
        split,
        avg_individual_loss: decomposition.mean_loss,
        max_individual_loss: decomposition.max_loss,
        group_avg_losses,
        avg_group_loss,
        max_group_loss: max_group_loss.max(avg_group_loss),
        gamma_hat: decomposition.gamma,
        converged,
    })
}

/// Sweeps `lambda_grid` on `train` and scores every minimizer on the
/// training split and, when given, the held-out split. Records come out in
/// tilt order, train before test for each tilt.
pub fn build_frontier(
    spec: &ModelSpec,
    train: &Dataset,
    test: Option<&Dataset>,
    group_names: Option<&[String]>,
    lambda_grid: &[f64],
    config: &SolverConfig,
) -> Result<Vec<FrontierRecord>> {
    if lambda_grid.is_empty() {
        return Err(Error::InvalidParameter("lambda grid is empty".into()));
    }
    let reports = sweep(spec, train, lambda_grid, config)?;
    frontier_from_reports(spec, train, test, group_names, lambda_grid, &reports)
}

/// Scores the minimizers of an existing sweep.
pub fn frontier_from_reports(
    spec: &ModelSpec,
    train: &Dataset,
    test: Option<&Dataset>,
    group_names: Option<&[String]>,
    lambda_grid: &[f64],
    reports: &[SolveReport],
) -> Result<Vec<FrontierRecord>> {
    if reports.len() != lambda_grid.len() {
        return Err(Error::DimensionMismatch {
            expected: lambda_grid.len(),
            found: reports.len(),
        });
    }
    let train_groups = group_names
        .map(|names| train.partition(names))
        .transpose()?;
    let test_groups = match (test, group_names) {
        (Some(t), Some(names)) => Some(t.partition(names)?),
        _ => None,
    };
    let model_id = spec.model_id();

    let mut records = Vec::with_capacity(reports.len() * if test.is_some() { 2 } else { 1 });
    for (report, &lambda) in reports.iter().zip(lambda_grid) {
        let tilt = TiltParam::new(lambda)?;
        let theta = report.theta_hat.as_slice();
        records.push(evaluate_point(
            spec,
            theta,
            train,
            groups_of(&train_groups, group_names),
            tilt,
            &model_id,
            Split::Train,
            report.converged,
        )?);
        if let Some(test) = test {
            records.push(evaluate_point(
                spec,
                theta,
                test,
                groups_of(&test_groups, group_names),
                tilt,
                &model_id,
                Split::Test,
                report.converged,
            )?);
        }
    }
    Ok(records)
}

fn groups_of<'a>(
    partition: &'a Option<GroupPartition>,
    names: Option<&'a [String]>,
) -> Option<Groups<'a>> {
    partition
        .as_ref()
        .zip(names)
        .map(|(partition, names)| Groups { partition, names })
}

/// CSV header for the given group names.
pub fn csv_header(group_names: &[String]) -> Vec<String> {
    CSV_COLUMNS
        .iter()
        .map(|c| c.to_string())
        .chain(group_names.iter().map(|g| format!("group_avg_{g}")))
        .collect()
}

fn csv_row(record: &FrontierRecord) -> Vec<String> {
    let mut row = vec![
        record.lambda.to_string(),
        record.model_id.clone(),
        record.split.to_string(),
        record.avg_individual_loss.to_string(),
        record.max_individual_loss.to_string(),
        record.avg_group_loss.to_string(),
        record.max_group_loss.to_string(),
        record.gamma_hat.map(|g| g.to_string()).unwrap_or_default(),
        record.converged.to_string(),
    ];
    row.extend(
        record
            .group_avg_losses
            .iter()
            .map(|g| g.avg_loss.to_string()),
    );
    row
}

pub fn write_csv<W: Write>(
    writer: W,
    records: &[FrontierRecord],
    group_names: &[String],
) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(csv_header(group_names))?;
    for record in records {
        if record.group_avg_losses.len() != group_names.len() {
            return Err(Error::DimensionMismatch {
                expected: group_names.len(),
                found: record.group_avg_losses.len(),
            });
        }
        out.write_record(csv_row(record))?;
    }
    out.flush().map_err(|e| Error::Data(e.to_string()))?;
    Ok(())
}

pub fn write_jsonl<W: Write>(mut writer: W, records: &[FrontierRecord]) -> Result<()> {
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer
            .write_all(b"\n")
            .map_err(|e| Error::Data(e.to_string()))?;
    }
    Ok(())
}

/// Writes `<stem>.csv` and `<stem>.jsonl` into `dir`.
pub fn write_files(
    dir: &Path,
    stem: &str,
    records: &[FrontierRecord],
    group_names: &[String],
) -> Result<()> {
    let csv_path = dir.join(format!("{stem}.csv"));
    let file = File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    write_csv(BufWriter::new(file), records, group_names)?;
    let json_path = dir.join(format!("{stem}.jsonl"));
    let file = File::create(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let mut writer = BufWriter::new(file);
    write_jsonl(&mut writer, records)?;
    writer.flush().map_err(|e| Error::io(&json_path, e))?;
    Ok(())
}
