use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{evaluate, AamiResult, BhsResult, MetricsReport, OutputMetrics};
use crate::model::{HybridModelWeights, ModelConfig, ModelKind};
use crate::signal::DatasetSplit;
use crate::train::{train, EpochReport, TrainConfig};
use crate::{Error, Result};

const METRICS_HEADER: [&str; 12] = [
    "model", "output", "mae", "pearson", "pct5", "pct10", "pct15", "bhs_grade", "aami_mean", "aami_sd", "aami_pass", "n",
];

const COMPARISON_HEADER: [&str; 7] = ["output", "model_a", "model_b", "mae_a", "mae_b", "delta", "relative_reduction"];

/// One row per model and output; an undefined Pearson r is an empty field.
pub fn write_metrics_csv(path: &Path, reports: &[MetricsReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(METRICS_HEADER)?;
    for r in reports {
        for (name, m) in r.outputs() {
            w.write_record([
                r.model.clone(),
                name.to_string(),
                m.mae.to_string(),
                m.pearson.map_or(String::new(), |p| p.to_string()),
                m.bhs.pct5.to_string(),
                m.bhs.pct10.to_string(),
                m.bhs.pct15.to_string(),
                m.bhs.grade.to_string(),
                m.aami.mean_error.to_string(),
                m.aami.sd_error.to_string(),
                m.aami.pass.to_string(),
                r.n_beats.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn field<T: std::str::FromStr>(path: &Path, row: &csv::StringRecord, i: usize) -> Result<T> {
    let s = row.get(i).unwrap_or("");
    s.parse()
        .map_err(|_| Error::malformed(path, format!("column {} value {s:?} does not parse", METRICS_HEADER.get(i).unwrap_or(&"?"))))
}

fn check_header(path: &Path, rdr: &mut csv::Reader<std::fs::File>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers()?.clone();
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::malformed(path, format!("expected header {}", expected.join(","))));
    }
    Ok(())
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsReport>> {
    let mut rdr = csv::Reader::from_path(path)?;
    check_header(path, &mut rdr, &METRICS_HEADER)?;
    let rows: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;
    if rows.len() % 2 != 0 {
        return Err(Error::malformed(path, "expected an sbp and a dbp row per model"));
    }
    let parse_output = |row: &csv::StringRecord| -> Result<OutputMetrics> {
        let pearson = match row.get(3).unwrap_or("") {
            "" => None,
            _ => Some(field(path, row, 3)?),
        };
        Ok(OutputMetrics {
            mae: field(path, row, 2)?,
            pearson,
            bhs: BhsResult {
                pct5: field(path, row, 4)?,
                pct10: field(path, row, 5)?,
                pct15: field(path, row, 6)?,
                grade: field(path, row, 7)?,
            },
            aami: AamiResult {
                mean_error: field(path, row, 8)?,
                sd_error: field(path, row, 9)?,
                pass: field(path, row, 10)?,
            },
        })
    };
    rows.chunks(2)
        .map(|pair| {
            let (s, d) = (&pair[0], &pair[1]);
            if s.get(1) != Some("sbp") || d.get(1) != Some("dbp") || s.get(0) != d.get(0) {
                return Err(Error::malformed(path, "rows must come in sbp/dbp pairs per model"));
            }
            Ok(MetricsReport {
                model: s.get(0).unwrap_or("").to_string(),
                sbp: parse_output(s)?,
                dbp: parse_output(d)?,
                n_beats: field(path, s, 11)?,
            })
        })
        .collect()
}

/// MAE of model A against model B for one output. `delta = mae_a - mae_b`
/// and `relative_reduction = (mae_b - mae_a) / mae_b`, 0 when both are 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub output: String,
    pub model_a: String,
    pub model_b: String,
    pub mae_a: f64,
    pub mae_b: f64,
    pub delta: f64,
    pub relative_reduction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn row(&self, output: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.output == output)
    }

    /// True when model A's MAE is at most model B's for every output.
    pub fn a_not_worse(&self) -> bool {
        self.rows.iter().all(|r| r.mae_a <= r.mae_b)
    }
}

pub fn compare_reports(a: &MetricsReport, b: &MetricsReport) -> Comparison {
    let rows = a
        .outputs()
        .into_iter()
        .zip(b.outputs())
        .map(|((name, ma), (_, mb))| {
            let delta = ma.mae - mb.mae;
            let relative_reduction = if delta == 0.0 { 0.0 } else { -delta / mb.mae };
            ComparisonRow {
                output: name.to_string(),
                model_a: a.model.clone(),
                model_b: b.model.clone(),
                mae_a: ma.mae,
                mae_b: mb.mae,
                delta,
                relative_reduction,
            }
        })
        .collect();
    Comparison { rows }
}

pub fn write_comparison_csv(path: &Path, cmp: &Comparison) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(COMPARISON_HEADER)?;
    for r in &cmp.rows {
        w.write_record([
            r.output.clone(),
            r.model_a.clone(),
            r.model_b.clone(),
            r.mae_a.to_string(),
            r.mae_b.to_string(),
            r.delta.to_string(),
            r.relative_reduction.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_comparison_csv(path: &Path) -> Result<Comparison> {
    let mut rdr = csv::Reader::from_path(path)?;
    check_header(path, &mut rdr, &COMPARISON_HEADER)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            let s = rec.get(i).unwrap_or("");
            s.parse()
                .map_err(|_| Error::malformed(path, format!("column {} value {s:?} is not a number", COMPARISON_HEADER[i])))
        };
        rows.push(ComparisonRow {
            output: rec.get(0).unwrap_or("").to_string(),
            model_a: rec.get(1).unwrap_or("").to_string(),
            model_b: rec.get(2).unwrap_or("").to_string(),
            mae_a: num(3)?,
            mae_b: num(4)?,
            delta: num(5)?,
            relative_reduction: num(6)?,
        });
    }
    Ok(Comparison { rows })
}

/// One trained model with its log and test metrics.
#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub weights: HybridModelWeights,
    pub epochs: Vec<EpochReport>,
    pub metrics: MetricsReport,
}

#[derive(Clone, Debug)]
pub struct ModelComparison {
    pub a: TrainedModel,
    pub b: TrainedModel,
    pub comparison: Comparison,
}

/// Trains `a` and `b` under identical seeds and configs and compares their
/// test MAE.
pub fn compare_kinds(
    a: ModelKind,
    b: ModelKind,
    split: &DatasetSplit,
    tc: &TrainConfig,
    mc: &ModelConfig,
) -> Result<ModelComparison> {
    let run = |kind| -> Result<TrainedModel> {
        let (weights, epochs) = train(kind, split, tc, mc)?;
        let metrics = evaluate(&weights, &split.test, &split.norm)?;
        Ok(TrainedModel {
            weights,
            epochs,
            metrics,
        })
    };
    let a = run(a)?;
    let b = run(b)?;
    let comparison = compare_reports(&a.metrics, &b.metrics);
    Ok(ModelComparison { a, b, comparison })
}

/// Hybrid (model A) against baseline (model B).
pub fn compare_models(split: &DatasetSplit, tc: &TrainConfig, mc: &ModelConfig) -> Result<ModelComparison> {
    compare_kinds(ModelKind::Hybrid, ModelKind::Baseline, split, tc, mc)
}
