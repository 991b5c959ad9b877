//! Clinical error metrics (MAE, Pearson r, BHS grade, AAMI criteria),
//! evaluation of trained weights and hybrid-vs-baseline comparison.

mod report;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use report::{
    compare_kinds, compare_models, compare_reports, read_comparison_csv, read_metrics_csv, write_comparison_csv,
    write_metrics_csv, Comparison, ComparisonRow, ModelComparison, TrainedModel,
};

use crate::model::{forward_batch, HybridModelWeights};
use crate::signal::{apply_norm, invert_label_norm, Beat, BeatLabel, BeatMatrix, NormStats};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BhsGrade {
    A,
    B,
    C,
    D,
}

impl fmt::Display for BhsGrade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BhsGrade::A => "A",
            BhsGrade::B => "B",
            BhsGrade::C => "C",
            BhsGrade::D => "D",
        };
        f.write_str(s)
    }
}

impl FromStr for BhsGrade {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" => Ok(BhsGrade::A),
            "B" => Ok(BhsGrade::B),
            "C" => Ok(BhsGrade::C),
            "D" => Ok(BhsGrade::D),
            _ => Err(Error::InvalidInput(format!("unknown BHS grade {s:?}"))),
        }
    }
}

/// Minimum cumulative percentages within 5, 10 and 15 mmHg per grade.
pub const BHS_THRESHOLDS: [(BhsGrade, [u32; 3]); 3] = [
    (BhsGrade::A, [60, 85, 95]),
    (BhsGrade::B, [50, 75, 90]),
    (BhsGrade::C, [40, 65, 85]),
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BhsResult {
    pub pct5: f64,
    pub pct10: f64,
    pub pct15: f64,
    pub grade: BhsGrade,
}

/// Cumulative percentages of `|e| <= 5, 10, 15` mmHg and the BHS grade.
pub fn bhs_grade(errors: &[f64]) -> Result<BhsResult> {
    if errors.is_empty() {
        return Err(Error::EmptyInput("BHS grade of zero errors".into()));
    }
    let n = errors.len();
    let count = |k: f64| errors.iter().filter(|e| e.abs() <= k).count();
    let counts = [count(5.0), count(10.0), count(15.0)];
    // Integer comparison so grade boundaries are exact.
    let grade = BHS_THRESHOLDS
        .iter()
        .find(|(_, th)| counts.iter().zip(th).all(|(&c, &t)| 100 * c >= t as usize * n))
        .map_or(BhsGrade::D, |(g, _)| *g);
    let pct = |c: usize| 100.0 * c as f64 / n as f64;
    Ok(BhsResult {
        pct5: pct(counts[0]),
        pct10: pct(counts[1]),
        pct15: pct(counts[2]),
        grade,
    })
}

/// Grade for given cumulative percentages.
pub fn bhs_grade_from_percentages(pct: [f64; 3]) -> BhsGrade {
    BHS_THRESHOLDS
        .iter()
        .find(|(_, th)| pct.iter().zip(th).all(|(&p, &t)| p >= t as f64))
        .map_or(BhsGrade::D, |(g, _)| *g)
}

pub const AAMI_MAX_ABS_MEAN: f64 = 5.0;
pub const AAMI_MAX_SD: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AamiResult {
    pub mean_error: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub sd_error: f64,
    pub pass: bool,
}

pub fn aami_check(errors: &[f64]) -> Result<AamiResult> {
    if errors.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: errors.len(),
        });
    }
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    Ok(AamiResult {
        mean_error: mean,
        sd_error: sd,
        pass: mean.abs() <= AAMI_MAX_ABS_MEAN && sd <= AAMI_MAX_SD,
    })
}

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth)?;
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64)
}

/// Sample Pearson correlation; `None` when fewer than two points or either
/// variance is zero.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

fn check_pair(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions for {} targets",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput("no predictions".into()));
    }
    Ok(())
}

/// Metrics of one output channel (SBP or DBP).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputMetrics {
    pub mae: f64,
    /// `None` when undefined (zero variance).
    pub pearson: Option<f64>,
    pub bhs: BhsResult,
    pub aami: AamiResult,
}

impl OutputMetrics {
    pub fn compute(pred: &[f64], truth: &[f64]) -> Result<Self> {
        check_pair(pred, truth)?;
        let errors: Vec<f64> = pred.iter().zip(truth).map(|(p, t)| p - t).collect();
        Ok(Self {
            mae: mae(pred, truth)?,
            pearson: pearson(pred, truth),
            bhs: bhs_grade(&errors)?,
            aami: aami_check(&errors)?,
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PearsonMode {
    /// One coefficient over all beats.
    #[default]
    Pooled,
    /// Mean of per-record coefficients; records where r is undefined are
    /// left out.
    PerSubject,
}

impl FromStr for PearsonMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pooled" => Ok(PearsonMode::Pooled),
            "per-subject" | "per_subject" => Ok(PearsonMode::PerSubject),
            _ => Err(Error::InvalidInput(format!("unknown pearson mode {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: String,
    pub sbp: OutputMetrics,
    pub dbp: OutputMetrics,
    pub n_beats: usize,
}

impl MetricsReport {
    pub fn outputs(&self) -> [(&'static str, &OutputMetrics); 2] {
        [("sbp", &self.sbp), ("dbp", &self.dbp)]
    }
}

/// Metrics of predicted against true labels, both in mmHg. `groups`, when
/// given, holds the subject of every beat for per-subject Pearson.
pub fn metrics_from_labels(
    model: &str,
    pred: &[BeatLabel],
    truth: &[BeatLabel],
    groups: Option<&[&str]>,
) -> Result<MetricsReport> {
    let col = |v: &[BeatLabel], k: usize| v.iter().map(|l| l.as_array()[k]).collect::<Vec<f64>>();
    let mut out = [0, 1].map(|k| OutputMetrics::compute(&col(pred, k), &col(truth, k)));
    if let Some(groups) = groups {
        if groups.len() != pred.len() {
            return Err(Error::InvalidInput("one group label per beat required".into()));
        }
        for (k, m) in out.iter_mut().enumerate() {
            if let Ok(m) = m {
                m.pearson = per_group_pearson(&col(pred, k), &col(truth, k), groups);
            }
        }
    }
    let [sbp, dbp] = out;
    Ok(MetricsReport {
        model: model.to_string(),
        sbp: sbp?,
        dbp: dbp?,
        n_beats: pred.len(),
    })
}

fn per_group_pearson(pred: &[f64], truth: &[f64], groups: &[&str]) -> Option<f64> {
    let mut by: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for ((&p, &t), &g) in pred.iter().zip(truth).zip(groups) {
        let e = by.entry(g).or_default();
        e.0.push(p);
        e.1.push(t);
    }
    let rs: Vec<f64> = by.values().filter_map(|(p, t)| pearson(p, t)).collect();
    (!rs.is_empty()).then(|| rs.iter().sum::<f64>() / rs.len() as f64)
}

/// De-normalized predictions of `weights` for raw beats, in mmHg.
pub fn predict_labels(weights: &HybridModelWeights, beats: &[Beat], norm: &NormStats) -> Result<Vec<BeatLabel>> {
    let inputs: Vec<BeatMatrix> = beats.iter().map(|b| apply_norm(&b.matrix, norm)).collect();
    let refs: Vec<&BeatMatrix> = inputs.iter().collect();
    Ok(forward_batch(weights, &refs)?
        .iter()
        .map(|o| invert_label_norm(o.pred(), norm))
        .collect())
}

/// Pooled metrics of `weights` on `test`.
pub fn evaluate(weights: &HybridModelWeights, test: &[Beat], norm: &NormStats) -> Result<MetricsReport> {
    evaluate_with(weights, test, norm, PearsonMode::Pooled)
}

pub fn evaluate_with(
    weights: &HybridModelWeights,
    test: &[Beat],
    norm: &NormStats,
    mode: PearsonMode,
) -> Result<MetricsReport> {
    if test.is_empty() {
        return Err(Error::EmptyInput("no test beats".into()));
    }
    let pred = predict_labels(weights, test, norm)?;
    let truth: Vec<BeatLabel> = test.iter().map(|b| b.label).collect();
    let groups: Vec<&str> = test.iter().map(|b| b.matrix.source_record.as_str()).collect();
    let groups = (mode == PearsonMode::PerSubject).then_some(groups.as_slice());
    metrics_from_labels(weights.kind().as_str(), &pred, &truth, groups)
}
