use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use wkode::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use wkode::metrics::{
    compare_reports, evaluate_with, metrics_from_labels, predict_labels, write_comparison_csv,
    write_metrics_csv, MetricsReport, PearsonMode,
};
use wkode::model::ModelKind;
use wkode::signal::{
    detect_r_peaks, fit_norm_stats, load_records, read_beats, segment_beats, split_dataset_by,
    write_beats, write_record, Beat, DatasetSplit,
};
use wkode::train::{EpochReport, PreparedSet, StepHooks, Trainer};
use wkode::windkessel::{synth_dataset, write_synth};
use wkode::Error;

use crate::config::RunConfig;

pub const EPOCH_LOG_HEADER: [&str; 5] = ["epoch", "train_loss", "val_loss", "grad_norm", "skipped"];
pub const SCATTER_HEADER: [&str; 4] = ["model", "output", "true_mmhg", "pred_mmhg"];
pub const HISTOGRAM_HEADER: [&str; 5] = ["model", "output", "bin_lo", "bin_hi", "count"];

pub fn synth(cfg: &RunConfig) -> Result<()> {
    let data = synth_dataset(&cfg.synth_config())?;
    write_synth(&cfg.out, &data)?;
    let samples: usize = data.records.iter().map(|r| r.len()).sum();
    println!(
        "wrote {} records ({samples} samples) to {}",
        data.records.len(),
        cfg.records_dir().display()
    );
    Ok(())
}

fn input_or(cfg: &RunConfig, default: PathBuf) -> PathBuf {
    cfg.input.clone().unwrap_or(default)
}

fn same_location(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

/// Validates external records and stores them under `<out>/records`.
pub fn ingest(cfg: &RunConfig) -> Result<()> {
    let Some(input) = &cfg.input else {
        bail!("ingest needs --input <file or directory>");
    };
    let dest = cfg.records_dir();
    if same_location(input, &dest) {
        bail!("input {} is the output directory", input.display());
    }
    let records = load_records(input, cfg.sample_rate_hz)?;
    if records.is_empty() {
        return Err(Error::EmptyInput(format!("no *.csv records in {}", input.display())).into());
    }
    fs::create_dir_all(&dest)?;
    for r in &records {
        write_record(&dest.join(format!("{}.csv", r.id)), r)?;
        println!("record {}: {} samples", r.id, r.len());
    }
    println!("ingested {} records into {}", records.len(), dest.display());
    Ok(())
}

pub fn segment(cfg: &RunConfig) -> Result<()> {
    let input = input_or(cfg, cfg.records_dir());
    let records = load_records(&input, cfg.sample_rate_hz)?;
    if records.is_empty() {
        return Err(Error::EmptyInput(format!("no *.csv records in {}", input.display())).into());
    }
    let mut beats = Vec::new();
    let mut dropped = 0;
    for r in &records {
        let seg = detect_r_peaks(&r.ecg, r.sample_rate_hz).and_then(|p| segment_beats(r, &p));
        match seg {
            Ok(seg) => {
                println!("record {}: {} beats, {} dropped", r.id, seg.beats.len(), seg.dropped);
                dropped += seg.dropped;
                beats.extend(seg.beats);
            }
            Err(e @ Error::NoBeats(_)) => println!("record {}: skipped ({e})", r.id),
            Err(e) => return Err(e.into()),
        }
    }
    if beats.is_empty() {
        return Err(Error::NoBeats(format!("no record in {} produced a beat", input.display())).into());
    }
    fs::create_dir_all(&cfg.out)?;
    let path = cfg.beats_path();
    write_beats(&path, &beats)?;
    println!(
        "{} beats from {} records ({dropped} dropped) written to {}",
        beats.len(),
        records.len(),
        path.display()
    );
    Ok(())
}

fn load_beats(cfg: &RunConfig) -> Result<Vec<Beat>> {
    let path = input_or(cfg, cfg.beats_path());
    read_beats(&path).with_context(|| format!("reading beats from {}", path.display()))
}

fn split(cfg: &RunConfig, beats: Vec<Beat>) -> Result<DatasetSplit> {
    Ok(match cfg.split_mode() {
        Some(mode) => split_dataset_by(beats, cfg.fractions(), cfg.seed, mode)?,
        None => {
            let norm = fit_norm_stats(&beats)?;
            DatasetSplit {
                train: beats.clone(),
                val: beats.clone(),
                test: beats,
                norm,
            }
        }
    })
}

fn write_epoch_log(path: &Path, reports: &[EpochReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(EPOCH_LOG_HEADER)?;
    for r in reports {
        w.write_record([
            r.epoch.to_string(),
            r.train_loss.to_string(),
            r.val_loss.to_string(),
            r.grad_norm.to_string(),
            r.n_skipped_nonfinite.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Trains one model, or resumes the one stored in `resume`, and writes `<kind>.ckpt.json`,
/// `<kind>_epochs.csv` and `<kind>_train_metrics.csv`.
pub fn train(cfg: &RunConfig) -> Result<()> {
    let data = split(cfg, load_beats(cfg)?)?;
    let tc = cfg.train_config();
    let mut trainer = match &cfg.resume {
        Some(path) => {
            let ckpt = load_checkpoint(path)?;
            let Some((_, state)) = ckpt.train else {
                bail!("checkpoint {} holds no training state", path.display());
            };
            if same_location(path, &cfg.checkpoint_path(state.weights.kind())) {
                bail!("resuming would overwrite {}; choose another --out", path.display());
            }
            if ckpt.norm != Some(data.norm) {
                bail!("checkpoint normalization does not match this dataset split");
            }
            Trainer::resume(tc.clone(), state)?
        }
        None => Trainer::new(cfg.model, &cfg.model_config(), tc.clone())?,
    };

    let train_set = PreparedSet::new(&data.train, &data.norm);
    let val_set = PreparedSet::new(&data.val, &data.norm);
    let mut hooks = StepHooks {
        on_epoch: Some(Box::new(|r: &EpochReport| {
            println!(
                "epoch {:>4}  train {:.6}  val {:.6}  |g| {:.4}  skipped {}",
                r.epoch, r.train_loss, r.val_loss, r.grad_norm, r.n_skipped_nonfinite
            )
        })),
        ..StepHooks::default()
    };
    trainer.fit(&train_set, &val_set, &mut hooks)?;
    if trainer.state().stopped_early {
        println!("early stop after epoch {}", trainer.state().next_epoch - 1);
    }

    let state = trainer.into_state();
    let kind = state.weights.kind();
    fs::create_dir_all(&cfg.out)?;
    write_epoch_log(&cfg.out.join(format!("{kind}_epochs.csv")), &state.reports)?;
    let best = state.best.clone();
    let fit = evaluate_with(&best, &data.train, &data.norm, PearsonMode::Pooled)?;
    write_metrics_csv(&cfg.out.join(format!("{kind}_train_metrics.csv")), &[fit.clone()])?;
    println!("train MAE: SBP {:.3} mmHg, DBP {:.3} mmHg", fit.sbp.mae, fit.dbp.mae);

    let path = cfg.checkpoint_path(kind);
    save_checkpoint(
        &path,
        &Checkpoint {
            weights: best,
            norm: Some(data.norm),
            train: Some((tc, state)),
        },
    )?;
    println!("checkpoint written to {}", path.display());
    Ok(())
}

struct Scored {
    report: MetricsReport,
    truth: Vec<[f64; 2]>,
    pred: Vec<[f64; 2]>,
}

fn score(cfg: &RunConfig, ckpt_path: &Path, test: &[Beat]) -> Result<Scored> {
    let ckpt = load_checkpoint(ckpt_path)?;
    let Some(norm) = ckpt.norm else {
        bail!("checkpoint {} has no normalization statistics", ckpt_path.display());
    };
    let pred = predict_labels(&ckpt.weights, test, &norm)?;
    let truth: Vec<_> = test.iter().map(|b| b.label).collect();
    let groups: Vec<&str> = test.iter().map(|b| b.matrix.source_record.as_str()).collect();
    let groups = (cfg.pearson == PearsonMode::PerSubject).then_some(groups.as_slice());
    let report = metrics_from_labels(ckpt.weights.kind().as_str(), &pred, &truth, groups)?;
    Ok(Scored {
        report,
        truth: truth.iter().map(|l| l.as_array()).collect(),
        pred: pred.iter().map(|l| l.as_array()).collect(),
    })
}

/// The test part of the configured split. With `split_mode = "all"` no
/// statistics are fitted, so any beat file can be scored.
fn test_beats(cfg: &RunConfig) -> Result<Vec<Beat>> {
    let beats = load_beats(cfg)?;
    let test = match cfg.split_mode() {
        Some(mode) => split_dataset_by(beats, cfg.fractions(), cfg.seed, mode)?.test,
        None => beats,
    };
    if test.is_empty() {
        return Err(Error::EmptyInput("test split is empty".into()).into());
    }
    Ok(test)
}

/// Scores a checkpoint on the test split and writes `metrics_<kind>.csv`.
pub fn eval(cfg: &RunConfig) -> Result<()> {
    let ckpt = cfg.checkpoint.clone().unwrap_or_else(|| cfg.checkpoint_path(cfg.model));
    let scored = score(cfg, &ckpt, &test_beats(cfg)?)?;
    let r = &scored.report;
    fs::create_dir_all(&cfg.out)?;
    let path = cfg.out.join(format!("metrics_{}.csv", r.model));
    write_metrics_csv(&path, std::slice::from_ref(r))?;
    for (name, m) in r.outputs() {
        println!(
            "{name}: MAE {:.3} mmHg, r {}, BHS {}, AAMI {}",
            m.mae,
            m.pearson.map_or("n/a".into(), |p| format!("{p:.3}")),
            m.bhs.grade,
            if m.aami.pass { "pass" } else { "fail" }
        );
    }
    println!("{} test beats; metrics written to {}", r.n_beats, path.display());
    Ok(())
}

/// Counts of `values` in bins of width `width` aligned to multiples of the
/// width. Returns `(lo, hi, count)` triples covering every value.
pub fn histogram(values: &[f64], width: f64) -> Vec<(f64, f64, usize)> {
    if values.is_empty() {
        return Vec::new();
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let first = (min / width).floor() as i64;
    let last = ((max / width).floor() as i64).max(first);
    let mut counts = vec![0usize; (last - first + 1) as usize];
    for v in values {
        let k = ((v / width).floor() as i64).clamp(first, last) - first;
        counts[k as usize] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, c)| {
            let b = first + k as i64;
            (b as f64 * width, (b + 1) as f64 * width, c)
        })
        .collect()
}

/// Hybrid-versus-baseline comparison on the test split plus the data behind
/// the scatter and error-histogram figures.
pub fn report(cfg: &RunConfig) -> Result<()> {
    let a_path = cfg
        .hybrid_checkpoint
        .clone()
        .unwrap_or_else(|| cfg.checkpoint_path(ModelKind::Hybrid));
    let b_path = cfg
        .baseline_checkpoint
        .clone()
        .unwrap_or_else(|| cfg.checkpoint_path(ModelKind::Baseline));
    let test = test_beats(cfg)?;
    let a = score(cfg, &a_path, &test)?;
    let b = score(cfg, &b_path, &test)?;

    fs::create_dir_all(&cfg.out)?;
    write_metrics_csv(&cfg.out.join("metrics.csv"), &[a.report.clone(), b.report.clone()])?;
    let cmp = compare_reports(&a.report, &b.report);
    write_comparison_csv(&cfg.out.join("comparison.csv"), &cmp)?;

    let mut scatter = csv::Writer::from_path(cfg.out.join("scatter.csv"))?;
    scatter.write_record(SCATTER_HEADER)?;
    let mut hist = csv::Writer::from_path(cfg.out.join("error_histogram.csv"))?;
    hist.write_record(HISTOGRAM_HEADER)?;
    for s in [&a, &b] {
        for (k, output) in ["sbp", "dbp"].into_iter().enumerate() {
            for (t, p) in s.truth.iter().zip(&s.pred) {
                scatter.write_record([s.report.model.clone(), output.into(), t[k].to_string(), p[k].to_string()])?;
            }
            let errors: Vec<f64> = s.truth.iter().zip(&s.pred).map(|(t, p)| p[k] - t[k]).collect();
            for (lo, hi, count) in histogram(&errors, cfg.hist_bin_mmhg) {
                hist.write_record([
                    s.report.model.clone(),
                    output.into(),
                    lo.to_string(),
                    hi.to_string(),
                    count.to_string(),
                ])?;
            }
        }
    }
    scatter.flush()?;
    hist.flush()?;

    for row in &cmp.rows {
        println!(
            "{}: {} MAE {:.3} vs {} MAE {:.3} ({:+.1}% reduction)",
            row.output,
            row.model_a,
            row.mae_a,
            row.model_b,
            row.mae_b,
            100.0 * row.relative_reduction
        );
    }
    println!("report written to {}", cfg.out.display());
    Ok(())
}
