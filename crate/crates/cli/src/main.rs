use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use toml::{Table, Value};
use wkode::metrics::PearsonMode;
use wkode::model::ModelKind;

mod commands;
mod config;

use config::{resolve, RunConfig, SplitChoice};

/// Cuffless blood-pressure estimation experiments.
#[derive(Parser, Debug)]
#[command(name = "wkode", version)]
struct Cli {
    /// Flat TOML file of run settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Named settings bundle applied beneath the config file (tiny-overfit).
    #[arg(long, global = true)]
    preset: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate Windkessel subjects and write record CSVs plus ground truth.
    Synth(SynthArgs),
    /// Validate `ppg,abp,ecg` record CSVs and copy them into <out>/records.
    Ingest(InputArgs),
    /// Detect R-peaks, cut beats and write <out>/beats.csv.
    Segment(InputArgs),
    /// Train one model and write its checkpoint and epoch log.
    Train(TrainArgs),
    /// Score a checkpoint on the test split.
    Eval(EvalArgs),
    /// Compare hybrid and baseline checkpoints and emit plot data.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    subjects: Option<usize>,
    /// Labeled beats per subject.
    #[arg(long)]
    beats: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Args, Debug)]
struct InputArgs {
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SplitArgs {
    /// beat, subject or all.
    #[arg(long)]
    split_mode: Option<SplitChoice>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Beat dataset CSV (default <out>/beats.csv).
    #[arg(long)]
    input: Option<PathBuf>,
    /// hybrid, baseline or plain.
    #[arg(long)]
    model: Option<ModelKind>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Continue from the training state stored in this checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[command(flatten)]
    split: SplitArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Checkpoint to score (default <out>/<model>.ckpt.json).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    model: Option<ModelKind>,
    /// pooled or per-subject.
    #[arg(long)]
    pearson: Option<PearsonMode>,
    #[command(flatten)]
    split: SplitArgs,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    hybrid: Option<PathBuf>,
    #[arg(long)]
    baseline: Option<PathBuf>,
    #[arg(long)]
    pearson: Option<PearsonMode>,
    #[arg(long)]
    hist_bin_mmhg: Option<f64>,
    #[command(flatten)]
    split: SplitArgs,
}

/// Collects the flags that were given into a table keyed like the config file.
#[derive(Default)]
struct Overrides(Table);

impl Overrides {
    fn set<T: serde::Serialize>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            let v = Value::try_from(v).expect("flag values serialize");
            self.0.insert(key.into(), v);
        }
    }
}

fn overrides(cli: &Cli) -> Table {
    let mut o = Overrides::default();
    o.set("seed", cli.seed);
    o.set("out", cli.out.as_ref());
    o.set("preset", cli.preset.as_ref());
    match &cli.command {
        Command::Synth(a) => {
            o.set("subjects", a.subjects);
            o.set("beats_per_subject", a.beats);
            o.set("noise_std", a.noise);
        }
        Command::Ingest(a) | Command::Segment(a) => o.set("input", a.input.as_ref()),
        Command::Train(a) => {
            o.set("input", a.input.as_ref());
            o.set("model", a.model);
            o.set("epochs", a.epochs);
            o.set("batch_size", a.batch_size);
            o.set("lr", a.lr);
            o.set("resume", a.resume.as_ref());
            o.set("split_mode", a.split.split_mode);
        }
        Command::Eval(a) => {
            o.set("input", a.input.as_ref());
            o.set("checkpoint", a.checkpoint.as_ref());
            o.set("model", a.model);
            o.set("pearson", a.pearson);
            o.set("split_mode", a.split.split_mode);
        }
        Command::Report(a) => {
            o.set("input", a.input.as_ref());
            o.set("hybrid_checkpoint", a.hybrid.as_ref());
            o.set("baseline_checkpoint", a.baseline.as_ref());
            o.set("pearson", a.pearson);
            o.set("hist_bin_mmhg", a.hist_bin_mmhg);
            o.set("split_mode", a.split.split_mode);
        }
    }
    o.0
}

fn run(cli: &Cli) -> Result<()> {
    let cfg: RunConfig = resolve(cli.config.as_deref(), overrides(cli))?;
    cfg.write_resolved()?;
    match cli.command {
        Command::Synth(_) => commands::synth(&cfg),
        Command::Ingest(_) => commands::ingest(&cfg),
        Command::Segment(_) => commands::segment(&cfg),
        Command::Train(_) => commands::train(&cfg),
        Command::Eval(_) => commands::eval(&cfg),
        Command::Report(_) => commands::report(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
