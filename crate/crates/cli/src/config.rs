use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};
use wkode::metrics::PearsonMode;
use wkode::model::{ModelConfig, ModelKind};
use wkode::signal::SplitMode;
use wkode::train::TrainConfig;
use wkode::windkessel::{ParamRanges, SynthConfig};

pub const RESOLVED_FILE: &str = "run_config.resolved";
pub const PRESETS: [&str; 1] = ["tiny-overfit"];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitChoice {
    #[default]
    Beat,
    Subject,
    /// Every beat is used for training, validation and testing alike.
    All,
}

impl FromStr for SplitChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "beat" => Ok(SplitChoice::Beat),
            "subject" => Ok(SplitChoice::Subject),
            "all" => Ok(SplitChoice::All),
            _ => Err(format!("unknown split mode {s:?} (expected beat, subject or all)")),
        }
    }
}

/// Every tunable of a run in one flat table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub seed: u64,
    pub out: PathBuf,
    pub input: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub resume: Option<PathBuf>,
    pub hybrid_checkpoint: Option<PathBuf>,
    pub baseline_checkpoint: Option<PathBuf>,
    pub sample_rate_hz: f64,

    pub subjects: usize,
    pub beats_per_subject: usize,
    pub noise_std: f64,
    pub q0: f64,
    pub systole_fraction: f64,
    pub r_p_min: f64,
    pub r_p_max: f64,
    pub r_d_min: f64,
    pub r_d_max: f64,
    pub c_min: f64,
    pub c_max: f64,
    pub period_min_s: f64,
    pub period_max_s: f64,

    pub model: ModelKind,
    pub latent_dim: usize,
    pub f_comp_hidden: usize,
    pub decoder_hidden: usize,
    pub ode_steps: usize,

    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub clip_norm: f64,
    pub early_stop_patience: usize,

    pub split_mode: SplitChoice,
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,

    pub pearson: PearsonMode,
    pub hist_bin_mmhg: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let synth = SynthConfig::default();
        let mc = ModelConfig::default();
        let tc = TrainConfig::default();
        Self {
            preset: None,
            seed: 0,
            out: PathBuf::from("wkode-out"),
            input: None,
            checkpoint: None,
            resume: None,
            hybrid_checkpoint: None,
            baseline_checkpoint: None,
            sample_rate_hz: synth.sample_rate_hz,
            subjects: synth.n_subjects,
            beats_per_subject: synth.beats_per_subject,
            noise_std: synth.noise_std,
            q0: synth.q0,
            systole_fraction: synth.systole_fraction,
            r_p_min: synth.ranges.r_p.0,
            r_p_max: synth.ranges.r_p.1,
            r_d_min: synth.ranges.r_d.0,
            r_d_max: synth.ranges.r_d.1,
            c_min: synth.ranges.c.0,
            c_max: synth.ranges.c.1,
            period_min_s: synth.ranges.period_s.0,
            period_max_s: synth.ranges.period_s.1,
            model: ModelKind::Hybrid,
            latent_dim: mc.latent_dim,
            f_comp_hidden: mc.f_comp_hidden,
            decoder_hidden: mc.decoder_hidden,
            ode_steps: mc.ode_steps,
            epochs: tc.epochs,
            batch_size: tc.batch_size,
            lr: tc.lr,
            adam_beta1: tc.adam_beta1,
            adam_beta2: tc.adam_beta2,
            adam_eps: tc.adam_eps,
            clip_norm: tc.clip_norm,
            early_stop_patience: tc.early_stop_patience,
            split_mode: SplitChoice::Beat,
            train_fraction: 0.7,
            val_fraction: 0.15,
            test_fraction: 0.15,
            pearson: PearsonMode::Pooled,
            hist_bin_mmhg: 2.0,
        }
    }
}

fn preset_table(name: &str) -> Result<Table> {
    let text = match name {
        // 32 clean beats, fitted and scored on themselves.
        "tiny-overfit" => {
            r#"
            subjects = 4
            beats_per_subject = 8
            noise_std = 0.0
            epochs = 500
            batch_size = 8
            early_stop_patience = 0
            split_mode = "all"
            "#
        }
        _ => bail!("unknown preset {name:?} (available: {})", PRESETS.join(", ")),
    };
    Ok(text.parse::<Table>().expect("preset tables are valid TOML"))
}

/// Layers built-in defaults, an optional preset, the config file and the
/// command-line overrides, later layers winning key by key.
pub fn resolve(file: Option<&Path>, overrides: Table) -> Result<RunConfig> {
    let file_table = match file {
        Some(path) => fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?
            .parse::<Table>()
            .with_context(|| format!("parsing config {}", path.display()))?,
        None => Table::new(),
    };
    let preset = overrides
        .get("preset")
        .or_else(|| file_table.get("preset"))
        .map(|v| v.as_str().map(str::to_owned).context("preset must be a string"))
        .transpose()?;

    let mut merged = Table::try_from(RunConfig::default()).expect("defaults serialize");
    if let Some(name) = &preset {
        merged.extend(preset_table(name)?);
    }
    merged.extend(file_table);
    merged.extend(overrides);
    let cfg: RunConfig = Value::Table(merged)
        .try_into()
        .context("invalid configuration")?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    /// Checks every value against the invariants of the types it feeds.
    pub fn validate(&self) -> Result<()> {
        self.synth_config().validate()?;
        self.model_config().validate()?;
        self.train_config().validate()?;
        if self.split_mode != SplitChoice::All {
            let f = self.fractions();
            if !(f.0 > 0.0 && f.1 > 0.0 && f.2 > 0.0) || (f.0 + f.1 + f.2 - 1.0).abs() > 1e-9 {
                bail!("split fractions must be positive and sum to 1, got {f:?}");
            }
        }
        if !(self.hist_bin_mmhg > 0.0 && self.hist_bin_mmhg.is_finite()) {
            bail!("hist_bin_mmhg must be positive, got {}", self.hist_bin_mmhg);
        }
        Ok(())
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            n_subjects: self.subjects,
            beats_per_subject: self.beats_per_subject,
            ranges: ParamRanges {
                r_p: (self.r_p_min, self.r_p_max),
                r_d: (self.r_d_min, self.r_d_max),
                c: (self.c_min, self.c_max),
                period_s: (self.period_min_s, self.period_max_s),
            },
            q0: self.q0,
            systole_fraction: self.systole_fraction,
            sample_rate_hz: self.sample_rate_hz,
            noise_std: self.noise_std,
            seed: self.seed,
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            latent_dim: self.latent_dim,
            f_comp_hidden: self.f_comp_hidden,
            decoder_hidden: self.decoder_hidden,
            ode_steps: self.ode_steps,
            seed: self.seed,
            ..ModelConfig::default()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            adam_beta1: self.adam_beta1,
            adam_beta2: self.adam_beta2,
            adam_eps: self.adam_eps,
            clip_norm: self.clip_norm,
            seed: self.seed,
            early_stop_patience: self.early_stop_patience,
        }
    }

    pub fn fractions(&self) -> (f64, f64, f64) {
        (self.train_fraction, self.val_fraction, self.test_fraction)
    }

    pub fn split_mode(&self) -> Option<SplitMode> {
        match self.split_mode {
            SplitChoice::Beat => Some(SplitMode::Beat),
            SplitChoice::Subject => Some(SplitMode::Subject),
            SplitChoice::All => None,
        }
    }

    pub fn records_dir(&self) -> PathBuf {
        self.out.join("records")
    }

    pub fn beats_path(&self) -> PathBuf {
        self.out.join("beats.csv")
    }

    pub fn checkpoint_path(&self, kind: ModelKind) -> PathBuf {
        self.out.join(format!("{kind}.ckpt.json"))
    }

    pub fn write_resolved(&self) -> Result<()> {
        fs::create_dir_all(&self.out)?;
        let text = toml::to_string(self).context("serializing resolved config")?;
        fs::write(self.out.join(RESOLVED_FILE), text)?;
        Ok(())
    }
}
