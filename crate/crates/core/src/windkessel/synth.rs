use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::sim::{periodic_initial_pressure, simulate_pressure, InflowProfile, PressureTrace, Wk3Params};
use crate::signal::{write_record, BeatLabel, RawRecord, LABEL_MAX_MMHG, LABEL_MIN_MMHG};
use crate::{Error, Result};

/// Samples kept before the first labeled R-peak, in seconds.
const PRE_ROLL_S: f64 = 0.2;
/// Delay of the PPG surrogate behind ABP, in seconds.
const PPG_DELAY_S: f64 = 0.05;
/// Width of each ECG marker impulse, in seconds.
const ECG_PULSE_S: f64 = 0.008;
const MAX_DRAWS: usize = 1000;

/// Closed intervals the per-subject parameters are drawn from uniformly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRanges {
    pub r_p: (f64, f64),
    pub r_d: (f64, f64),
    pub c: (f64, f64),
    pub period_s: (f64, f64),
}

impl Default for ParamRanges {
    fn default() -> Self {
        Self {
            r_p: (0.02, 0.1),
            r_d: (0.7, 1.5),
            c: (0.8, 2.2),
            period_s: (0.7, 1.1),
        }
    }
}

impl ParamRanges {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("r_p", self.r_p), ("r_d", self.r_d), ("c", self.c)] {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} range [{lo}, {hi}] is not a positive interval")));
            }
        }
        let (lo, hi) = self.period_s;
        if !(lo > 0.25 && lo <= hi && hi < 2.0) {
            return Err(Error::InvalidInput(format!("period range [{lo}, {hi}] must lie in (0.25, 2.0)")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub beats_per_subject: usize,
    pub ranges: ParamRanges,
    pub q0: f64,
    pub systole_fraction: f64,
    pub sample_rate_hz: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_subjects: 20,
            beats_per_subject: 50,
            ranges: ParamRanges::default(),
            q0: 400.0,
            systole_fraction: 0.35,
            sample_rate_hz: 125.0,
            noise_std: 0.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_subjects == 0 || self.beats_per_subject == 0 {
            return Err(Error::InvalidInput("subjects and beats per subject must be at least 1".into()));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidInput(format!("noise_std must be >= 0, got {}", self.noise_std)));
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(Error::InvalidInput(format!("sample rate must be positive, got {}", self.sample_rate_hz)));
        }
        self.ranges.validate()?;
        InflowProfile::new(self.q0, self.systole_fraction, self.ranges.period_s.0)?;
        InflowProfile::new(self.q0, self.systole_fraction, self.ranges.period_s.1)?;
        Ok(())
    }
}

/// Generator-side ground truth for one subject.
#[derive(Clone, Debug, PartialEq)]
pub struct SubjectTruth {
    pub subject: String,
    pub params: Wk3Params,
    pub period_s: f64,
    /// Noise-free labels of the beats the segmenter should recover, in order.
    pub beat_labels: Vec<BeatLabel>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthDataset {
    pub records: Vec<RawRecord>,
    pub truth: Vec<SubjectTruth>,
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// Draws parameters and a grid-aligned period until the steady-state beats
/// all fall inside the physiological label range.
fn draw_subject(rng: &mut ChaCha8Rng, config: &SynthConfig) -> Result<(Wk3Params, f64, PressureTrace)> {
    let fs = config.sample_rate_hz;
    let dt = 1.0 / fs;
    for _ in 0..MAX_DRAWS {
        let params = Wk3Params::new(
            draw(rng, config.ranges.r_p),
            draw(rng, config.ranges.r_d),
            draw(rng, config.ranges.c),
        )?;
        let period_s = (draw(rng, config.ranges.period_s) * fs).round() / fs;
        let inflow = InflowProfile::new(config.q0, config.systole_fraction, period_s)?;
        let p0 = periodic_initial_pressure(&params, &inflow, dt)?;
        let trace = simulate_pressure(&params, &inflow, config.beats_per_subject + 2, dt, p0)?;
        let physiological = trace.true_sbp.iter().zip(&trace.true_dbp).all(|(&s, &d)| {
            s > d && d >= LABEL_MIN_MMHG && s <= LABEL_MAX_MMHG
        });
        if physiological {
            return Ok((params, period_s, trace));
        }
    }
    Err(Error::InvalidInput(format!(
        "no physiological subject in {MAX_DRAWS} draws from {:?} with q0 {}",
        config.ranges, config.q0
    )))
}

/// Simulates `n_subjects` records. Each record starts in periodic steady
/// state and holds exactly `beats_per_subject + 1` ECG markers, so the
/// segmenter yields `beats_per_subject` beats whose sample windows coincide
/// with the generator's.
pub fn synth_dataset(config: &SynthConfig) -> Result<SynthDataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = Normal::new(0.0, config.noise_std).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let fs = config.sample_rate_hz;
    let n_beats = config.beats_per_subject;
    let width = config.n_subjects.to_string().len().max(3);

    let mut records = Vec::with_capacity(config.n_subjects);
    let mut truth = Vec::with_capacity(config.n_subjects);
    for s in 0..config.n_subjects {
        let (params, period_s, trace) = draw_subject(&mut rng, config)?;
        let onsets = &trace.beat_onsets;
        let pre_roll = (PRE_ROLL_S * fs).round() as usize;
        let delay = (PPG_DELAY_S * fs).round() as usize;
        let start = onsets[1]
            .checked_sub(pre_roll)
            .filter(|&s| s >= delay)
            .ok_or_else(|| Error::InvalidInput(format!("sample rate {fs} too low for a {period_s} s period")))?;
        let end = trace.p.len();

        let abp: Vec<f64> = trace.p.iter().map(|&p| p + noise.sample(&mut rng)).collect();
        let src = &abp[start - delay..end - delay];
        let lo = src.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = src.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        let ppg: Vec<f64> = src.iter().map(|&v| (v - lo) / span).collect();

        let pulse = ((ECG_PULSE_S * fs).round() as usize).max(1);
        let mut ecg = vec![0.0; trace.p.len()];
        for &o in &onsets[1..] {
            for v in ecg.iter_mut().skip(o).take(pulse) {
                *v = 1.0;
            }
        }
        let ecg: Vec<f64> = ecg[start..end].iter().map(|&v| v + noise.sample(&mut rng)).collect();

        let id = format!("subject_{s:0width$}");
        let beat_labels = (0..n_beats)
            .map(|j| BeatLabel {
                sbp_mmhg: trace.true_sbp[j],
                dbp_mmhg: trace.true_dbp[j],
            })
            .collect();
        records.push(RawRecord::new(id.clone(), fs, ppg, abp[start..end].to_vec(), ecg)?);
        truth.push(SubjectTruth {
            subject: id,
            params,
            period_s,
            beat_labels,
        });
    }
    Ok(SynthDataset { records, truth })
}

/// Writes `subject,r_p,r_d,c`.
pub fn write_ground_truth(path: &Path, truth: &[SubjectTruth]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["subject", "r_p", "r_d", "c"])?;
    for t in truth {
        w.write_record([
            t.subject.clone(),
            t.params.r_p.to_string(),
            t.params.r_d.to_string(),
            t.params.c.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `<out>/records/<subject>.csv` and `<out>/ground_truth.csv`.
pub fn write_synth(out: &Path, data: &SynthDataset) -> Result<()> {
    let dir = out.join("records");
    fs::create_dir_all(&dir)?;
    for r in &data.records {
        write_record(&dir.join(format!("{}.csv", r.id)), r)?;
    }
    write_ground_truth(&out.join("ground_truth.csv"), &data.truth)
}
