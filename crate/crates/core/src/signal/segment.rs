use super::{
    Beat, BeatLabel, BeatMatrix, RawRecord, BEAT_LEN, LABEL_MAX_MMHG, LABEL_MIN_MMHG, MAX_BEAT_S,
    MIN_BEAT_S,
};
use crate::{Error, Result};

/// Beats kept after the quality gate, plus how many candidates were rejected.
#[derive(Clone, Debug)]
pub struct Segmentation {
    pub beats: Vec<Beat>,
    pub dropped: usize,
}

/// Linear interpolation onto 75 equally spaced points spanning the whole
/// window. The end points are copied exactly.
pub fn resample_75(window: &[f64]) -> Result<Vec<f64>> {
    let n = window.len();
    if n < 2 {
        return Err(Error::WindowTooShort(n));
    }
    let last = BEAT_LEN - 1;
    let span = (n - 1) as f64;
    let mut out = Vec::with_capacity(BEAT_LEN);
    for k in 0..BEAT_LEN {
        let v = if k == 0 {
            window[0]
        } else if k == last {
            window[n - 1]
        } else {
            let pos = k as f64 * span / last as f64;
            let i = (pos.floor() as usize).min(n - 2);
            let frac = pos - i as f64;
            window[i] + frac * (window[i + 1] - window[i])
        };
        out.push(v);
    }
    Ok(out)
}

pub fn passes_quality_gate(beat: &Beat) -> bool {
    let m = &beat.matrix;
    let l = &beat.label;
    m.rows().len() == BEAT_LEN
        && m.is_finite()
        && m.duration_s > MIN_BEAT_S
        && m.duration_s < MAX_BEAT_S
        && l.sbp_mmhg.is_finite()
        && l.dbp_mmhg.is_finite()
        && l.sbp_mmhg > l.dbp_mmhg
        && l.dbp_mmhg >= LABEL_MIN_MMHG
        && l.sbp_mmhg <= LABEL_MAX_MMHG
}

/// Cuts one beat per adjacent peak pair `[p_k, p_{k+1})`, resamples PPG and
/// ECG to 75 steps and labels it with the ABP maximum / minimum of the
/// window. Beats failing the quality gate are dropped and counted.
pub fn segment_beats(record: &RawRecord, peaks: &[usize]) -> Result<Segmentation> {
    if peaks.len() < 2 {
        return Err(Error::NoBeats(format!(
            "record {}: {} peak(s), need 2",
            record.id,
            peaks.len()
        )));
    }
    if peaks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("peaks must be strictly increasing".into()));
    }
    if *peaks.last().unwrap() >= record.len() {
        return Err(Error::InvalidInput(format!(
            "peak index {} beyond record of {} samples",
            peaks.last().unwrap(),
            record.len()
        )));
    }

    let fs = record.sample_rate_hz;
    let mut beats = Vec::with_capacity(peaks.len() - 1);
    let mut dropped = 0;
    for w in peaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let abp = &record.abp[a..b];
        let sbp = abp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let dbp = abp.iter().cloned().fold(f64::INFINITY, f64::min);
        let (ppg, ecg) = match (resample_75(&record.ppg[a..b]), resample_75(&record.ecg[a..b])) {
            (Ok(p), Ok(e)) => (p, e),
            _ => {
                dropped += 1;
                continue;
            }
        };
        let beat = Beat {
            matrix: BeatMatrix::new(&ppg, &ecg, record.id.clone(), a, (b - a) as f64 / fs)?,
            label: BeatLabel {
                sbp_mmhg: sbp,
                dbp_mmhg: dbp,
            },
        };
        if passes_quality_gate(&beat) {
            beats.push(beat);
        } else {
            dropped += 1;
        }
    }
    if beats.is_empty() {
        return Err(Error::NoBeats(format!(
            "record {}: all {dropped} candidate beats failed the quality gate",
            record.id
        )));
    }
    Ok(Segmentation { beats, dropped })
}
