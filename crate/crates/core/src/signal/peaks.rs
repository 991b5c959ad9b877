use std::collections::VecDeque;

use crate::{Error, Result};

/// Minimum spacing between accepted R-peaks, seconds.
pub const REFRACTORY_S: f64 = 0.25;
const SMOOTHING_S: f64 = 0.12;
const THRESHOLD_WINDOW_S: f64 = 2.0;
const THRESHOLD_FRACTION: f64 = 0.5;
/// Samples below this fraction of the global detection maximum never count.
const NOISE_FLOOR_FRACTION: f64 = 1e-3;
/// Candidates weaker than this fraction of the median candidate are dropped.
const MEDIAN_STRENGTH_FRACTION: f64 = 0.2;

/// Squared central-difference energy smoothed by a centered moving average
/// of 0.12 s (rounded to an odd sample count).
pub fn detection_function(ecg: &[f64], sample_rate_hz: f64) -> Vec<f64> {
    let n = ecg.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let energy: Vec<f64> = (0..n)
        .map(|i| {
            let d = if i == 0 {
                ecg[1] - ecg[0]
            } else if i == n - 1 {
                ecg[n - 1] - ecg[n - 2]
            } else {
                0.5 * (ecg[i + 1] - ecg[i - 1])
            };
            d * d
        })
        .collect();

    let mut width = (SMOOTHING_S * sample_rate_hz).round().max(1.0) as usize;
    if width % 2 == 0 {
        width += 1;
    }
    let half = width / 2;
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + energy[i];
    }
    // Fixed divisor keeps the response shape-invariant near the edges.
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / width as f64
        })
        .collect()
}

/// Max of `x[i - half ..= i + half]` (clipped to the slice) for every `i`.
fn centered_rolling_max(x: &[f64], half: usize) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(n);
    let mut dq: VecDeque<usize> = VecDeque::new();
    let mut next = 0;
    for i in 0..n {
        let hi = (i + half).min(n - 1);
        while next <= hi {
            while dq.back().is_some_and(|&j| x[j] <= x[next]) {
                dq.pop_back();
            }
            dq.push_back(next);
            next += 1;
        }
        let lo = i.saturating_sub(half);
        while dq.front().is_some_and(|&j| j < lo) {
            dq.pop_front();
        }
        out.push(x[*dq.front().expect("window is never empty")]);
    }
    out
}

/// Locates R-peaks in an ECG trace.
///
/// The smoothed derivative energy is compared against half of its rolling
/// two-second maximum. Each contiguous supra-threshold region is one QRS
/// candidate, and the R-peak is the ECG maximum inside it. Candidates closer
/// than the refractory period keep only the one with the stronger detection
/// response.
pub fn detect_r_peaks(ecg: &[f64], sample_rate_hz: f64) -> Result<Vec<usize>> {
    if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "sample rate must be positive, got {sample_rate_hz}"
        )));
    }
    if (ecg.len() as f64) < sample_rate_hz {
        return Err(Error::InvalidInput(format!(
            "ECG of {} samples is shorter than one second",
            ecg.len()
        )));
    }
    if ecg.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ECG samples".into()));
    }

    let det = detection_function(ecg, sample_rate_hz);
    let global_max = det.iter().cloned().fold(0.0, f64::max);
    if !(global_max > 0.0) {
        return Err(Error::NoBeats("flat ECG".into()));
    }
    let floor = NOISE_FLOOR_FRACTION * global_max;
    let half = (0.5 * THRESHOLD_WINDOW_S * sample_rate_hz).round() as usize;
    let rolling = centered_rolling_max(&det, half);

    let above = |i: usize| det[i] > floor && det[i] >= THRESHOLD_FRACTION * rolling[i];
    let min_gap = REFRACTORY_S * sample_rate_hz;
    let mut peaks: Vec<(usize, f64)> = Vec::new();
    let mut i = 0;
    while i < det.len() {
        if !above(i) {
            i += 1;
            continue;
        }
        let start = i;
        while i < det.len() && above(i) {
            i += 1;
        }
        let region = start..i;
        let strength = det[region.clone()].iter().cloned().fold(0.0, f64::max);
        let mut peak = start;
        for j in region {
            if ecg[j] > ecg[peak] {
                peak = j;
            }
        }
        match peaks.last_mut() {
            Some(last) if ((peak - last.0) as f64) < min_gap => {
                if strength > last.1 {
                    *last = (peak, strength);
                }
            }
            _ => peaks.push((peak, strength)),
        }
    }

    let mut strengths: Vec<f64> = peaks.iter().map(|p| p.1).collect();
    strengths.sort_by(f64::total_cmp);
    if let Some(&median) = strengths.get(strengths.len() / 2) {
        peaks.retain(|p| p.1 >= MEDIAN_STRENGTH_FRACTION * median);
    }

    if peaks.len() < 2 {
        return Err(Error::NoBeats(format!("found {} R-peak(s)", peaks.len())));
    }
    Ok(peaks.into_iter().map(|p| p.0).collect())
}
