use serde::{Deserialize, Serialize};

use super::{Beat, BeatLabel, BeatMatrix};
use crate::{Error, Result};

const MIN_STD: f64 = 1e-8;

/// Per-channel z-score statistics fitted on the training split. Index 0 is
/// PPG / SBP, index 1 is ECG / DBP.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: [f64; 2],
    pub std: [f64; 2],
    pub label_mean: [f64; 2],
    pub label_std: [f64; 2],
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Population mean and standard deviation of each input channel over every
/// sample of every training beat, and of each label.
pub fn fit_norm_stats(train: &[Beat]) -> Result<NormStats> {
    if train.is_empty() {
        return Err(Error::EmptyInput("training set for normalization".into()));
    }
    let chan = |c: usize| train.iter().flat_map(move |b| b.matrix.rows().iter().map(move |r| r[c]));
    let (m0, s0) = mean_std(chan(0));
    let (m1, s1) = mean_std(chan(1));
    let (lm0, ls0) = mean_std(train.iter().map(|b| b.label.sbp_mmhg));
    let (lm1, ls1) = mean_std(train.iter().map(|b| b.label.dbp_mmhg));
    for (name, s) in [("ppg", s0), ("ecg", s1), ("sbp", ls0), ("dbp", ls1)] {
        if !(s > MIN_STD) {
            return Err(Error::DegenerateChannel(name));
        }
    }
    Ok(NormStats {
        mean: [m0, m1],
        std: [s0, s1],
        label_mean: [lm0, lm1],
        label_std: [ls0, ls1],
    })
}

pub fn apply_norm(beat: &BeatMatrix, stats: &NormStats) -> BeatMatrix {
    beat.map_rows(|r| {
        [
            (r[0] - stats.mean[0]) / stats.std[0],
            (r[1] - stats.mean[1]) / stats.std[1],
        ]
    })
}

/// `(sbp, dbp)` in label z-score units.
pub fn normalize_label(label: &BeatLabel, stats: &NormStats) -> [f64; 2] {
    [
        (label.sbp_mmhg - stats.label_mean[0]) / stats.label_std[0],
        (label.dbp_mmhg - stats.label_mean[1]) / stats.label_std[1],
    ]
}

/// Maps a normalized `(sbp, dbp)` prediction back to mmHg.
pub fn invert_label_norm(pred: [f64; 2], stats: &NormStats) -> BeatLabel {
    BeatLabel {
        sbp_mmhg: pred[0] * stats.label_std[0] + stats.label_mean[0],
        dbp_mmhg: pred[1] * stats.label_std[1] + stats.label_mean[1],
    }
}
