//! Record ingestion, R-peak detection, beat segmentation, normalization and
//! dataset splitting.

mod dataset;
mod norm;
mod peaks;
mod record;
mod segment;
mod split;

pub use dataset::{meta_path, read_beats, write_beats, BEAT_CSV_COLUMNS};
pub use norm::{apply_norm, fit_norm_stats, invert_label_norm, normalize_label, NormStats};
pub use peaks::{detect_r_peaks, detection_function, REFRACTORY_S};
pub use record::{load_records, write_record, RawRecord, DEFAULT_SAMPLE_RATE_HZ};
pub use segment::{passes_quality_gate, resample_75, segment_beats, Segmentation};
pub use split::{split_dataset, split_dataset_by, DatasetSplit, SplitMode};

use crate::{Error, Result};

/// Time steps per beat.
pub const BEAT_LEN: usize = 75;

/// Beats shorter or longer than this (seconds, exclusive) are rejected.
pub const MIN_BEAT_S: f64 = 0.25;
pub const MAX_BEAT_S: f64 = 2.0;

/// Inclusive physiological label range in mmHg.
pub const LABEL_MIN_MMHG: f64 = 50.0;
pub const LABEL_MAX_MMHG: f64 = 220.0;

/// One beat as a 75 x 2 sequence; column 0 is PPG, column 1 is ECG.
#[derive(Clone, Debug, PartialEq)]
pub struct BeatMatrix {
    values: Vec<[f64; 2]>,
    pub source_record: String,
    pub onset_index: usize,
    pub duration_s: f64,
}

impl BeatMatrix {
    pub fn new(
        ppg: &[f64],
        ecg: &[f64],
        source_record: impl Into<String>,
        onset_index: usize,
        duration_s: f64,
    ) -> Result<Self> {
        if ppg.len() != BEAT_LEN || ecg.len() != BEAT_LEN {
            return Err(Error::InvalidInput(format!(
                "beat needs {BEAT_LEN} samples per channel, got {} and {}",
                ppg.len(),
                ecg.len()
            )));
        }
        let values = ppg.iter().zip(ecg).map(|(&p, &e)| [p, e]).collect();
        Ok(Self {
            values,
            source_record: source_record.into(),
            onset_index,
            duration_s,
        })
    }

    pub fn rows(&self) -> &[[f64; 2]] {
        &self.values
    }

    pub fn ppg(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(|r| r[0])
    }

    pub fn ecg(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(|r| r[1])
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|r| r[0].is_finite() && r[1].is_finite())
    }

    pub(crate) fn map_rows(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        Self {
            values: self.values.iter().map(|&r| f(r)).collect(),
            source_record: self.source_record.clone(),
            onset_index: self.onset_index,
            duration_s: self.duration_s,
        }
    }
}

/// Per-beat systolic / diastolic pressure in mmHg.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeatLabel {
    pub sbp_mmhg: f64,
    pub dbp_mmhg: f64,
}

impl BeatLabel {
    pub fn as_array(&self) -> [f64; 2] {
        [self.sbp_mmhg, self.dbp_mmhg]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Beat {
    pub matrix: BeatMatrix,
    pub label: BeatLabel,
}
