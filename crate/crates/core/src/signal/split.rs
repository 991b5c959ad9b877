use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{fit_norm_stats, Beat, NormStats};
use crate::{Error, Result};

/// Whether the partition is drawn over individual beats or over source
/// records (all beats of a record land in the same split).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SplitMode {
    #[default]
    Beat,
    Subject,
}

/// Disjoint train / validation / test beats with normalization fitted on the
/// training part only.
#[derive(Clone, Debug)]
pub struct DatasetSplit {
    pub train: Vec<Beat>,
    pub val: Vec<Beat>,
    pub test: Vec<Beat>,
    pub norm: NormStats,
}

pub fn split_dataset(beats: Vec<Beat>, fractions: (f64, f64, f64), seed: u64) -> Result<DatasetSplit> {
    split_dataset_by(beats, fractions, seed, SplitMode::Beat)
}

/// Seeded shuffle, then `floor(n * val)` and `floor(n * test)` units go to
/// validation and test and the remainder to training.
pub fn split_dataset_by(
    beats: Vec<Beat>,
    fractions: (f64, f64, f64),
    seed: u64,
    mode: SplitMode,
) -> Result<DatasetSplit> {
    let (ft, fv, fs) = fractions;
    if !(ft > 0.0 && fv > 0.0 && fs > 0.0) || ((ft + fv + fs) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "split fractions must be positive and sum to 1, got {fractions:?}"
        )));
    }
    if beats.len() < 3 {
        return Err(Error::TooFewBeats(format!("{} beats, need at least 3", beats.len())));
    }

    // Units are groups of beat indices; one beat per unit in beat mode.
    let units: Vec<Vec<usize>> = match mode {
        SplitMode::Beat => (0..beats.len()).map(|i| vec![i]).collect(),
        SplitMode::Subject => {
            let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, b) in beats.iter().enumerate() {
                groups.entry(b.matrix.source_record.as_str()).or_default().push(i);
            }
            groups.into_values().collect()
        }
    };
    let n = units.len();
    let n_val = (n as f64 * fv + 1e-9).floor() as usize;
    let n_test = (n as f64 * fs + 1e-9).floor() as usize;
    if n_val == 0 || n_test == 0 || n_val + n_test >= n {
        return Err(Error::TooFewBeats(format!(
            "{n} units cannot fill train/val/test with fractions {fractions:?}"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut slots: Vec<Option<Beat>> = beats.into_iter().map(Some).collect();
    let mut take = |range: &[usize]| -> Vec<Beat> {
        range
            .iter()
            .flat_map(|&u| units[u].iter())
            .map(|&i| slots[i].take().expect("each beat assigned once"))
            .collect()
    };
    let val = take(&order[..n_val]);
    let test = take(&order[n_val..n_val + n_test]);
    let train = take(&order[n_val + n_test..]);
    let norm = fit_norm_stats(&train)?;
    Ok(DatasetSplit {
        train,
        val,
        test,
        norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{BeatLabel, BeatMatrix};

    fn beats(n: usize) -> Vec<Beat> {
        (0..n)
            .map(|i| {
                let ppg: Vec<f64> = (0..75).map(|t| ((t + i) as f64 * 0.1).sin()).collect();
                let ecg: Vec<f64> = (0..75).map(|t| ((t * i) as f64 * 0.01).cos()).collect();
                Beat {
                    matrix: BeatMatrix::new(&ppg, &ecg, format!("r{}", i % 5), i, 0.8).unwrap(),
                    label: BeatLabel {
                        sbp_mmhg: 100.0 + i as f64,
                        dbp_mmhg: 60.0 + (i % 7) as f64,
                    },
                }
            })
            .collect()
    }

    #[test]
    fn ten_beats_eight_one_one() {
        let s = split_dataset(beats(10), (0.8, 0.1, 0.1), 7).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (8, 1, 1));
    }

    #[test]
    fn deterministic() {
        let a = split_dataset(beats(30), (0.6, 0.2, 0.2), 3).unwrap();
        let b = split_dataset(beats(30), (0.6, 0.2, 0.2), 3).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.val, b.val);
        assert_eq!(a.test, b.test);
        assert_eq!(a.norm, b.norm);
    }

    #[test]
    fn partition_is_exhaustive_multiset() {
        let input = beats(100);
        let s = split_dataset(input.clone(), (0.7, 0.15, 0.15), 11).unwrap();
        let mut got: Vec<usize> = s
            .train
            .iter()
            .chain(&s.val)
            .chain(&s.test)
            .map(|b| b.matrix.onset_index)
            .collect();
        got.sort();
        assert_eq!(got, (0..100).collect::<Vec<_>>());
        assert_eq!(s.train.len() + s.val.len() + s.test.len(), input.len());
    }

    #[test]
    fn too_few_beats() {
        assert!(matches!(
            split_dataset(beats(2), (0.8, 0.1, 0.1), 1),
            Err(Error::TooFewBeats(_))
        ));
        assert!(matches!(
            split_dataset(beats(5), (0.8, 0.1, 0.1), 1),
            Err(Error::TooFewBeats(_))
        ));
    }

    #[test]
    fn bad_fractions() {
        assert!(split_dataset(beats(10), (0.8, 0.1, 0.2), 1).is_err());
        assert!(split_dataset(beats(10), (1.0, 0.0, 0.0), 1).is_err());
    }

    #[test]
    fn subject_mode_keeps_records_together() {
        let s = split_dataset_by(beats(50), (0.6, 0.2, 0.2), 5, SplitMode::Subject).unwrap();
        let ids = |v: &Vec<Beat>| {
            v.iter()
                .map(|b| b.matrix.source_record.clone())
                .collect::<std::collections::BTreeSet<_>>()
        };
        let (tr, va, te) = (ids(&s.train), ids(&s.val), ids(&s.test));
        assert!(tr.is_disjoint(&va) && tr.is_disjoint(&te) && va.is_disjoint(&te));
        assert_eq!(tr.len() + va.len() + te.len(), 5);
    }

    #[test]
    fn normalization_ignores_held_out_beats() {
        let input = beats(40);
        let clean = split_dataset(input.clone(), (0.5, 0.25, 0.25), 9).unwrap();
        let held_out: std::collections::HashSet<usize> = clean
            .val
            .iter()
            .chain(&clean.test)
            .map(|b| b.matrix.onset_index)
            .collect();
        let poisoned: Vec<Beat> = input
            .into_iter()
            .map(|mut b| {
                if held_out.contains(&b.matrix.onset_index) {
                    b.label.sbp_mmhg = f64::NAN;
                    b.label.dbp_mmhg = f64::NAN;
                }
                b
            })
            .collect();
        let p = split_dataset(poisoned, (0.5, 0.25, 0.25), 9).unwrap();
        assert_eq!(p.norm, clean.norm);
    }
}
