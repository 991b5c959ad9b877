//! Versioned JSON checkpoints: weights with their configuration, the
//! normalization statistics and, optionally, the full training state.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use wkode_autodiff::{ParamStore, Tensor};

use crate::model::{HybridModelWeights, ModelConfig, ModelKind};
use crate::signal::NormStats;
use crate::train::{AdamState, EpochReport, TrainConfig, TrainState};
use crate::{Error, Result};

pub const FORMAT: &str = "wkode-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    shape: [usize; 2],
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TrainRecord {
    train_config: TrainConfig,
    next_epoch: usize,
    /// `None` before the first epoch (infinite).
    best_val: Option<f64>,
    since_best: usize,
    stopped_early: bool,
    adam: AdamState,
    best: Vec<TensorRecord>,
    reports: Vec<EpochReport>,
}

#[derive(Serialize, Deserialize)]
struct FileRecord {
    format: String,
    version: u32,
    kind: ModelKind,
    model_config: ModelConfig,
    norm: Option<NormStats>,
    tensors: Vec<TensorRecord>,
    train: Option<TrainRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub weights: HybridModelWeights,
    pub norm: Option<NormStats>,
    pub train: Option<(TrainConfig, TrainState)>,
}

fn records(w: &HybridModelWeights) -> Vec<TensorRecord> {
    let s = w.store();
    s.ids()
        .map(|id| {
            let t = s.value(id);
            TensorRecord {
                name: s.name(id).to_string(),
                shape: [t.rows(), t.cols()],
                values: t.data().to_vec(),
            }
        })
        .collect()
}

fn weights_from(kind: ModelKind, config: &ModelConfig, tensors: Vec<TensorRecord>) -> Result<HybridModelWeights> {
    let mut store = ParamStore::new();
    for t in tensors {
        if store.id(&t.name).is_some() {
            return Err(Error::Checkpoint(format!("duplicate tensor {}", t.name)));
        }
        let value = Tensor::from_vec(t.shape[0], t.shape[1], t.values)
            .map_err(|e| Error::Checkpoint(format!("tensor {}: {e}", t.name)))?;
        store.insert(t.name, value);
    }
    HybridModelWeights::from_store(kind, config.clone(), store)
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let w = &ckpt.weights;
    let train = ckpt.train.as_ref().map(|(tc, st)| TrainRecord {
        train_config: tc.clone(),
        next_epoch: st.next_epoch,
        best_val: st.best_val.is_finite().then_some(st.best_val),
        since_best: st.since_best,
        stopped_early: st.stopped_early,
        adam: st.adam.clone(),
        best: records(&st.best),
        reports: st.reports.clone(),
    });
    let file = FileRecord {
        format: FORMAT.to_string(),
        version: VERSION,
        kind: w.kind(),
        model_config: w.config().clone(),
        norm: ckpt.norm,
        tensors: records(w),
        train,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, serde_json::to_vec(&file)?)?;
    Ok(())
}

/// Loads and validates every tensor shape against the stored model config.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path)?;
    let file: FileRecord = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    if file.format != FORMAT {
        return Err(Error::Checkpoint(format!("{}: not a {FORMAT} file", path.display())));
    }
    if file.version != VERSION {
        return Err(Error::Checkpoint(format!(
            "{}: version {} unsupported (expected {VERSION})",
            path.display(),
            file.version
        )));
    }
    let weights = weights_from(file.kind, &file.model_config, file.tensors)?;
    let train = match file.train {
        Some(t) => {
            let best = weights_from(file.kind, &file.model_config, t.best)?;
            if best.store().ids().map(|id| best.store().name(id)).ne(weights.store().ids().map(|id| weights.store().name(id))) {
                return Err(Error::Checkpoint("best weights are stored in a different order".into()));
            }
            if !t.adam.matches(weights.store()) {
                return Err(Error::Checkpoint("optimizer moments do not match the weights".into()));
            }
            let state = TrainState {
                weights: weights.clone(),
                best,
                best_val: t.best_val.unwrap_or(f64::INFINITY),
                since_best: t.since_best,
                adam: t.adam,
                next_epoch: t.next_epoch,
                stopped_early: t.stopped_early,
                reports: t.reports,
            };
            Some((t.train_config, state))
        }
        None => None,
    };
    Ok(Checkpoint {
        weights,
        norm: file.norm,
        train,
    })
}
