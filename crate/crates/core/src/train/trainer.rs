use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use wkode_autodiff::{ParamStore, Tape};

use super::{adam_step, clip_gradients, mse_loss, AdamState, StepOutcome, TrainConfig};
use crate::model::{batch_loss, forward_batch, init_weights, HybridModelWeights, ModelConfig, ModelKind};
use crate::signal::{apply_norm, normalize_label, Beat, BeatMatrix, DatasetSplit, NormStats};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Mean global gradient norm before clipping over the applied steps.
    pub grad_norm: f64,
    pub n_skipped_nonfinite: usize,
}

/// Normalized model inputs and targets.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedSet {
    pub inputs: Vec<BeatMatrix>,
    pub targets: Vec<[f64; 2]>,
}

impl PreparedSet {
    pub fn new(beats: &[Beat], norm: &NormStats) -> Self {
        Self {
            inputs: beats.iter().map(|b| apply_norm(&b.matrix, norm)).collect(),
            targets: beats.iter().map(|b| normalize_label(&b.label, norm)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Mean squared error of `weights` on this set, in normalized units.
    pub fn loss(&self, weights: &HybridModelWeights) -> Result<f64> {
        let refs: Vec<&BeatMatrix> = self.inputs.iter().collect();
        let preds: Vec<[f64; 2]> = forward_batch(weights, &refs)?.iter().map(|o| o.pred()).collect();
        mse_loss(&preds, &self.targets)
    }
}

/// Everything needed to continue training exactly where it stopped.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub weights: HybridModelWeights,
    pub best: HybridModelWeights,
    pub best_val: f64,
    pub since_best: usize,
    pub adam: AdamState,
    pub next_epoch: usize,
    pub stopped_early: bool,
    pub reports: Vec<EpochReport>,
}

impl TrainState {
    pub fn fresh(weights: HybridModelWeights) -> Self {
        Self {
            adam: AdamState::new(weights.store()),
            best: weights.clone(),
            weights,
            best_val: f64::INFINITY,
            since_best: 0,
            next_epoch: 0,
            stopped_early: false,
            reports: Vec::new(),
        }
    }
}

type GradHook<'a> = Box<dyn FnMut(usize, usize, &mut ParamStore) + 'a>;
type StepHook<'a> = Box<dyn FnMut(usize, usize, &ParamStore) + 'a>;
type EpochHook<'a> = Box<dyn FnMut(&EpochReport) + 'a>;

/// Optional observers of the training loop. Step hooks receive the epoch and
/// the batch index within it.
#[derive(Default)]
pub struct StepHooks<'a> {
    /// Runs after backpropagation and before clipping; may edit gradients.
    pub on_gradients: Option<GradHook<'a>>,
    /// Runs after every optimizer step, applied or skipped.
    pub after_step: Option<StepHook<'a>>,
    pub on_epoch: Option<EpochHook<'a>>,
}

pub struct Trainer {
    tc: TrainConfig,
    state: TrainState,
}

impl Trainer {
    /// Fresh weights drawn from `mc.seed`.
    pub fn new(kind: ModelKind, mc: &ModelConfig, tc: TrainConfig) -> Result<Self> {
        tc.validate()?;
        let weights = init_weights(kind, mc, mc.seed)?;
        Ok(Self {
            tc,
            state: TrainState::fresh(weights),
        })
    }

    pub fn resume(tc: TrainConfig, state: TrainState) -> Result<Self> {
        tc.validate()?;
        if !state.adam.matches(state.weights.store()) {
            return Err(Error::Checkpoint("optimizer state does not match the weights".into()));
        }
        Ok(Self { tc, state })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.tc
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn into_state(self) -> TrainState {
        self.state
    }

    pub fn is_done(&self) -> bool {
        self.state.stopped_early || self.state.next_epoch >= self.tc.epochs
    }

    /// Shuffle order of epoch `epoch`; depends only on the seed and the
    /// epoch number so resumed runs see the same batches.
    fn order(&self, epoch: usize, n: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.tc.seed);
        rng.set_stream(epoch as u64);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        idx
    }

    pub fn run_epoch(&mut self, train: &PreparedSet, val: &PreparedSet, hooks: &mut StepHooks) -> Result<EpochReport> {
        if train.is_empty() || val.is_empty() {
            return Err(Error::EmptyInput("training and validation sets must be non-empty".into()));
        }
        let epoch = self.state.next_epoch;
        let order = self.order(epoch, train.len());
        let skipped_before = self.state.adam.n_skipped_nonfinite;
        let (mut loss_sum, mut loss_beats, mut norm_sum, mut applied) = (0.0, 0usize, 0.0, 0usize);
        let n_batches = order.len().div_ceil(self.tc.batch_size);

        for (bi, batch) in order.chunks(self.tc.batch_size).enumerate() {
            let beats: Vec<&BeatMatrix> = batch.iter().map(|&i| &train.inputs[i]).collect();
            let targets: Vec<[f64; 2]> = batch.iter().map(|&i| train.targets[i]).collect();
            let mut tape = Tape::new();
            let weights = &mut self.state.weights;
            let loss = match batch_loss(&mut tape, weights, &beats, &targets) {
                Ok(l) => l,
                Err(e) if e.is_nonfinite() => {
                    self.state.adam.n_skipped_nonfinite += 1;
                    if let Some(h) = hooks.after_step.as_mut() {
                        h(epoch, bi, weights.store());
                    }
                    continue;
                }
                Err(e) => return Err(e),
            };
            let loss_value = tape.value(loss).item();
            let store = weights.store_mut();
            store.zero_grads();
            tape.backward(loss, store)?;
            drop(tape);
            if let Some(h) = hooks.on_gradients.as_mut() {
                h(epoch, bi, store);
            }
            let norm = clip_gradients(store, self.tc.clip_norm);
            if adam_step(store, &mut self.state.adam, &self.tc) == StepOutcome::Applied {
                loss_sum += loss_value * batch.len() as f64;
                loss_beats += batch.len();
                norm_sum += norm;
                applied += 1;
            }
            if let Some(h) = hooks.after_step.as_mut() {
                h(epoch, bi, store);
            }
        }

        let skipped = self.state.adam.n_skipped_nonfinite - skipped_before;
        if applied == 0 {
            return Err(Error::AllStepsSkipped {
                epoch,
                skipped: n_batches.max(skipped),
            });
        }
        let val_loss = val.loss(&self.state.weights)?;
        let report = EpochReport {
            epoch,
            train_loss: loss_sum / loss_beats as f64,
            val_loss,
            grad_norm: norm_sum / applied as f64,
            n_skipped_nonfinite: skipped,
        };

        let st = &mut self.state;
        if val_loss < st.best_val {
            st.best_val = val_loss;
            st.best.copy_values_from(&st.weights);
            st.since_best = 0;
        } else {
            st.since_best += 1;
            if self.tc.early_stop_patience > 0 && st.since_best >= self.tc.early_stop_patience {
                st.stopped_early = true;
            }
        }
        st.next_epoch += 1;
        st.reports.push(report.clone());
        if let Some(h) = hooks.on_epoch.as_mut() {
            h(&report);
        }
        Ok(report)
    }

    /// Runs epochs until the configured count or early stopping.
    pub fn fit(&mut self, train: &PreparedSet, val: &PreparedSet, hooks: &mut StepHooks) -> Result<()> {
        while !self.is_done() {
            self.run_epoch(train, val, hooks)?;
        }
        Ok(())
    }

    /// Weights with the lowest validation loss so far; the initial weights
    /// before any epoch has run.
    pub fn best_weights(&self) -> &HybridModelWeights {
        &self.state.best
    }
}

/// Trains `kind` on `split.train`, early-stopping on `split.val`, and returns
/// the best-validation weights with the per-epoch log.
pub fn train(
    kind: ModelKind,
    split: &DatasetSplit,
    tc: &TrainConfig,
    mc: &ModelConfig,
) -> Result<(HybridModelWeights, Vec<EpochReport>)> {
    let mut trainer = Trainer::new(kind, mc, tc.clone())?;
    if tc.epochs > 0 {
        let train_set = PreparedSet::new(&split.train, &split.norm);
        let val_set = PreparedSet::new(&split.val, &split.norm);
        trainer.fit(&train_set, &val_set, &mut StepHooks::default())?;
    }
    let state = trainer.into_state();
    Ok((state.best, state.reports))
}
