//! Loss, optimizer, gradient clipping and the training loop.

mod trainer;

use serde::{Deserialize, Serialize};
use wkode_autodiff::{ParamStore, Tensor};

pub use trainer::{train, EpochReport, PreparedSet, StepHooks, TrainState, Trainer};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub clip_norm: f64,
    pub seed: u64,
    /// Epochs without validation improvement before stopping; 0 disables.
    pub early_stop_patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 32,
            lr: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            clip_norm: 1.0,
            seed: 0,
            early_stop_patience: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {b}"));
            }
        }
        if !(self.adam_eps > 0.0 && self.adam_eps.is_finite()) {
            return bad(format!("adam_eps must be positive, got {}", self.adam_eps));
        }
        if !(self.clip_norm > 0.0 && self.clip_norm.is_finite()) {
            return bad(format!("clip_norm must be positive, got {}", self.clip_norm));
        }
        Ok(())
    }
}

/// Mean of squared errors over both outputs and all beats.
pub fn mse_loss(pred: &[[f64; 2]], target: &[[f64; 2]]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions for {} targets",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput("mse of zero beats".into()));
    }
    let mut s = 0.0;
    for (p, t) in pred.iter().zip(target) {
        for k in 0..2 {
            s += (p[k] - t[k]) * (p[k] - t[k]);
        }
    }
    let loss = s / (2 * pred.len()) as f64;
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::NonFinite("loss".into()))
    }
}

/// First and second moment estimates, one tensor per parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub n_skipped_nonfinite: usize,
}

impl AdamState {
    pub fn new(params: &ParamStore) -> Self {
        let zeros: Vec<Vec<f64>> = params.ids().map(|id| vec![0.0; params.value(id).len()]).collect();
        Self {
            t: 0,
            m: zeros.clone(),
            v: zeros,
            n_skipped_nonfinite: 0,
        }
    }

    pub fn matches(&self, params: &ParamStore) -> bool {
        self.m.len() == params.len()
            && self.v.len() == params.len()
            && params
                .ids()
                .all(|id| self.m[id.index()].len() == params.value(id).len() && self.v[id.index()].len() == params.value(id).len())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    /// Non-finite gradient: nothing changed except the skip counter.
    Skipped,
}

/// One bias-corrected Adam update from the gradients held in `params`.
///
/// A NaN or infinite gradient anywhere skips the whole step: values, moments
/// and `t` stay untouched and `n_skipped_nonfinite` is incremented.
pub fn adam_step(params: &mut ParamStore, state: &mut AdamState, tc: &TrainConfig) -> StepOutcome {
    assert!(state.matches(params), "Adam state does not match parameter shapes");
    if !params.grads_finite() {
        state.n_skipped_nonfinite += 1;
        return StepOutcome::Skipped;
    }
    state.t += 1;
    let (b1, b2) = (tc.adam_beta1, tc.adam_beta2);
    let c1 = 1.0 - b1.powf(state.t as f64);
    let c2 = 1.0 - b2.powf(state.t as f64);
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        let (value, grad) = params.value_and_grad_mut(id);
        let m = &mut state.m[id.index()];
        let v = &mut state.v[id.index()];
        for (((x, &g), mi), vi) in value.data_mut().iter_mut().zip(grad.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mi = b1 * *mi + (1.0 - b1) * g;
            *vi = b2 * *vi + (1.0 - b2) * g * g;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *x -= tc.lr * m_hat / (v_hat.sqrt() + tc.adam_eps);
        }
    }
    StepOutcome::Applied
}

/// Rescales all gradients so their global L2 norm is at most `clip_norm`.
/// Returns the norm before clipping.
pub fn clip_gradients(params: &mut ParamStore, clip_norm: f64) -> f64 {
    let norm = params.grad_norm();
    if norm > clip_norm {
        params.scale_grads(clip_norm / norm);
    }
    norm
}

/// Single-tensor convenience wrapper around [`clip_gradients`].
pub fn clip_vector(grad: &[f64], clip_norm: f64) -> Vec<f64> {
    let mut store = ParamStore::new();
    let id = store.insert("g", Tensor::column(vec![0.0; grad.len().max(1)]));
    if !grad.is_empty() {
        store.grad_mut(id).data_mut().copy_from_slice(grad);
    }
    clip_gradients(&mut store, clip_norm);
    store.grad(id).data()[..grad.len()].to_vec()
}
