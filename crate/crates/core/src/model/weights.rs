use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use wkode_autodiff::{ParamId, ParamStore, Tensor};

use super::{ModelConfig, ModelKind};
use crate::{Error, Result};

/// Initial parameter-head bias: `(ln 0.05, ln 1.0, ln 1.2)`.
pub const HEAD_BIAS_INIT: [f64; 3] = [-2.995_732_273_553_991, 0.0, 0.182_321_556_793_954_6];

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Ids {
    pub lstm_w: ParamId,
    pub lstm_u: ParamId,
    pub lstm_b: ParamId,
    pub head: Option<(ParamId, ParamId)>,
    pub fcomp_w1: ParamId,
    pub fcomp_b1: ParamId,
    pub fcomp_w2: ParamId,
    pub fcomp_b2: ParamId,
    pub dec_w1: ParamId,
    pub dec_b1: ParamId,
    pub dec_w2: ParamId,
    pub dec_b2: ParamId,
}

/// Every trainable tensor of one model.
///
/// The LSTM gate matrices are stored stacked in gate order input, forget,
/// cell candidate, output: `lstm.w` is `4H x 2`, `lstm.u` is `4H x H` and
/// `lstm.b` is `4H x 1`. Biases are column vectors throughout.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridModelWeights {
    kind: ModelKind,
    config: ModelConfig,
    store: ParamStore,
    pub(crate) ids: Ids,
}

/// Tensor names and shapes for `kind` under `config`, in storage order.
pub(crate) fn layout(kind: ModelKind, config: &ModelConfig) -> Vec<(&'static str, (usize, usize))> {
    let h = config.latent_dim;
    let f = config.f_comp_hidden;
    let d = config.decoder_hidden;
    let mut v = vec![
        ("lstm.w", (4 * h, config.in_channels)),
        ("lstm.u", (4 * h, h)),
        ("lstm.b", (4 * h, 1)),
    ];
    if kind.has_head() {
        v.push(("head.w", (3, h)));
        v.push(("head.b", (3, 1)));
    }
    v.extend([
        ("fcomp.w1", (f, h)),
        ("fcomp.b1", (f, 1)),
        ("fcomp.w2", (h, f)),
        ("fcomp.b2", (h, 1)),
        ("dec.w1", (d, config.decoder_input_dim(kind))),
        ("dec.b1", (d, 1)),
        ("dec.w2", (2, d)),
        ("dec.b2", (2, 1)),
    ]);
    v
}

/// Uniform `(-s, s)` with `s = 1/sqrt(fan_in)` for every matrix and the
/// bias of the same layer, forget-gate bias 1.0 and head bias
/// [`HEAD_BIAS_INIT`]. Hybrid and baseline models drawn from the same seed
/// start with identical tensors.
pub fn init_weights(kind: ModelKind, config: &ModelConfig, seed: u64) -> Result<HybridModelWeights> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = config.latent_dim;
    let fan_in = |name: &str| match name {
        "lstm.w" => config.in_channels,
        "lstm.u" | "lstm.b" | "head.w" | "head.b" | "fcomp.w1" | "fcomp.b1" => h,
        "fcomp.w2" | "fcomp.b2" => config.f_comp_hidden,
        "dec.w1" | "dec.b1" => config.decoder_input_dim(ModelKind::Hybrid),
        _ => config.decoder_hidden,
    };
    let mut store = ParamStore::new();
    for (name, (r, c)) in layout(kind, config) {
        let s = 1.0 / (fan_in(name) as f64).sqrt();
        let dist = Uniform::new_inclusive(-s, s);
        let mut data: Vec<f64> = (0..r * c).map(|_| dist.sample(&mut rng)).collect();
        match name {
            "lstm.b" => data[h..2 * h].fill(1.0),
            "head.b" => data.copy_from_slice(&HEAD_BIAS_INIT),
            _ => {}
        }
        store.insert(name, Tensor::from_vec(r, c, data)?);
    }
    HybridModelWeights::from_store(kind, config.clone(), store)
}

impl HybridModelWeights {
    /// Wraps a parameter store after checking every tensor against the
    /// layout implied by `kind` and `config`.
    pub fn from_store(kind: ModelKind, config: ModelConfig, store: ParamStore) -> Result<Self> {
        config.validate()?;
        let expected = layout(kind, &config);
        if store.len() != expected.len() {
            return Err(Error::Checkpoint(format!(
                "{kind} model needs {} tensors, got {}",
                expected.len(),
                store.len()
            )));
        }
        for (name, shape) in &expected {
            let t = store
                .get(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
            if t.shape() != *shape {
                return Err(Error::Checkpoint(format!(
                    "tensor {name} has shape {:?}, expected {shape:?}",
                    t.shape()
                )));
            }
            if !t.is_finite() {
                return Err(Error::NonFinite(format!("tensor {name}")));
            }
        }
        let id = |n: &str| store.id(n).expect("validated above");
        let ids = Ids {
            lstm_w: id("lstm.w"),
            lstm_u: id("lstm.u"),
            lstm_b: id("lstm.b"),
            head: kind.has_head().then(|| (id("head.w"), id("head.b"))),
            fcomp_w1: id("fcomp.w1"),
            fcomp_b1: id("fcomp.b1"),
            fcomp_w2: id("fcomp.w2"),
            fcomp_b2: id("fcomp.b2"),
            dec_w1: id("dec.w1"),
            dec_b1: id("dec.b1"),
            dec_w2: id("dec.w2"),
            dec_b2: id("dec.b2"),
        };
        Ok(Self {
            kind,
            config,
            store,
            ids,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    /// Mutable access for optimizers. Shapes must not change.
    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.store.get(name)
    }

    /// Overwrites a tensor in place, keeping its shape.
    pub fn set_tensor(&mut self, name: &str, value: Tensor) -> Result<()> {
        let id = self
            .store
            .id(name)
            .ok_or_else(|| Error::InvalidInput(format!("no tensor named {name}")))?;
        let dst = self.store.value_mut(id);
        if dst.shape() != value.shape() {
            return Err(Error::InvalidInput(format!(
                "tensor {name} has shape {:?}, got {:?}",
                dst.shape(),
                value.shape()
            )));
        }
        *dst = value;
        Ok(())
    }

    /// Copies all values from `other`, which must share kind and config.
    pub fn copy_values_from(&mut self, other: &HybridModelWeights) {
        assert_eq!((self.kind, &self.config), (other.kind, &other.config));
        for id in other.store.ids() {
            self.store.value_mut(id).data_mut().copy_from_slice(other.store.value(id).data());
        }
    }

    pub fn num_scalars(&self) -> usize {
        self.store.num_scalars()
    }
}
