//! LSTM encoder, Windkessel parameter head, latent ODE and decoder.
//!
//! Beats are processed in batches laid out as matrix columns: every tensor
//! on the tape is `features x batch`.

mod forward;
mod weights;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use forward::{
    baseline_forward, batch_loss, build_forward, forward_batch, latent_ode_rhs, model_forward,
    param_head, plain_forward, Forward,
};
pub use weights::{init_weights, HybridModelWeights, HEAD_BIAS_INIT};

use crate::windkessel::Wk3Params;
use crate::{Error, Result};

/// Log-parameters are clamped to `[-THETA_CLAMP, THETA_CLAMP]` before `exp`.
pub const THETA_CLAMP: f64 = 6.0;

/// Integration interval of the latent ODE.
pub const ODE_SPAN: (f64, f64) = (0.0, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Encoder, parameter head, latent ODE, decoder on `[z_final, params]`.
    Hybrid,
    /// As hybrid with the ODE skipped (`z_final = z0`).
    Baseline,
    /// Encoder and decoder on `z0` alone; no parameter head.
    Plain,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Hybrid, ModelKind::Baseline, ModelKind::Plain];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Hybrid => "hybrid",
            ModelKind::Baseline => "baseline",
            ModelKind::Plain => "plain",
        }
    }

    pub fn has_head(self) -> bool {
        self != ModelKind::Plain
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown model kind {s:?} (expected hybrid, baseline or plain)")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub seq_len: usize,
    pub in_channels: usize,
    pub latent_dim: usize,
    pub f_comp_hidden: usize,
    pub decoder_hidden: usize,
    pub ode_steps: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            seq_len: crate::signal::BEAT_LEN,
            in_channels: 2,
            latent_dim: 128,
            f_comp_hidden: 128,
            decoder_hidden: 64,
            ode_steps: 8,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("seq_len", self.seq_len),
            ("in_channels", self.in_channels),
            ("latent_dim", self.latent_dim),
            ("f_comp_hidden", self.f_comp_hidden),
            ("decoder_hidden", self.decoder_hidden),
            ("ode_steps", self.ode_steps),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::InvalidInput(format!("{name} must be at least 1")));
            }
        }
        if self.seq_len != crate::signal::BEAT_LEN || self.in_channels != 2 {
            return Err(Error::InvalidInput(format!(
                "beats are {} x 2, config asks for {} x {}",
                crate::signal::BEAT_LEN,
                self.seq_len,
                self.in_channels
            )));
        }
        Ok(())
    }

    /// Width of the decoder input for `kind`.
    pub fn decoder_input_dim(&self, kind: ModelKind) -> usize {
        if kind.has_head() {
            self.latent_dim + 3
        } else {
            self.latent_dim
        }
    }
}

/// Prediction for one beat.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelOutput {
    pub sbp_norm: f64,
    pub dbp_norm: f64,
    /// `None` for [`ModelKind::Plain`], which has no parameter head.
    pub params: Option<Wk3Params>,
    pub z_final: Vec<f64>,
}

impl ModelOutput {
    pub fn pred(&self) -> [f64; 2] {
        [self.sbp_norm, self.dbp_norm]
    }
}

/// Clamped log-parameters to Windkessel parameters.
pub fn theta_to_params(theta: [f64; 3]) -> Wk3Params {
    let p = theta.map(|t| t.clamp(-THETA_CLAMP, THETA_CLAMP).exp());
    Wk3Params {
        r_p: p[0],
        r_d: p[1],
        c: p[2],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_round_trips_through_str() {
        for k in ModelKind::ALL {
            assert_eq!(k.as_str().parse::<ModelKind>().unwrap(), k);
        }
        assert!("ode".parse::<ModelKind>().is_err());
    }

    #[test]
    fn theta_examples() {
        assert_eq!(theta_to_params([0.0; 3]), Wk3Params { r_p: 1.0, r_d: 1.0, c: 1.0 });
        let p = theta_to_params([2f64.ln(), 3f64.ln(), 0.5f64.ln()]);
        assert!((p.r_p - 2.0).abs() < 1e-15 && (p.r_d - 3.0).abs() < 1e-15 && (p.c - 0.5).abs() < 1e-15);
        let p = theta_to_params([100.0, -100.0, 0.0]);
        assert_eq!((p.r_p, p.r_d, p.c), (6f64.exp(), (-6f64).exp(), 1.0));
    }

    #[test]
    fn zero_ode_steps_rejected() {
        let cfg = ModelConfig {
            ode_steps: 0,
            ..ModelConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn decoder_width() {
        let cfg = ModelConfig::default();
        assert_eq!(cfg.decoder_input_dim(ModelKind::Hybrid), 131);
        assert_eq!(cfg.decoder_input_dim(ModelKind::Plain), 128);
    }
}
