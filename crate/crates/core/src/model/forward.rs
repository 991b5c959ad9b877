use wkode_autodiff::{rk4_integrate, AdError, NodeId, Tape, Tensor};

use super::weights::Ids;
use super::{theta_to_params, HybridModelWeights, ModelKind, ModelOutput, ODE_SPAN, THETA_CLAMP};
use crate::signal::BeatMatrix;
use crate::windkessel::Wk3Params;
use crate::{Error, Result};

/// Beats per tape when running inference over many beats.
const INFERENCE_CHUNK: usize = 64;

/// Handles to the interesting nodes of one batched forward pass. Every node
/// has one column per beat.
#[derive(Clone, Copy, Debug)]
pub struct Forward {
    pub z0: NodeId,
    /// Unclamped head output `W z0 + b`, `3 x B`.
    pub theta: Option<NodeId>,
    /// `exp(clamp(theta))` with rows `r_p, r_d, c`.
    pub params: Option<NodeId>,
    pub z_final: NodeId,
    /// `2 x B`: normalized SBP and DBP.
    pub pred: NodeId,
}

fn check(tape: &Tape, id: NodeId, stage: &str) -> Result<()> {
    if tape.value(id).is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(stage.to_string()))
    }
}

fn input_steps(tape: &mut Tape, beats: &[&BeatMatrix], seq_len: usize) -> Result<Vec<NodeId>> {
    let b = beats.len();
    for beat in beats {
        if beat.rows().len() != seq_len {
            return Err(AdError::ShapeMismatch {
                op: "lstm input",
                lhs: (beat.rows().len(), 2),
                rhs: (seq_len, 2),
            }
            .into());
        }
    }
    (0..seq_len)
        .map(|t| {
            let mut data = vec![0.0; 2 * b];
            for (j, beat) in beats.iter().enumerate() {
                let [p, e] = beat.rows()[t];
                data[j] = p;
                data[b + j] = e;
            }
            Ok(tape.constant(Tensor::from_vec(2, b, data)?))
        })
        .collect()
}

fn lstm(tape: &mut Tape, w: &HybridModelWeights, xs: &[NodeId]) -> Result<NodeId> {
    let ids = &w.ids;
    let h_dim = w.config().latent_dim;
    let wx = tape.param(w.store(), ids.lstm_w);
    let u = tape.param(w.store(), ids.lstm_u);
    let bias = tape.param(w.store(), ids.lstm_b);
    let mut state: Option<(NodeId, NodeId)> = None;
    for &x in xs {
        let mut pre = tape.matmul(wx, x)?;
        if let Some((h, _)) = state {
            let rec = tape.matmul(u, h)?;
            pre = tape.add(pre, rec)?;
        }
        let pre = tape.add(pre, bias)?;
        let i = tape.slice(pre, 0, h_dim)?;
        let i = tape.sigmoid(i);
        let g = tape.slice(pre, 2 * h_dim, h_dim)?;
        let g = tape.tanh(g);
        let o = tape.slice(pre, 3 * h_dim, h_dim)?;
        let o = tape.sigmoid(o);
        let ig = tape.mul(i, g)?;
        let c = match state {
            Some((_, c_prev)) => {
                let f = tape.slice(pre, h_dim, h_dim)?;
                let f = tape.sigmoid(f);
                let fc = tape.mul(f, c_prev)?;
                tape.add(fc, ig)?
            }
            None => ig,
        };
        let tc = tape.tanh(c);
        let h = tape.mul(o, tc)?;
        state = Some((h, c));
    }
    let (h, _) = state.ok_or_else(|| Error::InvalidInput("empty input sequence".into()))?;
    check(tape, h, "lstm encoder")?;
    Ok(h)
}

fn dense(tape: &mut Tape, w: &HybridModelWeights, weight: wkode_autodiff::ParamId, bias: wkode_autodiff::ParamId, x: NodeId) -> Result<NodeId> {
    let wn = tape.param(w.store(), weight);
    let bn = tape.param(w.store(), bias);
    let y = tape.matmul(wn, x)?;
    Ok(tape.add(y, bn)?)
}

/// Rows `r_p, r_d, c` of a `3 x B` parameter node, each `1 x B`.
struct Coeffs {
    r_p: NodeId,
    r_d: NodeId,
    c: NodeId,
}

impl Coeffs {
    fn split(tape: &mut Tape, params: NodeId) -> Result<Self> {
        Ok(Self {
            r_p: tape.slice(params, 0, 1)?,
            r_d: tape.slice(params, 1, 1)?,
            c: tape.slice(params, 2, 1)?,
        })
    }
}

/// `(1/c) (-z/r_d - r_p z + f_comp(z))`, evaluated in that order.
fn ode_rhs(tape: &mut Tape, w: &HybridModelWeights, k: &Coeffs, z: NodeId) -> Result<NodeId> {
    let ids: &Ids = &w.ids;
    let hidden = dense(tape, w, ids.fcomp_w1, ids.fcomp_b1, z)?;
    let hidden = tape.tanh(hidden);
    let f = dense(tape, w, ids.fcomp_w2, ids.fcomp_b2, hidden)?;
    let z_over_rd = tape.div(z, k.r_d)?;
    let neg = tape.scale(z_over_rd, -1.0);
    let rpz = tape.mul(k.r_p, z)?;
    let neg_rpz = tape.scale(rpz, -1.0);
    let lin = tape.add(neg, neg_rpz)?;
    let sum = tape.add(lin, f)?;
    Ok(tape.div(sum, k.c)?)
}

/// Records the forward pass of `kind` for a batch of normalized beats.
pub fn build_forward(tape: &mut Tape, w: &HybridModelWeights, kind: ModelKind, beats: &[&BeatMatrix]) -> Result<Forward> {
    if beats.is_empty() {
        return Err(Error::EmptyInput("no beats in batch".into()));
    }
    let cfg = w.config();
    if kind.has_head() != w.kind().has_head() {
        return Err(Error::InvalidInput(format!("{} weights cannot run a {kind} forward pass", w.kind())));
    }
    let xs = input_steps(tape, beats, cfg.seq_len)?;
    let z0 = lstm(tape, w, &xs)?;

    let (theta, params) = match w.ids.head {
        Some((hw, hb)) => {
            let theta = dense(tape, w, hw, hb, z0)?;
            let clamped = tape.clamp(theta, -THETA_CLAMP, THETA_CLAMP);
            let params = tape.exp(clamped);
            check(tape, params, "parameter head")?;
            (Some(theta), Some(params))
        }
        None => (None, None),
    };

    let z_final = match (kind, params) {
        (ModelKind::Hybrid, Some(params)) => {
            let k = Coeffs::split(tape, params)?;
            rk4_integrate(tape, |t, z| ode_rhs(t, w, &k, z).map_err(into_ad), z0, ODE_SPAN, cfg.ode_steps)
                .map_err(|e| match e {
                    AdError::NonFinite { context, .. } => Error::NonFinite(format!("latent ODE {context}")),
                    other => other.into(),
                })?
        }
        _ => z0,
    };

    let dec_in = match params {
        Some(p) => tape.concat(&[z_final, p])?,
        None => z_final,
    };
    let ids = &w.ids;
    let hidden = dense(tape, w, ids.dec_w1, ids.dec_b1, dec_in)?;
    let hidden = tape.tanh(hidden);
    let pred = dense(tape, w, ids.dec_w2, ids.dec_b2, hidden)?;
    check(tape, pred, "decoder")?;
    Ok(Forward {
        z0,
        theta,
        params,
        z_final,
        pred,
    })
}

fn into_ad(e: Error) -> AdError {
    match e {
        Error::Autodiff(a) => a,
        other => AdError::InvalidArgument(other.to_string()),
    }
}

/// Mean squared error between predictions and normalized targets, averaged
/// over both outputs and every beat of the batch.
pub fn batch_loss(tape: &mut Tape, w: &HybridModelWeights, beats: &[&BeatMatrix], targets: &[[f64; 2]]) -> Result<NodeId> {
    if beats.len() != targets.len() {
        return Err(Error::InvalidInput(format!("{} beats but {} targets", beats.len(), targets.len())));
    }
    let fwd = build_forward(tape, w, w.kind(), beats)?;
    let b = beats.len();
    let mut data = vec![0.0; 2 * b];
    for (j, t) in targets.iter().enumerate() {
        data[j] = t[0];
        data[b + j] = t[1];
    }
    let target = tape.constant(Tensor::from_vec(2, b, data)?);
    let loss = tape.mse(fwd.pred, target)?;
    if !tape.value(loss).is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    Ok(loss)
}

fn outputs(tape: &Tape, fwd: &Forward, n: usize) -> Vec<ModelOutput> {
    let pred = tape.value(fwd.pred).data();
    let zf = tape.value(fwd.z_final);
    let params = fwd.params.map(|p| tape.value(p).data());
    (0..n)
        .map(|j| ModelOutput {
            sbp_norm: pred[j],
            dbp_norm: pred[n + j],
            params: params.map(|p| Wk3Params {
                r_p: p[j],
                r_d: p[n + j],
                c: p[2 * n + j],
            }),
            z_final: (0..zf.rows()).map(|r| zf.get(r, j)).collect(),
        })
        .collect()
}

/// Runs `kind` on each beat; beats are batched internally.
fn run(w: &HybridModelWeights, kind: ModelKind, beats: &[&BeatMatrix]) -> Result<Vec<ModelOutput>> {
    let mut out = Vec::with_capacity(beats.len());
    for chunk in beats.chunks(INFERENCE_CHUNK) {
        let mut tape = Tape::new();
        let fwd = build_forward(&mut tape, w, kind, chunk)?;
        out.extend(outputs(&tape, &fwd, chunk.len()));
    }
    Ok(out)
}

/// Predictions of the model's own kind for every beat.
pub fn forward_batch(w: &HybridModelWeights, beats: &[&BeatMatrix]) -> Result<Vec<ModelOutput>> {
    run(w, w.kind(), beats)
}

/// Hybrid forward pass: encoder, head, latent ODE over `[0, 1]`, decoder.
pub fn model_forward(beat: &BeatMatrix, w: &HybridModelWeights) -> Result<ModelOutput> {
    Ok(run(w, ModelKind::Hybrid, &[beat])?.remove(0))
}

/// Hybrid architecture with the ODE skipped, `z_final = z0`.
pub fn baseline_forward(beat: &BeatMatrix, w: &HybridModelWeights) -> Result<ModelOutput> {
    Ok(run(w, ModelKind::Baseline, &[beat])?.remove(0))
}

/// Decoder applied to `z0` alone; requires weights of kind plain.
pub fn plain_forward(beat: &BeatMatrix, w: &HybridModelWeights) -> Result<ModelOutput> {
    Ok(run(w, ModelKind::Plain, &[beat])?.remove(0))
}

/// `theta = W z + b` and the clamped, exponentiated parameters.
pub fn param_head(z: &[f64], w: &HybridModelWeights) -> Result<([f64; 3], Wk3Params)> {
    let (hw, hb) = w
        .ids
        .head
        .ok_or_else(|| Error::InvalidInput("plain model has no parameter head".into()))?;
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("latent state".into()));
    }
    let mut tape = Tape::new();
    let zn = tape.constant(Tensor::column(z.to_vec()));
    let theta = dense(&mut tape, w, hw, hb, zn)?;
    let t = tape.value(theta).data();
    let theta = [t[0], t[1], t[2]];
    Ok((theta, theta_to_params(theta)))
}

/// `dz/dt` of the latent ODE for one state and fixed parameters.
pub fn latent_ode_rhs(z: &[f64], params: &Wk3Params, w: &HybridModelWeights) -> Result<Vec<f64>> {
    params.validate()?;
    if z.len() != w.config().latent_dim {
        return Err(AdError::ShapeMismatch {
            op: "latent_ode_rhs",
            lhs: (z.len(), 1),
            rhs: (w.config().latent_dim, 1),
        }
        .into());
    }
    let mut tape = Tape::new();
    let zn = tape.constant(Tensor::column(z.to_vec()));
    let k = Coeffs {
        r_p: tape.constant(Tensor::scalar(params.r_p)),
        r_d: tape.constant(Tensor::scalar(params.r_d)),
        c: tape.constant(Tensor::scalar(params.c)),
    };
    let dz = ode_rhs(&mut tape, w, &k, zn)?;
    Ok(tape.value(dz).data().to_vec())
}
