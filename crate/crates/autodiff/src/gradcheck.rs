use crate::{AdError, NodeId, ParamId, ParamStore, Result, Tape};

/// Options for [`grad_check_with`].
#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    /// Central-difference half step.
    pub eps: f64,
    /// Check at most this many coordinates per parameter tensor, spread
    /// evenly over the tensor. `None` checks every coordinate.
    pub max_coords_per_param: Option<usize>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            max_coords_per_param: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: Option<String>,
    pub worst_index: usize,
    pub coords_checked: usize,
}

/// Compares taped gradients against central finite differences on every
/// coordinate and returns the max relative error
/// `|g_a - g_fd| / max(1e-8, |g_a| + |g_fd|)`.
pub fn grad_check<F>(f: F, params: &ParamStore, eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<NodeId>,
{
    let cfg = GradCheckConfig {
        eps,
        max_coords_per_param: None,
    };
    grad_check_with(f, params, &cfg).map(|r| r.max_rel_error)
}

pub fn grad_check_with<F>(f: F, params: &ParamStore, cfg: &GradCheckConfig) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<NodeId>,
{
    if !(cfg.eps > 0.0) {
        return Err(AdError::InvalidArgument("eps must be positive".into()));
    }
    let mut analytic = params.clone();
    analytic.zero_grads();
    let mut tape = Tape::new();
    let loss = f(&mut tape, &analytic)?;
    tape.backward(loss, &mut analytic)?;

    let eval = |store: &ParamStore| -> Result<f64> {
        let mut t = Tape::new();
        let l = f(&mut t, store)?;
        let v = t.value(l);
        if v.shape() != (1, 1) {
            return Err(AdError::NonScalarLoss(v.shape()));
        }
        Ok(v.item())
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: None,
        worst_index: 0,
        coords_checked: 0,
    };
    let mut probe = params.clone();
    let ids: Vec<ParamId> = params.ids().collect();
    for id in ids {
        let n = params.value(id).len();
        for idx in coordinates(n, cfg.max_coords_per_param) {
            let orig = params.value(id).data()[idx];
            probe.value_mut(id).data_mut()[idx] = orig + cfg.eps;
            let fp = eval(&probe)?;
            probe.value_mut(id).data_mut()[idx] = orig - cfg.eps;
            let fm = eval(&probe)?;
            probe.value_mut(id).data_mut()[idx] = orig;

            let g_fd = (fp - fm) / (2.0 * cfg.eps);
            let g_a = analytic.grad(id).data()[idx];
            let rel = (g_a - g_fd).abs() / (g_a.abs() + g_fd.abs()).max(1e-8);
            report.coords_checked += 1;
            if rel > report.max_rel_error || !rel.is_finite() {
                report.max_rel_error = if rel.is_finite() { rel } else { f64::INFINITY };
                report.worst_param = Some(params.name(id).to_string());
                report.worst_index = idx;
            }
        }
    }
    Ok(report)
}

fn coordinates(n: usize, cap: Option<usize>) -> Vec<usize> {
    match cap {
        Some(k) if k < n => {
            let mut v: Vec<usize> = (0..k).map(|i| i * n / k + (n / k) / 2).collect();
            v.dedup();
            v
        }
        _ => (0..n).collect(),
    }
}
