use crate::{AdError, NodeId, Result, Tape};

/// Classic fixed-step RK4 over `t_span`, recorded on the tape so gradients
/// flow through every stage of every step.
///
/// `rhs` must build the autonomous vector field `f(z)` from tape ops. After
/// each step the state is checked for NaN/infinity and integration aborts
/// with the offending step index.
pub fn rk4_integrate<F>(
    tape: &mut Tape,
    mut rhs: F,
    z0: NodeId,
    t_span: (f64, f64),
    n_steps: usize,
) -> Result<NodeId>
where
    F: FnMut(&mut Tape, NodeId) -> Result<NodeId>,
{
    if n_steps == 0 {
        return Err(AdError::InvalidArgument("rk4 needs n_steps >= 1".into()));
    }
    let h = (t_span.1 - t_span.0) / n_steps as f64;
    let mut z = z0;
    for step in 0..n_steps {
        let k1 = rhs(tape, z)?;
        let a1 = tape.scale(k1, 0.5 * h);
        let z2 = tape.add(z, a1)?;
        let k2 = rhs(tape, z2)?;
        let a2 = tape.scale(k2, 0.5 * h);
        let z3 = tape.add(z, a2)?;
        let k3 = rhs(tape, z3)?;
        let a3 = tape.scale(k3, h);
        let z4 = tape.add(z, a3)?;
        let k4 = rhs(tape, z4)?;

        let k2x2 = tape.scale(k2, 2.0);
        let k3x2 = tape.scale(k3, 2.0);
        let s12 = tape.add(k1, k2x2)?;
        let s34 = tape.add(k3x2, k4)?;
        let s = tape.add(s12, s34)?;
        let incr = tape.scale(s, h / 6.0);
        z = tape.add(z, incr)?;

        if !tape.value(z).is_finite() {
            return Err(AdError::NonFinite {
                op: "rk4",
                context: format!("step {step}"),
            });
        }
    }
    Ok(z)
}

/// One RK4 step of `y' = f(t, y)` on plain vectors, without recording.
pub fn rk4_step_plain<F>(f: &mut F, t: f64, y: &mut [f64], h: f64, work: &mut Rk4Plain)
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    work.resize(n);
    let Rk4Plain { k1, k2, k3, k4, tmp } = work;
    f(t, y, k1);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    f(t + 0.5 * h, tmp, k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    f(t + 0.5 * h, tmp, k3);
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    f(t + h, tmp, k4);
    for i in 0..n {
        y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Scratch buffers for [`rk4_step_plain`].
#[derive(Clone, Debug, Default)]
pub struct Rk4Plain {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Plain {
    pub fn new(n: usize) -> Self {
        let mut w = Self::default();
        w.resize(n);
        w
    }

    fn resize(&mut self, n: usize) {
        for v in [&mut self.k1, &mut self.k2, &mut self.k3, &mut self.k4, &mut self.tmp] {
            v.resize(n, 0.0);
        }
    }
}
