use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use wkode_autodiff::{rk4_step_plain, Rk4Plain};

use crate::{Error, Result};

/// Characteristic impedance `r_p` and peripheral resistance `r_d`
/// (mmHg·s/mL), arterial compliance `c` (mL/mmHg).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Wk3Params {
    pub r_p: f64,
    pub r_d: f64,
    pub c: f64,
}

impl Wk3Params {
    pub fn new(r_p: f64, r_d: f64, c: f64) -> Result<Self> {
        let p = Self { r_p, r_d, c };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("r_p", self.r_p), ("r_d", self.r_d), ("c", self.c)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// Half-sine systolic ejection followed by zero diastolic flow.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InflowProfile {
    /// Peak flow, mL/s.
    pub q0: f64,
    pub systole_fraction: f64,
    pub period_s: f64,
}

impl InflowProfile {
    pub fn new(q0: f64, systole_fraction: f64, period_s: f64) -> Result<Self> {
        let p = Self {
            q0,
            systole_fraction,
            period_s,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q0 >= 0.0 && self.q0.is_finite()) {
            return Err(Error::InvalidInput(format!("q0 must be >= 0, got {}", self.q0)));
        }
        if !(self.systole_fraction > 0.0 && self.systole_fraction < 1.0) {
            return Err(Error::InvalidInput(format!(
                "systole fraction must lie in (0, 1), got {}",
                self.systole_fraction
            )));
        }
        if !(self.period_s > 0.25 && self.period_s < 2.0) {
            return Err(Error::InvalidInput(format!(
                "period must lie in (0.25, 2.0) s, got {}",
                self.period_s
            )));
        }
        Ok(())
    }

    fn systole_s(&self) -> f64 {
        self.systole_fraction * self.period_s
    }

    /// Time since the last beat onset; times within rounding of an onset
    /// map to 0 so the jump in Q' lands on the right side.
    fn phase(&self, t: f64) -> f64 {
        let tau = t.rem_euclid(self.period_s);
        if self.period_s - tau < 1e-9 * self.period_s {
            0.0
        } else {
            tau
        }
    }

    /// Q(t) in mL/s.
    pub fn flow(&self, t: f64) -> f64 {
        let tau = self.phase(t);
        let ts = self.systole_s();
        if tau < ts {
            self.q0 * (PI * tau / ts).sin()
        } else {
            0.0
        }
    }

    /// Analytic dQ/dt.
    pub fn flow_derivative(&self, t: f64) -> f64 {
        let tau = self.phase(t);
        let ts = self.systole_s();
        if tau < ts {
            self.q0 * PI / ts * (PI * tau / ts).cos()
        } else {
            0.0
        }
    }

    /// Time-averaged flow over one period.
    pub fn mean_flow(&self) -> f64 {
        self.q0 * 2.0 / PI * self.systole_fraction
    }
}

/// dP/dt of the three-element Windkessel,
/// `[(1 + r_p/r_d) Q + r_p c Q' - P/r_d] / c`.
pub fn wk3_rhs(p: f64, t: f64, params: &Wk3Params, inflow: &InflowProfile) -> f64 {
    let q = inflow.flow(t);
    let dq = inflow.flow_derivative(t);
    ((1.0 + params.r_p / params.r_d) * q + params.r_p * params.c * dq - p / params.r_d) / params.c
}

/// Sampled pressure with beat bookkeeping.
///
/// `true_sbp[j]` / `true_dbp[j]` are the extremes of beat `j + 1` over the
/// samples `beat_onsets[j + 1] .. beat_onsets[j + 2]` (or the end of the
/// trace for the final beat); beat 0 is the start-up transient.
#[derive(Clone, Debug, PartialEq)]
pub struct PressureTrace {
    pub p: Vec<f64>,
    pub dt_s: f64,
    pub beat_onsets: Vec<usize>,
    pub true_sbp: Vec<f64>,
    pub true_dbp: Vec<f64>,
}

impl PressureTrace {
    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt_s
    }

    /// Sample window of labeled beat `j` (beat `j + 1` of the simulation).
    pub fn beat_window(&self, j: usize) -> std::ops::Range<usize> {
        let start = self.beat_onsets[j + 1];
        let end = self.beat_onsets.get(j + 2).copied().unwrap_or(self.p.len());
        start..end
    }
}

fn check_sim_inputs(params: &Wk3Params, inflow: &InflowProfile, dt_s: f64) -> Result<()> {
    params.validate()?;
    inflow.validate()?;
    if !(dt_s > 0.0 && dt_s <= inflow.period_s / 50.0) {
        return Err(Error::InvalidInput(format!(
            "dt {dt_s} must be positive and at most period/50 = {}",
            inflow.period_s / 50.0
        )));
    }
    Ok(())
}

/// Integrates the Windkessel ODE with fixed-step RK4 at `dt_s` for `n_beats`
/// cardiac cycles, starting from `p0` mmHg at t = 0.
pub fn simulate_pressure(
    params: &Wk3Params,
    inflow: &InflowProfile,
    n_beats: usize,
    dt_s: f64,
    p0: f64,
) -> Result<PressureTrace> {
    check_sim_inputs(params, inflow, dt_s)?;
    if n_beats == 0 {
        return Err(Error::InvalidInput("n_beats must be at least 1".into()));
    }
    let onset = |k: usize| (k as f64 * inflow.period_s / dt_s).round() as usize;
    let n_samples = onset(n_beats);
    let beat_onsets: Vec<usize> = (0..n_beats).map(onset).collect();

    let mut p = Vec::with_capacity(n_samples);
    let mut y = [p0];
    let mut work = Rk4Plain::new(1);
    let mut f = |t: f64, y: &[f64], dy: &mut [f64]| dy[0] = wk3_rhs(y[0], t, params, inflow);
    for i in 0..n_samples {
        if !y[0].is_finite() {
            return Err(Error::NonFinite(format!("pressure at sample {i}")));
        }
        p.push(y[0]);
        rk4_step_plain(&mut f, i as f64 * dt_s, &mut y, dt_s, &mut work);
    }

    let mut trace = PressureTrace {
        p,
        dt_s,
        beat_onsets,
        true_sbp: Vec::new(),
        true_dbp: Vec::new(),
    };
    for j in 0..n_beats.saturating_sub(1) {
        let w = &trace.p[trace.beat_window(j)];
        trace.true_sbp.push(w.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        trace.true_dbp.push(w.iter().cloned().fold(f64::INFINITY, f64::min));
    }
    Ok(trace)
}

/// Initial pressure whose one-period RK4 solution returns to itself, i.e.
/// the start of the periodic steady state. The scheme is affine in `p0`, so
/// two probe integrations determine the fixed point exactly.
pub fn periodic_initial_pressure(params: &Wk3Params, inflow: &InflowProfile, dt_s: f64) -> Result<f64> {
    check_sim_inputs(params, inflow, dt_s)?;
    let steps = (inflow.period_s / dt_s).round() as usize;
    let h = inflow.period_s / steps as f64;
    let run = |p0: f64| {
        let mut y = [p0];
        let mut work = Rk4Plain::new(1);
        let mut f = |t: f64, y: &[f64], dy: &mut [f64]| dy[0] = wk3_rhs(y[0], t, params, inflow);
        for i in 0..steps {
            rk4_step_plain(&mut f, i as f64 * h, &mut y, h, &mut work);
        }
        y[0]
    };
    let b = run(0.0);
    let a = run(1.0) - b;
    let p = b / (1.0 - a);
    if !p.is_finite() {
        return Err(Error::NonFinite("periodic initial pressure".into()));
    }
    Ok(p)
}
