//! Ideal (continuous-valued) plasticity models.
//!
//! These are the reference dynamics the switched-capacitor circuits approximate:
//! the iterative facilitation/depression model for presynaptic short-term
//! plasticity, and the bistable stop-learning synapse with its calcium gate.
//! Everything here is a pure function over small value types.

use crate::error::{check_positive, check_range, invalid, Error, Result};

/// Parameters of the iterative short-term plasticity model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StpParams {
    /// Baseline utilization `U`; facilitation decays back to it.
    pub utilization: f64,
    pub tau_u: f64,
    pub tau_r: f64,
    pub tau_psc: f64,
    /// Depression strength `α`.
    pub alpha: f64,
    /// Output scale `A`.
    pub amplitude: f64,
}

impl StpParams {
    pub fn new(
        utilization: f64,
        tau_u: f64,
        tau_r: f64,
        tau_psc: f64,
        alpha: f64,
        amplitude: f64,
    ) -> Result<Self> {
        let p = StpParams {
            utilization,
            tau_u,
            tau_r,
            tau_psc,
            alpha,
            amplitude,
        };
        p.validate()?;
        Ok(p)
    }

    /// Time constants may be `+inf` (no decay) but must be positive.
    pub fn validate(&self) -> Result<()> {
        check_range("utilization", self.utilization, 0.0, 1.0)?;
        check_range("alpha", self.alpha, 0.0, 1.0)?;
        check_positive("tau_u", self.tau_u)?;
        check_positive("tau_r", self.tau_r)?;
        check_positive("tau_psc", self.tau_psc)?;
        check_positive("amplitude", self.amplitude)?;
        if !self.amplitude.is_finite() {
            return Err(invalid("amplitude", "must be finite"));
        }
        Ok(())
    }
}

/// Values of `u` and `R` in effect at the most recent spike.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StpState {
    pub u: f64,
    pub r: f64,
    pub last_spike_time: Option<f64>,
}

impl StpState {
    /// Resting state: `u = U`, `R = 0`, no spike seen yet.
    pub fn resting(params: &StpParams) -> Self {
        StpState {
            u: params.utilization,
            r: 0.0,
            last_spike_time: None,
        }
    }

    /// Spike at absolute time `t`; the first spike sees the resting state.
    pub fn on_spike_at(&self, params: &StpParams, t: f64) -> Result<(StpState, f64)> {
        let dt = match self.last_spike_time {
            Some(prev) if t <= prev => return Err(invalid("t", "spike before previous spike")),
            Some(prev) => t - prev,
            None => f64::INFINITY,
        };
        let (mut next, psc) = stp_on_spike(self, params, dt)?;
        next.last_spike_time = Some(t);
        Ok((next, psc))
    }
}

/// Multiplicative decay applied to `(u - U, R)` over an interval `dt`.
pub fn decay_factors(params: &StpParams, dt: f64) -> (f64, f64) {
    ((-dt / params.tau_u).exp(), (-dt / params.tau_r).exp())
}

/// Advances the model by one presynaptic spike arriving `dt_since_prev` after
/// the previous one, returning the new state and the emitted amplitude
/// `A·(u_n - R_n)`.
///
/// A state that has never spiked is at rest, so `dt_since_prev` is ignored for
/// it and the first amplitude is `A·U`.
pub fn stp_on_spike(
    state: &StpState,
    params: &StpParams,
    dt_since_prev: f64,
) -> Result<(StpState, f64)> {
    params.validate()?;
    if dt_since_prev.is_nan() || dt_since_prev < 0.0 {
        return Err(invalid("dt_since_prev", format!("{dt_since_prev} must be >= 0")));
    }
    let (u, r, last) = match state.last_spike_time {
        None => (params.utilization, 0.0, 0.0),
        Some(prev) => {
            let (eu, er) = decay_factors(params, dt_since_prev);
            let big_u = params.utilization;
            let u = state.u * (1.0 - big_u) * eu + big_u;
            let r = ((1.0 - params.alpha) * state.r + params.alpha * state.u) * er;
            (u, r, prev + dt_since_prev)
        }
    };
    let psc = params.amplitude * (u - r);
    let next = StpState {
        u,
        r,
        last_spike_time: Some(last),
    };
    Ok((next, psc))
}

/// Amplitudes of a spike train plus the continuous PSC trace they produce.
#[derive(Debug, Clone, PartialEq)]
pub struct StpTrace {
    pub spike_times: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub tau_psc: f64,
}

impl StpTrace {
    /// Sum of amplitude-triggered exponentials at time `t`.
    pub fn psc_at(&self, t: f64) -> f64 {
        self.spike_times
            .iter()
            .zip(&self.amplitudes)
            .take_while(|(&ts, _)| ts <= t)
            .map(|(&ts, &a)| a * (-(t - ts) / self.tau_psc).exp())
            .sum()
    }
}

pub fn stp_trace(spike_times: &[f64], params: &StpParams) -> Result<StpTrace> {
    params.validate()?;
    if let Some(i) = spike_times.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::NonMonotonicSpikes { index: i + 1 });
    }
    let mut state = StpState::resting(params);
    let mut amplitudes = Vec::with_capacity(spike_times.len());
    for &t in spike_times {
        let (next, psc) = state.on_spike_at(params, t)?;
        state = next;
        amplitudes.push(psc);
    }
    Ok(StpTrace {
        spike_times: spike_times.to_vec(),
        amplitudes,
        tau_psc: params.tau_psc,
    })
}

/// Parameters of the bistable stop-learning synapse and its calcium gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusiParams {
    pub a: f64,
    pub b: f64,
    /// Upward drift rate above `theta_x`, per second.
    pub alpha_drift: f64,
    /// Downward drift rate at or below `theta_x`, per second.
    pub beta_drift: f64,
    pub theta_v: f64,
    pub theta_x: f64,
    pub ca_tau: f64,
    /// Calcium increment per postsynaptic spike.
    pub ca_quantum: f64,
    pub theta_up_l: f64,
    pub theta_up_h: f64,
    pub theta_down_l: f64,
    pub theta_down_h: f64,
}

impl Default for FusiParams {
    fn default() -> Self {
        FusiParams {
            a: 0.07,
            b: 0.07,
            alpha_drift: 1.0,
            beta_drift: 1.0,
            theta_v: 0.5,
            theta_x: 0.5,
            ca_tau: 0.1,
            ca_quantum: 1.0,
            theta_up_l: f64::NEG_INFINITY,
            theta_up_h: f64::INFINITY,
            theta_down_l: f64::NEG_INFINITY,
            theta_down_h: f64::INFINITY,
        }
    }
}

impl FusiParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("a", self.a)?;
        check_positive("b", self.b)?;
        check_range("alpha_drift", self.alpha_drift, 0.0, f64::INFINITY)?;
        check_range("beta_drift", self.beta_drift, 0.0, f64::INFINITY)?;
        if !(self.theta_x > 0.0 && self.theta_x < 1.0) {
            return Err(invalid("theta_x", "must lie in (0, 1)"));
        }
        check_positive("ca_tau", self.ca_tau)?;
        check_range("ca_quantum", self.ca_quantum, 0.0, f64::INFINITY)?;
        if !(self.theta_up_l < self.theta_up_h) {
            return Err(invalid("theta_up", "low threshold must be below high"));
        }
        if !(self.theta_down_l < self.theta_down_h) {
            return Err(invalid("theta_down", "low threshold must be below high"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FusiState {
    pub x: f64,
    pub calcium: f64,
}

impl FusiState {
    /// Binary efficacy: potentiated iff `x > theta_x`.
    pub fn potentiated(&self, params: &FusiParams) -> bool {
        self.x > params.theta_x
    }
}

/// Learning enables derived from the calcium windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LearnGate {
    pub up: bool,
    pub down: bool,
}

impl LearnGate {
    pub const OPEN: LearnGate = LearnGate { up: true, down: true };
}

/// Hebbian jump on a presynaptic spike.
pub fn fusi_on_pre(
    state: FusiState,
    params: &FusiParams,
    v_mem_elevated: bool,
    up_enabled: bool,
    down_enabled: bool,
) -> FusiState {
    let x = if v_mem_elevated && up_enabled {
        state.x + params.a
    } else if !v_mem_elevated && down_enabled {
        state.x - params.b
    } else {
        state.x
    };
    FusiState {
        x: x.clamp(0.0, 1.0),
        ..state
    }
}

/// Bistable drift over `dt`. The branch is chosen by `x` at the start of the
/// interval and held for the whole interval.
pub fn fusi_drift(state: FusiState, params: &FusiParams, dt: f64) -> FusiState {
    let x = if state.x > params.theta_x {
        state.x + params.alpha_drift * dt
    } else {
        state.x - params.beta_drift * dt
    };
    FusiState {
        x: x.clamp(0.0, 1.0),
        ..state
    }
}

/// First-order low-pass of the postsynaptic spike train, thresholded into
/// the up/down learning enables.
pub fn calcium_filter(calcium: f64, params: &FusiParams, post_spiked: bool, dt: f64) -> (f64, LearnGate) {
    let mut c = calcium * (-dt / params.ca_tau).exp();
    if post_spiked {
        c += params.ca_quantum;
    }
    let gate = LearnGate {
        up: params.theta_up_l < c && c < params.theta_up_h,
        down: params.theta_down_l < c && c < params.theta_down_h,
    };
    (c, gate)
}

pub fn calcium_step(
    state: FusiState,
    params: &FusiParams,
    post_spiked: bool,
    dt: f64,
) -> (FusiState, LearnGate) {
    let (calcium, gate) = calcium_filter(state.calcium, params, post_spiked, dt);
    (FusiState { calcium, ..state }, gate)
}
