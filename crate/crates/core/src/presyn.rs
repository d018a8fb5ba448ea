//! Switched-capacitor presynaptic adaptation circuit.
//!
//! Three state capacitors hold `V_U`, `V_R` and `V_PSC`. Each decays by charge
//! sharing with a small discharged capacitor on its own counter-driven period,
//! so the voltage after `k` decay events is exactly `v0 * ratio^k`. A spike
//! updates the state with a fixed number of charge-sharing pulses toward a
//! target voltage; the pulse counts realize `U` and `α`.

use crate::error::{check_positive, invalid, Result};
use crate::model::StpParams;
use crate::time::{Tick, Timebase};

pub const STATE_CAPACITANCE: f64 = 75e-15;
pub const RATIO_CAPACITANCE: f64 = 5e-15;
/// Update pulse counters are 8 bit wide.
pub const MAX_EVENT_COUNT: u32 = 255;

/// Decay period for a time constant when each event scales by `ratio`.
pub fn period_for_tau(tau: f64, ratio: f64) -> Result<f64> {
    check_positive("tau", tau)?;
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(invalid("ratio", format!("{ratio} not in (0, 1)")));
    }
    Ok(-tau * ratio.ln())
}

/// One charge-sharing decay: the state capacitor shares with a discharged one.
#[inline]
pub fn decay_event(v: f64, c_state: f64, c_ratio: f64) -> f64 {
    v * c_state / (c_state + c_ratio)
}

/// Charge sharing with a capacitor precharged to `target`.
#[inline]
fn share_toward(v: f64, target: f64, c_state: f64, c_ratio: f64) -> f64 {
    (c_state * v + c_ratio * target) / (c_state + c_ratio)
}

/// Equivalent parallel off-resistance of the low-leakage switches.
///
/// Leakage doubles every `doubling_interval` degrees above `temp_ref`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeakModel {
    /// Ohms at `temp_ref`.
    pub r_leak_ref: f64,
    /// Degrees Celsius.
    pub temp_ref: f64,
    pub doubling_interval: f64,
    pub enabled: bool,
}

impl Default for LeakModel {
    fn default() -> Self {
        LeakModel {
            r_leak_ref: 45e12,
            temp_ref: 30.0,
            doubling_interval: 10.0,
            enabled: true,
        }
    }
}

impl LeakModel {
    pub fn disabled() -> Self {
        LeakModel {
            enabled: false,
            ..LeakModel::default()
        }
    }

    pub fn with_resistance(r_leak_ref: f64, temp_ref: f64) -> Self {
        LeakModel {
            r_leak_ref,
            temp_ref,
            ..LeakModel::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("r_leak_ref", self.r_leak_ref)?;
        check_positive("doubling_interval", self.doubling_interval)?;
        if !self.temp_ref.is_finite() {
            return Err(invalid("temp_ref", "must be finite"));
        }
        Ok(())
    }

    pub fn resistance(&self, temperature: f64) -> f64 {
        self.r_leak_ref * (-(temperature - self.temp_ref) / self.doubling_interval).exp2()
    }

    /// `R(T)·C` in seconds, or `None` when leakage is switched off.
    pub fn time_constant(&self, capacitance: f64, temperature: f64) -> Option<f64> {
        self.enabled
            .then(|| self.resistance(temperature) * capacitance)
    }
}

/// Order of the PSC transfer relative to the update pulses of a spike.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PscTransfer {
    /// Transfer after both the facilitation and the depression pulses.
    #[default]
    PostUpdate,
    /// Transfer after the facilitation pulses but before the depression pulses,
    /// so `V_R` still holds the value in effect when the spike arrived.
    PreUpdate,
}

/// Per-row configuration of the presynaptic circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScPresynConfig {
    pub c_state: f64,
    pub c_ratio: f64,
    /// Decay periods in clock ticks; `None` is the infinite setting.
    pub decay_period_u: Option<Tick>,
    pub decay_period_r: Option<Tick>,
    pub decay_period_psc: Option<Tick>,
    pub k_u: u32,
    pub k_alpha: u32,
    /// Scaling voltage the facilitation update charges toward.
    pub v_a: f64,
    pub transfer: PscTransfer,
    /// Charge-injection offset added after every update pulse train.
    pub update_offset: f64,
    pub leak: LeakModel,
}

impl Default for ScPresynConfig {
    fn default() -> Self {
        ScPresynConfig {
            c_state: STATE_CAPACITANCE,
            c_ratio: RATIO_CAPACITANCE,
            decay_period_u: None,
            decay_period_r: None,
            decay_period_psc: None,
            k_u: 0,
            k_alpha: 0,
            v_a: 1.0,
            transfer: PscTransfer::PostUpdate,
            update_offset: 0.0,
            leak: LeakModel::default(),
        }
    }
}

impl ScPresynConfig {
    pub fn validate(&self) -> Result<()> {
        check_positive("c_state", self.c_state)?;
        check_positive("c_ratio", self.c_ratio)?;
        for (name, p) in [
            ("decay_period_u", self.decay_period_u),
            ("decay_period_r", self.decay_period_r),
            ("decay_period_psc", self.decay_period_psc),
        ] {
            if p == Some(0) {
                return Err(invalid(name, "period must be at least one tick"));
            }
        }
        if !self.v_a.is_finite() || self.v_a < 0.0 {
            return Err(invalid("v_a", "must be finite and >= 0"));
        }
        self.leak.validate()
    }

    /// Per-event decay factor `C_state / (C_state + C_ratio)`.
    pub fn ratio(&self) -> f64 {
        self.c_state / (self.c_state + self.c_ratio)
    }

    /// Model parameters this configuration realizes.
    pub fn achieved(&self, clock_hz: f64) -> AchievedStp {
        let r = self.ratio();
        let tau = |p: Option<Tick>| match p {
            Some(ticks) => -(ticks as f64 / clock_hz) / r.ln(),
            None => f64::INFINITY,
        };
        let utilization = 1.0 - r.powi(self.k_u as i32);
        let alpha = 1.0 - r.powi(self.k_alpha as i32);
        let amplitude = match self.transfer {
            PscTransfer::PostUpdate => self.v_a * (1.0 - alpha),
            PscTransfer::PreUpdate => self.v_a,
        };
        AchievedStp {
            utilization,
            alpha,
            tau_u: tau(self.decay_period_u),
            tau_r: tau(self.decay_period_r),
            tau_psc: tau(self.decay_period_psc),
            amplitude,
        }
    }
}

/// Parameters actually realized after quantization to pulse counts and
/// clock-cycle periods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AchievedStp {
    pub utilization: f64,
    pub alpha: f64,
    pub tau_u: f64,
    pub tau_r: f64,
    pub tau_psc: f64,
    /// Output scale of `u - R`; includes the `(1 - α)` factor of a post-update
    /// transfer.
    pub amplitude: f64,
}

impl AchievedStp {
    pub fn to_params(&self) -> Result<StpParams> {
        StpParams::new(
            self.utilization,
            self.tau_u,
            self.tau_r,
            self.tau_psc,
            self.alpha,
            self.amplitude,
        )
    }
}

fn event_count(fraction: f64, ratio: f64) -> u32 {
    if fraction <= 0.0 {
        return 0;
    }
    if fraction >= 1.0 {
        return MAX_EVENT_COUNT;
    }
    let k = ((1.0 - fraction).ln() / ratio.ln()).round();
    (k as u32).min(MAX_EVENT_COUNT)
}

/// Maps continuous model parameters onto pulse counts and clock periods.
///
/// `template` supplies capacitances, transfer mode and leakage. `U = 1` or
/// `α = 1` saturate at [`MAX_EVENT_COUNT`]; infinite time constants map to the
/// infinite (no decay) setting.
pub fn quantize_stp_params(
    params: &StpParams,
    template: &ScPresynConfig,
    clock_hz: f64,
) -> Result<(ScPresynConfig, AchievedStp)> {
    params.validate()?;
    template.validate()?;
    check_positive("clock_hz", clock_hz)?;
    let ratio = template.ratio();
    let period = |tau: f64| -> Result<Option<Tick>> {
        if tau.is_infinite() {
            return Ok(None);
        }
        let secs = period_for_tau(tau, ratio)?;
        Ok(Some(((secs * clock_hz).round() as Tick).max(1)))
    };
    let cfg = ScPresynConfig {
        decay_period_u: period(params.tau_u)?,
        decay_period_r: period(params.tau_r)?,
        decay_period_psc: period(params.tau_psc)?,
        k_u: event_count(params.utilization, ratio),
        k_alpha: event_count(params.alpha, ratio),
        v_a: params.amplitude,
        ..*template
    };
    Ok((cfg, cfg.achieved(clock_hz)))
}

/// Capacitor voltages of one presynaptic circuit plus its decay schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScPresynState {
    pub v_u: f64,
    pub v_r: f64,
    pub v_psc: f64,
    pub next_decay_u: Option<Tick>,
    pub next_decay_r: Option<Tick>,
    pub next_decay_psc: Option<Tick>,
    /// Time up to which decays and leakage have been applied.
    pub now: Tick,
}

fn next_multiple(period: Option<Tick>, now: Tick) -> Option<Tick> {
    period.map(|p| (now / p + 1) * p)
}

/// Fires every event of `period` due in `(…, now]`, returning how many.
fn due_events(next: &mut Option<Tick>, period: Option<Tick>, now: Tick) -> u64 {
    match (next.as_mut(), period) {
        (Some(n), Some(p)) if *n <= now => {
            let count = (now - *n) / p + 1;
            *n += count * p;
            count
        }
        _ => 0,
    }
}

impl ScPresynState {
    /// All capacitors discharged; decay counters phase-aligned to tick 0.
    pub fn new(cfg: &ScPresynConfig, now: Tick) -> Self {
        ScPresynState {
            v_u: 0.0,
            v_r: 0.0,
            v_psc: 0.0,
            next_decay_u: next_multiple(cfg.decay_period_u, now),
            next_decay_r: next_multiple(cfg.decay_period_r, now),
            next_decay_psc: next_multiple(cfg.decay_period_psc, now),
            now,
        }
    }

    /// Re-derives the decay schedule after a period register changed.
    pub fn reschedule(&mut self, cfg: &ScPresynConfig) {
        self.next_decay_u = next_multiple(cfg.decay_period_u, self.now);
        self.next_decay_r = next_multiple(cfg.decay_period_r, self.now);
        self.next_decay_psc = next_multiple(cfg.decay_period_psc, self.now);
    }

    /// Advances to `now`, firing all due decay events and applying leakage.
    ///
    /// Decay events and leakage are both pure scalings, so their relative
    /// order within the interval does not matter.
    pub fn tick(&mut self, cfg: &ScPresynConfig, now: Tick, timebase: &Timebase, temperature: f64) {
        if now <= self.now {
            return;
        }
        let (cs, cr) = (cfg.c_state, cfg.c_ratio);
        for _ in 0..due_events(&mut self.next_decay_u, cfg.decay_period_u, now) {
            self.v_u = decay_event(self.v_u, cs, cr);
        }
        for _ in 0..due_events(&mut self.next_decay_r, cfg.decay_period_r, now) {
            self.v_r = decay_event(self.v_r, cs, cr);
        }
        for _ in 0..due_events(&mut self.next_decay_psc, cfg.decay_period_psc, now) {
            self.v_psc = decay_event(self.v_psc, cs, cr);
        }
        if let Some(tau) = cfg.leak.time_constant(cs, temperature) {
            let dt = (now - self.now) as f64 * timebase.wall_seconds_per_tick();
            let f = (-dt / tau).exp();
            self.v_u *= f;
            self.v_r *= f;
            self.v_psc *= f;
        }
        self.now = now;
    }

    /// Update pulse trains of an input spike followed by the PSC transfer.
    pub fn on_spike(&mut self, cfg: &ScPresynConfig) {
        let (cs, cr) = (cfg.c_state, cfg.c_ratio);
        let lim = cfg.v_a.abs();
        for _ in 0..cfg.k_u {
            self.v_u = share_toward(self.v_u, cfg.v_a, cs, cr);
        }
        self.v_u = (self.v_u + cfg.update_offset).clamp(-lim, lim);
        if cfg.transfer == PscTransfer::PreUpdate {
            self.v_psc = self.v_u - self.v_r;
        }
        for _ in 0..cfg.k_alpha {
            self.v_r = share_toward(self.v_r, self.v_u, cs, cr);
        }
        self.v_r = (self.v_r + cfg.update_offset).clamp(-lim, lim);
        if cfg.transfer == PscTransfer::PostUpdate {
            self.v_psc = self.v_u - self.v_r;
        }
    }
}

/// Charge delivered to the neuron by the 4-bit weight capacitor array.
pub fn sample_psc(state: &ScPresynState, weight: u8, inhibitory: bool, unit_gain: f64) -> Result<f64> {
    if weight > 15 {
        return Err(invalid("weight", format!("{weight} exceeds 4 bits")));
    }
    let sign = if inhibitory { -1.0 } else { 1.0 };
    Ok(sign * (weight as f64 / 15.0) * state.v_psc * unit_gain)
}
