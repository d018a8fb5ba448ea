//! Leaky integrate-and-fire neuron fed with per-slot charge packets.

use crate::error::{check_positive, invalid, Result};
use crate::time::{Tick, TICKS_PER_CYCLE};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronParams {
    /// Membrane time constant in biological seconds.
    pub tau_mem: f64,
    pub v_thresh_spike: f64,
    /// Membrane comparator threshold used by the learning rule.
    pub theta_v: f64,
    /// Reset and resting potential.
    pub v_reset: f64,
    pub refractory_ticks: Tick,
}

impl Default for NeuronParams {
    fn default() -> Self {
        NeuronParams {
            tau_mem: 0.02,
            v_thresh_spike: 1.0,
            theta_v: 0.5,
            v_reset: 0.0,
            refractory_ticks: TICKS_PER_CYCLE,
        }
    }
}

impl NeuronParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("tau_mem", self.tau_mem)?;
        if !(self.v_reset < self.theta_v && self.theta_v < self.v_thresh_spike) {
            return Err(invalid(
                "thresholds",
                "need v_reset < theta_v < v_thresh_spike",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronState {
    pub v_mem: f64,
    pub refractory_until: Tick,
}

impl NeuronState {
    pub fn resting(params: &NeuronParams) -> Self {
        NeuronState {
            v_mem: params.v_reset,
            refractory_until: 0,
        }
    }

    /// Leaks over `dt` seconds, then adds `charge` unless refractory at `now`.
    /// Returns whether the neuron fired.
    pub fn integrate(&mut self, params: &NeuronParams, charge: f64, dt: f64, now: Tick) -> bool {
        let rest = params.v_reset;
        let mut v = rest + (self.v_mem - rest) * (-dt / params.tau_mem).exp();
        if now >= self.refractory_until {
            v += charge;
        }
        v = v.max(rest);
        if v >= params.v_thresh_spike {
            self.v_mem = rest;
            self.refractory_until = now + params.refractory_ticks;
            true
        } else {
            self.v_mem = v;
            false
        }
    }

    /// Membrane comparator: strictly above `theta_v`.
    pub fn membrane_elevated(&self, params: &NeuronParams) -> bool {
        self.v_mem > params.theta_v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn slow() -> NeuronParams {
        NeuronParams {
            tau_mem: 0.05,
            v_thresh_spike: 10.0,
            theta_v: 5.0,
            ..NeuronParams::default()
        }
    }

    #[test]
    fn pure_leak() {
        let p = NeuronParams::default();
        let mut n = NeuronState { v_mem: 0.8, refractory_until: 0 };
        assert!(!n.integrate(&p, 0.0, p.tau_mem, 0));
        assert!((n.v_mem - 0.8 / std::f64::consts::E).abs() < 1e-15);
        let mut same = NeuronState { v_mem: 0.8, refractory_until: 0 };
        same.integrate(&p, 0.0, 0.0, 0);
        assert_eq!(same.v_mem, 0.8);
    }

    #[test]
    fn steady_state_of_constant_drive() {
        let p = slow();
        let (q, dt) = (0.01, 0.62e-3);
        let mut n = NeuronState::resting(&p);
        for k in 0..20_000 {
            assert!(!n.integrate(&p, q, dt, k));
        }
        let ss = q / (1.0 - (-dt / p.tau_mem).exp());
        assert!((n.v_mem - ss).abs() / ss < 1e-9);
    }

    #[test]
    fn spike_reset_and_refractory() {
        let p = NeuronParams::default();
        let mut n = NeuronState { v_mem: 0.99, refractory_until: 0 };
        assert!(n.integrate(&p, 0.5, 1e-5, 100));
        assert_eq!(n.v_mem, p.v_reset);
        assert_eq!(n.refractory_until, 100 + TICKS_PER_CYCLE);
        // Charge during refractory is dropped.
        assert!(!n.integrate(&p, 5.0, 1e-5, 101));
        assert_eq!(n.v_mem, p.v_reset);
        assert!(n.integrate(&p, 5.0, 1e-5, 100 + TICKS_PER_CYCLE));
    }

    #[test]
    fn comparator_is_strict() {
        let p = NeuronParams::default();
        assert!(!NeuronState::resting(&p).membrane_elevated(&p));
        let at = NeuronState { v_mem: p.theta_v, refractory_until: 0 };
        assert!(!at.membrane_elevated(&p));
        let above = NeuronState { v_mem: p.theta_v + 1e-9, refractory_until: 0 };
        assert!(above.membrane_elevated(&p));
    }

    #[test]
    fn rejects_bad_thresholds() {
        let p = NeuronParams { theta_v: 2.0, ..NeuronParams::default() };
        assert!(p.validate().is_err());
        assert!(NeuronParams { tau_mem: 0.0, ..NeuronParams::default() }.validate().is_err());
    }

    fn response(amplitude: f64, decay: f64, params: &NeuronParams) -> usize {
        let mut n = NeuronState::resting(params);
        let mut q = amplitude;
        let mut count = 0;
        for k in 0..400u64 {
            if n.integrate(params, q, 0.62e-3, k * TICKS_PER_CYCLE) {
                count += 1;
            }
            q *= decay;
        }
        count
    }

    proptest! {
        #[test]
        fn spike_count_monotone_in_amplitude(decay in 0.9f64..0.999, steps in proptest::collection::vec(0.001f64..0.05, 2..30)) {
            let p = NeuronParams { tau_mem: 10.0, v_thresh_spike: 1.0, theta_v: 0.5, v_reset: 0.0, refractory_ticks: 0 };
            let mut amp = 0.0;
            let mut last = 0;
            for s in steps {
                amp += s;
                let c = response(amp, decay, &p);
                prop_assert!(c >= last, "amp {amp}: {c} < {last}");
                last = c;
            }
        }

        #[test]
        fn never_fires_while_refractory(charges in proptest::collection::vec(0.0f64..3.0, 1..200)) {
            let p = NeuronParams { refractory_ticks: 3 * TICKS_PER_CYCLE, ..NeuronParams::default() };
            let mut n = NeuronState::resting(&p);
            let mut last_spike: Option<u64> = None;
            for (k, q) in charges.into_iter().enumerate() {
                let now = k as u64 * TICKS_PER_CYCLE;
                if n.integrate(&p, q, 0.62e-3, now) {
                    if let Some(ls) = last_spike {
                        prop_assert!(now >= ls + p.refractory_ticks);
                    }
                    last_spike = Some(now);
                }
                prop_assert!(n.v_mem >= p.v_reset && n.v_mem < p.v_thresh_spike);
            }
        }
    }
}
