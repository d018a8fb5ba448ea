//! Spike-based extraction of the depression time constant.
//!
//! Each presynaptic circuit drives its own neuron through a full-scale
//! weight. Only depression is active (`U = 1`), so the output spike count per
//! probe spike tracks `1 - R`. The depression variable is charged by a short
//! train with non-zero adaptation strength, after which the strength is set
//! to zero and probe spikes follow the relaxation. The deficit of the
//! normalized gain is fitted with a single exponential.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::fit::{fit_exponential, mean_std, FitResult};
use crate::error::{check_positive, invalid, Result};
use crate::model::StpParams;
use crate::neuron::NeuronParams;
use crate::presyn::{LeakModel, STATE_CAPACITANCE};
use crate::synapse::{WeightEntry, WeightRam};
use crate::system::{Chip, ChipConfig, SpikeEvent, MAX_COLS};
use crate::time::{Timebase, DEFAULT_CLOCK_HZ, TICKS_PER_CYCLE};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig {
    /// Nominal depression time constant; `f64::INFINITY` is the leakage-only
    /// setting.
    pub tau_r: f64,
    pub temperature: f64,
    pub leak: LeakModel,
    pub mismatch_sigma: f64,
    /// Number of presynaptic circuits measured in parallel.
    pub circuits: usize,
    pub repetitions: usize,
    /// Spacing of all probe and charging spikes, in seconds.
    pub probe_interval: f64,
    pub baseline_probes: usize,
    pub charge_spikes: usize,
    pub charge_alpha: f64,
    /// Length of the monitored relaxation; by default six expected time
    /// constants, between 1.5 s and 10 s.
    pub relax_duration: Option<f64>,
    /// Charge per cycle at full PSC, in units of the firing threshold.
    pub psc_gain: f64,
    pub tau_psc: f64,
    pub tau_mem: f64,
    /// Seed of the silicon (mismatch) and of the per-repetition phase jitter.
    pub seed: u64,
    pub speedup: u32,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            tau_r: 0.3,
            temperature: 25.0,
            leak: LeakModel::default(),
            mismatch_sigma: 0.01,
            circuits: 16,
            repetitions: 10,
            probe_interval: 0.08,
            baseline_probes: 8,
            charge_spikes: 10,
            charge_alpha: 0.5,
            relax_duration: None,
            psc_gain: 0.2,
            tau_psc: 0.03,
            tau_mem: 10.0,
            seed: 1,
            speedup: 1,
        }
    }
}

impl ProtocolConfig {
    /// Time constant the relaxation is expected to show, leakage included.
    pub fn expected_tau(&self) -> f64 {
        let leak = self
            .leak
            .time_constant(STATE_CAPACITANCE, self.temperature)
            .map_or(0.0, |t| 1.0 / t);
        1.0 / (1.0 / self.tau_r + leak)
    }

    fn relax(&self) -> f64 {
        self.relax_duration.unwrap_or_else(|| {
            let t = 6.0 * self.expected_tau();
            if t.is_finite() { t.clamp(1.5, 10.0) } else { 10.0 }
        })
    }

    fn validate(&self) -> Result<()> {
        if !(1..=MAX_COLS).contains(&self.circuits) {
            return Err(invalid("circuits", format!("{} not in 1..={MAX_COLS}", self.circuits)));
        }
        if self.repetitions == 0 {
            return Err(invalid("repetitions", "must be at least 1"));
        }
        check_positive("probe_interval", self.probe_interval)?;
        check_positive("psc_gain", self.psc_gain)?;
        if self.relax() < 4.0 * self.probe_interval {
            return Err(invalid("relax_duration", "shorter than four probe intervals"));
        }
        Ok(())
    }
}

/// Result for one presynaptic circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitMeasurement {
    pub fit: FitResult,
    /// Quantized and mismatched setting of the circuit, leakage excluded.
    pub achieved_tau: f64,
    /// Repetition-averaged gain per probe, relative to the baseline, against
    /// time since the first charging spike.
    pub gain: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolResult {
    pub circuits: Vec<CircuitMeasurement>,
}

impl ProtocolResult {
    pub fn taus(&self) -> Vec<f64> {
        self.circuits.iter().map(|c| c.fit.tau).collect()
    }

    /// Ensemble mean and standard deviation of the fitted time constants.
    pub fn mean_std(&self) -> (f64, f64) {
        mean_std(&self.taus())
    }
}

fn stp(tau_r: f64, tau_psc: f64, alpha: f64) -> Result<StpParams> {
    StpParams::new(1.0, 0.01, tau_r, tau_psc, alpha, 1.0)
}

/// Runs the full protocol and fits every circuit.
pub fn extract_time_constant(cfg: &ProtocolConfig) -> Result<ProtocolResult> {
    cfg.validate()?;
    let n = cfg.circuits;
    let chip_cfg = ChipConfig {
        timebase: Timebase::new(DEFAULT_CLOCK_HZ, cfg.speedup)?,
        n_rows: n,
        n_cols: n,
        temperature: cfg.temperature,
        seed: cfg.seed,
        mismatch_sigma: cfg.mismatch_sigma,
        leak: cfg.leak,
        neuron: NeuronParams { tau_mem: cfg.tau_mem, ..NeuronParams::default() },
        psc_gain: cfg.psc_gain,
        ..ChipConfig::default()
    };
    let tb = chip_cfg.timebase;
    let period = tb.ticks_for(cfg.probe_interval).div_ceil(TICKS_PER_CYCLE);
    let charge_start = cfg.baseline_probes;
    let relax_start = charge_start + cfg.charge_spikes;
    let relax_probes = (cfg.relax() / (period as f64 * tb.cycle_model_seconds())).ceil() as usize;
    let total = relax_start + relax_probes;
    let probing = stp(cfg.tau_r, cfg.tau_psc, 0.0)?;
    let charging = stp(cfg.tau_r, cfg.tau_psc, cfg.charge_alpha)?;

    let mut diag = WeightRam::new(n, n);
    for i in 0..n {
        diag.set(i, i, WeightEntry::new(15, 15, false)?)?;
    }

    let mut counts = vec![vec![0.0f64; total]; n];
    let mut achieved = vec![0.0; n];
    let mut jitter = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    for _ in 0..cfg.repetitions {
        let mut chip = Chip::new(chip_cfg.clone())?;
        chip.load_weights(diag.clone())?;
        chip.set_all_stp(&probing)?;
        let offset = jitter.random_range(0..period);
        for neuron in 0..n {
            chip.set_membrane(neuron, jitter.random_range(0.0..1.0))?;
        }
        let probe_cycle = |k: usize| offset + k as u64 * period;
        for k in 0..total {
            chip.run_cycles(probe_cycle(k) - chip.cycle());
            let params = if (charge_start..relax_start).contains(&k) { &charging } else { &probing };
            chip.set_all_stp(params)?;
            let t = tb.wall_seconds(probe_cycle(k) * TICKS_PER_CYCLE);
            chip.submit_spikes(&(0..n).map(|r| SpikeEvent::input(t, r)).collect::<Vec<_>>())?;
        }
        chip.run_cycles(probe_cycle(total) - chip.cycle() + 1);
        for &(cycle, neuron) in chip.spike_log() {
            // Probe k takes effect in cycle probe_cycle(k) + 1.
            if let Some(rel) = cycle.checked_sub(offset + 1) {
                let k = (rel / period) as usize;
                if k < total {
                    counts[neuron][k] += 1.0;
                }
            }
        }
        chip.set_all_stp(&probing)?;
        for (r, a) in achieved.iter_mut().enumerate() {
            *a = chip.presyn_config(r).achieved(tb.clock_hz).tau_r;
        }
    }

    let dt = period as f64 * tb.cycle_model_seconds();
    let reps = cfg.repetitions as f64;
    let mut circuits = Vec::with_capacity(n);
    for (r, c) in counts.iter().enumerate() {
        let mean: Vec<f64> = c.iter().map(|v| v / reps).collect();
        let base_from = 1.min(charge_start.saturating_sub(1));
        let baseline = mean_std(&mean[base_from..charge_start.max(1)]).0;
        if !(baseline > 0.0) {
            return Err(invalid("psc_gain", "probe spikes evoke no output spikes"));
        }
        let gain: Vec<(f64, f64)> = mean
            .iter()
            .enumerate()
            .map(|(k, v)| ((k as f64 - charge_start as f64) * dt, v / baseline))
            .collect();
        let last_charge = (relax_start - 1) as f64;
        let deficit: Vec<(f64, f64)> = (relax_start..total)
            .map(|k| ((k as f64 - last_charge) * dt, 1.0 - mean[k] / baseline))
            .collect();
        circuits.push(CircuitMeasurement { fit: fit_exponential(&deficit)?, achieved_tau: achieved[r], gain });
    }
    Ok(ProtocolResult { circuits })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ideal_circuit_recovers_achieved_tau() {
        let cfg = ProtocolConfig {
            leak: LeakModel::disabled(),
            mismatch_sigma: 0.0,
            circuits: 2,
            ..ProtocolConfig::default()
        };
        let res = extract_time_constant(&cfg).unwrap();
        for c in &res.circuits {
            let err = (c.fit.tau - c.achieved_tau).abs() / c.achieved_tau;
            assert!(err < 0.05, "fitted {} vs achieved {}", c.fit.tau, c.achieved_tau);
        }
    }

    #[test]
    fn leakage_only_setting_measures_rc() {
        let leak = LeakModel::with_resistance(13e12, 30.0);
        let cfg = ProtocolConfig {
            tau_r: f64::INFINITY,
            temperature: 30.0,
            leak,
            mismatch_sigma: 0.0,
            circuits: 1,
            repetitions: 3,
            ..ProtocolConfig::default()
        };
        let rc = 13e12 * 75e-15;
        assert!((rc - 0.975f64).abs() < 1e-3);
        let tau = extract_time_constant(&cfg).unwrap().circuits[0].fit.tau;
        assert!((tau - rc).abs() / rc < 0.1, "{tau}");
    }

    #[test]
    fn rejects_bad_setup() {
        let bad = ProtocolConfig { circuits: 0, ..ProtocolConfig::default() };
        assert!(extract_time_constant(&bad).is_err());
        let bad = ProtocolConfig { repetitions: 0, ..ProtocolConfig::default() };
        assert!(extract_time_constant(&bad).is_err());
    }
}
