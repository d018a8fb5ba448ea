//! TOML experiment description and the batch runner behind `run`.
//!
//! All stimulus and output times in experiment files are biological seconds;
//! the runner divides by the speed-up when talking to the chip.
//!
//! ```toml
//! duration = 0.5
//! record = ["psc:0", "vmem:0", "x:0:0"]
//!
//! [chip]
//! speedup = 10
//! temperature = 25.0
//! rows = 4
//! cols = 2
//!
//! [stp]
//! utilization = 0.29
//! tau_u = 0.3
//! tau_r = 0.3
//! tau_psc = 0.01
//! alpha = 0.5
//!
//! [weights]
//! fill = [15, 15, 0]
//!
//! [[stimulus.trains]]
//! row = 0
//! rate = 50.0
//! count = 10
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::io::{format_spikes, parse_spikes, Direction, Signal, SpikeEvent};
use super::{Chip, ChipConfig, Dac};
use crate::error::{Error, Result};
use crate::model::{FusiParams, LearnGate, StpParams};
use crate::neuron::NeuronParams;
use crate::presyn::{LeakModel, PscTransfer};
use crate::synapse::{WeightEntry, WeightRam};
use crate::time::{Timebase, TICKS_PER_CYCLE, TICKS_PER_SLOT};

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Simulated biological time in seconds.
    pub duration: f64,
    /// Signal names as accepted by [`Signal`], recorded once per cycle.
    pub record: Vec<String>,
    pub chip: ChipSection,
    pub leak: LeakSection,
    /// DAC channel overrides.
    pub dac: BTreeMap<String, f64>,
    pub neuron: NeuronSection,
    pub stp: Option<StpSection>,
    pub learning: LearningSection,
    pub weights: WeightsSection,
    pub stimulus: StimulusSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            duration: 1.0,
            record: Vec::new(),
            chip: ChipSection::default(),
            leak: LeakSection::default(),
            dac: BTreeMap::new(),
            neuron: NeuronSection::default(),
            stp: None,
            learning: LearningSection::default(),
            weights: WeightsSection::default(),
            stimulus: StimulusSection::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ChipSection {
    pub clock_hz: f64,
    pub speedup: u32,
    pub rows: usize,
    pub cols: usize,
    pub temperature: f64,
    pub seed: u64,
    pub mismatch_sigma: f64,
    pub psc_gain: f64,
    /// `post` or `pre`.
    pub transfer: String,
}

impl Default for ChipSection {
    fn default() -> Self {
        let c = ChipConfig::default();
        ChipSection {
            clock_hz: c.timebase.clock_hz,
            speedup: c.timebase.speedup,
            rows: c.n_rows,
            cols: c.n_cols,
            temperature: c.temperature,
            seed: c.seed,
            mismatch_sigma: c.mismatch_sigma,
            psc_gain: c.psc_gain,
            transfer: "post".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct LeakSection {
    pub enabled: bool,
    pub r_leak_ref: f64,
    pub temp_ref: f64,
    pub doubling_interval: f64,
}

impl Default for LeakSection {
    fn default() -> Self {
        let l = LeakModel::default();
        LeakSection {
            enabled: l.enabled,
            r_leak_ref: l.r_leak_ref,
            temp_ref: l.temp_ref,
            doubling_interval: l.doubling_interval,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct NeuronSection {
    pub tau_mem: f64,
    pub v_thresh_spike: f64,
    pub theta_v: f64,
    pub v_reset: f64,
    /// Seconds; defaults to one matrix cycle.
    pub refractory: Option<f64>,
}

impl Default for NeuronSection {
    fn default() -> Self {
        let n = NeuronParams::default();
        NeuronSection {
            tau_mem: n.tau_mem,
            v_thresh_spike: n.v_thresh_spike,
            theta_v: n.theta_v,
            v_reset: n.v_reset,
            refractory: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StpSection {
    pub utilization: f64,
    pub tau_u: f64,
    pub tau_r: f64,
    pub tau_psc: f64,
    pub alpha: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct LearningSection {
    pub ca_tau: f64,
    pub ca_quantum: f64,
    pub theta_up: [f64; 2],
    pub theta_down: [f64; 2],
    /// `up` or `down` on every column.
    pub force: Option<String>,
    /// Fixed `[up, down]` learning enables on every column, bypassing the
    /// calcium controller.
    pub gate: Option<[bool; 2]>,
}

impl Default for LearningSection {
    fn default() -> Self {
        let f = FusiParams::default();
        LearningSection {
            ca_tau: f.ca_tau,
            ca_quantum: f.ca_quantum,
            theta_up: [f.theta_up_l, f.theta_up_h],
            theta_down: [f.theta_down_l, f.theta_down_h],
            force: None,
            gate: None,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsSection {
    /// `[ltp, ltd, inhibitory]` written to every entry first.
    pub fill: Option<[u8; 3]>,
    /// RAM image: `.bin` for the packed binary format, anything else text.
    pub file: Option<PathBuf>,
    pub set: Vec<WeightOverride>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct WeightOverride {
    pub row: usize,
    pub col: usize,
    pub ltp: u8,
    pub ltd: u8,
    #[serde(default)]
    pub inhibitory: bool,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct StimulusSection {
    /// Spike file of `in` events, times in biological seconds.
    pub spikes_file: Option<PathBuf>,
    pub trains: Vec<Train>,
}

/// Either explicit `times` or a regular train of `count` spikes at `rate`
/// starting at `start`.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Train {
    pub row: usize,
    #[serde(default)]
    pub times: Vec<f64>,
    pub rate: Option<f64>,
    #[serde(default)]
    pub start: f64,
    #[serde(default)]
    pub count: usize,
}

impl Train {
    pub fn spike_times(&self) -> Result<Vec<f64>> {
        let mut t = self.times.clone();
        if let Some(rate) = self.rate {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(Error::Config(format!("train rate {rate} must be > 0")));
            }
            t.extend((0..self.count).map(|k| self.start + k as f64 / rate));
        }
        Ok(t)
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn chip_config(&self) -> Result<ChipConfig> {
        let c = &self.chip;
        let timebase = Timebase::new(c.clock_hz, c.speedup)?;
        let mut dac = Dac::default();
        for (name, v) in &self.dac {
            dac.set(name, *v)?;
        }
        let transfer = match c.transfer.as_str() {
            "post" => PscTransfer::PostUpdate,
            "pre" => PscTransfer::PreUpdate,
            other => return Err(Error::Config(format!("transfer `{other}` must be post or pre"))),
        };
        let n = &self.neuron;
        let refractory_ticks = match n.refractory {
            None => TICKS_PER_CYCLE,
            Some(s) if s == 0.0 => 0,
            Some(s) if s > 0.0 => timebase.ticks_for(s),
            Some(s) => return Err(Error::Config(format!("refractory {s} must be >= 0"))),
        };
        let l = &self.learning;
        let cfg = ChipConfig {
            timebase,
            n_rows: c.rows,
            n_cols: c.cols,
            temperature: c.temperature,
            seed: c.seed,
            mismatch_sigma: c.mismatch_sigma,
            leak: LeakModel {
                r_leak_ref: self.leak.r_leak_ref,
                temp_ref: self.leak.temp_ref,
                doubling_interval: self.leak.doubling_interval,
                enabled: self.leak.enabled,
            },
            dac,
            presyn: crate::presyn::ScPresynConfig { transfer, ..Default::default() },
            neuron: NeuronParams {
                tau_mem: n.tau_mem,
                v_thresh_spike: n.v_thresh_spike,
                theta_v: n.theta_v,
                v_reset: n.v_reset,
                refractory_ticks,
            },
            learning: FusiParams {
                ca_tau: l.ca_tau,
                ca_quantum: l.ca_quantum,
                theta_up_l: l.theta_up[0],
                theta_up_h: l.theta_up[1],
                theta_down_l: l.theta_down[0],
                theta_down_h: l.theta_down[1],
                ..FusiParams::default()
            },
            psc_gain: c.psc_gain,
            ..ChipConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub cycles: u64,
    pub output_spikes: usize,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Builds a chip from `cfg`, runs it for `cfg.duration` and returns it along
/// with the recorded trace. Relative file paths resolve against `base_dir`.
pub fn simulate(cfg: &ExperimentConfig, base_dir: &Path) -> Result<Chip> {
    if !(cfg.duration > 0.0 && cfg.duration.is_finite()) {
        return Err(Error::Config(format!("duration {} must be > 0", cfg.duration)));
    }
    let chip_cfg = cfg.chip_config()?;
    let (rows, cols) = (chip_cfg.n_rows, chip_cfg.n_cols);
    let speedup = chip_cfg.timebase.speedup as f64;
    let mut chip = Chip::new(chip_cfg)?;

    if let Some(s) = &cfg.stp {
        chip.set_all_stp(&StpParams::new(s.utilization, s.tau_u, s.tau_r, s.tau_psc, s.alpha, s.amplitude)?)?;
    }

    let w = &cfg.weights;
    let mut ram = match w.fill {
        Some([ltp, ltd, inh]) => WeightRam::filled(rows, cols, WeightEntry::new(ltp, ltd, inh != 0)?),
        None => WeightRam::new(rows, cols),
    };
    if let Some(path) = &w.file {
        let path = resolve(base_dir, path);
        ram = if path.extension().is_some_and(|e| e == "bin") {
            WeightRam::from_bytes(rows, cols, &fs::read(&path)?)?
        } else {
            WeightRam::from_text(rows, cols, &fs::read_to_string(&path)?)?
        };
    }
    for o in &w.set {
        ram.set(o.row, o.col, WeightEntry::new(o.ltp, o.ltd, o.inhibitory)?)?;
    }
    chip.load_weights(ram)?;

    let l = &cfg.learning;
    for n in 0..cols {
        match l.force.as_deref() {
            None => {}
            Some("up") => chip.set_force(n, true, false)?,
            Some("down") => chip.set_force(n, false, true)?,
            Some(other) => return Err(Error::Config(format!("force `{other}` must be up or down"))),
        }
        if let Some([up, down]) = l.gate {
            chip.set_learn_gate(n, Some(LearnGate { up, down }))?;
        }
    }

    let mut inputs = Vec::new();
    if let Some(path) = &cfg.stimulus.spikes_file {
        for e in parse_spikes(&fs::read_to_string(resolve(base_dir, path))?)? {
            if e.direction == Direction::In {
                inputs.push(SpikeEvent::input(e.time / speedup, e.id));
            }
        }
    }
    for train in &cfg.stimulus.trains {
        for t in train.spike_times()? {
            inputs.push(SpikeEvent::input(t / speedup, train.row));
        }
    }
    chip.submit_spikes(&inputs)?;

    let signals = cfg.record.iter().map(|s| s.parse::<Signal>()).collect::<Result<Vec<_>>>()?;
    chip.record(&signals)?;
    chip.run_until(cfg.duration);
    Ok(chip)
}

/// Biological time of an output spike logged as `(cycle, neuron)`.
pub fn output_model_time(timebase: &Timebase, cycle: u64, neuron: usize) -> f64 {
    timebase.model_seconds(cycle * TICKS_PER_CYCLE + neuron as u64 * TICKS_PER_SLOT)
}

/// Runs an experiment and writes `trace.csv`, `spikes.txt` and
/// `output_cycles.csv` into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, base_dir: &Path, out_dir: &Path) -> Result<RunSummary> {
    let mut chip = simulate(cfg, base_dir)?;
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("trace.csv"), chip.take_trace().to_csv())?;
    let tb = *chip.timebase();
    let log = chip.spike_log().to_vec();
    let spikes: Vec<SpikeEvent> = log
        .iter()
        .map(|&(cycle, n)| SpikeEvent::output(output_model_time(&tb, cycle, n), n))
        .collect();
    fs::write(out_dir.join("spikes.txt"), format_spikes(&spikes))?;
    let mut cycles = String::from("cycle,neuron\n");
    for (cycle, n) in &log {
        cycles.push_str(&format!("{cycle},{n}\n"));
    }
    fs::write(out_dir.join("output_cycles.csv"), cycles)?;
    Ok(RunSummary { cycles: chip.cycle(), output_spikes: log.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_example() {
        let text = r#"
duration = 0.5
record = ["psc:0", "vmem:0", "x:0:0"]

[chip]
speedup = 10
temperature = 25.0
rows = 4
cols = 2

[stp]
utilization = 0.29
tau_u = 0.3
tau_r = 0.3
tau_psc = 0.01
alpha = 0.5

[weights]
fill = [15, 15, 0]

[[stimulus.trains]]
row = 0
rate = 50.0
count = 10
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.chip.speedup, 10);
        assert_eq!(cfg.stimulus.trains[0].spike_times().unwrap().len(), 10);
        let chip = cfg.chip_config().unwrap();
        assert_eq!((chip.n_rows, chip.n_cols), (4, 2));
    }

    #[test]
    fn infinite_time_constants_and_windows() {
        let text = "[stp]\nutilization = 1.0\ntau_u = 0.01\ntau_r = inf\ntau_psc = 0.01\nalpha = 0.0\n\
                    [learning]\ntheta_up = [-inf, 3.0]\n";
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert!(cfg.stp.as_ref().unwrap().tau_r.is_infinite());
        assert_eq!(cfg.chip_config().unwrap().learning.theta_up_h, 3.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(ExperimentConfig::from_toml("bogus = 1"), Err(Error::Config(_))));
        let mut cfg = ExperimentConfig::default();
        cfg.dac.insert("syn_v_a".into(), 2.0);
        assert!(cfg.chip_config().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.chip.transfer = "sideways".into();
        assert!(cfg.chip_config().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.chip.speedup = 0;
        assert!(cfg.chip_config().is_err());
    }
}
