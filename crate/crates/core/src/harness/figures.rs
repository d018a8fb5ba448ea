//! Built-in reproductions of the characterization figures.
//!
//! Every figure writes plain CSV into an output directory and returns the
//! numbers the checks need, so the same code backs the CLI, the tests and
//! the acceptance suite.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::protocol::{extract_time_constant, ProtocolConfig, ProtocolResult};
use crate::error::{Error, Result};
use crate::model::{fusi_drift, fusi_on_pre, stp_trace, FusiParams, FusiState, LearnGate, StpParams};
use crate::presyn::LeakModel;
use crate::synapse::{WeightEntry, WeightRam};
use crate::system::{Chip, ChipConfig, Signal, SpikeEvent};
use crate::time::Timebase;

pub const FIGURES: [&str; 6] = ["fig7-top", "fig7-bottom", "fig8", "fig10", "fig11", "fig12"];

/// Conditions shared by all figures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FigureOptions {
    /// Die temperature; `None` uses the figure's own setting.
    pub temperature: Option<f64>,
    pub leak: LeakModel,
    pub mismatch_sigma: f64,
    pub seed: u64,
}

impl Default for FigureOptions {
    fn default() -> Self {
        FigureOptions {
            temperature: None,
            leak: LeakModel::default(),
            mismatch_sigma: 0.01,
            seed: 0,
        }
    }
}

fn write(out_dir: &Path, name: &str, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = out_dir.join(name);
    fs::write(&path, text)?;
    written.push(path);
    Ok(())
}

/// Runs one named figure and writes its CSV files into `out_dir`.
pub fn run_figure(name: &str, opts: &FigureOptions, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if !FIGURES.contains(&name) {
        return Err(Error::UnknownFigure(name.to_string()));
    }
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    match name {
        "fig7-top" | "fig7-bottom" => {
            let params = if name == "fig7-top" { fig7_top_params() } else { fig7_bottom_params() };
            let run = stp_figure(&params, opts)?;
            write(out_dir, "amplitudes.csv", &run.amplitudes_csv(), &mut written)?;
            write(out_dir, "trace.csv", &run.trace_csv, &mut written)?;
        }
        "fig8" => {
            let runs = gain_curves(opts)?;
            let mut gain = String::from("setting,time,gain\n");
            let mut fits = String::from("setting,circuit,tau,amplitude,rmse\n");
            for (tau, res) in &runs {
                let label = setting_label(*tau);
                for (t, g) in mean_gain(res) {
                    let _ = writeln!(gain, "{label},{t:.9},{g:.9}");
                }
                for (i, c) in res.circuits.iter().enumerate() {
                    let _ = writeln!(fits, "{label},{i},{:.9},{:.9},{:.9}", c.fit.tau, c.fit.amplitude, c.fit.rmse);
                }
            }
            write(out_dir, "gain.csv", &gain, &mut written)?;
            write(out_dir, "fits.csv", &fits, &mut written)?;
        }
        "fig10" => {
            let base = ProtocolConfig {
                leak: opts.leak,
                mismatch_sigma: opts.mismatch_sigma,
                seed: opts.seed,
                ..ProtocolConfig::default()
            };
            let temps = match opts.temperature {
                Some(t) => vec![t],
                None => FIG10_TEMPERATURES.to_vec(),
            };
            let rows = sweep_temperature(&[0.3, 0.6, f64::INFINITY], &temps, &base)?;
            write(out_dir, "ensemble.csv", &sweep_csv(&rows), &mut written)?;
        }
        "fig11" => {
            let run = fig11(opts)?;
            write(out_dir, "trace.csv", &run.trace_csv(), &mut written)?;
            write(out_dir, "checkpoints.csv", &run.checkpoints_csv(), &mut written)?;
        }
        "fig12" => {
            let run = fig12(opts)?;
            write(out_dir, "trace.csv", &run.trace_csv(), &mut written)?;
            write(out_dir, "checkpoints.csv", &run.checkpoints_csv(), &mut written)?;
        }
        _ => unreachable!(),
    }
    Ok(written)
}

fn setting_label(tau: f64) -> String {
    if tau.is_finite() { format!("{:.0}ms", tau * 1e3) } else { "inf".into() }
}

pub fn fig7_top_params() -> StpParams {
    StpParams {
        utilization: 0.29,
        tau_u: 0.3,
        tau_r: 0.3,
        tau_psc: 0.01,
        alpha: 0.5,
        amplitude: 1.0,
    }
}

pub fn fig7_bottom_params() -> StpParams {
    StpParams {
        utilization: 0.96,
        tau_u: 0.01,
        tau_r: 0.49,
        tau_psc: 0.013,
        alpha: 0.5,
        amplitude: 1.0,
    }
}

const FIG7_SPIKES: usize = 10;
const FIG7_RATE: f64 = 50.0;
const FIG7_ONSET: f64 = 0.02;
const FIG7_DURATION: f64 = 0.4;

/// Circuit amplitudes of a regular train next to the ideal model at the
/// nominal parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct StpFigure {
    /// Model time at which each spike updated the circuit.
    pub spike_times: Vec<f64>,
    pub circuit: Vec<f64>,
    /// Ideal amplitudes with unit output scale.
    pub ideal: Vec<f64>,
    /// Least-squares scale mapping `ideal` onto `circuit`.
    pub scale: f64,
    trace_csv: String,
}

impl StpFigure {
    /// Largest per-spike deviation from the scaled ideal amplitude, relative
    /// to it.
    pub fn max_relative_error(&self) -> f64 {
        self.circuit
            .iter()
            .zip(&self.ideal)
            .map(|(c, i)| ((c - self.scale * i) / (self.scale * i)).abs())
            .fold(0.0, f64::max)
    }

    fn amplitudes_csv(&self) -> String {
        let mut s = String::from("spike,time,circuit,ideal,ideal_scaled\n");
        for (k, ((t, c), i)) in self.spike_times.iter().zip(&self.circuit).zip(&self.ideal).enumerate() {
            let _ = writeln!(s, "{k},{t:.9},{c:.9},{i:.9},{:.9}", self.scale * i);
        }
        s
    }
}

/// Drives one presynaptic row with 10 spikes at 50 Hz.
pub fn stp_figure(params: &StpParams, opts: &FigureOptions) -> Result<StpFigure> {
    let cfg = ChipConfig {
        n_rows: 1,
        n_cols: 1,
        temperature: opts.temperature.unwrap_or(25.0),
        seed: opts.seed,
        mismatch_sigma: opts.mismatch_sigma,
        leak: opts.leak,
        ..ChipConfig::default()
    };
    let mut chip = Chip::new(cfg)?;
    chip.set_row_stp(0, params)?;
    chip.load_weights(WeightRam::filled(1, 1, WeightEntry::new(15, 15, false)?))?;
    let inputs: Vec<SpikeEvent> = (0..FIG7_SPIKES)
        .map(|k| SpikeEvent::input(FIG7_ONSET + k as f64 / FIG7_RATE, 0))
        .collect();
    chip.submit_spikes(&inputs)?;
    chip.record(&[Signal::Psc(0), Signal::Vu(0), Signal::Vr(0)])?;
    chip.run_until(FIG7_DURATION);
    let trace = chip.take_trace();

    let amps = trace.series("amp:0");
    let spike_times: Vec<f64> = amps.iter().map(|a| a.0).collect();
    let circuit: Vec<f64> = amps.iter().map(|a| a.1).collect();
    let ideal_trace = stp_trace(&spike_times, &StpParams { amplitude: 1.0, ..*params })?;
    let ideal = ideal_trace.amplitudes.clone();
    let scale = circuit.iter().zip(&ideal).map(|(c, i)| c * i).sum::<f64>()
        / ideal.iter().map(|i| i * i).sum::<f64>();

    let mut trace_csv = String::from("time,signal,value\n");
    let psc = trace.series("psc:0");
    let vu = trace.series("vu:0");
    let vr = trace.series("vr:0");
    for (((t, p), (_, u)), (_, r)) in psc.iter().zip(&vu).zip(&vr) {
        let _ = writeln!(trace_csv, "{t:.9},psc,{p:.9}");
        let _ = writeln!(trace_csv, "{t:.9},vu,{u:.9}");
        let _ = writeln!(trace_csv, "{t:.9},vr,{r:.9}");
        let _ = writeln!(trace_csv, "{t:.9},ideal_psc,{:.9}", scale * ideal_trace.psc_at(*t));
    }
    Ok(StpFigure { spike_times, circuit, ideal, scale, trace_csv })
}

pub const FIG8_TEMPERATURE: f64 = 40.0;
pub const FIG10_TEMPERATURES: [f64; 5] = [10.0, 20.0, 30.0, 40.0, 50.0];

/// Protocol runs of a single circuit for the 300 ms, 600 ms and
/// leakage-only settings.
pub fn gain_curves(opts: &FigureOptions) -> Result<Vec<(f64, ProtocolResult)>> {
    [0.3, 0.6, f64::INFINITY]
        .into_iter()
        .map(|tau_r| {
            let cfg = ProtocolConfig {
                tau_r,
                temperature: opts.temperature.unwrap_or(FIG8_TEMPERATURE),
                leak: opts.leak,
                mismatch_sigma: opts.mismatch_sigma,
                circuits: 1,
                seed: opts.seed,
                ..ProtocolConfig::default()
            };
            Ok((tau_r, extract_time_constant(&cfg)?))
        })
        .collect()
}

/// Gain time course averaged over the circuits of a protocol run.
pub fn mean_gain(res: &ProtocolResult) -> Vec<(f64, f64)> {
    let n = res.circuits.len() as f64;
    let Some(first) = res.circuits.first() else { return Vec::new() };
    first
        .gain
        .iter()
        .enumerate()
        .map(|(k, &(t, _))| (t, res.circuits.iter().map(|c| c.gain[k].1).sum::<f64>() / n))
        .collect()
}

/// Ensemble statistics of one (setting, temperature) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub tau_set: f64,
    pub temperature: f64,
    pub mean: f64,
    pub std: f64,
    /// Composition of the setting with the modeled leakage.
    pub expected: f64,
    pub taus: Vec<f64>,
}

impl SweepRow {
    /// Mean within 20% of the setting and spread below 15% of the mean.
    /// Always false for the leakage-only setting.
    pub fn within_tolerance(&self) -> bool {
        self.tau_set.is_finite()
            && (self.mean - self.tau_set).abs() <= 0.2 * self.tau_set
            && self.std < 0.15 * self.mean
    }
}

pub fn sweep_temperature(taus: &[f64], temps: &[f64], base: &ProtocolConfig) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(taus.len() * temps.len());
    for &tau_set in taus {
        for &temperature in temps {
            let cfg = ProtocolConfig { tau_r: tau_set, temperature, ..*base };
            let res = extract_time_constant(&cfg)?;
            let (mean, std) = res.mean_std();
            rows.push(SweepRow { tau_set, temperature, mean, std, expected: cfg.expected_tau(), taus: res.taus() });
        }
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("setting,temperature,mean,std,expected,within_tolerance\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{:.1},{:.9},{:.9},{:.9},{}",
            setting_label(r.tau_set),
            r.temperature,
            r.mean,
            r.std,
            r.expected,
            r.within_tolerance()
        );
    }
    s
}

const PACKET_PULSES: usize = 12;
const PACKET_RATE: f64 = 200.0;

/// What the host sets for the single synapse column during one cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Control {
    force_up: bool,
    gate: Option<LearnGate>,
}

const CLOSED: LearnGate = LearnGate { up: false, down: false };

/// Synapse state over time, from the circuit and from the ideal model
/// driven by the same schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningRun {
    pub times: Vec<f64>,
    pub circuit: Vec<f64>,
    pub ideal: Vec<f64>,
    /// Named sample points as `(label, time, x)`.
    pub checkpoints: Vec<(String, f64, f64)>,
}

impl LearningRun {
    pub fn checkpoint(&self, label: &str) -> Option<f64> {
        self.checkpoints.iter().find(|c| c.0 == label).map(|c| c.2)
    }

    fn trace_csv(&self) -> String {
        let mut s = String::from("time,x,x_ideal\n");
        for ((t, x), i) in self.times.iter().zip(&self.circuit).zip(&self.ideal) {
            let _ = writeln!(s, "{t:.9},{x:.9},{i:.9}");
        }
        s
    }

    fn checkpoints_csv(&self) -> String {
        let mut s = String::from("label,time,x,potentiated\n");
        for (label, t, x) in &self.checkpoints {
            let _ = writeln!(s, "{label},{t:.9},{x:.9},{}", *x > 0.5);
        }
        s
    }
}

/// Runs a single synapse through a cycle-by-cycle control schedule.
///
/// `packets` are onset times of 12-pulse 200 Hz trains; `control` maps a
/// model time to the host settings; `checkpoints` are sampled at the end of
/// the cycle reaching them.
fn learning_run(
    opts: &FigureOptions,
    packets: &[f64],
    duration: f64,
    control: impl Fn(f64) -> Control,
    checkpoints: &[(&str, f64)],
) -> Result<LearningRun> {
    let cfg = ChipConfig {
        n_rows: 1,
        n_cols: 1,
        temperature: opts.temperature.unwrap_or(25.0),
        seed: opts.seed,
        mismatch_sigma: opts.mismatch_sigma,
        leak: opts.leak,
        ..ChipConfig::default()
    };
    let tb: Timebase = cfg.timebase;
    let mut chip = Chip::new(cfg)?;
    chip.set_row_stp(0, &fig7_top_params())?;
    let inputs: Vec<SpikeEvent> = packets
        .iter()
        .flat_map(|&t0| (0..PACKET_PULSES).map(move |k| t0 + k as f64 / PACKET_RATE))
        .map(|t| SpikeEvent::input(t, 0))
        .collect();
    let spike_cycles: Vec<u64> = inputs.iter().map(|e| tb.cycle_of_wall_time(e.time) + 1).collect();
    chip.submit_spikes(&inputs)?;

    let dt = tb.cycle_model_seconds();
    let driver = *chip.driver();
    let params = FusiParams {
        a: driver.jump_up(),
        b: driver.jump_down(),
        alpha_drift: driver.alpha_step() / dt,
        beta_drift: driver.beta_step() / dt,
        ..FusiParams::default()
    };
    let mut ideal = FusiState::default();
    let mut run = LearningRun { times: Vec::new(), circuit: Vec::new(), ideal: Vec::new(), checkpoints: Vec::new() };
    let mut pending: Vec<(&str, f64)> = checkpoints.to_vec();
    while chip.model_time() < duration {
        let cycle = chip.cycle();
        let ctl = control(chip.model_time());
        chip.set_force(0, ctl.force_up, !ctl.force_up)?;
        chip.set_learn_gate(0, ctl.gate)?;
        chip.run_cycle();

        let gate = ctl.gate.unwrap_or(LearnGate::OPEN);
        ideal = fusi_drift(ideal, &params, dt);
        if spike_cycles.contains(&cycle) {
            ideal = fusi_on_pre(ideal, &params, ctl.force_up, gate.up, gate.down);
        }
        let t = chip.model_time();
        let x = chip.cell(0, 0).x;
        run.times.push(t);
        run.circuit.push(x);
        run.ideal.push(ideal.x);
        pending.retain(|&(label, at)| {
            if t >= at {
                run.checkpoints.push((label.to_string(), t, x));
                false
            } else {
                true
            }
        });
    }
    Ok(run)
}

/// Forced transition from depressed to potentiated and back: a force-up
/// packet at 50 ms, a force-down packet at 300 ms.
pub fn fig11(opts: &FigureOptions) -> Result<LearningRun> {
    const DOWN_AT: f64 = 0.3;
    learning_run(
        opts,
        &[0.05, DOWN_AT],
        0.55,
        |t| Control { force_up: t < DOWN_AT, gate: None },
        &[("after_up", 0.295), ("end", 0.55)],
    )
}

/// Stop-learning after a partial packet: learning is disabled after 6 pulses
/// of the packet at 50 ms and after 8 pulses of the packet at 600 ms.
pub fn fig12(opts: &FigureOptions) -> Result<LearningRun> {
    let packets = [(0.05, 6usize), (0.6, 8usize)];
    let isi = 1.0 / PACKET_RATE;
    learning_run(
        opts,
        &packets.map(|p| p.0),
        1.2,
        move |t| {
            let closed = packets
                .iter()
                .any(|&(t0, n)| t >= t0 + (n as f64 - 0.5) * isi && t < t0 + PACKET_PULSES as f64 * isi + 0.1);
            Control { force_up: true, gate: closed.then_some(CLOSED) }
        },
        &[("after_6", 0.595), ("after_8", 1.2)],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ideal_opts() -> FigureOptions {
        FigureOptions { leak: LeakModel::disabled(), mismatch_sigma: 0.0, ..FigureOptions::default() }
    }

    #[test]
    fn fig7_shapes() {
        let top = stp_figure(&fig7_top_params(), &ideal_opts()).unwrap();
        assert_eq!(top.circuit.len(), 10);
        let peak = top.circuit.iter().cloned().enumerate().fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        assert!(peak.0 > 0 && peak.0 < 9, "peak at {}", peak.0);
        assert!(top.max_relative_error() < 0.1);
    }

    #[test]
    fn fig7_bottom_depresses_up_to_decay_quantization() {
        // The depression period (31.6 ms) is longer than the 20 ms interval, so
        // each interval sees zero or one decay event of V_R. Once u - R is
        // small this dominates the amplitude.
        let bottom = stp_figure(&fig7_bottom_params(), &ideal_opts()).unwrap();
        assert!(bottom.circuit[..5].windows(2).all(|w| w[1] < w[0]));
        assert!(bottom.circuit[5..].iter().all(|&a| a < bottom.circuit[4]));
        let period = 0.49 * (16.0f64 / 15.0).ln();
        assert!(period > 1.0 / FIG7_RATE);
    }

    #[test]
    fn ideal_learning_matches_model_exactly() {
        let run = fig11(&ideal_opts()).unwrap();
        for (c, i) in run.circuit.iter().zip(&run.ideal) {
            assert!((c - i).abs() < 1e-12, "{c} vs {i}");
        }
        assert_eq!(run.checkpoint("after_up"), Some(1.0));
        assert_eq!(run.checkpoint("end"), Some(0.0));
    }

    #[test]
    fn partial_packets() {
        let run = fig12(&FigureOptions::default()).unwrap();
        assert!(run.checkpoint("after_6").unwrap() < 0.5);
        assert!(run.checkpoint("after_8").unwrap() > 0.5);
    }

    #[test]
    fn unknown_figure() {
        let dir = std::env::temp_dir();
        assert!(matches!(run_figure("fig9", &FigureOptions::default(), &dir), Err(Error::UnknownFigure(_))));
    }
}
