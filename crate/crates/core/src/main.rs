use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sc_neuro::harness::figures::{sweep_csv, FIGURES};
use sc_neuro::harness::{extract_time_constant, run_figure, sweep_temperature, FigureOptions, ProtocolConfig};
use sc_neuro::presyn::LeakModel;
use sc_neuro::system::config::{run_experiment, ExperimentConfig};
use sc_neuro::{Error, Result};

#[derive(Parser)]
#[command(name = "sc-neuro", version, about = "Switched-capacitor neuromorphic system simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract the depression time constant with the spike-based protocol.
    FitTau {
        /// Setting in milliseconds, or `inf` for the leakage-only setting.
        #[arg(long)]
        tau: String,
        /// Die temperature in degrees Celsius.
        #[arg(long, default_value_t = 25.0)]
        temp: f64,
        #[arg(long)]
        leak_off: bool,
        #[arg(long)]
        mismatch_off: bool,
        #[arg(long, default_value_t = 16)]
        circuits: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Reproduce a figure as CSV files.
    Figure {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(FIGURES))]
        name: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        temp: Option<f64>,
        #[arg(long)]
        leak_off: bool,
        #[arg(long)]
        mismatch_off: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Ensemble time constants over a grid of settings and temperatures.
    SweepTemp {
        /// Comma-separated settings in milliseconds; `inf` is allowed.
        #[arg(long, default_value = "300,600")]
        taus: String,
        /// Comma-separated temperatures or a range `lo..hi`.
        #[arg(long, default_value = "10..50")]
        temps: String,
        /// Step of a temperature range.
        #[arg(long, default_value_t = 10.0)]
        step: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_tau(s: &str) -> Result<f64> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("inf") {
        return Ok(f64::INFINITY);
    }
    match s.parse::<f64>() {
        Ok(ms) if ms > 0.0 => Ok(ms * 1e-3),
        _ => Err(Error::Config(format!("bad time constant `{s}`"))),
    }
}

fn parse_temps(s: &str, step: f64) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("bad temperature list `{s}`"));
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
        if !(step > 0.0) || hi < lo {
            return Err(bad());
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| lo + i as f64 * step).collect());
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
}

fn leak(off: bool) -> LeakModel {
    if off { LeakModel::disabled() } else { LeakModel::default() }
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let base = config.parent().unwrap_or(Path::new("."));
            let summary = run_experiment(&cfg, base, &out)?;
            println!("{} cycles, {} output spikes -> {}", summary.cycles, summary.output_spikes, out.display());
        }
        Command::FitTau { tau, temp, leak_off, mismatch_off, circuits, seed } => {
            let cfg = ProtocolConfig {
                tau_r: parse_tau(&tau)?,
                temperature: temp,
                leak: leak(leak_off),
                mismatch_sigma: if mismatch_off { 0.0 } else { 0.01 },
                circuits,
                seed,
                ..ProtocolConfig::default()
            };
            let res = extract_time_constant(&cfg)?;
            println!("circuit,tau_s,achieved_s,amplitude,rmse");
            for (i, c) in res.circuits.iter().enumerate() {
                println!("{i},{:.6},{:.6},{:.6},{:.6}", c.fit.tau, c.achieved_tau, c.fit.amplitude, c.fit.rmse);
            }
            let (mean, std) = res.mean_std();
            println!("# mean {mean:.6} s, std {std:.6} s, expected {:.6} s", cfg.expected_tau());
        }
        Command::Figure { name, out, temp, leak_off, mismatch_off, seed } => {
            let opts = FigureOptions {
                temperature: temp,
                leak: leak(leak_off),
                mismatch_sigma: if mismatch_off { 0.0 } else { 0.01 },
                seed,
            };
            for path in run_figure(&name, &opts, &out)? {
                println!("{}", path.display());
            }
        }
        Command::SweepTemp { taus, temps, step, seed, out } => {
            let taus = taus.split(',').map(parse_tau).collect::<Result<Vec<_>>>()?;
            let temps = parse_temps(&temps, step)?;
            let base = ProtocolConfig { seed, ..ProtocolConfig::default() };
            let table = sweep_csv(&sweep_temperature(&taus, &temps, &base)?);
            match out {
                Some(path) => std::fs::write(path, table)?,
                None => print!("{table}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
