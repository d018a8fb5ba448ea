use std::fs;

use proptest::prelude::*;

use sc_neuro::model::StpParams;
use sc_neuro::presyn::LeakModel;
use sc_neuro::synapse::{WeightEntry, WeightRam};
use sc_neuro::system::config::{run_experiment, simulate, ExperimentConfig};
use sc_neuro::system::{Chip, ChipConfig, Signal, SpikeEvent};
use sc_neuro::time::Timebase;

fn chip(speedup: u32) -> Chip {
    let cfg = ChipConfig {
        timebase: Timebase::new(3.3e6, speedup).unwrap(),
        n_rows: 6,
        n_cols: 3,
        leak: LeakModel::disabled(),
        psc_gain: 0.4,
        seed: 11,
        ..ChipConfig::default()
    };
    let mut chip = Chip::new(cfg).unwrap();
    chip.set_all_stp(&StpParams::new(0.4, 0.05, 0.2, 0.02, 0.3, 1.0).unwrap()).unwrap();
    chip.load_weights(WeightRam::filled(6, 3, WeightEntry::new(15, 5, false).unwrap())).unwrap();
    chip.record(&[Signal::Psc(2), Signal::Vmem(1), Signal::X(0, 0), Signal::Calcium(2)]).unwrap();
    chip
}

fn run(speedup: u32, inputs: &[(f64, usize)]) -> (Vec<(u64, usize)>, String) {
    let mut c = chip(speedup);
    let k = speedup as f64;
    let events: Vec<SpikeEvent> = inputs.iter().map(|&(t, r)| SpikeEvent::input(t / k, r)).collect();
    c.submit_spikes(&events).unwrap();
    c.run_until(0.3);
    (c.spike_log().to_vec(), c.take_trace().to_csv())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn speedup_only_rescales_wall_time(
        inputs in prop::collection::vec((0.0f64..0.25, 0usize..6), 1..80),
        speedup in 2u32..=100,
    ) {
        let (log_a, trace_a) = run(1, &inputs);
        let (log_b, trace_b) = run(speedup, &inputs);
        prop_assert_eq!(log_a, log_b);
        prop_assert!(trace_a == trace_b);
    }

    #[test]
    fn inputs_never_act_in_their_own_cycle(t in 0.0f64..0.05, row in 0usize..6) {
        let mut c = chip(1);
        c.submit_spikes(&[SpikeEvent::input(t, row)]).unwrap();
        let cycle = c.timebase().cycle_of_wall_time(t);
        c.run_cycles(cycle + 1);
        prop_assert_eq!(c.presyn_state(row).v_psc, 0.0);
        prop_assert!((0..3).all(|n| c.neuron(n).v_mem == 0.0));
        c.run_cycle();
        prop_assert!(c.presyn_state(row).v_psc > 0.0);
    }
}

const CONFIG: &str = r#"
duration = 0.3
record = ["psc:0", "vmem:1", "x:1:1"]

[chip]
rows = 2
cols = 2
seed = 5
psc_gain = 0.5

[stp]
utilization = 0.5
tau_u = 0.05
tau_r = 0.2
tau_psc = 0.02
alpha = 0.4

[weights]
file = "weights.txt"

[[weights.set]]
row = 1
col = 1
ltp = 15
ltd = 15

[[stimulus.trains]]
row = 0
rate = 50.0
count = 10
start = 0.01

[stimulus]
spikes_file = "input.txt"
"#;

#[test]
fn config_run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut ram = WeightRam::new(2, 2);
    ram.set(0, 0, WeightEntry::new(15, 15, false).unwrap()).unwrap();
    ram.set(0, 1, WeightEntry::new(15, 15, true).unwrap()).unwrap();
    fs::write(dir.path().join("weights.txt"), ram.to_text()).unwrap();
    fs::write(dir.path().join("input.txt"), "0.02 1 in\n0.04 1 in\n0.10 0 out\n").unwrap();
    let cfg_path = dir.path().join("exp.toml");
    fs::write(&cfg_path, CONFIG).unwrap();

    let cfg = ExperimentConfig::load(&cfg_path).unwrap();
    let out = dir.path().join("out");
    let summary = run_experiment(&cfg, dir.path(), &out).unwrap();
    assert!(summary.output_spikes > 0);
    let cycles = fs::read_to_string(out.join("output_cycles.csv")).unwrap();
    assert!(cycles.starts_with("cycle,neuron\n"));
    let spikes = fs::read_to_string(out.join("spikes.txt")).unwrap();
    assert_eq!(spikes.lines().count(), summary.output_spikes);
    assert!(spikes.lines().all(|l| l.ends_with(" out")));
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.contains(",x:1:1,") && trace.contains(",amp:0,"));

    let chip = simulate(&cfg, dir.path()).unwrap();
    assert_eq!(chip.weights().get(0, 1), WeightEntry::new(15, 15, true).unwrap());
    assert_eq!(chip.weights().get(1, 1), WeightEntry::new(15, 15, false).unwrap());
}

#[test]
fn binary_ram_image_loads_like_text() {
    let dir = tempfile::tempdir().unwrap();
    let mut ram = WeightRam::new(2, 2);
    ram.set(1, 0, WeightEntry::new(9, 3, true).unwrap()).unwrap();
    fs::write(dir.path().join("w.bin"), ram.to_bytes()).unwrap();
    fs::write(dir.path().join("w.txt"), ram.to_text()).unwrap();
    let load = |file: &str| {
        let text = format!("duration = 0.01\n[chip]\nrows = 2\ncols = 2\n[weights]\nfile = \"{file}\"\n");
        simulate(&ExperimentConfig::from_toml(&text).unwrap(), dir.path()).unwrap().weights().clone()
    };
    assert_eq!(load("w.bin"), ram);
    assert_eq!(load("w.txt"), ram);
}

#[test]
fn bad_config_is_reported() {
    assert!(ExperimentConfig::from_toml("duration = 1\n[chip]\nrowz = 3\n").is_err());
    let cfg = ExperimentConfig::from_toml("[chip]\nrows = 200\n").unwrap();
    assert!(cfg.chip_config().is_err());
    let cfg = ExperimentConfig::from_toml("[weights]\nfile = \"missing.txt\"\n[chip]\nrows = 1\ncols = 1\n").unwrap();
    assert!(simulate(&cfg, std::path::Path::new("/nonexistent")).is_err());
}
