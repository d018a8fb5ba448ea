//! Chip-level scheduler: the column-cycling matrix state machine, spike I/O,
//! weight RAM, DAC registry and the host-side calcium controller.

pub mod config;
pub mod dac;
pub mod io;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{check_range, invalid, Error, Result};
use crate::model::{calcium_filter, FusiParams, LearnGate, StpParams};
use crate::neuron::{NeuronParams, NeuronState};
use crate::presyn::{quantize_stp_params, sample_psc, AchievedStp, LeakModel, ScPresynConfig, ScPresynState};
use crate::synapse::{
    leak_cell, process_synapse, select_weight, CellMismatch, ForceMode, RowDriver, SynapseCell, WeightRam,
};
use crate::time::{Tick, Timebase, SLOTS_PER_CYCLE, TICKS_PER_CYCLE, TICKS_PER_SLOT};

pub use dac::Dac;
pub use io::{Direction, Signal, SpikeEvent, Trace};

pub const MAX_ROWS: usize = 128;
pub const MAX_COLS: usize = SLOTS_PER_CYCLE as usize;

#[derive(Debug, Clone, PartialEq)]
pub struct ChipConfig {
    pub timebase: Timebase,
    pub n_rows: usize,
    pub n_cols: usize,
    /// Die temperature in degrees Celsius.
    pub temperature: f64,
    /// Seed for the capacitor mismatch draw.
    pub seed: u64,
    /// Relative standard deviation of every mismatched capacitor.
    pub mismatch_sigma: f64,
    pub leak: LeakModel,
    pub dac: Dac,
    /// Template for every presynaptic row. `v_a` is taken from the DAC.
    pub presyn: ScPresynConfig,
    /// Capacitances and offset of the synapse drivers. The control voltages
    /// are taken from the DAC.
    pub driver: RowDriver,
    pub neuron: NeuronParams,
    /// Calcium filter and stop-learning windows of the host controller.
    pub learning: FusiParams,
    /// Charge delivered per unit PSC voltage at full weight and full
    /// `psc_scale`.
    pub psc_gain: f64,
}

impl Default for ChipConfig {
    fn default() -> Self {
        ChipConfig {
            timebase: Timebase::default(),
            n_rows: MAX_ROWS,
            n_cols: MAX_COLS,
            temperature: 25.0,
            seed: 0,
            mismatch_sigma: 0.01,
            leak: LeakModel::default(),
            dac: Dac::default(),
            presyn: ScPresynConfig::default(),
            driver: RowDriver::default(),
            neuron: NeuronParams::default(),
            learning: FusiParams::default(),
            psc_gain: 1.0,
        }
    }
}

impl ChipConfig {
    pub fn validate(&self) -> Result<()> {
        self.timebase.validate()?;
        if !(1..=MAX_ROWS).contains(&self.n_rows) {
            return Err(invalid("n_rows", format!("{} not in 1..={MAX_ROWS}", self.n_rows)));
        }
        if !(1..=MAX_COLS).contains(&self.n_cols) {
            return Err(invalid("n_cols", format!("{} not in 1..={MAX_COLS}", self.n_cols)));
        }
        if !self.temperature.is_finite() {
            return Err(invalid("temperature", "must be finite"));
        }
        check_range("mismatch_sigma", self.mismatch_sigma, 0.0, 0.5)?;
        self.leak.validate()?;
        for name in Dac::CHANNELS {
            let v = self.dac.get(name)?;
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::DacOutOfRange { name: name.into(), value: v });
            }
        }
        self.presyn.validate()?;
        self.driver_with_dac().validate()?;
        self.neuron.validate()?;
        self.learning.validate()?;
        if !self.psc_gain.is_finite() {
            return Err(invalid("psc_gain", "must be finite"));
        }
        Ok(())
    }

    fn driver_with_dac(&self) -> RowDriver {
        RowDriver {
            v_a: self.dac.syn_v_a,
            v_b: self.dac.syn_v_b,
            v_alpha: self.dac.syn_v_alpha,
            v_beta: self.dac.syn_v_beta,
            v_cm: self.dac.syn_v_cm,
            ..self.driver
        }
    }
}

/// Capacitor mismatch factors of one presynaptic circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
struct PresynMismatch {
    c_state: f64,
    c_ratio: f64,
}

/// The simulated chip.
///
/// Each call to [`Chip::run_cycle`] processes one full matrix cycle. Input
/// spikes are registered in the cycle containing their timestamp and take
/// effect at the start of the following cycle.
#[derive(Debug, Clone)]
pub struct Chip {
    cfg: ChipConfig,
    driver: RowDriver,
    presyn_nominal: Vec<ScPresynConfig>,
    presyn_mismatch: Vec<PresynMismatch>,
    presyn_cfg: Vec<ScPresynConfig>,
    presyn: Vec<ScPresynState>,
    /// PSC voltage right after each row's most recent spike update.
    last_amp: Vec<f64>,
    cells: Vec<SynapseCell>,
    ram: WeightRam,
    neurons: Vec<NeuronState>,
    calcium: Vec<f64>,
    gates: Vec<LearnGate>,
    gate_override: Vec<Option<LearnGate>>,
    force: Vec<Option<ForceMode>>,
    pending: BTreeMap<u64, BTreeSet<usize>>,
    outputs: VecDeque<SpikeEvent>,
    spike_log: Vec<(u64, usize)>,
    now: Tick,
    recording: Vec<Signal>,
    trace: Trace,
}

impl Chip {
    pub fn new(cfg: ChipConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let factor = Normal::new(1.0, cfg.mismatch_sigma).map_err(|e| invalid("mismatch_sigma", e.to_string()))?;
        let presyn_mismatch: Vec<PresynMismatch> = (0..cfg.n_rows)
            .map(|_| {
                if cfg.mismatch_sigma == 0.0 {
                    PresynMismatch { c_state: 1.0, c_ratio: 1.0 }
                } else {
                    PresynMismatch {
                        c_state: factor.sample(&mut rng).max(0.5),
                        c_ratio: factor.sample(&mut rng).max(0.5),
                    }
                }
            })
            .collect();
        let cells = (0..cfg.n_rows * cfg.n_cols)
            .map(|_| {
                CellMismatch::sample(&mut rng, cfg.mismatch_sigma)
                    .map(|mismatch| SynapseCell { x: 0.0, mismatch })
            })
            .collect::<Result<Vec<_>>>()?;
        let nominal = ScPresynConfig {
            v_a: cfg.dac.presyn_v_a,
            leak: cfg.leak,
            ..cfg.presyn
        };
        let mut chip = Chip {
            driver: cfg.driver_with_dac(),
            presyn_nominal: vec![nominal; cfg.n_rows],
            presyn_mismatch,
            presyn_cfg: Vec::new(),
            presyn: Vec::new(),
            last_amp: vec![0.0; cfg.n_rows],
            cells,
            ram: WeightRam::new(cfg.n_rows, cfg.n_cols),
            neurons: vec![NeuronState::resting(&cfg.neuron); cfg.n_cols],
            calcium: vec![0.0; cfg.n_cols],
            gates: vec![initial_gate(&cfg.learning); cfg.n_cols],
            gate_override: vec![None; cfg.n_cols],
            force: vec![None; cfg.n_cols],
            pending: BTreeMap::new(),
            outputs: VecDeque::new(),
            spike_log: Vec::new(),
            now: 0,
            recording: Vec::new(),
            trace: Trace::new(),
            cfg,
        };
        chip.presyn_cfg = (0..chip.cfg.n_rows).map(|r| chip.effective_presyn(r)).collect();
        chip.presyn = chip.presyn_cfg.iter().map(|c| ScPresynState::new(c, 0)).collect();
        Ok(chip)
    }

    fn effective_presyn(&self, row: usize) -> ScPresynConfig {
        let m = self.presyn_mismatch[row];
        let nominal = self.presyn_nominal[row];
        ScPresynConfig {
            c_state: nominal.c_state * m.c_state,
            c_ratio: nominal.c_ratio * m.c_ratio,
            ..nominal
        }
    }

    fn check_row(&self, row: usize) -> Result<()> {
        if row >= self.cfg.n_rows {
            return Err(Error::RowOutOfRange { row, rows: self.cfg.n_rows });
        }
        Ok(())
    }

    fn check_neuron(&self, neuron: usize) -> Result<()> {
        if neuron >= self.cfg.n_cols {
            return Err(Error::NeuronOutOfRange { neuron, cols: self.cfg.n_cols });
        }
        Ok(())
    }

    pub fn config(&self) -> &ChipConfig {
        &self.cfg
    }

    pub fn timebase(&self) -> &Timebase {
        &self.cfg.timebase
    }

    /// Start tick of the next cycle to run.
    pub fn now(&self) -> Tick {
        self.now
    }

    /// Index of the next cycle to run.
    pub fn cycle(&self) -> u64 {
        self.now / TICKS_PER_CYCLE
    }

    pub fn model_time(&self) -> f64 {
        self.cfg.timebase.model_seconds(self.now)
    }

    pub fn wall_time(&self) -> f64 {
        self.cfg.timebase.wall_seconds(self.now)
    }

    /// Replaces the presynaptic configuration of one row. Capacitor mismatch
    /// of the row is applied on top.
    pub fn set_row_presyn(&mut self, row: usize, cfg: ScPresynConfig) -> Result<()> {
        self.check_row(row)?;
        cfg.validate()?;
        self.presyn_nominal[row] = ScPresynConfig { leak: self.cfg.leak, ..cfg };
        self.presyn_cfg[row] = self.effective_presyn(row);
        self.presyn[row].reschedule(&self.presyn_cfg[row]);
        Ok(())
    }

    /// Quantizes model parameters onto one row and returns what the row
    /// realizes, mismatch included.
    pub fn set_row_stp(&mut self, row: usize, params: &StpParams) -> Result<AchievedStp> {
        self.check_row(row)?;
        let (cfg, _) = quantize_stp_params(params, &self.presyn_nominal[row], self.cfg.timebase.clock_hz)?;
        self.set_row_presyn(row, cfg)?;
        Ok(self.presyn_cfg[row].achieved(self.cfg.timebase.clock_hz))
    }

    pub fn set_all_stp(&mut self, params: &StpParams) -> Result<()> {
        for row in 0..self.cfg.n_rows {
            self.set_row_stp(row, params)?;
        }
        Ok(())
    }

    /// Effective (mismatched) presynaptic configuration of a row.
    pub fn presyn_config(&self, row: usize) -> &ScPresynConfig {
        &self.presyn_cfg[row]
    }

    pub fn presyn_state(&self, row: usize) -> &ScPresynState {
        &self.presyn[row]
    }

    pub fn cell(&self, row: usize, col: usize) -> &SynapseCell {
        &self.cells[row * self.cfg.n_cols + col]
    }

    pub fn set_cell_state(&mut self, row: usize, col: usize, x: f64) -> Result<()> {
        self.check_row(row)?;
        self.check_neuron(col)?;
        check_range("x", x, 0.0, 1.0)?;
        self.cells[row * self.cfg.n_cols + col].x = x;
        Ok(())
    }

    pub fn neuron(&self, neuron: usize) -> &NeuronState {
        &self.neurons[neuron]
    }

    /// Sets a membrane voltage below the firing threshold.
    pub fn set_membrane(&mut self, neuron: usize, v: f64) -> Result<()> {
        self.check_neuron(neuron)?;
        let p = &self.cfg.neuron;
        if !(v >= p.v_reset && v < p.v_thresh_spike) {
            return Err(invalid("v_mem", format!("{v} outside [v_reset, v_thresh_spike)")));
        }
        self.neurons[neuron].v_mem = v;
        Ok(())
    }

    pub fn calcium(&self, neuron: usize) -> f64 {
        self.calcium[neuron]
    }

    pub fn driver(&self) -> &RowDriver {
        &self.driver
    }

    pub fn weights(&self) -> &WeightRam {
        &self.ram
    }

    pub fn load_weights(&mut self, ram: WeightRam) -> Result<()> {
        if ram.rows() != self.cfg.n_rows || ram.cols() != self.cfg.n_cols {
            return Err(Error::MalformedRam(format!(
                "image is {}x{}, chip is {}x{}",
                ram.rows(),
                ram.cols(),
                self.cfg.n_rows,
                self.cfg.n_cols
            )));
        }
        self.ram = ram;
        Ok(())
    }

    pub fn dac(&self) -> &Dac {
        &self.cfg.dac
    }

    /// Writes a DAC channel. The new value is in effect from the next cycle.
    pub fn set_dac(&mut self, name: &str, value: f64) -> Result<()> {
        let mut cfg = self.cfg.clone();
        cfg.dac.set(name, value)?;
        let driver = cfg.driver_with_dac();
        driver.validate()?;
        self.cfg = cfg;
        self.driver = driver;
        if name == "presyn_v_a" {
            for row in 0..self.cfg.n_rows {
                self.presyn_nominal[row].v_a = value;
                self.presyn_cfg[row] = self.effective_presyn(row);
            }
        }
        Ok(())
    }

    pub fn set_temperature(&mut self, celsius: f64) -> Result<()> {
        if !celsius.is_finite() {
            return Err(invalid("temperature", "must be finite"));
        }
        self.cfg.temperature = celsius;
        Ok(())
    }

    /// Sets the learn-force bits of one neuron's column.
    pub fn set_force(&mut self, neuron: usize, up: bool, down: bool) -> Result<()> {
        self.check_neuron(neuron)?;
        self.force[neuron] = ForceMode::from_flags(up, down)?;
        Ok(())
    }

    /// Overrides the stop-learning enables computed by the calcium
    /// controller; `None` hands control back to it.
    pub fn set_learn_gate(&mut self, neuron: usize, gate: Option<LearnGate>) -> Result<()> {
        self.check_neuron(neuron)?;
        self.gate_override[neuron] = gate;
        Ok(())
    }

    /// Enables per-cycle recording of the given signals.
    pub fn record(&mut self, signals: &[Signal]) -> Result<()> {
        for s in signals {
            match *s {
                Signal::Psc(r) | Signal::Vu(r) | Signal::Vr(r) => self.check_row(r)?,
                Signal::Vmem(n) | Signal::Calcium(n) => self.check_neuron(n)?,
                Signal::X(r, c) => {
                    self.check_row(r)?;
                    self.check_neuron(c)?;
                }
            }
        }
        self.recording = signals.to_vec();
        Ok(())
    }

    pub fn take_trace(&mut self) -> Trace {
        std::mem::take(&mut self.trace)
    }

    /// Queues input spikes. Timestamps are wall-clock seconds.
    pub fn submit_spikes(&mut self, events: &[SpikeEvent]) -> Result<()> {
        let tb = self.cfg.timebase;
        let mut staged = Vec::with_capacity(events.len());
        for e in events {
            if e.direction != Direction::In {
                return Err(invalid("direction", "only input spikes can be submitted"));
            }
            self.check_row(e.id)?;
            if !e.time.is_finite() {
                return Err(invalid("time", "must be finite"));
            }
            let tick = tb.tick_of_wall_time(e.time.max(0.0));
            if e.time < 0.0 || tick < self.now {
                return Err(Error::EventInPast { time: e.time, now: self.wall_time() });
            }
            staged.push((tick / TICKS_PER_CYCLE, e.id));
        }
        for (cycle, row) in staged {
            self.pending.entry(cycle).or_default().insert(row);
        }
        Ok(())
    }

    /// Output spikes in (time, neuron) order since the last drain.
    pub fn drain_outputs(&mut self) -> Vec<SpikeEvent> {
        self.outputs.drain(..).collect()
    }

    /// Every output spike so far as `(cycle, neuron)`.
    pub fn spike_log(&self) -> &[(u64, usize)] {
        &self.spike_log
    }

    /// Runs one matrix cycle.
    pub fn run_cycle(&mut self) {
        let start = self.now;
        let end = start + TICKS_PER_CYCLE;
        let cycle = start / TICKS_PER_CYCLE;
        let tb = self.cfg.timebase;
        let temp = self.cfg.temperature;
        let (rows, cols) = (self.cfg.n_rows, self.cfg.n_cols);

        let mut spiking = vec![false; rows];
        if let Some(prev) = cycle.checked_sub(1) {
            if let Some(set) = self.pending.remove(&prev) {
                for r in set {
                    spiking[r] = true;
                }
            }
        }

        for r in 0..rows {
            let cfg = &self.presyn_cfg[r];
            let state = &mut self.presyn[r];
            state.tick(cfg, start, &tb, temp);
            if spiking[r] {
                state.on_spike(cfg);
                self.last_amp[r] = state.v_psc;
            }
        }

        let gain = self.cfg.psc_gain * self.cfg.dac.psc_scale;
        let dt_model = tb.cycle_model_seconds();
        let mut fired = vec![false; cols];
        for c in 0..cols {
            let slot = start + c as Tick * TICKS_PER_SLOT;
            let elevated = self.neurons[c].membrane_elevated(&self.cfg.neuron);
            let gate = self.gate_override[c].unwrap_or(self.gates[c]);
            let force = self.force[c];
            let mut charge = 0.0;
            for r in 0..rows {
                let idx = r * cols + c;
                let (cell, comp) = process_synapse(self.cells[idx], &self.driver, spiking[r], elevated, gate, force);
                self.cells[idx] = cell;
                let (w, inh) = select_weight(comp, self.ram.get(r, c));
                charge += sample_psc(&self.presyn[r], w, inh, gain).expect("RAM weights are 4-bit");
            }
            if self.neurons[c].integrate(&self.cfg.neuron, charge, dt_model, slot) {
                fired[c] = true;
                self.outputs.push_back(SpikeEvent::output(tb.wall_seconds(slot), c));
                self.spike_log.push((cycle, c));
            }
        }

        for r in 0..rows {
            self.presyn[r].tick(&self.presyn_cfg[r], end, &tb, temp);
        }
        if self.cfg.leak.enabled {
            let dt_wall = tb.cycle_wall_seconds();
            let c_syn = self.driver.c_syn;
            for cell in &mut self.cells {
                *cell = leak_cell(*cell, &self.cfg.leak, c_syn, dt_wall, temp);
            }
        }
        for c in 0..cols {
            let (ca, gate) = calcium_filter(self.calcium[c], &self.cfg.learning, fired[c], dt_model);
            self.calcium[c] = ca;
            self.gates[c] = gate;
        }

        self.now = end;
        self.record_cycle(start, &spiking);
    }

    fn record_cycle(&mut self, start: Tick, spiking: &[bool]) {
        if self.recording.is_empty() {
            return;
        }
        let tb = self.cfg.timebase;
        let t_start = tb.model_seconds(start);
        let t_end = tb.model_seconds(self.now);
        for i in 0..self.recording.len() {
            let s = self.recording[i];
            let value = match s {
                Signal::Psc(r) => {
                    if spiking[r] {
                        self.trace.push(t_start, format!("amp:{r}"), self.last_amp[r]);
                    }
                    self.presyn[r].v_psc
                }
                Signal::Vu(r) => self.presyn[r].v_u,
                Signal::Vr(r) => self.presyn[r].v_r,
                Signal::Vmem(n) => self.neurons[n].v_mem,
                Signal::Calcium(n) => self.calcium[n],
                Signal::X(r, c) => self.cells[r * self.cfg.n_cols + c].x,
            };
            self.trace.push(t_end, s.to_string(), value);
        }
    }

    pub fn run_cycles(&mut self, n: u64) {
        for _ in 0..n {
            self.run_cycle();
        }
    }

    /// Runs whole cycles until the model time reaches `t` seconds.
    pub fn run_until(&mut self, t: f64) {
        let target = (t * self.cfg.timebase.clock_hz).ceil() as Tick;
        while self.now < target {
            self.run_cycle();
        }
    }
}

fn initial_gate(p: &FusiParams) -> LearnGate {
    calcium_filter(0.0, p, false, 0.0).1
}
