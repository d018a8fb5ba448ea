//! Clock and matrix-cycle arithmetic.
//!
//! Simulation time is counted in ticks of the neuromorphic clock. The clock
//! divider scales how fast ticks pass in wall time; every counter, period and
//! cycle length is expressed in ticks, so the per-cycle arithmetic does not
//! depend on the speed-up.

use crate::error::{check_positive, invalid, Result};

pub type Tick = u64;

/// Clock cycles spent on one synapse column.
pub const TICKS_PER_SLOT: Tick = 32;
/// Column slots per matrix cycle (one per neuron).
pub const SLOTS_PER_CYCLE: Tick = 64;
pub const TICKS_PER_CYCLE: Tick = TICKS_PER_SLOT * SLOTS_PER_CYCLE;

/// Neuromorphic clock at biological real time.
pub const DEFAULT_CLOCK_HZ: f64 = 3.3e6;
pub const MAX_SPEEDUP: u32 = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timebase {
    /// Clock frequency at speed-up 1.
    pub clock_hz: f64,
    pub speedup: u32,
}

impl Default for Timebase {
    fn default() -> Self {
        Timebase {
            clock_hz: DEFAULT_CLOCK_HZ,
            speedup: 1,
        }
    }
}

impl Timebase {
    pub fn new(clock_hz: f64, speedup: u32) -> Result<Self> {
        let tb = Timebase { clock_hz, speedup };
        tb.validate()?;
        Ok(tb)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("clock_hz", self.clock_hz)?;
        if !(1..=MAX_SPEEDUP).contains(&self.speedup) {
            return Err(invalid("speedup", format!("{} not in 1..={MAX_SPEEDUP}", self.speedup)));
        }
        Ok(())
    }

    /// Biological (speed-up independent) time of a tick count.
    pub fn model_seconds(&self, ticks: Tick) -> f64 {
        ticks as f64 / self.clock_hz
    }

    /// Wall-clock time of a tick count at the configured speed-up.
    pub fn wall_seconds(&self, ticks: Tick) -> f64 {
        ticks as f64 / (self.clock_hz * self.speedup as f64)
    }

    pub fn wall_seconds_per_tick(&self) -> f64 {
        1.0 / (self.clock_hz * self.speedup as f64)
    }

    pub fn cycle_wall_seconds(&self) -> f64 {
        self.wall_seconds(TICKS_PER_CYCLE)
    }

    pub fn cycle_model_seconds(&self) -> f64 {
        self.model_seconds(TICKS_PER_CYCLE)
    }

    /// Index of the matrix cycle containing wall time `t`.
    pub fn cycle_of_wall_time(&self, t: f64) -> u64 {
        (t * self.clock_hz * self.speedup as f64 / TICKS_PER_CYCLE as f64).floor() as u64
    }

    /// Nearest clock tick to wall time `t`.
    pub fn tick_of_wall_time(&self, t: f64) -> Tick {
        (t * self.clock_hz * self.speedup as f64).round() as Tick
    }

    /// Rounds a biological duration to whole clock cycles (at least one).
    pub fn ticks_for(&self, model_seconds: f64) -> Tick {
        ((model_seconds * self.clock_hz).round() as Tick).max(1)
    }
}
