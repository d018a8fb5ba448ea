//! Spike event files and CSV traces.
//!
//! Spike files hold one event per line, `t_seconds id in|out`, with `#`
//! comments. Traces are CSV with the header `time,signal,value` and nine
//! decimal places on every number.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    In,
    Out,
}

/// A spike crossing the chip boundary. `id` is the input row for incoming
/// spikes and the neuron for outgoing ones; `time` is wall-clock seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeEvent {
    pub time: f64,
    pub id: usize,
    pub direction: Direction,
}

impl SpikeEvent {
    pub fn input(time: f64, row: usize) -> Self {
        SpikeEvent { time, id: row, direction: Direction::In }
    }

    pub fn output(time: f64, neuron: usize) -> Self {
        SpikeEvent { time, id: neuron, direction: Direction::Out }
    }
}

impl fmt::Display for SpikeEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dir = match self.direction {
            Direction::In => "in",
            Direction::Out => "out",
        };
        write!(f, "{:.9} {} {}", self.time, self.id, dir)
    }
}

pub fn parse_spikes(text: &str) -> Result<Vec<SpikeEvent>> {
    let mut events = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |reason: String| Error::Parse { line: idx + 1, reason };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [t, id, dir] = fields[..] else {
            return Err(err(format!("expected `t id in|out`, got {} fields", fields.len())));
        };
        let time: f64 = t.parse().map_err(|_| err(format!("bad time `{t}`")))?;
        if !time.is_finite() || time < 0.0 {
            return Err(err(format!("time {time} must be finite and >= 0")));
        }
        let id: usize = id.parse().map_err(|_| err(format!("bad id `{id}`")))?;
        let direction = match dir {
            "in" => Direction::In,
            "out" => Direction::Out,
            other => return Err(err(format!("direction `{other}` must be in or out"))),
        };
        events.push(SpikeEvent { time, id, direction });
    }
    Ok(events)
}

pub fn format_spikes(events: &[SpikeEvent]) -> String {
    events.iter().fold(String::new(), |mut s, e| {
        let _ = writeln!(s, "{e}");
        s
    })
}

/// A recordable chip quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Signal {
    /// PSC voltage of an input row.
    Psc(usize),
    /// Facilitation voltage of an input row.
    Vu(usize),
    /// Depression voltage of an input row.
    Vr(usize),
    Vmem(usize),
    Calcium(usize),
    /// Synapse state at `(row, neuron)`.
    X(usize, usize),
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Signal::Psc(r) => write!(f, "psc:{r}"),
            Signal::Vu(r) => write!(f, "vu:{r}"),
            Signal::Vr(r) => write!(f, "vr:{r}"),
            Signal::Vmem(n) => write!(f, "vmem:{n}"),
            Signal::Calcium(n) => write!(f, "calcium:{n}"),
            Signal::X(r, c) => write!(f, "x:{r}:{c}"),
        }
    }
}

impl FromStr for Signal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown signal `{s}`"));
        let parts: Vec<&str> = s.split(':').collect();
        let idx = |i: usize| parts.get(i).and_then(|p| p.parse::<usize>().ok()).ok_or_else(bad);
        match (parts[0], parts.len()) {
            ("psc", 2) => Ok(Signal::Psc(idx(1)?)),
            ("vu", 2) => Ok(Signal::Vu(idx(1)?)),
            ("vr", 2) => Ok(Signal::Vr(idx(1)?)),
            ("vmem", 2) => Ok(Signal::Vmem(idx(1)?)),
            ("calcium", 2) => Ok(Signal::Calcium(idx(1)?)),
            ("x", 3) => Ok(Signal::X(idx(1)?, idx(2)?)),
            _ => Err(bad()),
        }
    }
}

/// Accumulates `time,signal,value` rows in recording order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    rows: Vec<(f64, String, f64)>,
}

impl Trace {
    pub fn new() -> Self {
        Trace::default()
    }

    pub fn push(&mut self, time: f64, signal: impl Into<String>, value: f64) {
        self.rows.push((time, signal.into(), value));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `(time, value)` pairs of one signal.
    pub fn series(&self, signal: &str) -> Vec<(f64, f64)> {
        self.rows.iter().filter(|r| r.1 == signal).map(|r| (r.0, r.2)).collect()
    }

    pub fn extend(&mut self, other: Trace) {
        self.rows.extend(other.rows);
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("time,signal,value\n");
        for (t, name, v) in &self.rows {
            let _ = writeln!(s, "{t:.9},{name},{v:.9}");
        }
        s
    }
}
