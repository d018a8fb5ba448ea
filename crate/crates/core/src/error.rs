use thiserror::Error;

/// Errors raised by the simulator, its file formats and the measurement harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("spike times must be strictly increasing (index {index})")]
    NonMonotonicSpikes { index: usize },

    #[error("event at t={time}s lies before the current simulation time {now}s")]
    EventInPast { time: f64, now: f64 },

    #[error("row {row} out of range (chip has {rows} rows)")]
    RowOutOfRange { row: usize, rows: usize },

    #[error("neuron {neuron} out of range (chip has {cols} neurons)")]
    NeuronOutOfRange { neuron: usize, cols: usize },

    #[error("force up and force down cannot be asserted together")]
    ConflictingForce,

    #[error("unknown DAC channel `{0}`")]
    UnknownDac(String),

    #[error("DAC value {value} for `{name}` outside [0, 1]")]
    DacOutOfRange { name: String, value: f64 },

    #[error("malformed weight RAM image: {0}")]
    MalformedRam(String),

    #[error("parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("exponential fit failed: {0}")]
    Fit(String),

    #[error("unknown figure `{0}`")]
    UnknownFigure(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Rejects NaN and values outside `[lo, hi]`.
pub(crate) fn check_range(name: &'static str, v: f64, lo: f64, hi: f64) -> Result<()> {
    if v.is_nan() || v < lo || v > hi {
        return Err(invalid(name, format!("{v} not in [{lo}, {hi}]")));
    }
    Ok(())
}

pub(crate) fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_nan() || v <= 0.0 {
        return Err(invalid(name, format!("{v} must be > 0")));
    }
    Ok(())
}
