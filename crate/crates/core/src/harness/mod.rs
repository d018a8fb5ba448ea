//! Measurement protocols, figure reproductions and the experiment helpers
//! behind the command-line tool.

pub mod figures;
pub mod fit;
pub mod protocol;

pub use figures::{run_figure, sweep_temperature, FigureOptions, FIGURES};
pub use fit::{fit_exponential, mean_std, FitResult};
pub use protocol::{extract_time_constant, ProtocolConfig, ProtocolResult};
