//! Behavioral simulator of a switched-capacitor neuromorphic system.
//!
//! The crate models a 128-row by 64-column synapse matrix driven by
//! switched-capacitor presynaptic short-term plasticity circuits and bistable
//! stop-learning synapses, together with the measurement harness used to
//! characterize them.
//!
//! * [`model`]: ideal reference dynamics (the test oracle).
//! * [`presyn`]: discrete charge-sharing implementation of short-term plasticity.
//! * [`synapse`]: stop-learning synapse cells and their shared row driver.
//! * [`neuron`]: leaky integrate-and-fire neuron with the membrane comparator.
//! * [`system`]: column-cycling scheduler, spike I/O, weight RAM and DAC.
//! * [`harness`]: time-constant extraction, exponential fitting and figure runs.

pub mod error;
pub mod harness;
pub mod model;
pub mod neuron;
pub mod presyn;
pub mod synapse;
pub mod system;
pub mod time;

pub use error::{Error, Result};
