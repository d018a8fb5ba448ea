//! Named bias voltages set through the on-chip DAC.

use crate::error::{Error, Result};

/// DAC channels, normalized to `[0, 1]` full scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dac {
    /// Facilitation target voltage of all presynaptic circuits.
    pub presyn_v_a: f64,
    /// Scale of the charge sampled from the PSC voltage.
    pub psc_scale: f64,
    pub syn_v_a: f64,
    pub syn_v_b: f64,
    pub syn_v_alpha: f64,
    pub syn_v_beta: f64,
    pub syn_v_cm: f64,
}

impl Default for Dac {
    fn default() -> Self {
        Dac {
            presyn_v_a: 1.0,
            psc_scale: 1.0,
            syn_v_a: 0.85,
            syn_v_b: 0.85,
            syn_v_alpha: 0.516,
            syn_v_beta: 0.516,
            syn_v_cm: 0.5,
        }
    }
}

impl Dac {
    pub const CHANNELS: [&'static str; 7] = [
        "presyn_v_a",
        "psc_scale",
        "syn_v_a",
        "syn_v_b",
        "syn_v_alpha",
        "syn_v_beta",
        "syn_v_cm",
    ];

    fn slot(&mut self, name: &str) -> Result<&mut f64> {
        Ok(match name {
            "presyn_v_a" => &mut self.presyn_v_a,
            "psc_scale" => &mut self.psc_scale,
            "syn_v_a" => &mut self.syn_v_a,
            "syn_v_b" => &mut self.syn_v_b,
            "syn_v_alpha" => &mut self.syn_v_alpha,
            "syn_v_beta" => &mut self.syn_v_beta,
            "syn_v_cm" => &mut self.syn_v_cm,
            _ => return Err(Error::UnknownDac(name.to_string())),
        })
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        let mut copy = *self;
        copy.slot(name).map(|v| *v)
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let slot = self.slot(name)?;
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::DacOutOfRange { name: name.to_string(), value });
        }
        *slot = value;
        Ok(())
    }
}
