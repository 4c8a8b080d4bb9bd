//! Per-device decisions and the box they live in.

use serde::{Deserialize, Serialize};

use crate::compression::MAX_BITS;
use crate::error::{Error, Result};

/// Admissible ranges for pruning ratio, quantization bits and transmit power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlBox {
    pub max_pruning: f64,
    pub max_bits: u8,
    pub min_power: f64,
    pub max_power: f64,
}

impl Default for ControlBox {
    fn default() -> Self {
        Self {
            max_pruning: 0.5,
            max_bits: 8,
            min_power: 0.01,
            max_power: 0.1,
        }
    }
}

impl ControlBox {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.max_pruning) {
            return Err(Error::invalid("max_pruning", format!("{} not in [0, 1)", self.max_pruning)));
        }
        if self.max_bits == 0 || self.max_bits > MAX_BITS {
            return Err(Error::invalid("max_bits", format!("{} not in [1, {MAX_BITS}]", self.max_bits)));
        }
        if !(self.min_power > 0.0 && self.min_power <= self.max_power && self.max_power.is_finite()) {
            return Err(Error::invalid(
                "power",
                format!("need 0 < min_power <= max_power, got [{}, {}]", self.min_power, self.max_power),
            ));
        }
        Ok(())
    }

    pub fn clamp_power(&self, p: f64) -> f64 {
        p.clamp(self.min_power, self.max_power)
    }
}

/// Pruning ratio, quantization bits and transmit power for every device.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlStrategy {
    pub pruning: Vec<f64>,
    pub bits: Vec<u8>,
    pub power: Vec<f64>,
}

impl ControlStrategy {
    /// Every device gets the same decision.
    pub fn uniform(devices: usize, pruning: f64, bits: u8, power: f64) -> Self {
        Self {
            pruning: vec![pruning; devices],
            bits: vec![bits; devices],
            power: vec![power; devices],
        }
    }

    pub fn len(&self) -> usize {
        self.power.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power.is_empty()
    }

    /// Checks lengths against `devices` and every entry against the box.
    pub fn validate(&self, devices: usize, bounds: &ControlBox) -> Result<()> {
        for len in [self.pruning.len(), self.bits.len(), self.power.len()] {
            if len != devices {
                return Err(Error::DimensionMismatch {
                    expected: devices,
                    actual: len,
                });
            }
        }
        for u in 0..devices {
            let (r, b, p) = (self.pruning[u], self.bits[u], self.power[u]);
            if !(0.0..=bounds.max_pruning).contains(&r) {
                return Err(Error::invalid("pruning", format!("device {u}: {r} outside [0, {}]", bounds.max_pruning)));
            }
            if b == 0 || b > bounds.max_bits {
                return Err(Error::invalid("bits", format!("device {u}: {b} outside [1, {}]", bounds.max_bits)));
            }
            if !(bounds.min_power..=bounds.max_power).contains(&p) {
                return Err(Error::invalid(
                    "power",
                    format!("device {u}: {p} outside [{}, {}]", bounds.min_power, bounds.max_power),
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        let b = ControlBox::default();
        let s = ControlStrategy::uniform(3, 0.2, 4, 0.05);
        assert!(s.validate(3, &b).is_ok());
        assert!(s.validate(2, &b).is_err());
        let mut bad = s.clone();
        bad.pruning[1] = 0.6;
        assert!(bad.validate(3, &b).is_err());
        let mut bad = s.clone();
        bad.bits[0] = 9;
        assert!(bad.validate(3, &b).is_err());
        let mut bad = s;
        bad.power[2] = 0.2;
        assert!(bad.validate(3, &b).is_err());
        assert!(ControlBox { max_bits: 17, ..b }.validate().is_err());
    }
}
