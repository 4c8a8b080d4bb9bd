//! Unbiased stochastic quantization on a per-packet magnitude grid.
//!
//! The grid spans `[g_min, g_max]`, the smallest and largest magnitudes among
//! the kept coordinates, with `2^δ` evenly spaced points. A magnitude between
//! two points rounds up with probability equal to its fractional position, so
//! the reconstruction is unbiased. Signs travel separately.

use rand::Rng;

use super::prune::PruneMask;
use crate::error::{Error, Result};

/// Largest supported bit width. Levels are stored as `u16`.
pub const MAX_BITS: u8 = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedGradient {
    levels: Vec<u16>,
    negative: Vec<bool>,
    g_min: f64,
    g_max: f64,
    bits: u8,
}

impl QuantizedGradient {
    /// Reassembles a packet from raw parts, validating every invariant.
    pub fn from_parts(levels: Vec<u16>, negative: Vec<bool>, g_min: f64, g_max: f64, bits: u8) -> Result<Self> {
        check_bits(bits)?;
        if levels.len() != negative.len() {
            return Err(Error::MalformedPacket("levels and signs differ in length".into()));
        }
        if !(g_min >= 0.0 && g_min <= g_max && g_max.is_finite()) {
            return Err(Error::MalformedPacket(format!("bad bounds [{g_min}, {g_max}]")));
        }
        let top = max_level(bits);
        if let Some(l) = levels.iter().find(|&&l| u32::from(l) > top) {
            return Err(Error::MalformedPacket(format!("level {l} exceeds {top}")));
        }
        Ok(Self {
            levels,
            negative,
            g_min,
            g_max,
            bits,
        })
    }

    pub fn empty(bits: u8) -> Result<Self> {
        Self::from_parts(Vec::new(), Vec::new(), 0.0, 0.0, bits)
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn levels(&self) -> &[u16] {
        &self.levels
    }

    /// `true` where the original coordinate was negative.
    pub fn negative(&self) -> &[bool] {
        &self.negative
    }

    pub fn sign(&self, i: usize) -> f64 {
        if self.negative[i] {
            -1.0
        } else {
            1.0
        }
    }

    pub fn g_min(&self) -> f64 {
        self.g_min
    }

    pub fn g_max(&self) -> f64 {
        self.g_max
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    /// All kept coordinates were zero.
    pub fn is_degenerate(&self) -> bool {
        self.g_max == 0.0
    }

    /// Spacing between adjacent grid points.
    pub fn step(&self) -> f64 {
        (self.g_max - self.g_min) / f64::from(max_level(self.bits))
    }

    /// Grid point `b_t` for level `t`.
    pub fn grid_point(&self, level: u16) -> f64 {
        if u32::from(level) == max_level(self.bits) {
            self.g_max
        } else {
            (self.g_min + f64::from(level) * self.step()).min(self.g_max)
        }
    }

    /// Signed reconstructions of the kept coordinates.
    pub fn values_into(&self, out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.levels.len()).map(|i| self.sign(i) * self.grid_point(self.levels[i])));
    }

    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        self.values_into(&mut out);
        out
    }
}

fn check_bits(bits: u8) -> Result<()> {
    if bits == 0 || bits > MAX_BITS {
        return Err(Error::invalid("quantization_bits", format!("{bits} not in [1, {MAX_BITS}]")));
    }
    Ok(())
}

fn max_level(bits: u8) -> u32 {
    (1u32 << bits) - 1
}

/// Quantizes kept-coordinate values with `bits` bits per magnitude.
pub fn quantize<R: Rng + ?Sized>(values: &[f64], bits: u8, rng: &mut R) -> Result<QuantizedGradient> {
    let mut out = QuantizedGradient::empty(bits)?;
    quantize_into(values, bits, rng, &mut out)?;
    Ok(out)
}

/// Like [`quantize`] but reuses the buffers of `out`.
pub fn quantize_into<R: Rng + ?Sized>(
    values: &[f64],
    bits: u8,
    rng: &mut R,
    out: &mut QuantizedGradient,
) -> Result<()> {
    check_bits(bits)?;
    let mut g_min = f64::INFINITY;
    let mut g_max = 0.0f64;
    let mut finite = true;
    for v in values {
        finite &= v.is_finite();
        g_min = g_min.min(v.abs());
        g_max = g_max.max(v.abs());
    }
    if !finite {
        return Err(Error::NumericalDivergence("non-finite gradient entry".into()));
    }
    out.bits = bits;
    out.levels.clear();
    out.negative.clear();
    out.negative.extend(values.iter().map(|v| v.is_sign_negative() && *v != 0.0));
    if values.is_empty() || g_max == 0.0 {
        out.g_min = 0.0;
        out.g_max = 0.0;
        out.levels.resize(values.len(), 0);
        return Ok(());
    }
    out.g_min = g_min;
    out.g_max = g_max;

    let top = max_level(bits);
    let span = g_max - g_min;
    if span == 0.0 {
        out.levels.resize(values.len(), 0);
        return Ok(());
    }
    let scale = f64::from(top) / span;
    out.levels.resize(values.len(), 0);
    for (level, v) in out.levels.iter_mut().zip(values) {
        let pos = (v.abs() - g_min) * scale;
        // Truncation equals floor here since `pos >= 0`.
        let base = (pos as u32).min(top);
        let frac = pos - f64::from(base);
        // Branch-free on the coin flip; it is unpredictable by design.
        let up = u32::from(rng.random::<f64>() < frac);
        *level = (base + up).min(top) as u16;
    }
    Ok(())
}

/// Rebuilds the dense length-`V` gradient; pruned coordinates are zero.
pub fn dequantize(packet: &QuantizedGradient, mask: &PruneMask) -> Result<Vec<f64>> {
    if packet.len() != mask.kept_count() {
        return Err(Error::MalformedPacket(format!(
            "packet carries {} values but the mask keeps {}",
            packet.len(),
            mask.kept_count()
        )));
    }
    mask.scatter(&packet.values())
}

/// Closed-form bound on `E‖Q(g) − g‖²`: `K·(g_max − g_min)² / (4(2^δ − 1)²)`.
pub fn variance_bound(kept: usize, g_min: f64, g_max: f64, bits: u8) -> f64 {
    let levels = f64::from(max_level(bits));
    kept as f64 * (g_max - g_min).powi(2) / (4.0 * levels * levels)
}
