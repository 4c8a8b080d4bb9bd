//! Byte layout of an uploaded gradient.
//!
//! All integers little-endian. `K` is the number of kept coordinates.
//!
//! | offset      | size          | field                                   |
//! |-------------|---------------|-----------------------------------------|
//! | 0           | 4             | magic `LTGP`                            |
//! | 4           | 4             | device id (u32)                         |
//! | 8           | 4             | round (u32)                             |
//! | 12          | 4             | `V` (u32)                               |
//! | 16          | 1             | bits per magnitude `δ` (u8)             |
//! | 17          | 1             | reserved, zero                          |
//! | 18          | 2             | header overhead `ξ` in bits (u16)       |
//! | 20          | 4             | pruning ratio (f32)                     |
//! | 24          | 4             | `K` (u32)                               |
//! | 28          | 4             | `g_min` (f32)                           |
//! | 32          | 4             | `g_max` (f32)                           |
//! | 36          | 4·K           | kept indices, ascending (u32)           |
//! | 36 + 4K     | ⌈K·δ / 8⌉     | levels, `δ` bits each, LSB-first        |
//! | …           | ⌈K / 8⌉       | sign bits, 1 = negative, LSB-first      |
//!
//! Bounds travel as `f32`, so a decoded packet reconstructs magnitudes on the
//! `f32`-rounded grid. The simulator itself never round-trips through bytes;
//! the layout exists to pin down what a payload physically contains.

use super::prune::PruneMask;
use super::quantize::QuantizedGradient;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"LTGP";
pub const HEADER_BYTES: usize = 36;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientPacket {
    pub device: u32,
    pub round: u32,
    pub overhead_bits: u16,
    pub mask: PruneMask,
    pub quantized: QuantizedGradient,
}

impl GradientPacket {
    pub fn new(device: u32, round: u32, overhead_bits: u16, mask: PruneMask, quantized: QuantizedGradient) -> Result<Self> {
        if mask.kept_count() != quantized.len() {
            return Err(Error::MalformedPacket(format!(
                "mask keeps {} coordinates, packet carries {}",
                mask.kept_count(),
                quantized.len()
            )));
        }
        Ok(Self {
            device,
            round,
            overhead_bits,
            mask,
            quantized,
        })
    }

    /// Nominal payload charged by the cost model: `V·δ + ξ` before the `(1 − ρ)` factor.
    pub fn nominal_payload_bits(&self) -> f64 {
        super::payload_bits(self.mask.dim(), f64::from(self.quantized.bits()), f64::from(self.overhead_bits))
    }

    /// Bits occupied by the packed levels alone.
    pub fn level_bits(&self) -> usize {
        self.quantized.len() * usize::from(self.quantized.bits())
    }

    pub fn encoded_len(&self) -> usize {
        let k = self.quantized.len();
        HEADER_BYTES + 4 * k + self.level_bits().div_ceil(8) + k.div_ceil(8)
    }

    pub fn dequantize(&self) -> Result<Vec<f64>> {
        super::dequantize(&self.quantized, &self.mask)
    }

    pub fn encode(&self) -> Vec<u8> {
        let q = &self.quantized;
        let k = q.len();
        let mut buf = Vec::with_capacity(self.encoded_len());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&self.device.to_le_bytes());
        buf.extend_from_slice(&self.round.to_le_bytes());
        buf.extend_from_slice(&(self.mask.dim() as u32).to_le_bytes());
        buf.push(q.bits());
        buf.push(0);
        buf.extend_from_slice(&self.overhead_bits.to_le_bytes());
        buf.extend_from_slice(&(self.mask.ratio() as f32).to_le_bytes());
        buf.extend_from_slice(&(k as u32).to_le_bytes());
        buf.extend_from_slice(&(q.g_min() as f32).to_le_bytes());
        buf.extend_from_slice(&(q.g_max() as f32).to_le_bytes());
        for i in self.mask.kept() {
            buf.extend_from_slice(&i.to_le_bytes());
        }
        let mut bits = BitWriter::new(&mut buf);
        for &l in q.levels() {
            bits.push(u32::from(l), q.bits());
        }
        bits.finish();
        let mut bits = BitWriter::new(&mut buf);
        for &neg in q.negative() {
            bits.push(u32::from(neg), 1);
        }
        bits.finish();
        buf
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let bad = |m: String| Error::MalformedPacket(m);
        if bytes.len() < HEADER_BYTES || &bytes[..4] != MAGIC {
            return Err(bad("missing magic or truncated header".into()));
        }
        let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
        let f32_at = |at: usize| f32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
        let device = u32_at(4);
        let round = u32_at(8);
        let dim = u32_at(12) as usize;
        let bits = bytes[16];
        let overhead_bits = u16::from_le_bytes([bytes[18], bytes[19]]);
        let ratio = f32_at(20);
        let k = u32_at(24) as usize;
        let g_min = f64::from(f32_at(28));
        let g_max = f64::from(f32_at(32));
        if k > dim {
            return Err(bad(format!("K = {k} exceeds V = {dim}")));
        }
        let levels_len = (k * usize::from(bits)).div_ceil(8);
        let expected = HEADER_BYTES + 4 * k + levels_len + k.div_ceil(8);
        if bytes.len() != expected {
            return Err(bad(format!("expected {expected} bytes, found {}", bytes.len())));
        }
        let kept: Vec<u32> = (0..k).map(|i| u32_at(HEADER_BYTES + 4 * i)).collect();
        let mask = PruneMask::from_kept(dim, kept)?;
        if (mask.ratio() as f32) != ratio {
            return Err(bad(format!("header ratio {ratio} disagrees with mask ratio {}", mask.ratio())));
        }
        let start = HEADER_BYTES + 4 * k;
        let mut reader = BitReader::new(&bytes[start..start + levels_len]);
        let levels = (0..k).map(|_| reader.take(bits) as u16).collect();
        let mut reader = BitReader::new(&bytes[start + levels_len..]);
        let negative = (0..k).map(|_| reader.take(1) == 1).collect();
        let quantized = QuantizedGradient::from_parts(levels, negative, g_min, g_max, bits)?;
        Self::new(device, round, overhead_bits, mask, quantized)
    }
}

struct BitWriter<'a> {
    out: &'a mut Vec<u8>,
    acc: u64,
    filled: u8,
}

impl<'a> BitWriter<'a> {
    fn new(out: &'a mut Vec<u8>) -> Self {
        Self { out, acc: 0, filled: 0 }
    }

    fn push(&mut self, value: u32, width: u8) {
        self.acc |= u64::from(value) << self.filled;
        self.filled += width;
        while self.filled >= 8 {
            self.out.push(self.acc as u8);
            self.acc >>= 8;
            self.filled -= 8;
        }
    }

    fn finish(self) {
        if self.filled > 0 {
            self.out.push(self.acc as u8);
        }
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, width: u8) -> u32 {
        let mut v = 0u32;
        for b in 0..usize::from(width) {
            let bit = (self.bytes[(self.pos + b) / 8] >> ((self.pos + b) % 8)) & 1;
            v |= u32::from(bit) << b;
        }
        self.pos += usize::from(width);
        v
    }
}
