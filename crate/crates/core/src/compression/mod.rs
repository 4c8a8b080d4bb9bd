//! Gradient compression: magnitude pruning, stochastic quantization and the
//! packet that carries the result.

mod packet;
mod prune;
mod quantize;

pub use packet::{GradientPacket, HEADER_BYTES, MAGIC};
pub use prune::{importance_scores, prune, pruned_count, PruneMask};
pub use quantize::{dequantize, quantize, quantize_into, variance_bound, QuantizedGradient, MAX_BITS};

/// Default per-packet overhead `ξ`: two 32-bit bounds and a 32-bit header.
pub const DEFAULT_OVERHEAD_BITS: f64 = 96.0;

/// Nominal payload `V·δ + ξ` in bits.
pub fn payload_bits(dim: usize, bits: f64, overhead_bits: f64) -> f64 {
    dim as f64 * bits + overhead_bits
}
