//! Flat binary model checkpoints.
//!
//! Layout, little-endian:
//!
//! | offset | size  | field                       |
//! |--------|-------|-----------------------------|
//! | 0      | 8     | magic `LTFLCKP1`            |
//! | 8      | 8     | `V` (u64)                   |
//! | 16     | 8     | round index (u64)           |
//! | 24     | 8·V   | weights (f64)               |

use std::fs;
use std::path::Path;

use super::ModelVector;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"LTFLCKP1";
const HEADER: usize = 24;

pub fn encode(model: &ModelVector, round: u64) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER + 8 * model.dim());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(model.dim() as u64).to_le_bytes());
    buf.extend_from_slice(&round.to_le_bytes());
    for w in model.as_slice() {
        buf.extend_from_slice(&w.to_le_bytes());
    }
    buf
}

pub fn decode(bytes: &[u8]) -> Result<(ModelVector, u64)> {
    let bad = |m: &str| Error::Dataset(format!("checkpoint: {m}"));
    if bytes.len() < HEADER || &bytes[..8] != MAGIC {
        return Err(bad("missing magic"));
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
    let dim = word(8) as usize;
    let round = word(16);
    if bytes.len() != HEADER + 8 * dim {
        return Err(bad(&format!("expected {} bytes, found {}", HEADER + 8 * dim, bytes.len())));
    }
    let weights = bytes[HEADER..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((ModelVector::new(weights)?, round))
}

pub fn write(path: &Path, model: &ModelVector, round: u64) -> Result<()> {
    fs::write(path, encode(model, round)).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<(ModelVector, u64)> {
    decode(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
