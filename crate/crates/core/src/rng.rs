//! Seeded random streams.
//!
//! Every random decision in a simulation is drawn from a ChaCha8 stream keyed
//! by `(master_seed, device, round, purpose)`. Changing the device count or
//! the number of rounds therefore never reshuffles the draws of an unrelated
//! device.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use rand_chacha::ChaCha8Rng as SimRng;

/// What a stream is used for. Distinct purposes never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Purpose {
    Dataset = 1,
    Partition = 2,
    DeviceProfile = 3,
    ModelInit = 4,
    Channel = 5,
    Quantization = 6,
    Controller = 7,
    Fading = 8,
    Estimator = 9,
}

/// Device index used for streams that are not tied to a device.
pub const GLOBAL: u32 = u32::MAX;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream for `(master_seed, device, round, purpose)`.
pub fn stream(master_seed: u64, device: u32, round: u32, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(master_seed));
    let id = (u64::from(purpose as u8) << 56) ^ (u64::from(device) << 24) ^ u64::from(round);
    rng.set_stream(splitmix(id));
    rng
}

/// Stream that is not tied to a device or a round.
pub fn global_stream(master_seed: u64, purpose: Purpose) -> ChaCha8Rng {
    stream(master_seed, GLOBAL, 0, purpose)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let draw = |mut r: ChaCha8Rng| (0..8).map(|_| r.random::<u64>()).collect::<Vec<_>>();
        let a = draw(stream(7, 3, 11, Purpose::Channel));
        assert_eq!(a, draw(stream(7, 3, 11, Purpose::Channel)));

        let mut other_device = stream(7, 4, 11, Purpose::Channel);
        let mut other_round = stream(7, 3, 12, Purpose::Channel);
        let mut other_purpose = stream(7, 3, 11, Purpose::Quantization);
        assert_ne!(a[0], other_device.random::<u64>());
        assert_ne!(a[0], other_round.random::<u64>());
        assert_ne!(a[0], other_purpose.random::<u64>());
    }
}
