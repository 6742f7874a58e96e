//! Seeded randomness.
//!
//! Every random draw in the crate comes from ChaCha8 (`rand_chacha` 0.3), a
//! counter-based generator whose output is fixed across platforms. Independent
//! streams are derived from `(experiment, seed)` by SplitMix64 key expansion and
//! from the purpose/index pair through ChaCha's 64-bit stream id.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Rng = ChaCha8Rng;

/// What a stream is used for. Distinct purposes never share a stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u32)]
pub enum Purpose {
    GameGeneration = 1,
    RegretSampling = 2,
    QLearning = 3,
    Simulation = 4,
    Testing = 5,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Root of all streams for one `(experiment, seed)` pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedStream {
    pub experiment: u64,
    pub seed: u64,
}

impl SeedStream {
    pub fn new(experiment: u64, seed: u64) -> Self {
        Self { experiment, seed }
    }

    fn key(&self) -> [u8; 32] {
        let mut state = self.experiment ^ self.seed.rotate_left(32) ^ 0xA076_1D64_78BD_642F;
        let mut key = [0u8; 32];
        for chunk in key.chunks_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        key
    }

    /// Stream for `purpose`; `index` separates repeated uses (iteration, player, ...).
    pub fn rng(&self, purpose: Purpose, index: u32) -> Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key());
        rng.set_stream(((purpose as u64) << 32) | index as u64);
        rng
    }
}

/// Convenience for call sites that only have a single integer seed.
pub fn seeded(seed: u64, purpose: Purpose) -> Rng {
    SeedStream::new(0, seed).rng(purpose, 0)
}

/// Serializable position of a ChaCha8 stream, enough to resume it bit-exactly.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngCursor {
    pub key: String,
    pub stream: u64,
    /// Word position as a decimal string (the value is a u128).
    pub word_pos: String,
}

impl RngCursor {
    pub fn capture(rng: &Rng) -> Self {
        let key: String = rng.get_seed().iter().map(|b| format!("{b:02x}")).collect();
        Self {
            key,
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Result<Rng> {
        let bad = || Error::Argument(format!("malformed rng cursor {:?}", self));
        if self.key.len() != 64 {
            return Err(bad());
        }
        let mut key = [0u8; 32];
        for (i, byte) in key.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&self.key[2 * i..2 * i + 2], 16).map_err(|_| bad())?;
        }
        let word_pos: u128 = self.word_pos.parse().map_err(|_| bad())?;
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream);
        rng.set_word_pos(word_pos);
        Ok(rng)
    }
}
