//! Seeded, portable random streams.
//!
//! Every stochastic component draws from ChaCha8 keyed by a user seed, with
//! the 64-bit stream id selecting an independent subsequence. The algorithm
//! is fully specified, so streams are identical across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type StreamRng = ChaCha8Rng;

/// Identifier recorded in dataset manifests and checkpoints.
pub const RNG_ALGORITHM: &str = "chacha8/rand_chacha-0.3";

pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Serializable position of a [`StreamRng`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub algorithm: String,
    /// 32-byte key, hex encoded.
    pub key: String,
    pub stream: u64,
    /// Word position as a decimal string (it is a u128).
    pub word_pos: String,
}

impl RngState {
    pub fn capture(rng: &StreamRng) -> Self {
        let key = rng.get_seed().iter().map(|b| format!("{b:02x}")).collect();
        Self {
            algorithm: RNG_ALGORITHM.to_string(),
            key,
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Result<StreamRng> {
        let bad = |what: &str| Error::Checkpoint(format!("bad rng state: {what}"));
        if self.algorithm != RNG_ALGORITHM {
            return Err(bad("unknown algorithm"));
        }
        if self.key.len() != 64 {
            return Err(bad("key length"));
        }
        let mut key = [0u8; 32];
        for (i, byte) in key.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&self.key[2 * i..2 * i + 2], 16).map_err(|_| bad("key"))?;
        }
        let word_pos: u128 = self.word_pos.parse().map_err(|_| bad("word position"))?;
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream);
        rng.set_word_pos(word_pos);
        Ok(rng)
    }
}
