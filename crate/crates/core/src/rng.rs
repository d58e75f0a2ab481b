//! Seeded randomness.
//!
//! Every random draw in this crate comes from SplitMix64 keyed by a
//! [`Seed`]'s `(value, stream)` pair. Standard normals use the Box–Muller
//! transform, evaluated with `libm` so that results are bit-identical on
//! every platform. Both choices are part of the reproducibility contract;
//! changing either one changes every generated video.

use serde::{Deserialize, Serialize};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const STREAM_SALT: u64 = 0xD1B5_4A32_D192_ED03;

/// SplitMix64 output finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed {
    pub value: u64,
    pub stream: u64,
}

impl Seed {
    pub const fn new(value: u64, stream: u64) -> Self {
        Self { value, stream }
    }

    pub const fn with_stream(self, stream: u64) -> Self {
        Self {
            value: self.value,
            stream,
        }
    }

    /// A sub-stream of this seed. Children of distinct seeds, and distinct
    /// children of one seed, never share a key in practice.
    pub fn child(self, index: u64) -> Self {
        Self {
            value: mix64(self.key() ^ GOLDEN_GAMMA),
            stream: index,
        }
    }

    fn key(self) -> u64 {
        mix64(self.value.wrapping_mul(GOLDEN_GAMMA) ^ mix64(self.stream ^ STREAM_SALT))
    }

    pub fn rng(self) -> SeedRng {
        SeedRng {
            state: self.key(),
            spare: None,
        }
    }
}

/// SplitMix64 generator with a Box–Muller normal transform.
#[derive(Debug, Clone)]
pub struct SeedRng {
    state: u64,
    spare: Option<f64>,
}

impl SeedRng {
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform on the open interval (0, 1), 53 bits of resolution.
    pub fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.next_open01();
        let u2 = self.next_open01();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * libm::sin(theta));
        r * libm::cos(theta)
    }
}
