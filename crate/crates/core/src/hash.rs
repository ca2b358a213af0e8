//! Stable 64-bit hashing for seed derivation.
//!
//! The construction is part of the external contract (summaries built on two
//! machines from the same salt must agree bit for bit): FNV-1a over the input
//! bytes, then a splitmix64-style avalanche finalizer. Seeds are mapped to
//! the open unit interval through the top 52 bits, `((h >> 12) + 0.5) / 2^52`,
//! which never produces 0.0 or 1.0 exactly (the +0.5 stays representable).

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Byte-stream FNV-1a accumulator.
#[derive(Clone, Copy)]
pub struct Hash64(u64);

impl Hash64 {
    #[inline]
    pub fn new() -> Self {
        Hash64(FNV_OFFSET)
    }

    #[inline]
    pub fn write(mut self, bytes: &[u8]) -> Self {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
        self
    }

    #[inline]
    pub fn write_u64(self, v: u64) -> Self {
        self.write(&v.to_le_bytes())
    }

    /// Finish with an avalanche finalizer (splitmix64 mixing constants).
    #[inline]
    pub fn finish(self) -> u64 {
        let mut z = self.0;
        z ^= z >> 30;
        z = z.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z ^= z >> 27;
        z = z.wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
        z
    }
}

impl Default for Hash64 {
    fn default() -> Self {
        Self::new()
    }
}

/// Map a hash value to the open interval (0, 1).
#[inline]
pub fn unit_interval(h: u64) -> f64 {
    const SCALE: f64 = 1.0 / ((1u64 << 52) as f64);
    ((h >> 12) as f64 + 0.5) * SCALE
}
