//! Small keyed hash / random stream (SplitMix64).
//!
//! All randomness in the crate flows through this: cell jitter in the
//! placement module and sample points in the self-check suite. Streams are
//! keyed by (seed, index) so results are independent of evaluation order
//! and bit-reproducible across platforms and thread counts.

pub(crate) fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform in [0, 1) from the top 53 bits.
pub(crate) fn unit_f64(u: u64) -> f64 {
    (u >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[derive(Debug, Clone)]
pub(crate) struct Stream(u64);

impl Stream {
    /// Stream keyed by a seed and up to three indices.
    pub fn keyed(seed: u64, key: &[u64]) -> Self {
        let mut s = seed ^ 0xA076_1D64_78BD_642F;
        for &v in key {
            s = s.wrapping_add(v.wrapping_mul(0xD6E8_FEB8_6659_FD93));
            s = splitmix64(&mut s);
        }
        Self(s)
    }

    pub fn next_u64(&mut self) -> u64 {
        splitmix64(&mut self.0)
    }

    pub fn next_unit(&mut self) -> f64 {
        unit_f64(self.next_u64())
    }

    /// Uniform in [lo, hi).
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_unit()
    }
}
