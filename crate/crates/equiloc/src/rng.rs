//! Counter-based seeded random streams.
//!
//! Every draw site (a demand node or a node pair, within one scenario) gets
//! its own keyed substream, so scenario `n` of a set never changes when more
//! scenarios are appended, and generation order is irrelevant. Streams are
//! built from a SplitMix64 walk over the key components; output is identical
//! across runs and across thread counts.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Domain separation tags for substream keys.
pub(crate) mod domain {
    pub const DEMAND: u64 = 0x01;
    pub const DISTANCE: u64 = 0x02;
    pub const LOCAL_SEARCH: u64 = 0x03;
    pub const REPLICATION: u64 = 0x04;
}

/// FNV-1a over arbitrary bytes; used to fold strings into stream keys.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut acc = 0xcbf2_9ce4_8422_2325u64;
    for b in bytes {
        acc ^= *b as u64;
        acc = acc.wrapping_mul(0x1000_0000_01b3);
    }
    acc
}

/// A deterministic stream keyed by an arbitrary tuple of 64-bit components.
#[derive(Debug, Clone)]
pub(crate) struct KeyedStream {
    state: u64,
}

impl KeyedStream {
    pub fn new(parts: &[u64]) -> Self {
        let mut state = 0x6A09_E667_F3BC_C909u64; // arbitrary non-zero start
        for &p in parts {
            state = mix(state.wrapping_add(GOLDEN).wrapping_add(p));
        }
        KeyedStream { state }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix(self.state)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in (0, 1]; safe as a logarithm argument.
    #[inline]
    pub fn next_open_f64(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller (one variate per pair of uniforms).
    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        let u1 = self.next_open_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Uniform integer in [0, bound) by rejection-free scaling.
    #[inline]
    pub fn next_index(&mut self, bound: usize) -> usize {
        debug_assert!(bound > 0);
        ((self.next_f64() * bound as f64) as usize).min(bound - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_key_same_sequence() {
        let mut a = KeyedStream::new(&[1, 2, 3]);
        let mut b = KeyedStream::new(&[1, 2, 3]);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn different_keys_diverge() {
        let mut a = KeyedStream::new(&[1, 2, 3]);
        let mut b = KeyedStream::new(&[1, 2, 4]);
        let same = (0..64).filter(|_| a.next_u64() == b.next_u64()).count();
        assert!(same < 2);
    }

    #[test]
    fn uniform_range() {
        let mut s = KeyedStream::new(&[7]);
        for _ in 0..10_000 {
            let u = s.next_f64();
            assert!((0.0..1.0).contains(&u));
            let v = s.next_open_f64();
            assert!(v > 0.0 && v <= 1.0);
        }
    }

    #[test]
    fn normal_moments() {
        let mut s = KeyedStream::new(&[11]);
        let n = 200_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let z = s.next_normal();
            sum += z;
            sumsq += z * z;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }
}
