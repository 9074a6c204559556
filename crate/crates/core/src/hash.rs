//! Counter-based deterministic randomness.
//!
//! Every random quantity attached to a lattice site is a pure function of
//! `(seed, site, stream)`, so environments and synthetic fields can be
//! evaluated lazily on unbounded domains with no global state.

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash of a seed, an integer site and a stream index.
#[inline]
pub fn site_key(seed: u64, site: [i64; 3], stream: u64) -> u64 {
    let mut h = mix64(seed ^ 0xA076_1D64_78BD_642F);
    for c in site {
        h = mix64(h ^ (c as u64));
    }
    mix64(h ^ stream.wrapping_mul(0xE703_7ED1_A0B4_28DB))
}

/// Uniform in `[0, 1)` from the top 53 bits.
#[inline]
pub fn unit_interval(u: u64) -> f64 {
    (u >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform on `(-1, 1)`, exactly symmetric about zero: the 2^53 attainable
/// values are `±(2k + 1) / 2^53`.
#[inline]
pub fn unit_symmetric(u: u64) -> f64 {
    let k = (u >> 11) as i64;
    let n = 2 * k + 1 - (1i64 << 53);
    n as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Derives an independent 64-bit seed for a sub-task (e.g. one Monte Carlo
/// replica) from a base seed.
#[inline]
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    mix64(mix64(base) ^ tag.wrapping_mul(0x2545_F491_4F6C_DD1D))
}
