//! Parallel/sequential dispatch for data-parallel loops.
//!
//! With the `parallel` feature (default) the helpers run on rayon; without
//! it they degrade to plain iterators. Every call site maps independent
//! tasks and collects in index order, and all randomness is derived from
//! per-task seeds, so both builds produce identical results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n` and collects results in index order.
#[cfg(feature = "parallel")]
pub(crate) fn map_indexed<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

/// Splitmix64-style mixer for deriving independent task seeds.
///
/// Derived seeds depend only on `(base, stream)`, never on scheduling, so
/// adding tasks or reordering execution cannot reshuffle another task's
/// random stream.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Two-level seed derivation for nested task trees (trial -> restart, ...).
pub fn derive_seed2(base: u64, a: u64, b: u64) -> u64 {
    derive_seed(derive_seed(base, a), b)
}
