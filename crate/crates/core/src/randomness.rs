//! Brownian paths on a fine uniform grid over `[0, 1]`.
//!
//! Every path is generated from its own counter-based stream keyed by
//! `(master_seed, tag, path_index)`, so results do not depend on how paths
//! are scheduled across worker threads. All schemes and the reference
//! solution of a study consume the same path: coarse-grid increments are
//! obtained by summing fine increments, never by fresh sampling.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

use crate::real::{rn, Real};

/// Master seed plus a purpose tag; `(seed, tag, path_index)` pins a stream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub tag: String,
}

impl SeedSpec {
    pub fn new(master_seed: u64, tag: impl Into<String>) -> Self {
        SeedSpec {
            master_seed,
            tag: tag.into(),
        }
    }

    fn key(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update(self.master_seed.to_le_bytes());
        hasher.update([0u8]);
        hasher.update(self.tag.as_bytes());
        hasher.finalize().into()
    }

    /// The dedicated generator for one path index.
    pub fn rng_for_path(&self, path_index: u64) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::from_seed(self.key());
        rng.set_stream(path_index);
        rng
    }
}

/// One Brownian path: `n_fine` increments `~ Normal(0, 1/n_fine)` and their
/// prefix sums `W_{j/n_fine}`.
///
/// Increments are snapped to the dyadic grid of
/// [`Real::increment_quantum`], which keeps every partial sum exact; see
/// the trait docs.
#[derive(Clone, Debug, PartialEq)]
pub struct BrownianPath<R: Real> {
    increments: Vec<R>,
    prefix: Vec<R>,
}

impl<R: Real> BrownianPath<R> {
    /// Generate path `path_index` of the stream family `seed`.
    ///
    /// Panics if `n_fine == 0`.
    pub fn generate(seed: &SeedSpec, path_index: u64, n_fine: usize) -> Self {
        assert!(n_fine >= 1, "n_fine must be at least 1");
        let mut rng = seed.rng_for_path(path_index);
        let scale = rn::<R>(n_fine).recip().sqrt();
        let quantum = R::increment_quantum();
        let increments: Vec<R> = (0..n_fine)
            .map(|_| {
                let z = R::sample_standard_normal(&mut rng);
                (z * scale / quantum).round() * quantum
            })
            .collect();
        Self::from_increments(increments)
    }

    /// Wrap existing increments (prefix sums are accumulated left to right).
    pub fn from_increments(increments: Vec<R>) -> Self {
        assert!(
            !increments.is_empty(),
            "a path needs at least one increment"
        );
        let mut prefix = Vec::with_capacity(increments.len() + 1);
        let mut acc = R::zero();
        prefix.push(acc);
        for &inc in &increments {
            acc += inc;
            prefix.push(acc);
        }
        BrownianPath { increments, prefix }
    }

    pub fn n_fine(&self) -> usize {
        self.increments.len()
    }

    pub fn increments(&self) -> &[R] {
        &self.increments
    }

    /// `W_{j/n_fine}` from the stored prefix sums. Panics if `j > n_fine`.
    pub fn value_at(&self, j: usize) -> R {
        self.prefix[j]
    }

    /// `W_1`.
    pub fn terminal(&self) -> R {
        self.prefix[self.n_fine()]
    }

    /// Increments on a coarser grid of `n_coarse` steps; coarse increment
    /// `i` sums the fine increments of chunk `i` left to right.
    ///
    /// Panics if `n_coarse` is zero or does not divide `n_fine`.
    pub fn coarsen(&self, n_coarse: usize) -> Vec<R> {
        let n_fine = self.n_fine();
        assert!(
            n_coarse >= 1 && n_fine.is_multiple_of(n_coarse),
            "n_coarse {n_coarse} must divide n_fine {n_fine}"
        );
        let stride = n_fine / n_coarse;
        self.increments
            .chunks_exact(stride)
            .map(|chunk| chunk.iter().fold(R::zero(), |acc, &x| acc + x))
            .collect()
    }
}
