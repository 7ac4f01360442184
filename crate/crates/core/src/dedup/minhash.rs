use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DedupError;
use crate::ingest::ShingleSet;

/// 2^61 − 1.
pub const MERSENNE_61: u64 = (1 << 61) - 1;

pub const DEFAULT_NUM_PERM: usize = 128;

#[inline]
fn mod_mersenne(x: u128) -> u64 {
    let p = u128::from(MERSENNE_61);
    let mut r = (x & p) + (x >> 61);
    r = (r & p) + (r >> 61);
    let mut r = r as u64;
    if r >= MERSENNE_61 {
        r -= MERSENNE_61;
    }
    r
}

/// A family of `num_perm` universal hash functions `(a·h + b) mod p`,
/// drawn deterministically from `seed`.
#[derive(Debug, Clone)]
pub struct MinHasher {
    seed: u64,
    coeffs: Vec<(u64, u64)>,
}

impl MinHasher {
    pub fn new(num_perm: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs = (0..num_perm)
            .map(|_| {
                // odd a in [1, p − 2]
                let a = 2 * rng.random_range(0..(MERSENNE_61 - 1) / 2) + 1;
                let b = rng.random_range(0..MERSENNE_61);
                (a, b)
            })
            .collect();
        MinHasher { seed, coeffs }
    }

    pub fn num_perm(&self) -> usize {
        self.coeffs.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn signature(&self, shingles: &ShingleSet) -> Result<MinHashSignature, DedupError> {
        if shingles.is_empty() {
            return Err(DedupError::EmptyShingles(shingles.item_id.clone()));
        }
        let mut slots = vec![u64::MAX; self.coeffs.len()];
        for &h in shingles.hashes() {
            let h = u128::from(h);
            for (slot, &(a, b)) in slots.iter_mut().zip(&self.coeffs) {
                let v = mod_mersenne(u128::from(a) * h + u128::from(b));
                if v < *slot {
                    *slot = v;
                }
            }
        }
        Ok(MinHashSignature {
            item_id: shingles.item_id.clone(),
            seed: self.seed,
            slots,
        })
    }
}

/// Convenience wrapper over [`MinHasher`].
pub fn minhash(
    shingles: &ShingleSet,
    num_perm: usize,
    seed: u64,
) -> Result<MinHashSignature, DedupError> {
    MinHasher::new(num_perm, seed).signature(shingles)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinHashSignature {
    pub item_id: String,
    pub seed: u64,
    pub slots: Vec<u64>,
}

impl MinHashSignature {
    pub fn num_perm(&self) -> usize {
        self.slots.len()
    }

    fn check_compatible(&self, other: &MinHashSignature) -> Result<(), DedupError> {
        if self.num_perm() != other.num_perm() || self.seed != other.seed {
            return Err(DedupError::SignatureMismatch {
                left: (self.num_perm(), self.seed),
                right: (other.num_perm(), other.seed),
            });
        }
        Ok(())
    }
}

/// Fraction of slots on which two signatures agree.
pub fn estimate_jaccard(a: &MinHashSignature, b: &MinHashSignature) -> Result<f64, DedupError> {
    a.check_compatible(b)?;
    if a.slots.is_empty() {
        return Ok(1.0);
    }
    let equal = a.slots.iter().zip(&b.slots).filter(|(x, y)| x == y).count();
    Ok(equal as f64 / a.slots.len() as f64)
}
