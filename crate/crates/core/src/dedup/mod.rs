//! MinHash signatures, LSH banding and near-duplicate clustering.

mod cluster;
mod lsh;
mod minhash;
pub mod signature_file;

use rayon::prelude::*;
use thiserror::Error;

use crate::ingest::ShingleSet;

pub use cluster::{cluster, cluster_language, Cluster, Verification};
pub use lsh::{
    banding_objective, candidate_probability, lsh_index, lsh_query, optimal_params, optimal_shape,
    BandingObjective, LshIndex, LshParams, OBJECTIVE_STEP,
};
pub use minhash::{estimate_jaccard, minhash, MinHashSignature, MinHasher, DEFAULT_NUM_PERM, MERSENNE_61};

/// Default near-duplicate similarity threshold.
pub const DEFAULT_THRESHOLD: f64 = 0.8;

/// Signatures for many shingle sets, computed in parallel, in input order.
pub fn compute_signatures(
    sets: &[ShingleSet],
    num_perm: usize,
    seed: u64,
) -> Result<Vec<MinHashSignature>, DedupError> {
    let hasher = MinHasher::new(num_perm, seed);
    sets.par_iter().map(|s| hasher.signature(s)).collect()
}

#[derive(Debug, Error)]
pub enum DedupError {
    #[error("item {0} has no shingles")]
    EmptyShingles(String),
    #[error("signature parameters differ: (num_perm, seed) {left:?} vs {right:?}")]
    SignatureMismatch {
        left: (usize, u64),
        right: (usize, u64),
    },
    #[error("signature for {item_id} has {found} slots, index expects {expected}")]
    WrongNumPerm {
        item_id: String,
        expected: usize,
        found: usize,
    },
    #[error("invalid LSH parameters: {bands} bands × {rows} rows over {num_perm} permutations")]
    InvalidParams {
        bands: usize,
        rows: usize,
        num_perm: usize,
    },
    #[error("item {0} indexed twice")]
    DuplicateItem(String),
    #[error("no signature for item {0}")]
    MissingSignature(String),
    #[error("no shingle set for item {0}")]
    MissingShingles(String),
    #[error("signature file: {0}")]
    SignatureFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
