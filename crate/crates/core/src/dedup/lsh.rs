use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64_with_seed;

use super::{DedupError, MinHashSignature};
use crate::numeric::{midpoint_integral, Real};

/// Integration step of the banding objective.
pub const OBJECTIVE_STEP: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LshParams {
    pub bands: usize,
    pub rows: usize,
    pub threshold: f64,
    pub num_perm: usize,
}

impl LshParams {
    pub fn new(bands: usize, rows: usize, threshold: f64, num_perm: usize) -> Result<Self, DedupError> {
        if bands == 0 || rows == 0 || bands * rows > num_perm || !(threshold > 0.0 && threshold < 1.0) {
            return Err(DedupError::InvalidParams {
                bands,
                rows,
                num_perm,
            });
        }
        Ok(LshParams {
            bands,
            rows,
            threshold,
            num_perm,
        })
    }
}

/// Probability that a pair with Jaccard `s` shares at least one band.
pub fn candidate_probability<T: Real>(s: T, bands: usize, rows: usize) -> T {
    let r = i32::try_from(rows).unwrap_or(i32::MAX);
    let b = i32::try_from(bands).unwrap_or(i32::MAX);
    T::one() - (T::one() - s.powi(r)).powi(b)
}

/// False-positive and false-negative areas of one banding shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandingObjective<T> {
    pub false_positive: T,
    pub false_negative: T,
    pub weighted: T,
}

pub fn banding_objective<T: Real>(
    threshold: T,
    bands: usize,
    rows: usize,
    fp_weight: T,
    fn_weight: T,
) -> BandingObjective<T> {
    let step = T::lit(OBJECTIVE_STEP);
    let false_positive =
        midpoint_integral(|s| candidate_probability(s, bands, rows), T::zero(), threshold, step);
    let false_negative = midpoint_integral(
        |s| T::one() - candidate_probability(s, bands, rows),
        threshold,
        T::one(),
        step,
    );
    BandingObjective {
        false_positive,
        false_negative,
        weighted: fp_weight * false_positive + fn_weight * false_negative,
    }
}

/// Exhaustive search over `(b, r)` with `b·r ≤ num_perm` for the minimum
/// weighted objective. Ties go to the smaller `b`, then the smaller `r`.
pub fn optimal_shape<T: Real>(
    threshold: T,
    num_perm: usize,
    fp_weight: T,
    fn_weight: T,
) -> (usize, usize, BandingObjective<T>) {
    let tol = T::lit(1e-12);
    let mut best: Option<(usize, usize, BandingObjective<T>)> = None;
    for bands in 1..=num_perm {
        for rows in 1..=num_perm / bands {
            let obj = banding_objective(threshold, bands, rows, fp_weight, fn_weight);
            let better = match &best {
                None => true,
                Some((_, _, cur)) => obj.weighted < cur.weighted - tol * cur.weighted.abs().max(T::one()),
            };
            if better {
                best = Some((bands, rows, obj));
            }
        }
    }
    best.expect("num_perm ≥ 1 yields at least one shape")
}

pub fn optimal_params(
    threshold: f64,
    num_perm: usize,
    fp_weight: f64,
    fn_weight: f64,
) -> Result<LshParams, DedupError> {
    if num_perm == 0 || !(threshold > 0.0 && threshold < 1.0) {
        return Err(DedupError::InvalidParams {
            bands: 0,
            rows: 0,
            num_perm,
        });
    }
    let (bands, rows, _) = optimal_shape(threshold, num_perm, fp_weight, fn_weight);
    LshParams::new(bands, rows, threshold, num_perm)
}

/// Banded index over signatures. Build by inserting, then query.
#[derive(Debug, Clone)]
pub struct LshIndex {
    params: LshParams,
    seed: Option<u64>,
    tables: Vec<HashMap<u64, Vec<u32>>>,
    ids: Vec<String>,
    positions: HashMap<String, u32>,
}

impl LshIndex {
    pub fn new(params: LshParams) -> Self {
        LshIndex {
            params,
            seed: None,
            tables: vec![HashMap::new(); params.bands],
            ids: Vec::new(),
            positions: HashMap::new(),
        }
    }

    pub fn params(&self) -> &LshParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn item_id(&self, position: u32) -> &str {
        &self.ids[position as usize]
    }

    fn check(&self, sig: &MinHashSignature) -> Result<(), DedupError> {
        if sig.num_perm() != self.params.num_perm {
            return Err(DedupError::WrongNumPerm {
                item_id: sig.item_id.clone(),
                expected: self.params.num_perm,
                found: sig.num_perm(),
            });
        }
        if let Some(seed) = self.seed.filter(|s| *s != sig.seed) {
            return Err(DedupError::SignatureMismatch {
                left: (self.params.num_perm, seed),
                right: (sig.num_perm(), sig.seed),
            });
        }
        Ok(())
    }

    fn band_keys<'a>(&self, sig: &'a MinHashSignature) -> impl Iterator<Item = u64> + 'a {
        let rows = self.params.rows;
        (0..self.params.bands).map(move |band| {
            let bytes: Vec<u8> = sig.slots[band * rows..(band + 1) * rows]
                .iter()
                .flat_map(|s| s.to_le_bytes())
                .collect();
            xxh3_64_with_seed(&bytes, band as u64)
        })
    }

    pub fn insert(&mut self, sig: &MinHashSignature) -> Result<(), DedupError> {
        self.check(sig)?;
        if self.positions.contains_key(&sig.item_id) {
            return Err(DedupError::DuplicateItem(sig.item_id.clone()));
        }
        self.seed = Some(sig.seed);
        let pos = u32::try_from(self.ids.len()).expect("fewer than 2^32 items");
        let keys: Vec<u64> = self.band_keys(sig).collect();
        for (table, key) in self.tables.iter_mut().zip(keys) {
            table.entry(key).or_default().push(pos);
        }
        self.ids.push(sig.item_id.clone());
        self.positions.insert(sig.item_id.clone(), pos);
        Ok(())
    }

    pub fn build<'a>(
        signatures: impl IntoIterator<Item = &'a MinHashSignature>,
        params: LshParams,
    ) -> Result<Self, DedupError> {
        let mut index = LshIndex::new(params);
        for sig in signatures {
            index.insert(sig)?;
        }
        Ok(index)
    }

    /// Items sharing at least one band with `sig`, excluding `sig` itself.
    pub fn query(&self, sig: &MinHashSignature) -> Result<BTreeSet<String>, DedupError> {
        self.check(sig)?;
        let mut out = BTreeSet::new();
        for (table, key) in self.tables.iter().zip(self.band_keys(sig)) {
            for &pos in table.get(&key).into_iter().flatten() {
                let id = &self.ids[pos as usize];
                if *id != sig.item_id {
                    out.insert(id.clone());
                }
            }
        }
        Ok(out)
    }

    /// Every indexed pair `(i, j)`, `i < j`, sharing at least one band.
    pub fn candidate_pairs(&self) -> BTreeSet<(u32, u32)> {
        let mut pairs = BTreeSet::new();
        for bucket in self.tables.iter().flat_map(|t| t.values()) {
            for (k, &a) in bucket.iter().enumerate() {
                for &b in &bucket[k + 1..] {
                    pairs.insert((a.min(b), a.max(b)));
                }
            }
        }
        pairs
    }
}

/// Free-function form of [`LshIndex::build`].
pub fn lsh_index<'a>(
    signatures: impl IntoIterator<Item = &'a MinHashSignature>,
    params: LshParams,
) -> Result<LshIndex, DedupError> {
    LshIndex::build(signatures, params)
}

/// Free-function form of [`LshIndex::query`].
pub fn lsh_query(index: &LshIndex, sig: &MinHashSignature) -> Result<BTreeSet<String>, DedupError> {
    index.query(sig)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dedup::MinHasher;
    use crate::ingest::ShingleSet;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn closed_form_tiny_shapes() {
        // All three shapes with b·r ≤ 2 have objective 1/8 in closed form:
        // (1,1): ∫₀^½ s + ∫½¹ (1−s)          = 1/8 + 1/8, halved
        // (1,2): ∫₀^½ s² + ∫½¹ (1−s²)        = 1/24 + 5/24, halved
        // (2,1): ∫₀^½ (2s−s²) + ∫½¹ (1−s)²   = 5/24 + 1/24, halved
        for (b, r) in [(1, 1), (1, 2), (2, 1)] {
            let obj = banding_objective(0.5f64, b, r, 0.5, 0.5);
            assert!((obj.weighted - 0.125).abs() < 1e-6, "{b}x{r}: {}", obj.weighted);
        }
        let p = optimal_params(0.5, 2, 0.5, 0.5).unwrap();
        assert_eq!((p.bands, p.rows), (1, 1));
    }

    #[test]
    fn objective_is_monotone_in_num_perm() {
        let mut last = f64::INFINITY;
        for n in [4, 8, 16, 32, 64] {
            let (_, _, obj) = optimal_shape(0.8f64, n, 0.5, 0.5);
            assert!(obj.weighted <= last + 1e-15);
            last = obj.weighted;
        }
    }

    #[test]
    fn invalid_params() {
        assert!(LshParams::new(9, 13, 0.8, 100).is_err());
        assert!(LshParams::new(0, 13, 0.8, 128).is_err());
        assert!(LshParams::new(9, 13, 1.0, 128).is_err());
        assert!(optimal_params(0.0, 128, 0.5, 0.5).is_err());
    }

    #[test]
    fn candidate_probability_values() {
        assert!((candidate_probability(0.9f64, 9, 13) - 0.928).abs() < 0.001);
        assert_eq!(candidate_probability(1.0f64, 9, 13), 1.0);
        assert_eq!(candidate_probability(0.0f64, 9, 13), 0.0);
    }

    fn sig(id: &str, hashes: Vec<u64>, hasher: &MinHasher) -> MinHashSignature {
        hasher.signature(&ShingleSet::from_hashes(id, hashes)).unwrap()
    }

    #[test]
    fn query_semantics() {
        let hasher = MinHasher::new(128, 11);
        let params = LshParams::new(9, 13, 0.8, 128).unwrap();
        let a = sig("a", (0..100).collect(), &hasher);
        let a2 = sig("a2", (0..100).collect(), &hasher);
        let far = sig("far", (1000..1100).collect(), &hasher);
        let index = lsh_index([&a, &a2, &far], params).unwrap();
        assert_eq!(lsh_query(&index, &a).unwrap(), BTreeSet::from(["a2".to_string()]));
        assert!(index.query(&far).unwrap().is_empty());
        assert_eq!(index.candidate_pairs(), BTreeSet::from([(0, 1)]));

        let short = sig("s", (0..100).collect(), &MinHasher::new(64, 11));
        assert!(matches!(index.query(&short), Err(DedupError::WrongNumPerm { .. })));
        let reseeded = sig("r", (0..100).collect(), &MinHasher::new(128, 12));
        assert!(index.query(&reseeded).is_err());

        let mut dup = LshIndex::new(params);
        dup.insert(&a).unwrap();
        assert!(matches!(dup.insert(&a), Err(DedupError::DuplicateItem(_))));
    }

    #[test]
    fn disjoint_sets_rarely_collide() {
        let params = LshParams::new(9, 13, 0.8, 128).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let trials = 300;
        let mut hits = 0;
        for t in 0..trials {
            let hasher = MinHasher::new(128, t);
            let a = sig("a", (0..200).map(|_| rng.random()).collect(), &hasher);
            let b = sig("b", (0..200).map(|_| rng.random()).collect(), &hasher);
            let index = lsh_index([&a], params).unwrap();
            if !index.query(&b).unwrap().is_empty() {
                hits += 1;
            }
        }
        assert!(f64::from(hits) / f64::from(trials as u32) <= 0.01);
    }
}
