use std::collections::BTreeMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CandidateKey, EvaluationError};
use crate::linkage::Candidate;

/// One score stratum and how many candidates to draw from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

/// Score strata. The first bin is closed `[lower, upper]`, the rest are
/// half-open `(lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedPlan {
    bins: Vec<Bin>,
}

impl StratifiedPlan {
    pub fn new(bins: Vec<Bin>) -> Result<Self, EvaluationError> {
        let invalid = |msg: &str| Err(EvaluationError::InvalidPlan(msg.to_string()));
        if bins.is_empty() {
            return invalid("no bins");
        }
        for (i, b) in bins.iter().enumerate() {
            if !(0.0..=100.0).contains(&b.lower) || !(0.0..=100.0).contains(&b.upper) || b.lower > b.upper {
                return invalid(&format!("bin {i} outside [0, 100] or reversed"));
            }
            if b.count == 0 {
                return invalid(&format!("bin {i} has zero count"));
            }
            if i > 0 && b.lower < bins[i - 1].upper {
                return invalid(&format!("bin {i} overlaps bin {}", i - 1));
            }
        }
        Ok(StratifiedPlan { bins })
    }

    /// `[0,20]:5, (20,40]:15, (40,50]:10, (50,60]:15, (60,70]:25, (70,80]:30,
    /// (80,90]:50, (90,100]:50`.
    pub fn default_plan() -> Self {
        let spec = [
            (0.0, 20.0, 5),
            (20.0, 40.0, 15),
            (40.0, 50.0, 10),
            (50.0, 60.0, 15),
            (60.0, 70.0, 25),
            (70.0, 80.0, 30),
            (80.0, 90.0, 50),
            (90.0, 100.0, 50),
        ];
        let bins = spec
            .into_iter()
            .map(|(lower, upper, count)| Bin { lower, upper, count })
            .collect();
        StratifiedPlan::new(bins).expect("default plan is valid")
    }

    pub fn bins(&self) -> &[Bin] {
        &self.bins
    }

    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }

    pub fn bin_of(&self, score: f64) -> Option<usize> {
        self.bins.iter().enumerate().position(|(i, b)| {
            let above = if i == 0 { score >= b.lower } else { score > b.lower };
            above && score <= b.upper
        })
    }
}

impl Default for StratifiedPlan {
    fn default() -> Self {
        StratifiedPlan::default_plan()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledKey {
    pub candidate: CandidateKey,
    pub bin: usize,
    pub title_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shortfall {
    pub bin: usize,
    pub requested: usize,
    pub available: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sample {
    pub keys: Vec<SampledKey>,
    pub shortfall: Vec<Shortfall>,
}

impl Sample {
    pub fn count_in_bin(&self, bin: usize) -> usize {
        self.keys.iter().filter(|k| k.bin == bin).count()
    }
}

/// Uniform sample without replacement of `count` candidates per bin.
///
/// Candidates are ordered by key before drawing, so the result depends only
/// on the candidate set and the seed. A bin with too few candidates yields
/// all of them and a [`Shortfall`] entry.
pub fn stratified_sample(
    candidates: &[Candidate],
    plan: &StratifiedPlan,
    seed: u64,
) -> Result<Sample, EvaluationError> {
    if candidates.is_empty() {
        return Err(EvaluationError::NoCandidates);
    }
    let mut pools: BTreeMap<usize, Vec<(CandidateKey, f64)>> = BTreeMap::new();
    for c in candidates {
        if let Some(bin) = plan.bin_of(c.title_score) {
            pools.entry(bin).or_default().push((CandidateKey::of(c), c.title_score));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = Sample::default();
    for (bin, spec) in plan.bins().iter().enumerate() {
        let mut pool = pools.remove(&bin).unwrap_or_default();
        pool.sort_by(|a, b| a.0.cmp(&b.0));
        pool.dedup_by(|a, b| a.0 == b.0);
        if pool.len() < spec.count {
            sample.shortfall.push(Shortfall {
                bin,
                requested: spec.count,
                available: pool.len(),
            });
        }
        let take = spec.count.min(pool.len());
        let mut picked = index::sample(&mut rng, pool.len(), take).into_vec();
        picked.sort_unstable();
        sample.keys.extend(picked.into_iter().map(|i| SampledKey {
            candidate: pool[i].0.clone(),
            bin,
            title_score: pool[i].1,
        }));
    }
    Ok(sample)
}
