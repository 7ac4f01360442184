use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{CandidateKey, EvaluationError, Label};
use crate::numeric::{quantile_sorted, Real};

pub const DEFAULT_RESAMPLES: usize = 1000;

/// How labeled items are resampled for confidence intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resampler {
    /// Percentile bootstrap with `resamples` draws of size n with replacement.
    Bootstrap { resamples: usize, seed: u64 },
    /// A single resample equal to the original sample.
    Identity,
}

impl Resampler {
    pub fn bootstrap(seed: u64) -> Self {
        Resampler::Bootstrap {
            resamples: DEFAULT_RESAMPLES,
            seed,
        }
    }
}

/// Precision, recall and retention against a threshold grid, with 95%
/// percentile intervals for precision and recall. `None` marks an undefined
/// ratio (empty denominator).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrCurve<T> {
    pub thresholds: Vec<T>,
    pub precision: Vec<Option<T>>,
    pub precision_ci: Vec<Option<(T, T)>>,
    pub recall: Vec<Option<T>>,
    pub recall_ci: Vec<Option<(T, T)>>,
    pub retention: Vec<T>,
    /// Candidates with a conclusive (yes/no) label.
    pub labeled: usize,
    /// Candidates whose resolved label is unknown.
    pub unknown: usize,
    /// All candidates, labeled or not.
    pub total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint<T> {
    pub threshold: T,
    pub precision: Option<T>,
    pub precision_ci: Option<(T, T)>,
    pub recall: Option<T>,
    pub recall_ci: Option<(T, T)>,
    pub retention: T,
}

impl<T: Real> PrCurve<T> {
    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    pub fn point(&self, i: usize) -> CurvePoint<T> {
        CurvePoint {
            threshold: self.thresholds[i],
            precision: self.precision[i],
            precision_ci: self.precision_ci[i],
            recall: self.recall[i],
            recall_ci: self.recall_ci[i],
            retention: self.retention[i],
        }
    }

    /// The grid point equal to `threshold`, if any.
    pub fn at(&self, threshold: T) -> Option<CurvePoint<T>> {
        self.thresholds
            .iter()
            .position(|t| *t == threshold)
            .map(|i| self.point(i))
    }

    /// `threshold,precision,ci_low,ci_high,recall,r_ci_low,r_ci_high,retention`;
    /// undefined cells are left empty.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), EvaluationError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "threshold", "precision", "ci_low", "ci_high", "recall", "r_ci_low", "r_ci_high", "retention",
        ])?;
        let cell = |v: Option<T>| v.map(|x| x.to_string()).unwrap_or_default();
        for i in 0..self.len() {
            let p = self.point(i);
            out.write_record([
                p.threshold.to_string(),
                cell(p.precision),
                cell(p.precision_ci.map(|c| c.0)),
                cell(p.precision_ci.map(|c| c.1)),
                cell(p.recall),
                cell(p.recall_ci.map(|c| c.0)),
                cell(p.recall_ci.map(|c| c.1)),
                p.retention.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Integer thresholds 0, 1, …, 100.
pub fn default_grid<T: Real>() -> Vec<T> {
    (0..=100).map(T::from_count).collect()
}

/// Weighted precision and recall at each threshold.
/// Precision and recall at one threshold.
type Rates<T> = (Option<T>, Option<T>);

fn metrics<T: Real>(items: &[(T, bool)], weights: &[usize], grid: &[T]) -> Vec<Rates<T>> {
    let positives: usize = items.iter().zip(weights).filter(|((_, y), _)| *y).map(|(_, w)| w).sum();
    grid.iter()
        .map(|&t| {
            let (mut predicted, mut hits) = (0usize, 0usize);
            for ((score, yes), &w) in items.iter().zip(weights) {
                if *score >= t {
                    predicted += w;
                    if *yes {
                        hits += w;
                    }
                }
            }
            let ratio = |num: usize, den: usize| (den > 0).then(|| T::from_count(num) / T::from_count(den));
            (ratio(hits, predicted), ratio(hits, positives))
        })
        .collect()
}

fn percentile_interval<T: Real>(mut draws: Vec<T>) -> Option<(T, T)> {
    if draws.is_empty() {
        return None;
    }
    draws.sort_by(|a, b| a.partial_cmp(b).expect("ratios are finite"));
    let lo = quantile_sorted(&draws, T::lit(0.025)).ok()?;
    let hi = quantile_sorted(&draws, T::lit(0.975)).ok()?;
    Some((lo, hi))
}

/// Curve over `scores` (every candidate, labeled or not) given resolved
/// labels. A candidate is predicted positive at `t` iff its score is `≥ t`.
/// Unknown labels count toward retention only.
pub fn pr_curve<T: Real>(
    resolved: &BTreeMap<CandidateKey, Label>,
    scores: &[(CandidateKey, T)],
    grid: &[T],
    resampler: Resampler,
) -> Result<PrCurve<T>, EvaluationError> {
    let by_key: BTreeMap<&CandidateKey, T> = scores.iter().map(|(k, s)| (k, *s)).collect();
    let mut items: Vec<(T, bool)> = Vec::new();
    let mut unknown = 0;
    for (key, label) in resolved {
        let score = *by_key
            .get(key)
            .ok_or_else(|| EvaluationError::UnknownCandidate(key.to_string()))?;
        match label {
            Label::Yes => items.push((score, true)),
            Label::No => items.push((score, false)),
            Label::Unknown => unknown += 1,
        }
    }
    if items.is_empty() {
        return Err(EvaluationError::NoConclusiveLabels);
    }

    let n = items.len();
    let plug_in = metrics(&items, &vec![1; n], grid);

    let resampled: Vec<Vec<Rates<T>>> = match resampler {
        Resampler::Identity => vec![plug_in.clone()],
        Resampler::Bootstrap { resamples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..resamples)
                .map(|_| {
                    let mut weights = vec![0usize; n];
                    for _ in 0..n {
                        weights[rng.random_range(0..n)] += 1;
                    }
                    metrics(&items, &weights, grid)
                })
                .collect()
        }
    };
    let interval = |i: usize, pick: fn(&Rates<T>) -> Option<T>| {
        percentile_interval(resampled.iter().filter_map(|r| pick(&r[i])).collect())
    };

    let total = T::from_count(scores.len().max(1));
    let retention = grid
        .iter()
        .map(|&t| T::from_count(scores.iter().filter(|(_, s)| *s >= t).count()) / total)
        .collect();

    Ok(PrCurve {
        thresholds: grid.to_vec(),
        precision: plug_in.iter().map(|m| m.0).collect(),
        precision_ci: (0..grid.len()).map(|i| interval(i, |m| m.0)).collect(),
        recall: plug_in.iter().map(|m| m.1).collect(),
        recall_ci: (0..grid.len()).map(|i| interval(i, |m| m.1)).collect(),
        retention,
        labeled: n,
        unknown,
        total: scores.len(),
    })
}
