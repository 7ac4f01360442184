//! Stratified sampling, label bookkeeping and precision/recall curves.

mod curve;
mod labels;
mod sample;

use std::collections::{BTreeMap, HashMap};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use curve::{default_grid, pr_curve, CurvePoint, PrCurve, Resampler, DEFAULT_RESAMPLES};
pub use labels::{latest_per_evaluator, resolve_labels, CandidateKey, EvalLabel, Label};
pub use sample::{stratified_sample, Bin, Sample, SampledKey, Shortfall, StratifiedPlan};

use crate::dedup::Cluster;
use crate::jsonl::{read_jsonl, JsonlError};
use crate::linkage::Candidate;
use crate::records::WorkRecord;
use crate::numeric::{median_iqr, NumericError, Quartiles};

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("no candidates to evaluate")]
    NoCandidates,
    #[error("no conclusive (yes/no) labels")]
    NoConclusiveLabels,
    #[error("label refers to unknown candidate {0}")]
    UnknownCandidate(String),
    #[error("invalid label {0:?}; expected yes, no or unknown")]
    BadLabel(String),
    #[error("invalid sampling plan: {0}")]
    InvalidPlan(String),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `(key, score)` pairs for [`pr_curve`].
pub fn scored_keys(candidates: &[Candidate]) -> Vec<(CandidateKey, f64)> {
    candidates
        .iter()
        .map(|c| (CandidateKey::of(c), c.title_score))
        .collect()
}

/// A sampled candidate with what an evaluator needs to judge it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanTask {
    pub candidate: CandidateKey,
    pub bin: usize,
    pub title_score: f64,
    pub work_title: String,
    pub author_names: Vec<String>,
    pub item_ids: Vec<String>,
}

/// Joins a sample with work metadata and cluster membership.
pub fn build_plan_tasks(
    sample: &Sample,
    works: &[WorkRecord],
    clusters: &[Cluster],
) -> Result<Vec<PlanTask>, EvaluationError> {
    let works: HashMap<&str, &WorkRecord> = works.iter().map(|w| (w.work_id.as_str(), w)).collect();
    let clusters: HashMap<&str, &Cluster> = clusters.iter().map(|c| (c.cluster_id.as_str(), c)).collect();
    sample
        .keys
        .iter()
        .map(|k| {
            let missing = || EvaluationError::UnknownCandidate(k.candidate.to_string());
            let work = works.get(k.candidate.work_id.as_str()).ok_or_else(missing)?;
            let cluster = clusters.get(k.candidate.cluster_id.as_str()).ok_or_else(missing)?;
            Ok(PlanTask {
                candidate: k.candidate.clone(),
                bin: k.bin,
                title_score: k.title_score,
                work_title: work.title.clone(),
                author_names: work.author_names.clone(),
                item_ids: cluster.item_ids.clone(),
            })
        })
        .collect()
}

/// Resolves raw labels and computes the curve over all `candidates`.
pub fn curve_from_labels(
    labels: &[EvalLabel],
    candidates: &[Candidate],
    grid: &[f64],
    resampler: Resampler,
) -> Result<PrCurve<f64>, EvaluationError> {
    pr_curve(&resolve_labels(labels), &scored_keys(candidates), grid, resampler)
}

/// Median and IQR of candidate title scores.
pub fn score_distribution_stats(candidates: &[Candidate]) -> Result<Quartiles<f64>, EvaluationError> {
    let scores: Vec<f64> = candidates.iter().map(|c| c.title_score).collect();
    Ok(median_iqr(&scores)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguousItem {
    pub candidate: CandidateKey,
    pub title_score: f64,
    /// Label after secondary inspection, when provided.
    pub relabel: Option<Label>,
}

/// Unknown-labeled candidates at or above the threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbiguousReport {
    pub threshold: f64,
    pub items: Vec<AmbiguousItem>,
    /// Labeled candidates (any label) at or above the threshold.
    pub labeled_above: usize,
    /// `items.len() / labeled_above`.
    pub share: Option<f64>,
    /// Yes share among conclusive relabels.
    pub secondary_precision: Option<f64>,
}

pub fn ambiguous_subset_report(
    resolved: &BTreeMap<CandidateKey, Label>,
    candidates: &[Candidate],
    threshold: f64,
    relabels: Option<&BTreeMap<CandidateKey, Label>>,
) -> AmbiguousReport {
    let mut items = Vec::new();
    let mut labeled_above = 0;
    for c in candidates.iter().filter(|c| c.title_score >= threshold) {
        let key = CandidateKey::of(c);
        let Some(label) = resolved.get(&key) else {
            continue;
        };
        labeled_above += 1;
        if *label == Label::Unknown {
            let relabel = relabels.and_then(|r| r.get(&key)).copied();
            items.push(AmbiguousItem {
                candidate: key,
                title_score: c.title_score,
                relabel,
            });
        }
    }
    items.sort_by(|a, b| a.candidate.cmp(&b.candidate));
    let conclusive: Vec<Label> = items
        .iter()
        .filter_map(|i| i.relabel)
        .filter(|l| l.is_conclusive())
        .collect();
    let yes = conclusive.iter().filter(|l| **l == Label::Yes).count();
    AmbiguousReport {
        threshold,
        share: (labeled_above > 0).then(|| items.len() as f64 / labeled_above as f64),
        secondary_precision: (!conclusive.is_empty()).then(|| yes as f64 / conclusive.len() as f64),
        items,
        labeled_above,
    }
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<EvalLabel>, EvaluationError> {
    let path = path.as_ref();
    if !path.exists() {
        return Ok(Vec::new());
    }
    Ok(read_jsonl(path)?)
}

/// Appends one label as a JSON line and syncs it to disk.
pub fn append_label(path: impl AsRef<Path>, label: &EvalLabel) -> Result<(), EvaluationError> {
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut line = serde_json::to_vec(label).map_err(JsonlError::Serialize)?;
    line.push(b'\n');
    file.write_all(&line)?;
    file.sync_data()?;
    Ok(())
}
