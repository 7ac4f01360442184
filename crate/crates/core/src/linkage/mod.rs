//! Cluster-to-work candidates by identifier overlap, scored by title similarity.

mod fuzzy;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fuzzy::{partial_ratio, ratio};

use crate::dedup::Cluster;
use crate::ingest::normalize_text;
use crate::jsonl::{write_jsonl, JsonlError};
use crate::records::{EditionRecord, Identifier, WorkRecord};

/// Default operating threshold on the title score.
pub const DEFAULT_THRESHOLD: f64 = 80.0;

#[derive(Debug, Error)]
pub enum LinkageError {
    #[error("candidate references unknown cluster {0}")]
    UnknownCluster(String),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
}

/// A cluster and a work that share at least one identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct IdentifierMatch {
    pub cluster_id: String,
    pub work_id: String,
    pub language: String,
    pub shared_identifiers: BTreeSet<Identifier>,
}

/// A scored linkage hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub cluster_id: String,
    pub work_id: String,
    pub language: String,
    pub title_score: f64,
    pub shared_identifiers: BTreeSet<Identifier>,
}

impl Candidate {
    /// Copy with the score rounded to 4 decimals, as written to disk.
    pub fn rounded(&self) -> Candidate {
        Candidate {
            title_score: (self.title_score * 1e4).round() / 1e4,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    /// The work has no edition in the cluster's language.
    NoEditionInLanguage,
    /// One side has no non-empty normalized title.
    NoTitleBasis,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedCandidate {
    pub cluster_id: String,
    pub work_id: String,
    pub reason: DropReason,
}

#[derive(Debug, Clone, Default)]
pub struct LinkReport {
    pub candidates: Vec<Candidate>,
    pub dropped: Vec<DroppedCandidate>,
}

impl LinkReport {
    pub fn dropped_count(&self, reason: DropReason) -> usize {
        self.dropped.iter().filter(|d| d.reason == reason).count()
    }
}

/// One match per (cluster, work) pair whose identifier sets intersect.
pub fn generate_candidates(
    clusters: &[Cluster],
    works: &[WorkRecord],
    editions: &[EditionRecord],
) -> Vec<IdentifierMatch> {
    let known: BTreeSet<&str> = works.iter().map(|w| w.work_id.as_str()).collect();
    let mut index: HashMap<&Identifier, BTreeSet<&str>> = HashMap::new();
    for e in editions.iter().filter(|e| known.contains(e.work_id.as_str())) {
        for id in &e.identifiers {
            index.entry(id).or_default().insert(e.work_id.as_str());
        }
    }

    let mut out = Vec::new();
    for c in clusters {
        let mut shared: BTreeMap<&str, BTreeSet<Identifier>> = BTreeMap::new();
        for id in &c.identifiers {
            for work in index.get(id).into_iter().flatten() {
                shared.entry(work).or_default().insert(id.clone());
            }
        }
        out.extend(shared.into_iter().map(|(work_id, ids)| IdentifierMatch {
            cluster_id: c.cluster_id.clone(),
            work_id: work_id.to_string(),
            language: c.language.clone(),
            shared_identifiers: ids,
        }));
    }
    out.sort();
    out
}

/// Mean [`partial_ratio`] over every (cluster title, edition title) pair after
/// normalization. Titles that normalize to nothing are ignored; `None` when
/// either side is left empty.
pub fn title_score<A: AsRef<str>, B: AsRef<str>>(cluster_titles: &[A], edition_titles: &[B]) -> Option<f64> {
    let norm = |ts: &mut dyn Iterator<Item = &str>| -> Vec<String> {
        ts.map(normalize_text).filter(|t| !t.is_empty()).collect()
    };
    let left = norm(&mut cluster_titles.iter().map(AsRef::as_ref));
    let right = norm(&mut edition_titles.iter().map(AsRef::as_ref));
    if left.is_empty() || right.is_empty() {
        return None;
    }
    let total: f64 = left
        .iter()
        .flat_map(|l| right.iter().map(move |r| partial_ratio(l, r)))
        .sum();
    Some(total / (left.len() * right.len()) as f64)
}

/// Scores matches against edition titles in the cluster's language. A
/// cluster of undetermined language ("und") is compared with every edition.
pub fn score_candidates(
    matches: &[IdentifierMatch],
    clusters: &[Cluster],
    editions: &[EditionRecord],
) -> Result<LinkReport, LinkageError> {
    let clusters: HashMap<&str, &Cluster> = clusters.iter().map(|c| (c.cluster_id.as_str(), c)).collect();
    let mut by_work: HashMap<&str, Vec<&EditionRecord>> = HashMap::new();
    for e in editions {
        by_work.entry(e.work_id.as_str()).or_default().push(e);
    }

    let scored: Vec<Result<Candidate, DroppedCandidate>> = matches
        .par_iter()
        .map(|m| {
            let cluster = clusters
                .get(m.cluster_id.as_str())
                .ok_or_else(|| LinkageError::UnknownCluster(m.cluster_id.clone()))?;
            let drop = |reason| {
                Ok(Err(DroppedCandidate {
                    cluster_id: m.cluster_id.clone(),
                    work_id: m.work_id.clone(),
                    reason,
                }))
            };
            let titles: Vec<&str> = by_work
                .get(m.work_id.as_str())
                .into_iter()
                .flatten()
                .filter(|e| m.language == "und" || e.language == m.language)
                .map(|e| e.title.as_str())
                .collect();
            if titles.is_empty() {
                return drop(DropReason::NoEditionInLanguage);
            }
            match title_score(&cluster.titles, &titles) {
                None => drop(DropReason::NoTitleBasis),
                Some(title_score) => Ok(Ok(Candidate {
                    cluster_id: m.cluster_id.clone(),
                    work_id: m.work_id.clone(),
                    language: m.language.clone(),
                    title_score,
                    shared_identifiers: m.shared_identifiers.clone(),
                })),
            }
        })
        .collect::<Result<_, LinkageError>>()?;

    let mut report = LinkReport::default();
    for s in scored {
        match s {
            Ok(c) => report.candidates.push(c),
            Err(d) => report.dropped.push(d),
        }
    }
    Ok(report)
}

/// Candidate generation and scoring in one pass.
pub fn link(
    clusters: &[Cluster],
    works: &[WorkRecord],
    editions: &[EditionRecord],
) -> Result<LinkReport, LinkageError> {
    let matches = generate_candidates(clusters, works, editions);
    score_candidates(&matches, clusters, editions)
}

/// Splits into `(accepted, rejected)`; accepted iff `title_score ≥ threshold`.
pub fn apply_threshold(candidates: &[Candidate], threshold: f64) -> (Vec<Candidate>, Vec<Candidate>) {
    candidates
        .iter()
        .cloned()
        .partition(|c| c.title_score >= threshold)
}

pub fn write_candidates(path: impl AsRef<Path>, candidates: &[Candidate]) -> Result<(), LinkageError> {
    let rounded: Vec<Candidate> = candidates.iter().map(Candidate::rounded).collect();
    write_jsonl(path, &rounded)?;
    Ok(())
}
