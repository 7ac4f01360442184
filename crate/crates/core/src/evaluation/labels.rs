use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::EvaluationError;
use crate::linkage::Candidate;

/// Identifies a candidate across stages.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CandidateKey {
    pub cluster_id: String,
    pub work_id: String,
}

impl CandidateKey {
    pub fn new(cluster_id: impl Into<String>, work_id: impl Into<String>) -> Self {
        CandidateKey {
            cluster_id: cluster_id.into(),
            work_id: work_id.into(),
        }
    }

    pub fn of(c: &Candidate) -> Self {
        CandidateKey::new(c.cluster_id.clone(), c.work_id.clone())
    }
}

impl fmt::Display for CandidateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.cluster_id, self.work_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Yes,
    No,
    Unknown,
}

impl Label {
    pub fn is_conclusive(self) -> bool {
        self != Label::Unknown
    }
}

impl FromStr for Label {
    type Err = EvaluationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "yes" => Ok(Label::Yes),
            "no" => Ok(Label::No),
            "unknown" => Ok(Label::Unknown),
            other => Err(EvaluationError::BadLabel(other.to_string())),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Yes => "yes",
            Label::No => "no",
            Label::Unknown => "unknown",
        })
    }
}

/// One evaluator's judgment on one candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalLabel {
    pub candidate: CandidateKey,
    pub label: Label,
    pub evaluator_id: String,
    pub timestamp: DateTime<Utc>,
}

/// Keeps the latest label of each (candidate, evaluator); among equal
/// timestamps the later entry wins.
pub fn latest_per_evaluator(labels: &[EvalLabel]) -> Vec<&EvalLabel> {
    let mut latest: HashMap<(&CandidateKey, &str), &EvalLabel> = HashMap::new();
    for l in labels {
        let slot = latest.entry((&l.candidate, l.evaluator_id.as_str())).or_insert(l);
        if l.timestamp >= slot.timestamp {
            *slot = l;
        }
    }
    let mut out: Vec<&EvalLabel> = latest.into_values().collect();
    out.sort_by(|a, b| (&a.candidate, &a.evaluator_id).cmp(&(&b.candidate, &b.evaluator_id)));
    out
}

/// One label per candidate: majority over Yes/No among evaluators; a tie, or
/// only Unknown votes, resolves to Unknown.
pub fn resolve_labels(labels: &[EvalLabel]) -> BTreeMap<CandidateKey, Label> {
    let mut votes: BTreeMap<CandidateKey, (usize, usize)> = BTreeMap::new();
    for l in latest_per_evaluator(labels) {
        let v = votes.entry(l.candidate.clone()).or_default();
        match l.label {
            Label::Yes => v.0 += 1,
            Label::No => v.1 += 1,
            Label::Unknown => {}
        }
    }
    votes
        .into_iter()
        .map(|(k, (yes, no))| {
            let label = match yes.cmp(&no) {
                std::cmp::Ordering::Greater => Label::Yes,
                std::cmp::Ordering::Less => Label::No,
                std::cmp::Ordering::Equal => Label::Unknown,
            };
            (k, label)
        })
        .collect()
}
