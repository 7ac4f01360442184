use std::collections::{BTreeMap, BTreeSet, HashMap};

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use super::{estimate_jaccard, DedupError, LshIndex, LshParams, MinHashSignature};
use crate::ingest::{ShadowItem, ShingleSet};
use crate::records::{normalize_language, Identifier};

/// A connected component of near-duplicate items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub cluster_id: String,
    pub item_ids: Vec<String>,
    pub language: String,
    pub identifiers: BTreeSet<Identifier>,
    pub titles: Vec<String>,
}

impl Cluster {
    pub fn is_singleton(&self) -> bool {
        self.item_ids.len() == 1
    }

    pub fn len(&self) -> usize {
        self.item_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.item_ids.is_empty()
    }
}

/// How candidate pairs are confirmed before they become edges.
#[derive(Debug, Clone, Copy)]
pub enum Verification<'a> {
    /// Signature-estimated Jaccard.
    Estimated,
    /// Exact Jaccard over shingle sets (any order; matched by item id).
    Exact(&'a [ShingleSet]),
}

/// Plurality of members' declared languages; ties or no declarations give "und".
pub fn cluster_language<'a>(languages: impl IntoIterator<Item = Option<&'a str>>) -> String {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for lang in languages.into_iter().flatten() {
        let code = normalize_language(lang);
        if code != "und" {
            *counts.entry(code).or_default() += 1;
        }
    }
    let Some(max) = counts.values().copied().max() else {
        return "und".into();
    };
    let mut leaders = counts.into_iter().filter(|(_, c)| *c == max);
    match (leaders.next(), leaders.next()) {
        (Some((lang, _)), None) => lang,
        _ => "und".into(),
    }
}

/// Groups items into connected components over LSH candidate pairs whose
/// similarity reaches `params.threshold`. Every item lands in exactly one
/// cluster; clusters are ordered by their smallest item id.
pub fn cluster(
    items: &[ShadowItem],
    signatures: &[MinHashSignature],
    params: &LshParams,
    verification: Verification<'_>,
) -> Result<Vec<Cluster>, DedupError> {
    let by_id: HashMap<&str, &MinHashSignature> =
        signatures.iter().map(|s| (s.item_id.as_str(), s)).collect();
    let ordered: Vec<&MinHashSignature> = items
        .iter()
        .map(|item| {
            by_id
                .get(item.item_id.as_str())
                .copied()
                .ok_or_else(|| DedupError::MissingSignature(item.item_id.clone()))
        })
        .collect::<Result<_, _>>()?;
    let index = LshIndex::build(ordered.iter().copied(), *params)?;

    let exact: Option<HashMap<&str, &ShingleSet>> = match verification {
        Verification::Estimated => None,
        Verification::Exact(sets) => Some(sets.iter().map(|s| (s.item_id.as_str(), s)).collect()),
    };

    let mut components = UnionFind::<usize>::new(items.len());
    for (a, b) in index.candidate_pairs() {
        let (a, b) = (a as usize, b as usize);
        let similarity = match &exact {
            None => estimate_jaccard(ordered[a], ordered[b])?,
            Some(sets) => {
                let lookup = |i: usize| {
                    sets.get(items[i].item_id.as_str())
                        .copied()
                        .ok_or_else(|| DedupError::MissingShingles(items[i].item_id.clone()))
                };
                lookup(a)?.jaccard(lookup(b)?)
            }
        };
        if similarity >= params.threshold {
            components.union(a, b);
        }
    }

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, root) in components.into_labeling().into_iter().enumerate() {
        groups.entry(root).or_default().push(i);
    }
    let mut members: Vec<Vec<&ShadowItem>> = groups
        .into_values()
        .map(|idx| {
            let mut v: Vec<&ShadowItem> = idx.into_iter().map(|i| &items[i]).collect();
            v.sort_by(|x, y| x.item_id.cmp(&y.item_id));
            v
        })
        .collect();
    members.sort_by(|x, y| x[0].item_id.cmp(&y[0].item_id));

    Ok(members
        .into_iter()
        .enumerate()
        .map(|(n, group)| Cluster {
            cluster_id: format!("c{:06}", n + 1),
            item_ids: group.iter().map(|i| i.item_id.clone()).collect(),
            language: cluster_language(group.iter().map(|i| i.declared_language.as_deref())),
            identifiers: group.iter().flat_map(|i| i.identifiers.iter().cloned()).collect(),
            titles: group.iter().filter_map(|i| i.declared_title.clone()).collect(),
        })
        .collect())
}
