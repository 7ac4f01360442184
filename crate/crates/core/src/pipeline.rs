//! The stages chained in memory: ingest, dedup, link, threshold.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::dedup::{cluster, compute_signatures, optimal_params, Cluster, LshParams, Verification};
use crate::ingest::{ingest_items, IngestReport, ShadowItem, ShingleSet};
use crate::linkage::{apply_threshold, link, Candidate, LinkReport};
use crate::records::{filter_datable_works, EditionRecord, WorkRecord};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub jaccard_threshold: f64,
    pub num_perm: usize,
    pub seed: u64,
    pub min_cluster_size: usize,
    pub exact_verification: bool,
    pub title_threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            jaccard_threshold: crate::dedup::DEFAULT_THRESHOLD,
            num_perm: crate::dedup::DEFAULT_NUM_PERM,
            seed: 1,
            min_cluster_size: 1,
            exact_verification: false,
            title_threshold: crate::linkage::DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub ingest: IngestReport,
    pub params: LshParams,
    pub clusters: Vec<Cluster>,
    pub datable_works: Vec<WorkRecord>,
    pub link: LinkReport,
    pub accepted: Vec<Candidate>,
    pub rejected: Vec<Candidate>,
}

impl PipelineRun {
    /// Every (item, work) pair implied by the accepted candidates.
    pub fn item_links(&self) -> BTreeSet<(String, String)> {
        item_links(&self.accepted, &self.clusters)
    }
}

/// Expands candidates to the items of their clusters.
pub fn item_links(candidates: &[Candidate], clusters: &[Cluster]) -> BTreeSet<(String, String)> {
    let by_id: BTreeMap<&str, &Cluster> = clusters.iter().map(|c| (c.cluster_id.as_str(), c)).collect();
    candidates
        .iter()
        .filter_map(|c| by_id.get(c.cluster_id.as_str()).map(|cl| (c, cl)))
        .flat_map(|(c, cl)| cl.item_ids.iter().map(move |i| (i.clone(), c.work_id.clone())))
        .collect()
}

pub fn run_pipeline(
    items: &[ShadowItem],
    works: &[WorkRecord],
    editions: &[EditionRecord],
    payload_dir: &Path,
    cfg: &PipelineConfig,
) -> Result<PipelineRun> {
    let ingest = ingest_items(items, payload_dir);
    let retained: Vec<ShadowItem> = ingest.retained.iter().map(|r| r.item.clone()).collect();
    let sets: Vec<ShingleSet> = ingest.retained.iter().map(|r| r.shingles.clone()).collect();

    let params = optimal_params(cfg.jaccard_threshold, cfg.num_perm, 0.5, 0.5)?;
    let signatures = compute_signatures(&sets, cfg.num_perm, cfg.seed)?;
    let verification = if cfg.exact_verification {
        Verification::Exact(&sets)
    } else {
        Verification::Estimated
    };
    let clusters: Vec<Cluster> = cluster(&retained, &signatures, &params, verification)?
        .into_iter()
        .filter(|c| c.len() >= cfg.min_cluster_size)
        .collect();

    let datable_works = filter_datable_works(works.iter().cloned()).retained;
    let link = link(&clusters, &datable_works, editions)?;
    let (accepted, rejected) = apply_threshold(&link.candidates, cfg.title_threshold);
    Ok(PipelineRun {
        ingest,
        params,
        clusters,
        datable_works,
        link,
        accepted,
        rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linkage::Candidate;

    #[test]
    fn item_links_expand_clusters() {
        let clusters = vec![Cluster {
            cluster_id: "c1".into(),
            item_ids: vec!["a".into(), "b".into()],
            language: "en".into(),
            identifiers: BTreeSet::new(),
            titles: vec![],
        }];
        let cand = Candidate {
            cluster_id: "c1".into(),
            work_id: "w".into(),
            language: "en".into(),
            title_score: 90.0,
            shared_identifiers: BTreeSet::new(),
        };
        let links = item_links(&[cand], &clusters);
        assert_eq!(
            links,
            BTreeSet::from([("a".to_string(), "w".to_string()), ("b".to_string(), "w".to_string())])
        );
    }
}
