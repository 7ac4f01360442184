use thiserror::Error;

use crate::{catalogue, crawl_planner, dedup, evaluation, ingest, jsonl, linkage, numeric, records};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Umbrella error for callers that drive several stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Records(#[from] records::RecordsError),
    #[error(transparent)]
    Ingest(#[from] ingest::IngestError),
    #[error(transparent)]
    Dedup(#[from] dedup::DedupError),
    #[error(transparent)]
    Linkage(#[from] linkage::LinkageError),
    #[error(transparent)]
    Evaluation(#[from] evaluation::EvaluationError),
    #[error(transparent)]
    Catalogue(#[from] catalogue::CatalogueError),
    #[error(transparent)]
    Crawl(#[from] crawl_planner::CrawlError),
    #[error(transparent)]
    Numeric(#[from] numeric::NumericError),
    #[error(transparent)]
    Jsonl(#[from] jsonl::JsonlError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
