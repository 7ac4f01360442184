//! Near-duplicate clustering and work-level linkage of e-book catalogues.
//!
//! The pipeline runs in stages, each usable on its own:
//!
//! 1. [`ingest`]: format triage, size filtering, EPUB text extraction, shingling.
//! 2. [`dedup`]: MinHash signatures, LSH banding, connected-component clusters.
//! 3. [`linkage`]: identifier-overlap candidates scored by a mean partial-ratio
//!    title score, then thresholded.
//! 4. [`evaluation`]: stratified sampling, label resolution and bootstrap
//!    precision/recall curves.
//! 5. [`catalogue`]: catalogue emission and corpus statistics.
//!
//! [`pipeline`] chains stages 1–3 in memory.
//!
//! [`crawl_planner`] simulates the frontier expansion used to build the
//! work/edition scaffold, against a local fixture provider.
//!
//! Numeric kernels are generic over [`numeric::Real`]; the aliases below fix
//! them to `f64`, which is what the pipeline itself uses.

pub mod catalogue;
pub mod crawl_planner;
pub mod dedup;
pub mod evaluation;
pub mod ingest;
pub mod jsonl;
pub mod linkage;
pub mod numeric;
pub mod pipeline;
pub mod records;
pub mod synth;

mod error;

pub use error::{Error, Result};

/// Title score on the 0..=100 scale.
pub type Score = f64;

/// Precision/recall/retention curve over `f64` thresholds.
pub type Curve = evaluation::PrCurve<f64>;

/// Median and interquartile bounds over `f64` values.
pub type Quartiles = numeric::Quartiles<f64>;

/// Objective breakdown of an LSH shape, in `f64`.
pub type LshObjective = dedup::BandingObjective<f64>;
