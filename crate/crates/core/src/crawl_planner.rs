//! Breadth-first frontier expansion over a catalogue provider.
//!
//! Depth 0 holds the seeds. Each later depth fetches the recommendations of
//! works first seen at the previous depth and the qualifying works of authors
//! first seen there. Expansion stops when a depth adds no new work from
//! either source, or at `max_depth`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_MAX_DEPTH: usize = 5;

#[derive(Debug, Error)]
pub enum CrawlError {
    #[error("{path}: {message}")]
    Fixture { path: PathBuf, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct ProviderError(pub String);

/// What a provider knows about a work without fetching it in full.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WorkStub {
    pub work_id: String,
    pub author_ids: Vec<String>,
    pub ratings_count: u64,
    pub edition_count: u64,
}

pub trait Provider {
    fn seeds(&self) -> Result<Vec<WorkStub>, ProviderError>;
    fn recommendations(&self, work_id: &str) -> Result<Vec<WorkStub>, ProviderError>;
    fn author_works(&self, author_id: &str) -> Result<Vec<WorkStub>, ProviderError>;
}

/// An author's work is acquired only with at least one rating and two editions.
pub fn author_work_qualifies(stub: &WorkStub) -> bool {
    stub.ratings_count >= 1 && stub.edition_count >= 2
}

/// Acquisitions first made at one depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DepthCounts {
    pub depth: usize,
    pub works: usize,
    pub editions: u64,
    pub authors: usize,
    /// New works reached through recommendations.
    pub recommendations: usize,
    /// New works reached through qualifying author works.
    pub author_works: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FetchKind {
    Seeds,
    Recommendations,
    AuthorWorks,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderFailure {
    pub kind: FetchKind,
    pub id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FrontierState {
    pub depth: usize,
    pub known_work_ids: BTreeSet<String>,
    pub known_author_ids: BTreeSet<String>,
    pub new_by_depth: Vec<DepthCounts>,
    pub failures: Vec<ProviderFailure>,
    /// Number of provider calls made, by kind.
    pub fetches: BTreeMap<String, usize>,
}

impl FrontierState {
    /// New works per depth.
    pub fn works_series(&self) -> Vec<usize> {
        self.new_by_depth.iter().map(|d| d.works).collect()
    }

    pub fn write_series_csv<W: Write>(&self, w: W) -> Result<(), CrawlError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "depth",
            "works",
            "editions",
            "authors",
            "recommendations",
            "author_works",
            "cumulative_works",
            "cumulative_editions",
            "cumulative_authors",
        ])?;
        let (mut cw, mut ce, mut ca) = (0usize, 0u64, 0usize);
        for d in &self.new_by_depth {
            cw += d.works;
            ce += d.editions;
            ca += d.authors;
            out.write_record(
                [d.depth, d.works, d.editions as usize, d.authors, d.recommendations, d.author_works, cw, ce as usize, ca]
                    .map(|v| v.to_string()),
            )?;
        }
        out.flush()?;
        Ok(())
    }
}

struct Acquired {
    works: BTreeSet<String>,
    authors: BTreeSet<String>,
    counts: DepthCounts,
}

impl FrontierState {
    fn admit(&mut self, stub: WorkStub, acquired: &mut Acquired) -> bool {
        if !self.known_work_ids.insert(stub.work_id.clone()) {
            return false;
        }
        acquired.counts.works += 1;
        acquired.counts.editions += stub.edition_count;
        for a in stub.author_ids {
            if self.known_author_ids.insert(a.clone()) {
                acquired.counts.authors += 1;
                acquired.authors.insert(a);
            }
        }
        acquired.works.insert(stub.work_id);
        true
    }

    fn record<T>(&mut self, kind: FetchKind, id: &str, r: Result<Vec<T>, ProviderError>) -> Vec<T> {
        *self.fetches.entry(format!("{kind:?}")).or_default() += 1;
        r.unwrap_or_else(|e| {
            log::warn!("provider failed on {kind:?} {id}: {e}");
            self.failures.push(ProviderFailure {
                kind,
                id: id.to_string(),
                message: e.0,
            });
            Vec::new()
        })
    }
}

/// Runs the expansion to exhaustion or `max_depth`.
pub fn expand(provider: &dyn Provider, max_depth: usize) -> FrontierState {
    let mut state = FrontierState::default();
    let seeds = provider.seeds();
    let mut seeds = state.record(FetchKind::Seeds, "", seeds);
    seeds.sort();
    let mut acquired = Acquired {
        works: BTreeSet::new(),
        authors: BTreeSet::new(),
        counts: DepthCounts::default(),
    };
    for s in seeds {
        state.admit(s, &mut acquired);
    }
    state.new_by_depth.push(acquired.counts);
    if acquired.works.is_empty() {
        return state;
    }

    let mut frontier = acquired;
    for depth in 1..=max_depth {
        let mut next = Acquired {
            works: BTreeSet::new(),
            authors: BTreeSet::new(),
            counts: DepthCounts {
                depth,
                ..DepthCounts::default()
            },
        };
        // Gather the whole depth before admitting, so the outcome does not
        // depend on fetch order.
        let mut recs: Vec<WorkStub> = Vec::new();
        for work in &frontier.works {
            let r = provider.recommendations(work);
            recs.extend(state.record(FetchKind::Recommendations, work, r));
        }
        let mut by_author: Vec<WorkStub> = Vec::new();
        for author in &frontier.authors {
            let r = provider.author_works(author);
            by_author.extend(
                state
                    .record(FetchKind::AuthorWorks, author, r)
                    .into_iter()
                    .filter(author_work_qualifies),
            );
        }
        recs.sort();
        by_author.sort();
        for stub in recs {
            if state.admit(stub, &mut next) {
                next.counts.recommendations += 1;
            }
        }
        for stub in by_author {
            if state.admit(stub, &mut next) {
                next.counts.author_works += 1;
            }
        }
        state.depth = depth;
        state.new_by_depth.push(next.counts);
        if next.counts.recommendations == 0 && next.counts.author_works == 0 {
            break;
        }
        frontier = next;
    }
    state
}

/// Provider backed by a fixture directory:
///
/// - `seeds.txt`: one work id per line
/// - `recs.tsv`: `work_id <TAB> recommended_work_id`
/// - `author_works.tsv`: `author_id <TAB> work_id <TAB> ratings <TAB> editions`
/// - `works.tsv` (optional): `work_id <TAB> author_ids (comma-separated) <TAB> ratings <TAB> editions`
///
/// Blank lines and lines starting with `#` are ignored. A work missing from
/// `works.tsv` takes its authors and counts from `author_works.tsv`, or no
/// authors, zero ratings and one edition.
#[derive(Debug, Clone, Default)]
pub struct FixtureProvider {
    seeds: Vec<String>,
    recs: BTreeMap<String, Vec<String>>,
    author_works: BTreeMap<String, Vec<String>>,
    works: BTreeMap<String, WorkStub>,
}

fn tsv_rows(path: &Path, min_fields: usize) -> Result<Vec<Vec<String>>, CrawlError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .from_path(path)?;
    let mut rows = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let record = record?;
        let fields: Vec<String> = record.iter().map(|f| f.trim().to_string()).collect();
        if fields.iter().all(String::is_empty) {
            continue;
        }
        if fields.len() < min_fields {
            return Err(CrawlError::Fixture {
                path: path.to_path_buf(),
                message: format!("record {} has {} fields, expected {min_fields}", n + 1, fields.len()),
            });
        }
        rows.push(fields);
    }
    Ok(rows)
}

fn parse_count(path: &Path, field: &str) -> Result<u64, CrawlError> {
    field.parse().map_err(|_| CrawlError::Fixture {
        path: path.to_path_buf(),
        message: format!("bad count {field:?}"),
    })
}

impl FixtureProvider {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, CrawlError> {
        let dir = dir.as_ref();
        let mut p = FixtureProvider::default();

        let seeds_path = dir.join("seeds.txt");
        p.seeds = std::fs::read_to_string(&seeds_path)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect();

        let recs_path = dir.join("recs.tsv");
        if recs_path.exists() {
            for row in tsv_rows(&recs_path, 2)? {
                p.recs.entry(row[0].clone()).or_default().push(row[1].clone());
            }
        }

        let aw_path = dir.join("author_works.tsv");
        if aw_path.exists() {
            for row in tsv_rows(&aw_path, 4)? {
                let (author, work) = (row[0].clone(), row[1].clone());
                let ratings = parse_count(&aw_path, &row[2])?;
                let editions = parse_count(&aw_path, &row[3])?;
                let stub = p.works.entry(work.clone()).or_insert_with(|| WorkStub {
                    work_id: work.clone(),
                    author_ids: Vec::new(),
                    ratings_count: ratings,
                    edition_count: editions,
                });
                if !stub.author_ids.contains(&author) {
                    stub.author_ids.push(author.clone());
                }
                p.author_works.entry(author).or_default().push(work);
            }
        }

        let works_path = dir.join("works.tsv");
        if works_path.exists() {
            for row in tsv_rows(&works_path, 4)? {
                let stub = WorkStub {
                    work_id: row[0].clone(),
                    author_ids: row[1]
                        .split(',')
                        .map(str::trim)
                        .filter(|a| !a.is_empty())
                        .map(str::to_string)
                        .collect(),
                    ratings_count: parse_count(&works_path, &row[2])?,
                    edition_count: parse_count(&works_path, &row[3])?,
                };
                p.works.insert(stub.work_id.clone(), stub);
            }
        }
        Ok(p)
    }

    fn stub(&self, work_id: &str) -> WorkStub {
        self.works.get(work_id).cloned().unwrap_or_else(|| WorkStub {
            work_id: work_id.to_string(),
            author_ids: Vec::new(),
            ratings_count: 0,
            edition_count: 1,
        })
    }
}

impl Provider for FixtureProvider {
    fn seeds(&self) -> Result<Vec<WorkStub>, ProviderError> {
        Ok(self.seeds.iter().map(|w| self.stub(w)).collect())
    }

    fn recommendations(&self, work_id: &str) -> Result<Vec<WorkStub>, ProviderError> {
        Ok(self
            .recs
            .get(work_id)
            .into_iter()
            .flatten()
            .map(|w| self.stub(w))
            .collect())
    }

    fn author_works(&self, author_id: &str) -> Result<Vec<WorkStub>, ProviderError> {
        Ok(self
            .author_works
            .get(author_id)
            .into_iter()
            .flatten()
            .map(|w| self.stub(w))
            .collect())
    }
}
