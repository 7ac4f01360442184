//! Catalogue emission and corpus statistics.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::numeric::{herfindahl, median_iqr};

use crate::dedup::Cluster;
use crate::linkage::Candidate;
use crate::numeric::NumericError;
use crate::records::WorkRecord;

/// Language whose catalogue carries the high-precision guarantee.
pub const PRIMARY_LANGUAGE: &str = "en";

#[derive(Debug, Error)]
pub enum CatalogueError {
    #[error("accepted candidate references unknown work {0}")]
    UnknownWork(String),
    #[error("accepted candidate references unknown cluster {0}")]
    UnknownCluster(String),
    #[error("share table: {0}")]
    ShareTable(String),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogueEntry {
    pub work_id: String,
    pub first_publication_year: i32,
    pub author_names: Vec<String>,
    pub author_ids: Vec<String>,
    pub title: String,
    pub avg_rating: Option<f64>,
    pub ratings_count: Option<u64>,
    pub reviews_count: Option<u64>,
    pub genres: Option<Vec<String>>,
    pub shadow_item_ids: Vec<String>,
    pub language: String,
    pub experimental: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CoverageReport {
    pub entries: usize,
    pub with_genres: usize,
    pub with_reviews_count: usize,
    /// Linked works skipped for lacking a first publication year.
    pub undated_skipped: usize,
}

impl CoverageReport {
    pub fn genres_fraction(&self) -> Option<f64> {
        (self.entries > 0).then(|| self.with_genres as f64 / self.entries as f64)
    }

    pub fn reviews_fraction(&self) -> Option<f64> {
        (self.entries > 0).then(|| self.with_reviews_count as f64 / self.entries as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Catalogue {
    pub entries: Vec<CatalogueEntry>,
    pub coverage: CoverageReport,
}

/// One entry per work among accepted candidates in `language`, carrying the
/// items of every accepted cluster linked to it. Entries are ordered by
/// work id.
pub fn emit_catalogue(
    accepted: &[Candidate],
    works: &[WorkRecord],
    clusters: &[Cluster],
    language: &str,
) -> Result<Catalogue, CatalogueError> {
    let works: HashMap<&str, &WorkRecord> = works.iter().map(|w| (w.work_id.as_str(), w)).collect();
    let clusters: HashMap<&str, &Cluster> = clusters.iter().map(|c| (c.cluster_id.as_str(), c)).collect();

    let mut items: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for c in accepted.iter().filter(|c| c.language == language) {
        let work = works
            .get(c.work_id.as_str())
            .ok_or_else(|| CatalogueError::UnknownWork(c.work_id.clone()))?;
        let cluster = clusters
            .get(c.cluster_id.as_str())
            .ok_or_else(|| CatalogueError::UnknownCluster(c.cluster_id.clone()))?;
        items
            .entry(work.work_id.as_str())
            .or_default()
            .extend(cluster.item_ids.iter().map(String::as_str));
    }

    let mut catalogue = Catalogue::default();
    for (work_id, item_ids) in items {
        let work = works[work_id];
        let Some(year) = work.first_publication_year else {
            catalogue.coverage.undated_skipped += 1;
            continue;
        };
        catalogue.entries.push(CatalogueEntry {
            work_id: work.work_id.clone(),
            first_publication_year: year,
            author_names: work.author_names.clone(),
            author_ids: work.author_ids.clone(),
            title: work.title.clone(),
            avg_rating: work.avg_rating,
            ratings_count: work.ratings_count,
            reviews_count: work.reviews_count,
            genres: work.genres.clone(),
            shadow_item_ids: item_ids.into_iter().map(str::to_string).collect(),
            language: language.to_string(),
            experimental: language != PRIMARY_LANGUAGE,
        });
    }
    let c = &mut catalogue.coverage;
    c.entries = catalogue.entries.len();
    c.with_genres = catalogue.entries.iter().filter(|e| e.genres.is_some()).count();
    c.with_reviews_count = catalogue.entries.iter().filter(|e| e.reviews_count.is_some()).count();
    Ok(catalogue)
}

/// Language shares of one corpus, in percent. Unlisted languages make up the
/// remainder below 100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageShareTable {
    pub rows: Vec<(String, f64)>,
}

impl LanguageShareTable {
    pub fn new(rows: Vec<(String, f64)>) -> Result<Self, CatalogueError> {
        if let Some((lang, s)) = rows.iter().find(|(_, s)| s.is_nan() || *s < 0.0) {
            return Err(CatalogueError::ShareTable(format!("share of {lang} is {s}")));
        }
        let total: f64 = rows.iter().map(|(_, s)| s).sum();
        if total > 100.0 + 1e-6 {
            return Err(CatalogueError::ShareTable(format!("shares sum to {total} > 100")));
        }
        Ok(LanguageShareTable { rows })
    }

    /// Shares as fractions of the listed total.
    pub fn fractions(&self) -> Vec<f64> {
        let total: f64 = self.rows.iter().map(|(_, s)| s).sum();
        self.rows.iter().map(|(_, s)| if total > 0.0 { s / total } else { 0.0 }).collect()
    }

    pub fn herfindahl(&self, normalized: bool) -> Result<f64, CatalogueError> {
        Ok(herfindahl(&self.fractions(), normalized)?)
    }
}

/// Reads a wide CSV: a `language` column, then one column of percentages per
/// corpus. Empty cells mean the language is not listed for that corpus.
pub fn read_share_tables<R: Read>(r: R) -> Result<BTreeMap<String, LanguageShareTable>, CatalogueError> {
    let mut reader = csv::Reader::from_reader(r);
    let headers = reader.headers()?.clone();
    if headers.get(0) != Some("language") || headers.len() < 2 {
        return Err(CatalogueError::ShareTable(
            "expected a `language` column followed by corpus columns".into(),
        ));
    }
    let corpora: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut rows: Vec<Vec<(String, f64)>> = vec![Vec::new(); corpora.len()];
    for record in reader.records() {
        let record = record?;
        let lang = record.get(0).unwrap_or_default().to_string();
        for (i, cell) in record.iter().skip(1).enumerate() {
            let cell = cell.trim();
            if cell.is_empty() {
                continue;
            }
            let share: f64 = cell
                .parse()
                .map_err(|_| CatalogueError::ShareTable(format!("bad share {cell:?} for {lang}")))?;
            rows[i].push((lang.clone(), share));
        }
    }
    corpora
        .into_iter()
        .zip(rows)
        .map(|(corpus, rows)| Ok((corpus, LanguageShareTable::new(rows)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HerfindahlRow {
    pub corpus: String,
    pub languages: usize,
    pub herfindahl: f64,
    pub herfindahl_normalized: f64,
}

pub fn herfindahl_rows(tables: &BTreeMap<String, LanguageShareTable>) -> Result<Vec<HerfindahlRow>, CatalogueError> {
    tables
        .iter()
        .map(|(corpus, t)| {
            Ok(HerfindahlRow {
                corpus: corpus.clone(),
                languages: t.rows.len(),
                herfindahl: t.herfindahl(false)?,
                herfindahl_normalized: t.herfindahl(true)?,
            })
        })
        .collect()
}

pub fn write_herfindahl_csv<W: Write>(w: W, rows: &[HerfindahlRow]) -> Result<(), CatalogueError> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// Item counts per language with their share of the total.
pub fn language_counts<'a>(languages: impl IntoIterator<Item = &'a str>) -> Vec<(String, usize, f64)> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in languages {
        *counts.entry(l).or_default() += 1;
    }
    let total: usize = counts.values().sum();
    let mut rows: Vec<_> = counts
        .into_iter()
        .map(|(l, n)| (l.to_string(), n, 100.0 * n as f64 / total as f64))
        .collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    rows
}

pub fn write_language_csv<W: Write>(w: W, rows: &[(String, usize, f64)]) -> Result<(), CatalogueError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["language", "count", "share"])?;
    for (l, n, s) in rows {
        out.write_record([l.clone(), n.to_string(), format!("{s:.4}")])?;
    }
    out.flush()?;
    Ok(())
}

/// Counts per decade (`floor(year / 10) · 10`, ascending) plus an undated
/// bucket.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DecadeHistogram {
    pub decades: Vec<(i32, usize)>,
    pub undated: usize,
}

impl DecadeHistogram {
    pub fn total(&self) -> usize {
        self.decades.iter().map(|(_, n)| n).sum::<usize>() + self.undated
    }

    /// `decade,count` rows with the undated bucket last as "und".
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), CatalogueError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["decade", "count"])?;
        for (d, n) in &self.decades {
            out.write_record([d.to_string(), n.to_string()])?;
        }
        if self.undated > 0 {
            out.write_record(["und".to_string(), self.undated.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Whether growth accelerates: over at least three consecutive non-empty
    /// decades, each decade-on-decade ratio exceeds the previous one. On a
    /// log scale this is a convex curve.
    pub fn is_super_exponential(&self) -> bool {
        let counts: Vec<f64> = self.decades.iter().map(|(_, n)| *n as f64).collect();
        if counts.len() < 3 || counts.contains(&0.0) {
            return false;
        }
        let ratios: Vec<f64> = counts.windows(2).map(|w| w[1] / w[0]).collect();
        ratios.windows(2).all(|r| r[1] > r[0])
    }
}

pub fn decade_histogram(years: impl IntoIterator<Item = Option<i32>>) -> DecadeHistogram {
    let mut counts: BTreeMap<i32, usize> = BTreeMap::new();
    let mut undated = 0;
    for y in years {
        match y {
            Some(y) => *counts.entry(y.div_euclid(10) * 10).or_default() += 1,
            None => undated += 1,
        }
    }
    DecadeHistogram {
        decades: counts.into_iter().collect(),
        undated,
    }
}
