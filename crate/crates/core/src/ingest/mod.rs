//! Catalogue ingestion: format triage, size filtering, text extraction and
//! shingling.
//!
//! The directory-level driver [`run_ingest`] reads `<item_id>.<ext>` payloads
//! and writes `texts/`, `shingles/`, `triage.csv`, the retained
//! `items.jsonl`, and `identifier_provenance.csv`.

pub mod epub;
pub mod text;

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl::{write_jsonl, JsonlError};
use crate::records::Identifier;

pub use epub::{extract_epub, extract_epub_text, EpubContent, EpubError};
pub use text::{normalize_text, shingle, ShingleSet, SHINGLE_WORDS};

/// Smallest retained payload, in bytes (10 KiB).
pub const MIN_SIZE_BYTES: u64 = 10 * 1024;
/// Largest retained payload, in bytes (10 MiB).
pub const MAX_SIZE_BYTES: u64 = 10 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    Epub(#[from] EpubError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One file record from a shadow-library catalogue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowItem {
    pub item_id: String,
    #[serde(default)]
    pub declared_title: Option<String>,
    #[serde(default)]
    pub declared_language: Option<String>,
    pub extension: String,
    pub size_bytes: u64,
    #[serde(default)]
    pub identifiers: BTreeSet<Identifier>,
    #[serde(default)]
    pub text_ref: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FormatClass {
    EpubClass,
    Pdf,
    Discard,
}

impl fmt::Display for FormatClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FormatClass::EpubClass => "epub",
            FormatClass::Pdf => "pdf",
            FormatClass::Discard => "discard",
        })
    }
}

/// E-book formats convertible to EPUB count as EPUB; PDFs are kept apart;
/// everything else is discarded.
pub fn classify_format(extension: &str) -> FormatClass {
    let ext = extension.trim().trim_start_matches('.').to_ascii_lowercase();
    match ext.as_str() {
        "epub" | "mobi" | "azw" | "azw3" | "fb2" => FormatClass::EpubClass,
        "pdf" => FormatClass::Pdf,
        _ => FormatClass::Discard,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SizeDecision {
    Retained,
    TooSmall,
    TooLarge,
}

/// Both bounds are inclusive.
pub fn size_decision(size_bytes: u64) -> SizeDecision {
    if size_bytes < MIN_SIZE_BYTES {
        SizeDecision::TooSmall
    } else if size_bytes > MAX_SIZE_BYTES {
        SizeDecision::TooLarge
    } else {
        SizeDecision::Retained
    }
}

#[derive(Debug, Clone, Default)]
pub struct SizeSplit {
    pub retained: Vec<ShadowItem>,
    pub too_small: Vec<ShadowItem>,
    pub too_large: Vec<ShadowItem>,
}

pub fn size_filter(items: impl IntoIterator<Item = ShadowItem>) -> SizeSplit {
    let mut split = SizeSplit::default();
    for item in items {
        match size_decision(item.size_bytes) {
            SizeDecision::Retained => split.retained.push(item),
            SizeDecision::TooSmall => split.too_small.push(item),
            SizeDecision::TooLarge => split.too_large.push(item),
        }
    }
    split
}

/// Outcome of ingesting one item, as written to `triage.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TriageDecision {
    Retained,
    PdfDiscarded,
    FormatDiscarded,
    TooSmall,
    TooLarge,
    MissingPayload,
    ExtractionFailed,
    EmptyText,
}

#[derive(Debug, Clone, Serialize)]
pub struct TriageRow {
    pub item_id: String,
    pub format_class: String,
    pub size_bytes: u64,
    pub decision: TriageDecision,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentifierSource {
    Catalogue,
    Epub,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProvenanceRow {
    pub item_id: String,
    pub kind: String,
    pub value: String,
    pub source: IdentifierSource,
}

/// A retained item with its extracted text and shingles.
#[derive(Debug, Clone)]
pub struct IngestedItem {
    pub item: ShadowItem,
    pub text: String,
    pub shingles: ShingleSet,
    pub provenance: Vec<ProvenanceRow>,
}

#[derive(Debug, Clone, Default)]
pub struct IngestReport {
    pub triage: Vec<TriageRow>,
    pub retained: Vec<IngestedItem>,
}

impl IngestReport {
    pub fn count(&self, decision: TriageDecision) -> usize {
        self.triage.iter().filter(|r| r.decision == decision).count()
    }
}

/// Where the payload for an item lives and how to read it.
enum Payload {
    Epub(PathBuf),
    PlainText(PathBuf),
}

fn locate_payload(item: &ShadowItem, payload_dir: &Path) -> Option<Payload> {
    let classify = |path: PathBuf| {
        let is_text = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("txt"));
        if is_text {
            Payload::PlainText(path)
        } else {
            Payload::Epub(path)
        }
    };
    if let Some(text_ref) = &item.text_ref {
        let path = payload_dir.join(text_ref);
        return path.is_file().then(|| classify(path));
    }
    // MOBI/AZW/FB2 must be converted upstream to .epub or .txt.
    let ext = item.extension.to_ascii_lowercase();
    [
        (ext == "epub").then(|| format!("{}.epub", item.item_id)),
        Some(format!("{}.epub", item.item_id)),
        Some(format!("{}.txt", item.item_id)),
    ]
    .into_iter()
    .flatten()
    .map(|name| payload_dir.join(name))
    .find(|p| p.is_file())
    .map(classify)
}

fn ingest_one(item: &ShadowItem, payload_dir: &Path) -> (TriageRow, Option<IngestedItem>) {
    let format = classify_format(&item.extension);
    let row = |decision| TriageRow {
        item_id: item.item_id.clone(),
        format_class: format.to_string(),
        size_bytes: item.size_bytes,
        decision,
    };
    match format {
        FormatClass::Pdf => return (row(TriageDecision::PdfDiscarded), None),
        FormatClass::Discard => return (row(TriageDecision::FormatDiscarded), None),
        FormatClass::EpubClass => {}
    }
    match size_decision(item.size_bytes) {
        SizeDecision::TooSmall => return (row(TriageDecision::TooSmall), None),
        SizeDecision::TooLarge => return (row(TriageDecision::TooLarge), None),
        SizeDecision::Retained => {}
    }
    let Some(payload) = locate_payload(item, payload_dir) else {
        return (row(TriageDecision::MissingPayload), None);
    };
    let content = match payload {
        Payload::Epub(path) => fs::read(&path)
            .map_err(|e| e.to_string())
            .and_then(|bytes| extract_epub(&bytes).map_err(|e| e.to_string())),
        Payload::PlainText(path) => fs::read_to_string(&path)
            .map(|text| EpubContent {
                text,
                identifiers: BTreeSet::new(),
            })
            .map_err(|e| e.to_string()),
    };
    let content = match content {
        Ok(c) => c,
        Err(e) => {
            log::debug!("{}: extraction failed: {e}", item.item_id);
            return (row(TriageDecision::ExtractionFailed), None);
        }
    };
    let shingles = shingle(item.item_id.clone(), &normalize_text(&content.text), SHINGLE_WORDS);
    if shingles.is_empty() {
        return (row(TriageDecision::EmptyText), None);
    }

    let mut provenance: Vec<ProvenanceRow> = item
        .identifiers
        .iter()
        .map(|id| (id, IdentifierSource::Catalogue))
        .chain(content.identifiers.iter().map(|id| (id, IdentifierSource::Epub)))
        .map(|(id, source)| ProvenanceRow {
            item_id: item.item_id.clone(),
            kind: id.kind().to_string(),
            value: id.value().to_string(),
            source,
        })
        .collect();
    provenance.sort_by(|a, b| (&a.value, a.source).cmp(&(&b.value, b.source)));

    let mut retained = item.clone();
    retained.identifiers.extend(content.identifiers);
    retained.text_ref = Some(format!("texts/{}.txt", item.item_id));
    (
        row(TriageDecision::Retained),
        Some(IngestedItem {
            item: retained,
            text: content.text,
            shingles,
            provenance,
        }),
    )
}

/// Triage, extract and shingle every item. Pure apart from reading payloads.
pub fn ingest_items(items: &[ShadowItem], payload_dir: &Path) -> IngestReport {
    let results: Vec<_> = items
        .par_iter()
        .map(|item| ingest_one(item, payload_dir))
        .collect();
    let mut report = IngestReport::default();
    for (row, ingested) in results {
        report.triage.push(row);
        report.retained.extend(ingested);
    }
    report
}

/// Runs [`ingest_items`] and writes all outputs under `out_dir`.
pub fn run_ingest(
    items: &[ShadowItem],
    payload_dir: &Path,
    out_dir: &Path,
) -> Result<IngestReport, IngestError> {
    let report = ingest_items(items, payload_dir);
    let texts = out_dir.join("texts");
    let shingles = out_dir.join("shingles");
    fs::create_dir_all(&texts).map_err(io_at(&texts))?;
    fs::create_dir_all(&shingles).map_err(io_at(&shingles))?;

    for ingested in &report.retained {
        let id = &ingested.item.item_id;
        let text_path = texts.join(format!("{id}.txt"));
        fs::write(&text_path, &ingested.text).map_err(io_at(&text_path))?;
        let bin_path = shingles.join(format!("{id}.bin"));
        ingested.shingles.write(&bin_path).map_err(io_at(&bin_path))?;
    }

    let mut triage = csv::Writer::from_path(out_dir.join("triage.csv"))?;
    for row in &report.triage {
        triage.serialize(row)?;
    }
    triage.flush().map_err(io_at(out_dir))?;

    let mut prov = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(out_dir.join("identifier_provenance.csv"))?;
    prov.write_record(["item_id", "kind", "value", "source"])?;
    for row in report.retained.iter().flat_map(|r| &r.provenance) {
        prov.serialize(row)?;
    }
    prov.flush().map_err(io_at(out_dir))?;

    write_jsonl(
        out_dir.join("items.jsonl"),
        report.retained.iter().map(|r| &r.item),
    )?;
    Ok(report)
}

/// Loads `shingles/<item_id>.bin` for each item.
pub fn load_shingles(
    items: &[ShadowItem],
    shingle_dir: &Path,
) -> Result<Vec<ShingleSet>, IngestError> {
    items
        .iter()
        .map(|item| {
            let path = shingle_dir.join(format!("{}.bin", item.item_id));
            ShingleSet::read(item.item_id.clone(), &path).map_err(io_at(&path))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::normalize_identifier;
    use crate::synth::build_epub;

    fn item(id: &str, ext: &str, size: u64) -> ShadowItem {
        ShadowItem {
            item_id: id.into(),
            declared_title: Some("T".into()),
            declared_language: Some("en".into()),
            extension: ext.into(),
            size_bytes: size,
            identifiers: BTreeSet::new(),
            text_ref: None,
        }
    }

    #[test]
    fn format_classes() {
        for ext in ["epub", "mobi", "azw", "azw3", "fb2", "AZW3", ".Epub"] {
            assert_eq!(classify_format(ext), FormatClass::EpubClass, "{ext}");
        }
        assert_eq!(classify_format("pdf"), FormatClass::Pdf);
        assert_eq!(classify_format("PDF"), FormatClass::Pdf);
        for ext in ["iso", "exe", "txt", "rtf", "doc", "odf", ""] {
            assert_eq!(classify_format(ext), FormatClass::Discard, "{ext}");
        }
    }

    #[test]
    fn size_boundaries() {
        // 10 * 1024 * 1024 computed independently of the constants.
        let ten_mib: u64 = 10_485_760;
        assert_eq!(MAX_SIZE_BYTES, ten_mib);
        assert_eq!(size_decision(10_240), SizeDecision::Retained);
        assert_eq!(size_decision(10_239), SizeDecision::TooSmall);
        assert_eq!(size_decision(9_000), SizeDecision::TooSmall);
        assert_eq!(size_decision(ten_mib), SizeDecision::Retained);
        assert_eq!(size_decision(ten_mib + 1), SizeDecision::TooLarge);
        assert_eq!(size_decision(11_000_000), SizeDecision::TooLarge);

        let split = size_filter(vec![
            item("a", "epub", 10_240),
            item("b", "epub", 9_000),
            item("c", "epub", 11_000_000),
        ]);
        assert_eq!(
            (split.retained.len(), split.too_small.len(), split.too_large.len()),
            (1, 1, 1)
        );
    }

    #[test]
    fn directory_pipeline() {
        let dir = tempfile::tempdir().unwrap();
        let payloads = dir.path().join("payloads");
        let out = dir.path().join("out");
        fs::create_dir_all(&payloads).unwrap();

        let body = "<p>one two three four five</p>";
        fs::write(
            payloads.join("ok.epub"),
            build_epub(&[("c.xhtml", body)], &["0-306-40615-2"]),
        )
        .unwrap();
        fs::write(payloads.join("broken.epub"), b"garbage").unwrap();
        fs::write(payloads.join("conv.txt"), "pre converted text here").unwrap();
        fs::write(payloads.join("blank.epub"), build_epub(&[("c.xhtml", "<p>  </p>")], &[])).unwrap();

        let mut ok = item("ok", "epub", 20_000);
        ok.identifiers.insert(normalize_identifier("B00ABC1234").unwrap());
        let items = vec![
            ok,
            item("broken", "epub", 20_000),
            item("conv", "mobi", 20_000),
            item("blank", "epub", 20_000),
            item("scan", "pdf", 20_000),
            item("tiny", "epub", 100),
            item("prog", "exe", 20_000),
            item("absent", "epub", 20_000),
        ];
        let report = run_ingest(&items, &payloads, &out).unwrap();
        let decisions: Vec<_> = report.triage.iter().map(|r| r.decision).collect();
        assert_eq!(
            decisions,
            vec![
                TriageDecision::Retained,
                TriageDecision::ExtractionFailed,
                TriageDecision::Retained,
                TriageDecision::EmptyText,
                TriageDecision::PdfDiscarded,
                TriageDecision::TooSmall,
                TriageDecision::FormatDiscarded,
                TriageDecision::MissingPayload,
            ]
        );
        assert_eq!(fs::read_to_string(out.join("texts/ok.txt")).unwrap(), "one two three four five");
        let sh = ShingleSet::read("ok", out.join("shingles/ok.bin")).unwrap();
        assert_eq!(sh.len(), 3);

        let retained: Vec<ShadowItem> = crate::jsonl::read_jsonl(out.join("items.jsonl")).unwrap();
        assert_eq!(retained.len(), 2);
        assert_eq!(retained[0].identifiers.len(), 2, "catalogue + EPUB identifiers merged");
        assert_eq!(retained[0].text_ref.as_deref(), Some("texts/ok.txt"));

        let triage = fs::read_to_string(out.join("triage.csv")).unwrap();
        assert!(triage.starts_with("item_id,format_class,size_bytes,decision\n"));
        assert!(triage.contains("scan,pdf,20000,pdf_discarded"));
        let prov = fs::read_to_string(out.join("identifier_provenance.csv")).unwrap();
        assert!(prov.contains("ok,ISBN13,9780306406157,epub"));
        assert!(prov.contains("ok,ASIN,B00ABC1234,catalogue"));

        let loaded = load_shingles(&retained, &out.join("shingles")).unwrap();
        assert_eq!(loaded[0], sh);
    }
}
