//! Seeded synthetic corpora with planted links, and an EPUB fixture writer.
//!
//! Used by the end-to-end tests and by `majinlink synth` to produce a demo
//! workspace. Nothing here is needed to run the pipeline on real data.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{Cursor, Write};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, ZipWriter};

use crate::ingest::ShadowItem;
use crate::jsonl::{write_jsonl, JsonlError};
use crate::records::{normalize_identifier, AuthorRecord, EditionRecord, Identifier, WorkRecord};

/// Builds a stored (uncompressed) EPUB with one spine item per chapter, in
/// the given order. Archive entries are written in reverse so readers that
/// ignore the spine get the wrong order. `identifiers` become `dc:identifier`s.
pub fn build_epub(chapters: &[(&str, &str)], identifiers: &[&str]) -> Vec<u8> {
    let mut zip = ZipWriter::new(Cursor::new(Vec::new()));
    let stored = SimpleFileOptions::default().compression_method(CompressionMethod::Stored);

    zip.start_file("mimetype", stored).expect("zip entry");
    zip.write_all(b"application/epub+zip").expect("zip write");

    zip.start_file("META-INF/container.xml", stored).expect("zip entry");
    zip.write_all(
        br#"<?xml version="1.0"?>
<container version="1.0" xmlns="urn:oasis:names:tc:opendocument:xmlns:container">
  <rootfiles><rootfile full-path="OEBPS/content.opf" media-type="application/oebps-package+xml"/></rootfiles>
</container>"#,
    )
    .expect("zip write");

    let mut manifest = String::new();
    let mut spine = String::new();
    for (i, (name, _)) in chapters.iter().enumerate() {
        manifest.push_str(&format!(
            r#"<item id="ch{i}" href="Text/{name}" media-type="application/xhtml+xml"/>"#
        ));
        spine.push_str(&format!(r#"<itemref idref="ch{i}"/>"#));
    }
    manifest.push_str(r#"<item id="nav" href="Text/nav.xhtml" media-type="application/xhtml+xml" properties="nav"/>"#);
    spine.push_str(r#"<itemref idref="nav" linear="no"/>"#);
    let ids: String = identifiers
        .iter()
        .enumerate()
        .map(|(i, id)| format!(r#"<dc:identifier id="id{i}">{id}</dc:identifier>"#))
        .collect();
    let opf = format!(
        r#"<?xml version="1.0" encoding="UTF-8"?>
<package xmlns="http://www.idpf.org/2007/opf" version="3.0" unique-identifier="id0">
  <metadata xmlns:dc="http://purl.org/dc/elements/1.1/"><dc:title>Synthetic</dc:title>{ids}</metadata>
  <manifest>{manifest}</manifest>
  <spine>{spine}</spine>
</package>"#
    );
    zip.start_file("OEBPS/content.opf", stored).expect("zip entry");
    zip.write_all(opf.as_bytes()).expect("zip write");

    zip.start_file("OEBPS/Text/nav.xhtml", stored).expect("zip entry");
    zip.write_all(b"<html><body><nav><ol><li>Contents</li></ol></nav></body></html>")
        .expect("zip write");
    for (name, body) in chapters.iter().rev() {
        zip.start_file(format!("OEBPS/Text/{name}"), stored)
            .expect("zip entry");
        let doc = format!(
            r#"<?xml version="1.0" encoding="utf-8"?>
<html xmlns="http://www.w3.org/1999/xhtml"><head><title>{name}</title></head><body>{body}</body></html>"#
        );
        zip.write_all(doc.as_bytes()).expect("zip write");
    }
    zip.finish().expect("zip finish").into_inner()
}

/// Builds a canonical ISBN-13 `978` + nine digits of `n` + check digit.
pub fn isbn13_from_serial(n: u64) -> Identifier {
    let body = format!("978{:09}", n % 1_000_000_000);
    let sum: u32 = body
        .bytes()
        .enumerate()
        .map(|(i, b)| u32::from(b - b'0') * if i % 2 == 0 { 1 } else { 3 })
        .sum();
    let check = (10 - sum % 10) % 10;
    normalize_identifier(&format!("{body}{check}")).expect("constructed ISBN is valid")
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub seed: u64,
    pub works: usize,
    pub editions_per_work: usize,
    /// Works receiving a cluster of near-duplicate copies.
    pub clustered_works: usize,
    pub copies_per_work: usize,
    /// Works (after the clustered ones) receiving a single item.
    pub singleton_works: usize,
    /// Extra copies spread over the first clustered works.
    pub extra_copies: usize,
    pub words_per_text: usize,
    /// Probability that a copied word is replaced.
    pub word_noise: f64,
    /// Probability that an item's declared title is replaced by junk.
    pub garbled_title_rate: f64,
    /// Probability that an item carries an identifier of an unrelated work.
    pub decoy_identifier_rate: f64,
    /// Probability that an item carries no identifier of its own work.
    pub missing_identifier_rate: f64,
}

impl Default for SynthConfig {
    /// 200 works, 600 editions and 500 items.
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            works: 200,
            editions_per_work: 3,
            clustered_works: 150,
            copies_per_work: 3,
            singleton_works: 30,
            extra_copies: 20,
            words_per_text: 2000,
            word_noise: 0.005,
            garbled_title_rate: 0.04,
            decoy_identifier_rate: 0.08,
            missing_identifier_rate: 0.2,
        }
    }
}

/// A generated corpus and the work each item was copied from.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub works: Vec<WorkRecord>,
    pub editions: Vec<EditionRecord>,
    pub authors: Vec<AuthorRecord>,
    pub items: Vec<ShadowItem>,
    /// Paragraph-per-line text of each item.
    pub texts: BTreeMap<String, String>,
    /// item_id → work_id it was generated from.
    pub truth: BTreeMap<String, String>,
}

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ren", "sa", "tor", "vel", "an", "dri", "es", "gul", "hap", "ix", "jo",
    "mor", "nen", "op", "qua", "ris", "sul", "tam", "ur", "vin", "wex", "yal", "zed", "bri", "cor",
    "del", "fin",
];

fn pseudo_word(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(1..=3);
    (0..n)
        .map(|_| *SYLLABLES.choose(rng).expect("non-empty"))
        .collect()
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn paragraphs(words: &[String]) -> String {
    words
        .chunks(40)
        .map(|c| c.join(" "))
        .collect::<Vec<_>>()
        .join("\n")
}

impl SynthCorpus {
    pub fn generate(cfg: &SynthConfig) -> SynthCorpus {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let vocab: Vec<String> = {
            let mut set = BTreeSet::new();
            while set.len() < 4000 {
                set.insert(pseudo_word(&mut rng));
            }
            set.into_iter().collect()
        };

        let mut titles = BTreeSet::new();
        let mut works = Vec::with_capacity(cfg.works);
        let mut editions = Vec::new();
        let mut authors = Vec::new();
        let mut isbn_serial = 100_000u64;
        let mut edition_isbns: Vec<Vec<Identifier>> = Vec::new();

        for w in 0..cfg.works {
            let title = loop {
                let n = rng.random_range(2..=4);
                let t: Vec<String> = (0..n)
                    .map(|_| capitalize(vocab.choose(&mut rng).expect("vocab")))
                    .collect();
                let t = t.join(" ");
                if titles.insert(t.clone()) {
                    break t;
                }
            };
            let work_id = format!("w{w:04}");
            let author_id = format!("a{w:04}");
            let author_name = format!(
                "{} {}",
                capitalize(vocab.choose(&mut rng).expect("vocab")),
                capitalize(vocab.choose(&mut rng).expect("vocab"))
            );
            authors.push(AuthorRecord {
                author_id: author_id.clone(),
                name: author_name.clone(),
                ratings_count: Some(rng.random_range(1..10_000)),
                work_ids: vec![work_id.clone()],
            });

            let mut edition_ids = Vec::new();
            let mut ids = Vec::new();
            for e in 0..cfg.editions_per_work {
                let edition_id = format!("{work_id}-e{e}");
                let ed_title = match e % 3 {
                    0 => title.clone(),
                    1 => format!("{title}: A Novel"),
                    _ => format!("{title} ({} Edition)", capitalize(vocab.choose(&mut rng).expect("vocab"))),
                };
                let isbn = isbn13_from_serial(isbn_serial);
                isbn_serial += 1;
                ids.push(isbn.clone());
                editions.push(EditionRecord {
                    edition_id: edition_id.clone(),
                    work_id: work_id.clone(),
                    title: ed_title,
                    language: "en".into(),
                    identifiers: BTreeSet::from([isbn]),
                    publication_year: Some(rng.random_range(1950..2024)),
                });
                edition_ids.push(edition_id);
            }
            edition_isbns.push(ids);

            let ratings = rng.random_range(0..50_000u64);
            works.push(WorkRecord {
                work_id,
                title,
                author_ids: vec![author_id],
                author_names: vec![author_name],
                first_publication_year: Some(rng.random_range(1800..2024)),
                genres: rng.random_bool(0.85).then(|| vec!["Fiction".to_string()]),
                avg_rating: Some(f64::from(rng.random_range(100u32..500)) / 100.0),
                ratings_count: Some(ratings),
                reviews_count: rng.random_bool(0.99).then_some(ratings / 10),
                edition_ids,
            });
        }

        // Which work each item copies.
        let mut plan: Vec<usize> = Vec::new();
        for w in 0..cfg.clustered_works.min(cfg.works) {
            plan.extend(std::iter::repeat_n(w, cfg.copies_per_work));
        }
        for i in 0..cfg.extra_copies {
            plan.push(i % cfg.clustered_works.max(1));
        }
        let singleton_end = (cfg.clustered_works + cfg.singleton_works).min(cfg.works);
        plan.extend(cfg.clustered_works..singleton_end);

        let base_texts: Vec<Vec<String>> = (0..cfg.works)
            .map(|_| {
                (0..cfg.words_per_text)
                    .map(|_| vocab.choose(&mut rng).expect("vocab").clone())
                    .collect()
            })
            .collect();

        let mut items = Vec::with_capacity(plan.len());
        let mut texts = BTreeMap::new();
        let mut truth = BTreeMap::new();
        let mut order: Vec<usize> = (0..plan.len()).collect();
        order.shuffle(&mut rng);
        for (n, &slot) in order.iter().enumerate() {
            let w = plan[slot];
            let item_id = format!("i{n:05}");
            let words: Vec<String> = base_texts[w]
                .iter()
                .map(|word| {
                    if rng.random_bool(cfg.word_noise) {
                        vocab.choose(&mut rng).expect("vocab").clone()
                    } else {
                        word.clone()
                    }
                })
                .collect();

            let work = &works[w];
            let declared_title = if rng.random_bool(cfg.garbled_title_rate) {
                format!("scan_{:06}", rng.random_range(0..1_000_000))
            } else {
                match rng.random_range(0..5) {
                    0 => work.title.clone(),
                    1 => work.title.to_lowercase(),
                    2 => format!("{} - {}", work.title, work.author_names[0]),
                    3 => format!("{} (epub)", work.title),
                    _ => format!("{}: A Novel", work.title),
                }
            };

            let mut identifiers = BTreeSet::new();
            if !rng.random_bool(cfg.missing_identifier_rate) {
                let own = edition_isbns[w].choose(&mut rng).expect("editions");
                identifiers.insert(own.clone());
            }
            if rng.random_bool(cfg.decoy_identifier_rate) {
                let other = (w + rng.random_range(1..cfg.works)) % cfg.works;
                let decoy = edition_isbns[other].choose(&mut rng).expect("editions");
                identifiers.insert(decoy.clone());
            }

            let text = paragraphs(&words);
            // Stored EPUB size is text plus ~1.5 KiB of packaging.
            let size_bytes = text.len() as u64 + 1536;
            items.push(ShadowItem {
                item_id: item_id.clone(),
                declared_title: Some(declared_title),
                declared_language: rng.random_bool(0.9).then(|| "en".to_string()),
                extension: "epub".into(),
                size_bytes,
                identifiers,
                text_ref: None,
            });
            texts.insert(item_id.clone(), text);
            truth.insert(item_id, work.work_id.clone());
        }

        SynthCorpus {
            works,
            editions,
            authors,
            items,
            texts,
            truth,
        }
    }

    /// EPUB payload for one item, ten paragraphs per chapter.
    pub fn epub_for(&self, item_id: &str) -> Option<Vec<u8>> {
        let text = self.texts.get(item_id)?;
        let lines: Vec<&str> = text.lines().collect();
        let bodies: Vec<(String, String)> = lines
            .chunks(10)
            .enumerate()
            .map(|(i, chunk)| {
                let body: String = chunk.iter().map(|p| format!("<p>{p}</p>\n")).collect();
                (format!("ch{i:03}.xhtml"), body)
            })
            .collect();
        let refs: Vec<(&str, &str)> = bodies.iter().map(|(n, b)| (n.as_str(), b.as_str())).collect();
        Some(build_epub(&refs, &[]))
    }

    /// Writes `works.jsonl`, `editions.jsonl`, `authors.jsonl`,
    /// `shadow_items.jsonl`, `truth.csv` and `payloads/<item_id>.epub`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<(), JsonlError> {
        let io = |source| JsonlError::Io {
            path: dir.to_path_buf(),
            source,
        };
        let payloads = dir.join("payloads");
        fs::create_dir_all(&payloads).map_err(io)?;
        write_jsonl(dir.join("works.jsonl"), &self.works)?;
        write_jsonl(dir.join("editions.jsonl"), &self.editions)?;
        write_jsonl(dir.join("authors.jsonl"), &self.authors)?;

        let mut items = self.items.clone();
        for item in &mut items {
            let bytes = self.epub_for(&item.item_id).expect("text for every item");
            item.size_bytes = bytes.len() as u64;
            fs::write(payloads.join(format!("{}.epub", item.item_id)), bytes).map_err(io)?;
        }
        write_jsonl(dir.join("shadow_items.jsonl"), &items)?;

        let mut truth = String::from("item_id,work_id\n");
        for (item, work) in &self.truth {
            truth.push_str(&format!("{item},{work}\n"));
        }
        fs::write(dir.join("truth.csv"), truth).map_err(io)
    }
}
