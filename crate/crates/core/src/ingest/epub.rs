//! Minimal EPUB reader: container → OPF package → spine → plain text.

use std::collections::{BTreeSet, HashMap};
use std::io::{Cursor, Read};

use ego_tree::NodeRef;
use scraper::{Html, Node};
use thiserror::Error;
use zip::ZipArchive;

use crate::records::{normalize_identifier, Identifier};

#[derive(Debug, Error)]
pub enum EpubError {
    #[error("not a zip container: {0}")]
    Zip(#[from] zip::result::ZipError),
    #[error("missing archive entry {0}")]
    MissingEntry(String),
    #[error("{entry}: not valid UTF-8")]
    Encoding { entry: String },
    #[error("{entry}: malformed XML: {message}")]
    Xml { entry: String, message: String },
    #[error("container.xml names no rootfile")]
    NoRootfile,
    #[error("spine references unknown manifest id {0}")]
    UnknownIdref(String),
    #[error("package has an empty spine")]
    EmptySpine,
    #[error("reading {entry}: {source}")]
    Io {
        entry: String,
        source: std::io::Error,
    },
}

/// Text and package-level identifiers pulled from one EPUB.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpubContent {
    pub text: String,
    pub identifiers: BTreeSet<Identifier>,
}

/// Extracts the plain text of an EPUB, spine item by spine item.
pub fn extract_epub_text(epub_bytes: &[u8]) -> Result<String, EpubError> {
    extract_epub(epub_bytes).map(|c| c.text)
}

/// Like [`extract_epub_text`] but also harvests `dc:identifier` values.
pub fn extract_epub(epub_bytes: &[u8]) -> Result<EpubContent, EpubError> {
    let mut archive = ZipArchive::new(Cursor::new(epub_bytes))?;

    let container = read_utf8(&mut archive, "META-INF/container.xml")?;
    let opf_path = parse_xml("META-INF/container.xml", &container, |doc| {
        doc.descendants()
            .find(|n| n.has_tag_name("rootfile"))
            .and_then(|n| n.attribute("full-path"))
            .map(str::to_string)
    })?
    .ok_or(EpubError::NoRootfile)?;

    let opf = read_utf8(&mut archive, &opf_path)?;
    let package = parse_xml(&opf_path, &opf, Package::from_document)?;
    if package.spine.is_empty() {
        return Err(EpubError::EmptySpine);
    }
    let base_dir = opf_path.rsplit_once('/').map(|(d, _)| d).unwrap_or("");

    let mut chapters = Vec::with_capacity(package.spine.len());
    for idref in &package.spine {
        let item = package
            .manifest
            .get(idref)
            .ok_or_else(|| EpubError::UnknownIdref(idref.clone()))?;
        if item.is_nav {
            continue;
        }
        let entry = resolve_href(base_dir, &item.href);
        let markup = read_utf8(&mut archive, &entry)?;
        let text = strip_markup(&markup);
        if !text.is_empty() {
            chapters.push(text);
        }
    }

    Ok(EpubContent {
        text: chapters.join("\n\n"),
        identifiers: package.identifiers,
    })
}

struct ManifestItem {
    href: String,
    is_nav: bool,
}

struct Package {
    manifest: HashMap<String, ManifestItem>,
    spine: Vec<String>,
    identifiers: BTreeSet<Identifier>,
}

impl Package {
    fn from_document(doc: &roxmltree::Document<'_>) -> Self {
        let mut manifest = HashMap::new();
        let mut spine = Vec::new();
        let mut identifiers = BTreeSet::new();
        for node in doc.descendants().filter(|n| n.is_element()) {
            match node.tag_name().name() {
                "item" => {
                    if let (Some(id), Some(href)) = (node.attribute("id"), node.attribute("href")) {
                        let is_nav = node
                            .attribute("properties")
                            .is_some_and(|p| p.split_whitespace().any(|t| t == "nav"));
                        manifest.insert(
                            id.to_string(),
                            ManifestItem {
                                href: href.to_string(),
                                is_nav,
                            },
                        );
                    }
                }
                "itemref" => {
                    if let Some(idref) = node.attribute("idref") {
                        spine.push(idref.to_string());
                    }
                }
                "identifier" => {
                    if let Some(id) = node.text().and_then(normalize_identifier) {
                        identifiers.insert(id);
                    }
                }
                _ => {}
            }
        }
        Package {
            manifest,
            spine,
            identifiers,
        }
    }
}

fn read_utf8(archive: &mut ZipArchive<Cursor<&[u8]>>, name: &str) -> Result<String, EpubError> {
    let mut file = archive
        .by_name(name)
        .map_err(|_| EpubError::MissingEntry(name.to_string()))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes).map_err(|source| EpubError::Io {
        entry: name.to_string(),
        source,
    })?;
    let body = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(&bytes);
    String::from_utf8(body.to_vec()).map_err(|_| EpubError::Encoding {
        entry: name.to_string(),
    })
}

fn parse_xml<T>(
    entry: &str,
    text: &str,
    f: impl FnOnce(&roxmltree::Document<'_>) -> T,
) -> Result<T, EpubError> {
    let opts = roxmltree::ParsingOptions {
        allow_dtd: true,
        ..Default::default()
    };
    let doc = roxmltree::Document::parse_with_options(text, opts).map_err(|e| EpubError::Xml {
        entry: entry.to_string(),
        message: e.to_string(),
    })?;
    Ok(f(&doc))
}

/// Joins a manifest href onto the package directory, decoding percent
/// escapes and folding `.`/`..` segments.
fn resolve_href(base_dir: &str, href: &str) -> String {
    let href = href.split('#').next().unwrap_or_default();
    let decoded = percent_encoding::percent_decode_str(href).decode_utf8_lossy();
    let mut parts: Vec<&str> = base_dir.split('/').filter(|s| !s.is_empty()).collect();
    for seg in decoded.split('/') {
        match seg {
            "" | "." => {}
            ".." => {
                parts.pop();
            }
            s => parts.push(s),
        }
    }
    parts.join("/")
}

const SKIPPED: &[&str] = &["head", "script", "style", "noscript", "template", "title"];

const BLOCKS: &[&str] = &[
    "address", "article", "aside", "blockquote", "body", "br", "dd", "div", "dl", "dt",
    "figcaption", "figure", "footer", "h1", "h2", "h3", "h4", "h5", "h6", "header", "hr", "li",
    "main", "nav", "ol", "p", "pre", "section", "table", "td", "th", "tr", "ul",
];

/// Plain text of one (X)HTML document: one paragraph per line, whitespace
/// inside a paragraph collapsed to single spaces.
pub fn strip_markup(markup: &str) -> String {
    let doc = Html::parse_document(markup);
    let mut out = LineBuilder::default();
    walk(doc.tree.root(), &mut out);
    out.finish()
}

fn walk(node: NodeRef<'_, Node>, out: &mut LineBuilder) {
    match node.value() {
        Node::Text(text) => out.push_text(text),
        Node::Element(el) => {
            let name = el.name();
            if SKIPPED.contains(&name) {
                return;
            }
            let block = BLOCKS.contains(&name);
            if block {
                out.break_line();
            }
            for child in node.children() {
                walk(child, out);
            }
            if block {
                out.break_line();
            }
        }
        _ => {
            for child in node.children() {
                walk(child, out);
            }
        }
    }
}

#[derive(Default)]
struct LineBuilder {
    lines: Vec<String>,
    current: String,
    pending_space: bool,
}

impl LineBuilder {
    fn push_text(&mut self, text: &str) {
        for c in text.chars() {
            if c.is_whitespace() {
                self.pending_space = true;
            } else {
                if self.pending_space && !self.current.is_empty() {
                    self.current.push(' ');
                }
                self.pending_space = false;
                self.current.push(c);
            }
        }
    }

    fn break_line(&mut self) {
        if !self.current.is_empty() {
            self.lines.push(std::mem::take(&mut self.current));
        }
        self.pending_space = false;
    }

    fn finish(mut self) -> String {
        self.break_line();
        self.lines.join("\n")
    }
}
