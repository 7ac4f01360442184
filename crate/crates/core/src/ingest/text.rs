//! Text normalization and word shingling.

use std::fs;
use std::io;
use std::path::Path;

use unicode_normalization::UnicodeNormalization;
use xxhash_rust::xxh3::xxh3_64_with_seed;

/// Seed for shingle hashing. Changing it invalidates every stored signature.
pub const SHINGLE_SEED: u64 = 0x6d61_6a69_6e6c_6e6b;

/// Default shingle width in words.
pub const SHINGLE_WORDS: usize = 3;

/// NFKC, lowercase, every run of non-alphanumeric characters collapsed to a
/// single space, trimmed.
pub fn normalize_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut gap = false;
    for c in text.nfkc().flat_map(char::to_lowercase) {
        if c.is_alphanumeric() {
            if gap && !out.is_empty() {
                out.push(' ');
            }
            gap = false;
            out.push(c);
        } else {
            gap = true;
        }
    }
    out
}

/// Sorted, deduplicated 64-bit shingle hashes of one item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShingleSet {
    pub item_id: String,
    hashes: Vec<u64>,
}

impl ShingleSet {
    pub fn from_hashes(item_id: impl Into<String>, mut hashes: Vec<u64>) -> Self {
        hashes.sort_unstable();
        hashes.dedup();
        ShingleSet {
            item_id: item_id.into(),
            hashes,
        }
    }

    pub fn hashes(&self) -> &[u64] {
        &self.hashes
    }

    pub fn len(&self) -> usize {
        self.hashes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hashes.is_empty()
    }

    /// Exact Jaccard similarity by sorted merge. Two empty sets give 1.
    pub fn jaccard(&self, other: &ShingleSet) -> f64 {
        let (a, b) = (&self.hashes, &other.hashes);
        let (mut i, mut j, mut inter) = (0, 0, 0usize);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    inter += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        let union = a.len() + b.len() - inter;
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// Little-endian u64 array, ascending.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.hashes.iter().flat_map(|h| h.to_le_bytes()).collect()
    }

    pub fn from_bytes(item_id: impl Into<String>, bytes: &[u8]) -> io::Result<Self> {
        if !bytes.len().is_multiple_of(8) {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                "shingle file length is not a multiple of 8",
            ));
        }
        let hashes = bytes
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Ok(ShingleSet::from_hashes(item_id, hashes))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> io::Result<()> {
        fs::write(path, self.to_bytes())
    }

    pub fn read(item_id: impl Into<String>, path: impl AsRef<Path>) -> io::Result<Self> {
        ShingleSet::from_bytes(item_id, &fs::read(path)?)
    }
}

pub fn hash_shingle(shingle: &str) -> u64 {
    xxh3_64_with_seed(shingle.as_bytes(), SHINGLE_SEED)
}

/// Hashes every window of `k` consecutive words of already-normalized text.
///
/// Non-empty texts shorter than `k` words become one shingle (the whole text);
/// an empty text yields an empty set.
pub fn shingle(item_id: impl Into<String>, normalized: &str, k: usize) -> ShingleSet {
    let k = k.max(1);
    let words: Vec<&str> = normalized.split_whitespace().collect();
    let hashes = if words.is_empty() {
        Vec::new()
    } else if words.len() < k {
        vec![hash_shingle(&words.join(" "))]
    } else {
        words.windows(k).map(|w| hash_shingle(&w.join(" "))).collect()
    };
    ShingleSet::from_hashes(item_id, hashes)
}
