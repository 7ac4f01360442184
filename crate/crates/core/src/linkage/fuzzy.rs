//! Indel-based string similarity on the 0..=100 scale.
//!
//! `ratio(a, b) = 100 · (1 − indel(a, b) / (|a| + |b|))`, where `indel` counts
//! insertions and deletions only (a substitution costs 2). Lengths are in
//! Unicode scalar values. `indel = |a| + |b| − 2·LCS`, and the LCS length is
//! computed with a bit-parallel row update, 64 pattern characters per word.

use std::collections::HashMap;

/// Match masks of a pattern, one bit per pattern position.
struct Pattern {
    words: usize,
    len: usize,
    masks: HashMap<char, Vec<u64>>,
}

impl Pattern {
    fn new(chars: &[char]) -> Self {
        let words = chars.len().div_ceil(64).max(1);
        let mut masks: HashMap<char, Vec<u64>> = HashMap::new();
        for (i, &c) in chars.iter().enumerate() {
            masks.entry(c).or_insert_with(|| vec![0; words])[i / 64] |= 1 << (i % 64);
        }
        Pattern {
            words,
            len: chars.len(),
            masks,
        }
    }

    /// Length of the longest common subsequence of the pattern and `text`.
    fn lcs(&self, text: &[char]) -> usize {
        if self.len == 0 || text.is_empty() {
            return 0;
        }
        let mut v = vec![u64::MAX; self.words];
        for c in text {
            let Some(mask) = self.masks.get(c) else {
                continue;
            };
            let mut carry = 0u64;
            for (vk, &m) in v.iter_mut().zip(mask) {
                let u = *vk & m;
                let (sum, c1) = vk.overflowing_add(u);
                let (sum, c2) = sum.overflowing_add(carry);
                carry = u64::from(c1 || c2);
                *vk = sum | (*vk - u);
            }
        }
        let full_words = self.len / 64;
        let mut zeros: usize = v[..full_words].iter().map(|w| w.count_zeros() as usize).sum();
        let rem = self.len % 64;
        if rem > 0 {
            let tail = v[full_words] | !((1u64 << rem) - 1);
            zeros += tail.count_zeros() as usize;
        }
        zeros
    }
}

/// Similarity from an LCS length and the combined length of both strings.
fn score(lcs: usize, total: usize) -> f64 {
    if total == 0 {
        return 100.0;
    }
    let indel = total - 2 * lcs;
    100.0 * (1.0 - indel as f64 / total as f64)
}

pub fn ratio(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    score(Pattern::new(&a).lcs(&b), a.len() + b.len())
}

/// Best [`ratio`] of the shorter string against windows of the longer one.
///
/// Windows are every contiguous substring of the longer string with the
/// shorter string's length, plus the shorter prefixes and suffixes at the
/// two edges. The full-string `ratio(a, b)` is also a candidate, so the
/// result never falls below it. Equal lengths reduce to `ratio(a, b)`.
pub fn partial_ratio(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let m = short.len();
    let n = long.len();
    let pattern = Pattern::new(&short);
    if m == n {
        return score(pattern.lcs(&long), m + n);
    }
    if m == 0 {
        return score(0, 0);
    }
    if long.windows(m).any(|w| w == short.as_slice()) {
        return 100.0;
    }
    let full = long.windows(m).map(|w| score(pattern.lcs(w), 2 * m));
    let edges = (1..m).flat_map(|k| {
        let prefix = score(pattern.lcs(&long[..k]), m + k);
        let suffix = score(pattern.lcs(&long[n - k..]), m + k);
        [prefix, suffix]
    });
    let whole = score(pattern.lcs(&long), m + n);
    full.chain(edges).fold(whole, f64::max)
}
