use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// Labels of at least this many characters match on similarity; shorter
/// labels match on absolute edit distance.
pub const LONG_LABEL_CHARS: usize = 5;
pub const MIN_SIMILARITY: f64 = 0.8;
pub const MAX_SHORT_LABEL_DISTANCE: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelMatch {
    /// `1 - distance / max(len)` over folded forms.
    pub similarity: f64,
    pub distance: usize,
    pub is_match: bool,
}

/// Uppercase, diacritics removed, whitespace collapsed.
pub fn fold(s: &str) -> String {
    let stripped: String = s.nfd().filter(|c| !is_combining_mark(*c)).collect();
    stripped
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_uppercase()
}

/// Compares a line (or the key part of a `KEY: value` line) against a label.
pub fn fuzzy_label_match(line: &str, label: &str) -> LabelMatch {
    let line = fold(line);
    let label = fold(label);
    let distance = strsim::levenshtein(&line, &label);
    let longest = line.chars().count().max(label.chars().count());
    let similarity = if longest == 0 {
        1.0
    } else {
        1.0 - distance as f64 / longest as f64
    };
    let is_match = if label.chars().count() >= LONG_LABEL_CHARS {
        similarity >= MIN_SIMILARITY
    } else {
        distance <= MAX_SHORT_LABEL_DISTANCE
    };
    LabelMatch {
        similarity,
        distance,
        is_match,
    }
}
