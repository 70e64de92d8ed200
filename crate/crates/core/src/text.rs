//! Normalized token space used for fuzzy comparison.
//!
//! Text is lowercased and split into runs of alphanumerics and single
//! punctuation characters, so whitespace drift such as `12 - year` vs
//! `12-year` or `Clinton 's` vs `Clinton's` disappears.

use std::collections::HashMap;

/// Rewrites typographic and PTB-escaped quotes/brackets to plain ASCII.
fn canonical_punct(text: &str) -> String {
    let mut s = text.replace("``", "\"").replace("''", "\"");
    for (from, to) in [("-LRB-", "("), ("-RRB-", ")"), ("-LSB-", "["), ("-RSB-", "]"), ("-LCB-", "{"), ("-RCB-", "}")] {
        if s.contains(from) {
            s = s.replace(from, to);
        }
    }
    s.chars()
        .map(|c| match c {
            '\u{201C}' | '\u{201D}' | '\u{201E}' | '\u{00AB}' | '\u{00BB}' => '"',
            '\u{2018}' | '\u{2019}' | '\u{201A}' | '`' => '\'',
            '\u{2013}' | '\u{2014}' => '-',
            other => other,
        })
        .collect()
}

pub fn normalize_tokens(text: &str) -> Vec<String> {
    let text = canonical_punct(text).to_lowercase();
    let mut out = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            word.push(c);
            continue;
        }
        if !word.is_empty() {
            out.push(std::mem::take(&mut word));
        }
        if !c.is_whitespace() {
            out.push(c.to_string());
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

/// Token-level Levenshtein distance.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - distance / max(len)`; two empty sequences are identical.
pub fn edit_similarity<T: PartialEq>(a: &[T], b: &[T]) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0;
    }
    1.0 - edit_distance(a, b) as f64 / longest as f64
}

/// Dice coefficient over token multisets.
pub fn overlap_similarity(a: &[String], b: &[String]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in a {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let mut shared = 0;
    for t in b {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                shared += 1;
            }
        }
    }
    2.0 * shared as f64 / (a.len() + b.len()) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hyphen_and_clitic_drift_normalize_away() {
        assert_eq!(normalize_tokens("12 - year"), normalize_tokens("12-year"));
        assert_eq!(normalize_tokens("Bill Clinton 's"), normalize_tokens("bill clinton's"));
        assert_eq!(normalize_tokens("the “other woman”"), normalize_tokens("the `` other woman ''"));
    }

    #[test]
    fn distance_basics() {
        let a = ["a", "b", "c"];
        assert_eq!(edit_distance(&a, &a), 0);
        assert_eq!(edit_distance(&a, &["a", "c"]), 1);
        assert_eq!(edit_distance::<&str>(&[], &a), 3);
        assert_eq!(edit_similarity::<&str>(&[], &[]), 1.0);
        assert!((edit_similarity(&a, &["a", "x", "c"]) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn dice_counts_multiset() {
        let t = |s: &str| normalize_tokens(s);
        assert_eq!(overlap_similarity(&t("he he"), &t("he")), 2.0 / 3.0);
        assert_eq!(overlap_similarity(&t("Hong Kong"), &t("hong kong")), 1.0);
        assert_eq!(overlap_similarity(&t("she"), &t("he")), 0.0);
    }
}
