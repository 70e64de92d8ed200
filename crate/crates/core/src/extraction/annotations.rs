use std::ops::Range;

use serde::{Deserialize, Serialize};

/// One `[surface](#label)` annotation found in completion text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSpan {
    /// Marker-stripped text between the brackets.
    pub surface: String,
    pub cluster_label: String,
    /// Byte offset of the `[` in the completion.
    pub open_offset: usize,
    pub nesting_depth: usize,
    /// Byte range of `surface` within [`ParsedAnnotations::plain_text`].
    pub plain_range: Range<usize>,
    /// Byte range of the `](#label)` closer in the completion.
    pub close_range: Range<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedAnnotations {
    /// Ordered by opening bracket.
    pub spans: Vec<AnnotatedSpan>,
    /// The completion with every recognized marker removed.
    pub plain_text: String,
    /// Unbalanced or malformed marker fragments, kept as plain text.
    pub malformed: usize,
}

/// Parses `](#label)` at `pos`; returns the label and the closer's end.
fn closer_at(text: &str, pos: usize) -> Option<(&str, usize)> {
    let rest = text[pos..].strip_prefix("](#")?;
    let close = rest.find(|c: char| c == ')' || c == '\n' || c == '[' || c == ']')?;
    if rest.as_bytes()[close] != b')' {
        return None;
    }
    Some((&rest[..close], pos + 3 + close + 1))
}

/// Stack-based scan for `[` … `](#label)` with arbitrary nesting.
///
/// Never fails: stray closers, closers without a label terminator and
/// brackets left open at the end are counted in `malformed` and treated as
/// plain text.
pub fn parse_annotations(text: &str) -> ParsedAnnotations {
    struct Pair<'a> {
        open: usize,
        close: Range<usize>,
        label: &'a str,
    }

    let bytes = text.as_bytes();
    let mut stack: Vec<usize> = Vec::new();
    let mut pairs: Vec<Pair> = Vec::new();
    let mut malformed = 0;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'[' => {
                stack.push(i);
                i += 1;
            }
            b']' if text[i..].starts_with("](#") => match closer_at(text, i) {
                Some((label, end)) => {
                    match stack.pop() {
                        Some(open) => pairs.push(Pair {
                            open,
                            close: i..end,
                            label,
                        }),
                        None => malformed += 1,
                    }
                    i = end;
                }
                None => {
                    malformed += 1;
                    i += 1;
                }
            },
            _ => i += 1,
        }
    }
    malformed += stack.len();

    pairs.sort_by_key(|p| p.open);
    // Marker positions to skip when building the plain text.
    let mut skip: Vec<(usize, usize)> = Vec::with_capacity(pairs.len() * 2);
    for p in &pairs {
        skip.push((p.open, p.open + 1));
        skip.push((p.close.start, p.close.end));
    }
    skip.sort_unstable();

    let mut plain = String::with_capacity(text.len());
    let mut plain_at = vec![0usize; text.len() + 1];
    let mut cursor = 0;
    for &(s, e) in &skip {
        for (k, slot) in plain_at.iter_mut().enumerate().take(s + 1).skip(cursor) {
            *slot = plain.len() + (k - cursor);
        }
        plain.push_str(&text[cursor..s]);
        for slot in plain_at.iter_mut().take(e + 1).skip(s) {
            *slot = plain.len();
        }
        cursor = e;
    }
    for (k, slot) in plain_at.iter_mut().enumerate().skip(cursor) {
        *slot = plain.len() + (k - cursor);
    }
    plain.push_str(&text[cursor..]);

    // Depth = number of matched pairs enclosing the opener.
    let mut open_stack: Vec<usize> = Vec::new();
    let spans = pairs
        .iter()
        .map(|p| {
            while open_stack.last().is_some_and(|&end| end <= p.open) {
                open_stack.pop();
            }
            let depth = open_stack.len();
            open_stack.push(p.close.end);
            let start = plain_at[p.open + 1];
            let end = plain_at[p.close.start];
            AnnotatedSpan {
                surface: plain[start..end].to_string(),
                cluster_label: p.label.to_string(),
                open_offset: p.open,
                nesting_depth: depth,
                plain_range: start..end,
                close_range: p.close.clone(),
            }
        })
        .collect();

    ParsedAnnotations {
        spans,
        plain_text: plain,
        malformed,
    }
}
