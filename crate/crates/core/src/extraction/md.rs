use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, MentionSpan};
use crate::text::{normalize_tokens, overlap_similarity};

/// The three lists of a mention-detection completion, in completion order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MdLists {
    pub names: Vec<String>,
    pub pronouns: Vec<String>,
    pub nominals: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MdCategory {
    Name,
    Pronoun,
    Nominal,
}

impl MdLists {
    pub fn len(&self) -> usize {
        self.names.len() + self.pronouns.len() + self.nominals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter<'a>(&'a self) -> impl Iterator<Item = (MdCategory, &'a str)> + 'a {
        let tag = |cat: MdCategory, list: &'a [String]| list.iter().map(move |s| (cat, s.as_str()));
        tag(MdCategory::Name, &self.names)
            .chain(tag(MdCategory::Pronoun, &self.pronouns))
            .chain(tag(MdCategory::Nominal, &self.nominals))
    }

    fn list_mut(&mut self, cat: MdCategory) -> &mut Vec<String> {
        match cat {
            MdCategory::Name => &mut self.names,
            MdCategory::Pronoun => &mut self.pronouns,
            MdCategory::Nominal => &mut self.nominals,
        }
    }
}

const HEADS: [(&str, MdCategory); 3] = [
    ("named entities", MdCategory::Name),
    ("pronouns", MdCategory::Pronoun),
    ("nominal noun phrases", MdCategory::Nominal),
];

fn split_head(line: &str) -> Option<(MdCategory, &str)> {
    for (head, cat) in HEADS {
        if line.get(..head.len()).is_some_and(|p| p.eq_ignore_ascii_case(head)) {
            let rest = line[head.len()..].trim_start();
            return Some((cat, rest.strip_prefix(':').unwrap_or(rest)));
        }
    }
    None
}

/// Reads the `Named Entities:` / `Pronouns:` / `Nominal Noun Phrases:` lines.
///
/// Head matching is case-insensitive. A line without a head continues the
/// previous list (completions sometimes wrap long lists). Items are split on
/// commas and trimmed; empty items are dropped.
pub fn parse_md_output(output_text: &str) -> MdLists {
    let mut lists = MdLists::default();
    let mut current: Option<MdCategory> = None;
    for raw in output_text.lines() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let rest = match split_head(line) {
            Some((cat, rest)) => {
                current = Some(cat);
                rest
            }
            None => line,
        };
        let Some(cat) = current else { continue };
        lists.list_mut(cat).extend(
            rest.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string),
        );
    }
    lists
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MdGrounding {
    /// Grounded spans in list order.
    pub spans: Vec<(MentionSpan, MdCategory)>,
    /// Listed strings with no unused occurrence in the document.
    pub dropped: Vec<String>,
}

impl MdGrounding {
    pub fn mention_set(&self) -> BTreeSet<MentionSpan> {
        self.spans.iter().map(|(s, _)| *s).collect()
    }
}

/// Maps each listed string to the leftmost unused token run of `doc` whose
/// normalized form equals it. Runs never cross sentence boundaries; repeats
/// consume successive occurrences.
pub fn ground_md_strings(doc: &Document, lists: &MdLists) -> MdGrounding {
    let token_norm: Vec<Vec<String>> = doc.tokens.iter().map(|t| normalize_tokens(&t.surface)).collect();
    let mut used: BTreeSet<MentionSpan> = BTreeSet::new();
    let mut out = MdGrounding::default();
    for (cat, listed) in lists.iter() {
        let want = normalize_tokens(listed);
        let found = (!want.is_empty())
            .then(|| {
                (0..doc.tokens.len()).find_map(|start| {
                    let span = match_at(doc, &token_norm, start, &want)?;
                    (!used.contains(&span)).then_some(span)
                })
            })
            .flatten();
        match found {
            Some(span) => {
                used.insert(span);
                out.spans.push((span, cat));
            }
            None => out.dropped.push(listed.to_string()),
        }
    }
    out
}

fn match_at(doc: &Document, token_norm: &[Vec<String>], start: usize, want: &[String]) -> Option<MentionSpan> {
    let sentence = doc.tokens[start].sentence_index;
    let mut pos = 0;
    for (t, norm) in token_norm.iter().enumerate().skip(start) {
        if doc.tokens[t].sentence_index != sentence {
            return None;
        }
        let next = pos + norm.len();
        if next > want.len() || want[pos..next] != norm[..] {
            return None;
        }
        pos = next;
        if pos == want.len() {
            return Some(MentionSpan::new(start, t));
        }
    }
    None
}

/// Pulls the antecedent string out of a QA-template answer such as
/// `*it* refers to Disney.`
pub fn parse_qa_answer(output_text: &str) -> Option<String> {
    let line = output_text.lines().map(str::trim).find(|l| !l.is_empty())?;
    let line = line.strip_prefix("Answer:").unwrap_or(line).trim();
    let lower = line.to_lowercase();
    let answer = match lower.find("refers to") {
        Some(i) => &line[i + "refers to".len()..],
        None => line,
    };
    let answer = answer
        .trim()
        .trim_end_matches('.')
        .trim_matches(|c: char| c == '*' || c == '"' || c == '\'' || c.is_whitespace());
    let lowered = answer.to_lowercase();
    if answer.is_empty() || ["nothing", "none", "unknown", "n/a"].contains(&lowered.as_str()) || lowered.starts_with("no ") {
        return None;
    }
    Some(answer.to_string())
}

/// Picks the candidate whose surface best overlaps `answer`; ties go to the
/// candidate closest before `target`.
pub fn ground_answer(
    doc: &Document,
    candidates: &[MentionSpan],
    target: MentionSpan,
    answer: &str,
    threshold: f64,
) -> Option<MentionSpan> {
    let want = normalize_tokens(answer);
    let mut best: Option<(f64, usize, MentionSpan)> = None;
    for &c in candidates {
        if c == target {
            continue;
        }
        let sim = overlap_similarity(&want, &normalize_tokens(&doc.span_text(&c)));
        if sim < threshold || sim == 0.0 {
            continue;
        }
        let dist = c.start.abs_diff(target.start);
        if best.is_none_or(|(bs, bd, _)| sim > bs || (sim == bs && dist < bd)) {
            best = Some((sim, dist, c));
        }
    }
    best.map(|b| b.2)
}
