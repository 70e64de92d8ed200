#![allow(dead_code)]

pub mod oracle;

use corefprompt::corpus::Clustering;
use corefprompt::extraction::{align_output, build_clustering, AlignConfig, AlignmentResult};
use corefprompt::llm::{CompletionBackend, EchoGoldBackend, LlmSettings};
use corefprompt::prompting::{mark_mentions, render_document_prompt, MarkedText, Templates};
use corefprompt::{Document, MentionSpan};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn to_clustering(p: &oracle::Partition) -> Clustering {
    Clustering::new(
        p.iter()
            .map(|b| b.iter().map(|&m| MentionSpan::single(m)).collect())
            .collect(),
    )
    .unwrap()
}

/// Marks the gold mentions of `doc` and returns the echo-gold completion.
pub fn echo_completion(doc: &Document, backend: &EchoGoldBackend, templates: &Templates) -> (MarkedText, String) {
    let marked = mark_mentions(doc, &doc.gold_clusters.as_ref().unwrap().mentions()).unwrap();
    let prompt = render_document_prompt(&marked, templates);
    let request = LlmSettings::default().request_for(&prompt).unwrap();
    let text = backend.complete(&request).unwrap().text;
    (marked, text)
}

pub fn align(doc: &Document, marked: &MarkedText, text: &str) -> (AlignmentResult, Clustering) {
    let alignment = align_output(doc, &marked.registry, text, &AlignConfig::default());
    let clustering = build_clustering(&alignment, true);
    (alignment, clustering)
}

pub const SPURIOUS_LINE: &str = "Meanwhile , an unrelated remark that never appeared anywhere in the input text .";

/// Drops one sentence line other than the first.
pub fn delete_sentence(text: &str, rng: &mut ChaCha8Rng) -> String {
    let mut lines: Vec<&str> = text.lines().collect();
    if lines.len() > 2 {
        lines.remove(rng.random_range(1..lines.len()));
    }
    lines.join("\n")
}

/// Rewrites one hyphenated token: `a-b` becomes `a - b`, or, failing that,
/// a spaced `a - b` is closed up to `a-b`.
pub fn rehyphenate(text: &str, rng: &mut ChaCha8Rng) -> String {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let joined: Vec<usize> = chars
        .windows(3)
        .filter(|w| w[1].1 == '-' && w[0].1.is_alphanumeric() && w[2].1.is_alphanumeric())
        .map(|w| w[1].0)
        .collect();
    if !joined.is_empty() {
        let at = joined[rng.random_range(0..joined.len())];
        return format!("{} - {}", &text[..at], &text[at + 1..]);
    }
    let spaced: Vec<usize> = text.match_indices(" - ").map(|(i, _)| i).collect();
    if spaced.is_empty() {
        return text.to_string();
    }
    let at = spaced[rng.random_range(0..spaced.len())];
    format!("{}-{}", &text[..at], &text[at + 3..])
}

pub fn insert_spurious_line(text: &str, rng: &mut ChaCha8Rng) -> String {
    let mut lines: Vec<&str> = text.lines().collect();
    lines.insert(rng.random_range(0..=lines.len()), SPURIOUS_LINE);
    lines.join("\n")
}

/// All three perturbations, applied in sequence.
pub fn perturb(text: &str, rng: &mut ChaCha8Rng) -> String {
    let t = delete_sentence(text, rng);
    let t = rehyphenate(&t, rng);
    insert_spurious_line(&t, rng)
}
