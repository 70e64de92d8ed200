//! Prompt rendering for the document, QA and mention-detection templates.
//!
//! The document template marks every candidate mention as `[surface](#)`.
//! The [`MarkerRegistry`] records which span each marker stands for, in the
//! order the opening brackets appear in the text, so extraction can map the
//! completion back onto token spans.

mod templates;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{document_order, Document, MentionSpan};

pub use templates::Templates;
pub(crate) use templates::fill;

/// Closing marker written after each candidate mention in the input.
pub const EMPTY_MARKER_CLOSE: &str = "](#)";

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("crossing mentions {0} and {1} cannot be bracketed")]
    CrossingMentions(MentionSpan, MentionSpan),
    #[error("mention {span} is outside the document ({len} tokens)")]
    OutOfBounds { span: MentionSpan, len: usize },
    #[error("template: {0}")]
    Template(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Document,
    Qa,
    MentionDetection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub ordinal: usize,
    pub span: MentionSpan,
    pub nesting_depth: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkerRegistry {
    entries: Vec<RegistryEntry>,
}

impl MarkerRegistry {
    pub fn entries(&self) -> &[RegistryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn spans(&self) -> impl Iterator<Item = MentionSpan> + '_ {
        self.entries.iter().map(|e| e.span)
    }
}

/// Document text with candidate mentions bracketed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkedText {
    pub text: String,
    pub registry: MarkerRegistry,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub kind: PromptKind,
    pub text: String,
    /// The text substituted into the template's input/context slot.
    pub body: String,
    pub registry: MarkerRegistry,
    pub target: Option<MentionSpan>,
}

/// Wraps each mention as `[surface](#)`, nesting brackets for nested spans.
///
/// Tokens are joined by single spaces and sentences by line breaks.
pub fn mark_mentions(doc: &Document, mentions: &BTreeSet<MentionSpan>) -> Result<MarkedText, PromptError> {
    let mut ordered: Vec<MentionSpan> = mentions.iter().copied().collect();
    ordered.sort_by(document_order);

    let n = doc.tokens.len();
    let mut entries = Vec::with_capacity(ordered.len());
    let mut stack: Vec<MentionSpan> = Vec::new();
    for &m in &ordered {
        if m.end >= n {
            return Err(PromptError::OutOfBounds { span: m, len: n });
        }
        while stack.last().is_some_and(|top| top.end < m.start) {
            stack.pop();
        }
        if let Some(top) = stack.last() {
            if m.end > top.end {
                return Err(PromptError::CrossingMentions(*top, m));
            }
        }
        entries.push(RegistryEntry {
            ordinal: entries.len(),
            span: m,
            nesting_depth: stack.len(),
        });
        stack.push(m);
    }

    let mut opens = vec![0usize; n];
    let mut closes = vec![0usize; n];
    for m in &ordered {
        opens[m.start] += 1;
        closes[m.end] += 1;
    }
    let mut text = String::new();
    for (i, t) in doc.tokens.iter().enumerate() {
        if i > 0 {
            text.push(if t.sentence_index != doc.tokens[i - 1].sentence_index { '\n' } else { ' ' });
        }
        for _ in 0..opens[i] {
            text.push('[');
        }
        text.push_str(&t.surface);
        for _ in 0..closes[i] {
            text.push_str(EMPTY_MARKER_CLOSE);
        }
    }
    Ok(MarkedText {
        text,
        registry: MarkerRegistry { entries },
    })
}

pub fn render_document_prompt(marked: &MarkedText, templates: &Templates) -> RenderedPrompt {
    RenderedPrompt {
        kind: PromptKind::Document,
        text: fill(&templates.document, &[("input", &marked.text)]),
        body: marked.text.clone(),
        registry: marked.registry.clone(),
        target: None,
    }
}

/// Context is the whole document on one line with the target wrapped in `*...*`.
pub fn render_qa_prompt(doc: &Document, target: MentionSpan, templates: &Templates) -> Result<RenderedPrompt, PromptError> {
    if !doc.contains_span(&target) {
        return Err(PromptError::OutOfBounds {
            span: target,
            len: doc.tokens.len(),
        });
    }
    let mut context = String::new();
    for (i, t) in doc.tokens.iter().enumerate() {
        if i > 0 {
            context.push(' ');
        }
        if i == target.start {
            context.push('*');
        }
        context.push_str(&t.surface);
        if i == target.end {
            context.push('*');
        }
    }
    let mention = doc.span_text(&target);
    Ok(RenderedPrompt {
        kind: PromptKind::Qa,
        text: fill(&templates.qa, &[("context", &context), ("mention", &mention)]),
        body: context,
        registry: MarkerRegistry::default(),
        target: Some(target),
    })
}

pub fn render_md_prompt(doc: &Document, templates: &Templates) -> RenderedPrompt {
    let body = doc.detokenize();
    RenderedPrompt {
        kind: PromptKind::MentionDetection,
        text: fill(&templates.mention_detection, &[("input", &body)]),
        body,
        registry: MarkerRegistry::default(),
        target: None,
    }
}

/// Removes `[` and `](#)` marker sequences written by [`mark_mentions`].
pub fn strip_empty_markers(marked: &str) -> String {
    crate::extraction::parse_annotations(marked).plain_text
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(spans: &[(usize, usize)]) -> BTreeSet<MentionSpan> {
        spans.iter().map(|&(s, e)| MentionSpan::new(s, e)).collect()
    }

    #[test]
    fn marks_simple_span() {
        let doc = Document::from_text("d", "en", "Although Mr. Clinton denied it");
        let m = mark_mentions(&doc, &set(&[(1, 2)])).unwrap();
        assert_eq!(m.text, "Although [Mr. Clinton](#) denied it");
        assert_eq!(m.registry.len(), 1);
    }

    #[test]
    fn nested_brackets_outer_first() {
        let doc = Document::from_text("d", "en", "The world's fifth Disney park will open");
        let m = mark_mentions(&doc, &set(&[(3, 3), (0, 4)])).unwrap();
        assert_eq!(m.text, "[The world's fifth [Disney](#) park](#) will open");
        let e = m.registry.entries();
        assert_eq!(e[0].span, MentionSpan::new(0, 4));
        assert_eq!(e[0].nesting_depth, 0);
        assert_eq!(e[1].span, MentionSpan::new(3, 3));
        assert_eq!(e[1].nesting_depth, 1);
    }

    #[test]
    fn shared_start_longer_opens_first() {
        let doc = Document::from_text("d", "en", "his wife , Hillary left");
        let m = mark_mentions(&doc, &set(&[(0, 0), (0, 3)])).unwrap();
        assert_eq!(m.text, "[[his](#) wife , Hillary](#) left");
        assert_eq!(m.registry.entries()[0].span, MentionSpan::new(0, 3));
    }

    #[test]
    fn empty_mentions_is_identity() {
        let doc = Document::from_text("d", "en", "a b\nc");
        let m = mark_mentions(&doc, &BTreeSet::new()).unwrap();
        assert_eq!(m.text, doc.detokenize());
        assert!(m.registry.is_empty());
    }

    #[test]
    fn crossing_rejected() {
        let doc = Document::from_text("d", "en", "a b c d");
        let err = mark_mentions(&doc, &set(&[(0, 2), (1, 3)])).unwrap_err();
        assert!(matches!(err, PromptError::CrossingMentions(a, b) if a == MentionSpan::new(0, 2) && b == MentionSpan::new(1, 3)));
    }

    #[test]
    fn document_prompt_structure() {
        let t = Templates::default();
        let doc = Document::from_text("d", "en", "");
        let p = render_document_prompt(&mark_mentions(&doc, &BTreeSet::new()).unwrap(), &t);
        assert!(p.text.ends_with("\nInput: \nOutput:"));
        assert_eq!(p.text.matches("Input:").count(), 1);
        assert_eq!(p.text.matches("Output:").count(), 1);
    }

    #[test]
    fn qa_prompt_target_at_start_and_determinism() {
        let t = Templates::default();
        let doc = Document::from_text("d", "en", "She said she left .");
        let p = render_qa_prompt(&doc, MentionSpan::single(0), &t).unwrap();
        assert!(p.text.contains("Context: *She* said she left ."));
        assert!(p.text.ends_with("Question: What does *She* refer to?\nAnswer:"));
        let q = render_qa_prompt(&doc, MentionSpan::single(2), &t).unwrap();
        assert_ne!(p.text, q.text);
        assert_eq!(q, render_qa_prompt(&doc, MentionSpan::single(2), &t).unwrap());
        assert!(render_qa_prompt(&doc, MentionSpan::single(9), &t).is_err());
    }

    #[test]
    fn md_prompt_has_no_markers() {
        let t = Templates::default();
        let doc = Document::from_text("d", "en", "Hong Kong is here .");
        let p = render_md_prompt(&doc, &t);
        assert!(!p.text.contains("](#"));
        assert!(p.text.starts_with("In the following text, list all named entities"));
        let empty = render_md_prompt(&Document::from_text("e", "en", ""), &t);
        assert!(empty.text.ends_with("Input: \nOutput:"));
    }
}
