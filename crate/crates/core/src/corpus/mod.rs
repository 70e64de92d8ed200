//! In-memory document model for coreference corpora.
//!
//! Tokens are the alignment unit everywhere: a [`MentionSpan`] is an inclusive
//! token range, and character offsets are only ever derived from the
//! detokenized text.

mod conll;
mod stats;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use conll::{index_by_key, parse_conll, parse_conll_file, serialize_conll, ColumnMap, Dialect};
pub use stats::{corpus_stats, GroupStats, StatsReport};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{doc_id}:{line}: closing bracket for cluster {cluster} without a matching open")]
    UnmatchedClose {
        doc_id: String,
        line: usize,
        cluster: String,
    },
    #[error("{doc_id}:{line}: cluster {cluster} opened here is never closed")]
    Unclosed {
        doc_id: String,
        line: usize,
        cluster: String,
    },
    #[error("{doc_id}:{line}: malformed coreference cell `{cell}`")]
    MalformedCell {
        doc_id: String,
        line: usize,
        cell: String,
    },
    #[error("line {line}: {dialect} rows need at least {expected} columns, found {found}")]
    Dialect {
        dialect: Dialect,
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {message}")]
    Structure { line: usize, message: String },
    #[error("{doc_id}: {source}")]
    Clustering {
        doc_id: String,
        #[source]
        source: ClusteringError,
    },
    #[error("span {span} is outside document {doc_id} ({len} tokens)")]
    SpanOutOfBounds {
        doc_id: String,
        span: MentionSpan,
        len: usize,
    },
    #[error("document {0} has no gold coreference annotation")]
    MissingGold(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClusteringError {
    #[error("mention {0} appears in more than one cluster")]
    DuplicateMention(MentionSpan),
    #[error("invalid span {0}: start after end")]
    InvertedSpan(MentionSpan),
}

/// Inclusive token range `start..=end` within one document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MentionSpan {
    pub start: usize,
    pub end: usize,
}

impl MentionSpan {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end, "span start {start} after end {end}");
        MentionSpan { start, end }
    }

    pub fn single(index: usize) -> Self {
        MentionSpan::new(index, index)
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, other: &MentionSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn overlaps(&self, other: &MentionSpan) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    /// Partial overlap where neither span contains the other.
    pub fn crosses(&self, other: &MentionSpan) -> bool {
        self.overlaps(other) && !self.contains(other) && !other.contains(self)
    }

    /// Sort key for left-to-right bracket opening: earlier start first, and
    /// at a shared start the longer (outer) span first.
    pub fn open_order(&self) -> (usize, std::cmp::Reverse<usize>) {
        (self.start, std::cmp::Reverse(self.end))
    }

    pub fn tokens(&self) -> Range<usize> {
        self.start..self.end + 1
    }
}

impl fmt::Display for MentionSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}..={}]", self.start, self.end)
    }
}

/// Orders spans by [`MentionSpan::open_order`].
pub fn document_order(a: &MentionSpan, b: &MentionSpan) -> std::cmp::Ordering {
    a.open_order().cmp(&b.open_order())
}

/// A set of entities over one document.
///
/// Stored in canonical form: mentions inside a cluster and the clusters
/// themselves are sorted in document order (by first mention), so cluster
/// indices are dense, 0-based and follow first appearance.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<MentionSpan>>", into = "Vec<Vec<MentionSpan>>")]
pub struct Clustering {
    clusters: Vec<Vec<MentionSpan>>,
}

impl Clustering {
    pub fn new(clusters: Vec<Vec<MentionSpan>>) -> Result<Self, ClusteringError> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(clusters.len());
        for cluster in clusters {
            let mut members: Vec<MentionSpan> = Vec::with_capacity(cluster.len());
            for span in cluster {
                if span.start > span.end {
                    return Err(ClusteringError::InvertedSpan(span));
                }
                if members.contains(&span) {
                    continue;
                }
                if !seen.insert(span) {
                    return Err(ClusteringError::DuplicateMention(span));
                }
                members.push(span);
            }
            if members.is_empty() {
                continue;
            }
            members.sort_by(document_order);
            out.push(members);
        }
        out.sort_by(|a, b| document_order(&a[0], &b[0]));
        Ok(Clustering { clusters: out })
    }

    pub fn empty() -> Self {
        Clustering::default()
    }

    pub fn clusters(&self) -> &[Vec<MentionSpan>] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn mention_count(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }

    pub fn mentions(&self) -> BTreeSet<MentionSpan> {
        self.clusters.iter().flatten().copied().collect()
    }

    pub fn singleton_count(&self) -> usize {
        self.clusters.iter().filter(|c| c.len() == 1).count()
    }

    pub fn has_singletons(&self) -> bool {
        self.singleton_count() > 0
    }

    /// Maps each mention to its (canonical) cluster index.
    pub fn cluster_index(&self) -> HashMap<MentionSpan, usize> {
        let mut map = HashMap::with_capacity(self.mention_count());
        for (i, cluster) in self.clusters.iter().enumerate() {
            for &m in cluster {
                map.insert(m, i);
            }
        }
        map
    }

    pub fn without_singletons(&self) -> Clustering {
        Clustering {
            clusters: self
                .clusters
                .iter()
                .filter(|c| c.len() > 1)
                .cloned()
                .collect(),
        }
    }

    pub fn max_end(&self) -> Option<usize> {
        self.clusters.iter().flatten().map(|m| m.end).max()
    }
}

impl TryFrom<Vec<Vec<MentionSpan>>> for Clustering {
    type Error = ClusteringError;

    fn try_from(value: Vec<Vec<MentionSpan>>) -> Result<Self, Self::Error> {
        Clustering::new(value)
    }
}

impl From<Clustering> for Vec<Vec<MentionSpan>> {
    fn from(value: Clustering) -> Self {
        value.clusters
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub doc_index: usize,
    pub sentence_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos_tag: Option<String>,
    /// Named-entity type covering this token, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ne_tag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    #[serde(default)]
    pub part: u32,
    pub language: String,
    #[serde(default)]
    pub genre: Option<String>,
    pub tokens: Vec<Token>,
    pub sentence_count: usize,
    #[serde(default)]
    pub gold_clusters: Option<Clustering>,
    /// Whether the source carried a named-entity column.
    #[serde(default)]
    pub ne_annotated: bool,
}

impl Document {
    /// Builds a document from pre-tokenized sentences.
    pub fn from_sentences<S: AsRef<str>>(
        doc_id: impl Into<String>,
        language: impl Into<String>,
        sentences: &[Vec<S>],
    ) -> Self {
        let mut tokens = Vec::new();
        for (si, sentence) in sentences.iter().enumerate() {
            for word in sentence {
                tokens.push(Token {
                    surface: word.as_ref().to_string(),
                    doc_index: tokens.len(),
                    sentence_index: si,
                    pos_tag: None,
                    ne_tag: None,
                });
            }
        }
        let doc_id = doc_id.into();
        Document {
            genre: genre_from_id(&doc_id),
            doc_id,
            part: 0,
            language: language.into(),
            tokens,
            sentence_count: sentences.len(),
            gold_clusters: None,
            ne_annotated: false,
        }
    }

    /// Splits each line on whitespace: one line per sentence.
    pub fn from_text(doc_id: impl Into<String>, language: impl Into<String>, text: &str) -> Self {
        let sentences: Vec<Vec<&str>> = text
            .lines()
            .map(|l| l.split_whitespace().collect::<Vec<_>>())
            .filter(|s| !s.is_empty())
            .collect();
        Document::from_sentences(doc_id, language, &sentences)
    }

    pub fn with_gold(mut self, clustering: Clustering) -> Result<Self, CorpusError> {
        self.check_clustering(&clustering)?;
        self.gold_clusters = Some(clustering);
        Ok(self)
    }

    /// `doc_id` plus part number; unique within a CoNLL corpus.
    pub fn key(&self) -> String {
        format!("{}#{:03}", self.doc_id, self.part)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn contains_span(&self, span: &MentionSpan) -> bool {
        span.start <= span.end && span.end < self.tokens.len()
    }

    pub fn check_span(&self, span: &MentionSpan) -> Result<(), CorpusError> {
        if self.contains_span(span) {
            Ok(())
        } else {
            Err(CorpusError::SpanOutOfBounds {
                doc_id: self.key(),
                span: *span,
                len: self.tokens.len(),
            })
        }
    }

    pub fn check_clustering(&self, clustering: &Clustering) -> Result<(), CorpusError> {
        clustering
            .clusters()
            .iter()
            .flatten()
            .try_for_each(|span| self.check_span(span))
    }

    /// Token ranges of each sentence, in order.
    pub fn sentence_ranges(&self) -> Vec<Range<usize>> {
        let mut ranges: Vec<Range<usize>> = vec![0..0; self.sentence_count];
        let mut seen = vec![false; self.sentence_count];
        for t in &self.tokens {
            let s = t.sentence_index;
            if !seen[s] {
                ranges[s] = t.doc_index..t.doc_index + 1;
                seen[s] = true;
            } else {
                ranges[s].end = t.doc_index + 1;
            }
        }
        ranges
    }

    pub fn sentence_of(&self, token: usize) -> usize {
        self.tokens[token].sentence_index
    }

    /// Tokens joined by single spaces, sentences by line breaks.
    pub fn detokenize(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                if t.sentence_index != self.tokens[i - 1].sentence_index {
                    out.push('\n');
                } else {
                    out.push(' ');
                }
            }
            out.push_str(&t.surface);
        }
        out
    }

    /// Byte offsets of each token within [`Document::detokenize`].
    pub fn token_offsets(&self) -> Vec<Range<usize>> {
        let mut offsets = Vec::with_capacity(self.tokens.len());
        let mut pos = 0;
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                pos += 1;
            }
            offsets.push(pos..pos + t.surface.len());
            pos += t.surface.len();
        }
        offsets
    }

    pub fn span_text(&self, span: &MentionSpan) -> String {
        self.tokens[span.tokens()]
            .iter()
            .map(|t| t.surface.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn gold(&self) -> Result<&Clustering, CorpusError> {
        self.gold_clusters
            .as_ref()
            .ok_or_else(|| CorpusError::MissingGold(self.key()))
    }

    /// Checks the token/sentence invariants and gold bounds.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut expected_sentence = 0;
        for (i, t) in self.tokens.iter().enumerate() {
            let fail = |message: String| CorpusError::Structure { line: i, message };
            if t.doc_index != i {
                return Err(fail(format!("token {i} has doc_index {}", t.doc_index)));
            }
            if t.surface.is_empty() {
                return Err(fail(format!("token {i} has an empty surface")));
            }
            if i == 0 && t.sentence_index != 0 {
                return Err(fail("first token must be in sentence 0".into()));
            }
            if t.sentence_index != expected_sentence {
                if t.sentence_index != expected_sentence + 1 {
                    return Err(fail(format!(
                        "sentence index jumps from {expected_sentence} to {}",
                        t.sentence_index
                    )));
                }
                expected_sentence = t.sentence_index;
            }
        }
        let sentences = if self.tokens.is_empty() {
            0
        } else {
            expected_sentence + 1
        };
        if sentences != self.sentence_count {
            return Err(CorpusError::Structure {
                line: 0,
                message: format!(
                    "sentence_count {} but tokens cover {sentences} sentences",
                    self.sentence_count
                ),
            });
        }
        if let Some(gold) = &self.gold_clusters {
            self.check_clustering(gold)?;
        }
        Ok(())
    }
}

/// OntoNotes ids look like `bc/cctv/00/cctv_0000`; the first path component is the genre.
pub(crate) fn genre_from_id(doc_id: &str) -> Option<String> {
    let (head, rest) = doc_id.split_once('/')?;
    if head.is_empty() || rest.is_empty() {
        None
    } else {
        Some(head.to_string())
    }
}

/// Union of all gold mentions.
pub fn gold_mentions(doc: &Document) -> Result<BTreeSet<MentionSpan>, CorpusError> {
    Ok(doc.gold()?.mentions())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn span(s: usize, e: usize) -> MentionSpan {
        MentionSpan::new(s, e)
    }

    #[test]
    fn clustering_is_canonical() {
        let a = Clustering::new(vec![vec![span(5, 5), span(0, 1)], vec![span(2, 2)]]).unwrap();
        let b = Clustering::new(vec![vec![span(2, 2)], vec![span(0, 1), span(5, 5)]]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.clusters()[0], vec![span(0, 1), span(5, 5)]);
    }

    #[test]
    fn duplicate_across_clusters_rejected() {
        let err = Clustering::new(vec![vec![span(0, 1)], vec![span(0, 1), span(3, 3)]]);
        assert_eq!(err, Err(ClusteringError::DuplicateMention(span(0, 1))));
    }

    #[test]
    fn nested_outer_sorts_first() {
        let c = Clustering::new(vec![vec![span(2, 2)], vec![span(2, 4)]]).unwrap();
        assert_eq!(c.clusters()[0], vec![span(2, 4)]);
    }

    #[test]
    fn crossing_detection() {
        assert!(span(0, 2).crosses(&span(1, 3)));
        assert!(!span(0, 3).crosses(&span(1, 2)));
        assert!(!span(0, 1).crosses(&span(2, 3)));
        assert!(!span(0, 1).crosses(&span(0, 1)));
    }

    #[test]
    fn gold_mentions_union() {
        let doc = Document::from_text("d", "en", "a b c")
            .with_gold(Clustering::new(vec![vec![span(0, 0), span(1, 1)], vec![span(2, 2)]]).unwrap())
            .unwrap();
        let m = gold_mentions(&doc).unwrap();
        assert_eq!(m.into_iter().collect::<Vec<_>>(), vec![span(0, 0), span(1, 1), span(2, 2)]);

        let empty = Document::from_text("d", "en", "a b c").with_gold(Clustering::empty()).unwrap();
        assert!(gold_mentions(&empty).unwrap().is_empty());

        let unannotated = Document::from_text("d", "en", "a b c");
        assert!(matches!(gold_mentions(&unannotated), Err(CorpusError::MissingGold(_))));
    }

    #[test]
    fn detokenize_and_offsets() {
        let doc = Document::from_text("d", "en", "Mr. Clinton said .\nHe left .");
        assert_eq!(doc.detokenize(), "Mr. Clinton said .\nHe left .");
        let offsets = doc.token_offsets();
        let text = doc.detokenize();
        for (t, r) in doc.tokens.iter().zip(offsets) {
            assert_eq!(&text[r], t.surface);
        }
        assert_eq!(doc.sentence_ranges(), vec![0..4, 4..7]);
        doc.validate().unwrap();
    }

    #[test]
    fn gold_out_of_bounds_rejected() {
        let doc = Document::from_text("d", "en", "a b");
        let c = Clustering::new(vec![vec![span(1, 2)]]).unwrap();
        assert!(matches!(doc.with_gold(c), Err(CorpusError::SpanOutOfBounds { .. })));
    }

    #[test]
    fn genre_from_ontonotes_id() {
        assert_eq!(genre_from_id("bc/cctv/00/cctv_0000").as_deref(), Some("bc"));
        assert_eq!(genre_from_id("doc1"), None);
    }
}
