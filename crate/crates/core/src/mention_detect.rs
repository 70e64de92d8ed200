//! Candidate mention sources: gold, external prediction files, or an LLM
//! prompted with the mention-detection template.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{document_order, gold_mentions, parse_conll_file, CorpusError, Dialect, Document, MentionSpan};
use crate::extraction::{ground_md_strings, parse_md_output, MdLists};
use crate::llm::{CompletionBackend, LlmError, LlmSettings};
use crate::prompting::{render_md_prompt, Templates};

#[derive(Debug, Error)]
pub enum MentionError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("no predicted mentions for document {0}")]
    MissingDocument(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MentionSourceKind {
    Gold,
    ExternalFile,
    LlmPrompted,
}

/// What a run used for candidate mentions; recorded in run metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionSource {
    pub kind: MentionSourceKind,
    /// File path or backend id.
    pub provenance: String,
}

impl fmt::Display for MentionSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            MentionSourceKind::Gold => f.write_str("gold"),
            MentionSourceKind::ExternalFile => write!(f, "file:{}", self.provenance),
            MentionSourceKind::LlmPrompted => write!(f, "llm:{}", self.provenance),
        }
    }
}

/// Predicted mentions read from a CoNLL file whose coreference column
/// brackets mark mentions; cluster ids are ignored.
#[derive(Debug, Clone, Default)]
pub struct ExternalMentions {
    path: String,
    by_key: HashMap<String, BTreeSet<MentionSpan>>,
}

impl ExternalMentions {
    pub fn load(path: impl AsRef<Path>, dialect: Dialect, language: &str) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let docs = parse_conll_file(path, dialect, language)?;
        Ok(Self::from_documents(path.display().to_string(), &docs))
    }

    pub fn from_documents(path: impl Into<String>, docs: &[Document]) -> Self {
        let by_key = docs
            .iter()
            .map(|d| (d.key(), d.gold_clusters.as_ref().map(|c| c.mentions()).unwrap_or_default()))
            .collect();
        ExternalMentions {
            path: path.into(),
            by_key,
        }
    }

    pub fn get(&self, doc: &Document) -> Option<&BTreeSet<MentionSpan>> {
        self.by_key.get(&doc.key())
    }
}

/// A mention source together with the resources it needs.
pub enum MentionProvider<'a> {
    Gold,
    External(ExternalMentions),
    Llm {
        backend: &'a dyn CompletionBackend,
        settings: &'a LlmSettings,
        templates: &'a Templates,
    },
}

impl MentionProvider<'_> {
    pub fn source(&self) -> MentionSource {
        match self {
            MentionProvider::Gold => MentionSource {
                kind: MentionSourceKind::Gold,
                provenance: "gold".into(),
            },
            MentionProvider::External(e) => MentionSource {
                kind: MentionSourceKind::ExternalFile,
                provenance: e.path.clone(),
            },
            MentionProvider::Llm { backend, .. } => MentionSource {
                kind: MentionSourceKind::LlmPrompted,
                provenance: backend.id(),
            },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateMentions {
    pub mentions: BTreeSet<MentionSpan>,
    /// Spans removed by validation (out of bounds or crossing a kept span).
    pub rejected: Vec<MentionSpan>,
    /// Mention-detection strings that matched nothing in the document.
    pub ungrounded: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub md_lists: Option<MdLists>,
}

/// Drops out-of-bounds spans and, for each crossing pair, the span that
/// starts later. Nested spans are kept.
pub fn validate_mentions(doc: &Document, mentions: &BTreeSet<MentionSpan>) -> (BTreeSet<MentionSpan>, Vec<MentionSpan>) {
    let mut ordered: Vec<MentionSpan> = mentions.iter().copied().collect();
    ordered.sort_by(document_order);
    let mut kept = BTreeSet::new();
    let mut rejected = Vec::new();
    let mut stack: Vec<MentionSpan> = Vec::new();
    for m in ordered {
        if !doc.contains_span(&m) || m.start > m.end {
            rejected.push(m);
            continue;
        }
        while stack.last().is_some_and(|top| top.end < m.start) {
            stack.pop();
        }
        if stack.last().is_some_and(|top| m.end > top.end) {
            log::warn!("{}: dropping mention {m} crossing {}", doc.key(), stack.last().copied().unwrap_or(m));
            rejected.push(m);
            continue;
        }
        stack.push(m);
        kept.insert(m);
    }
    (kept, rejected)
}

pub fn mentions_for(doc: &Document, provider: &MentionProvider<'_>) -> Result<CandidateMentions, MentionError> {
    let (raw, ungrounded, md_lists) = match provider {
        MentionProvider::Gold => (gold_mentions(doc)?, Vec::new(), None),
        MentionProvider::External(ext) => {
            let set = ext.get(doc).ok_or_else(|| MentionError::MissingDocument(doc.key()))?;
            (set.clone(), Vec::new(), None)
        }
        MentionProvider::Llm {
            backend,
            settings,
            templates,
        } => {
            let prompt = render_md_prompt(doc, templates);
            let request = settings.request_for(&prompt)?;
            let response = backend.complete(&request)?;
            if response.truncated() {
                log::warn!("{}: mention-detection completion truncated", doc.key());
            }
            let lists = parse_md_output(&response.text);
            let grounding = ground_md_strings(doc, &lists);
            (grounding.mention_set(), grounding.dropped, Some(lists))
        }
    };
    let (mentions, rejected) = validate_mentions(doc, &raw);
    Ok(CandidateMentions {
        mentions,
        rejected,
        ungrounded,
        md_lists,
    })
}
