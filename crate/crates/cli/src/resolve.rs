//! Per-document pipeline: candidate mentions, prompting, completion and
//! extraction of a predicted clustering.

use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use corefprompt::corpus::{document_order, parse_conll_file, Clustering, Document, MentionSpan};
use corefprompt::extraction::{align_output, build_clustering, ground_answer, parse_qa_answer, AlignmentDiagnostics};
use corefprompt::llm::{CachedBackend, CompletionBackend, EchoGoldBackend, HttpBackend, ReplayBackend, ResponseCache};
use corefprompt::mention_detect::{mentions_for, ExternalMentions, MentionProvider, MentionSource};
use corefprompt::prompting::{mark_mentions, render_document_prompt, render_qa_prompt, Templates};
use serde::{Deserialize, Serialize};

use crate::config::{BackendSpec, MentionSpec, QaCandidates, RunConfig, TemplateKind};

/// Reads every corpus file; document keys must be unique across files.
pub fn load_corpus(config: &RunConfig) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut seen = BTreeSet::new();
    for path in &config.corpus {
        let parsed = parse_conll_file(path, config.dialect, &config.language)
            .with_context(|| format!("reading corpus {}", path.display()))?;
        for d in parsed {
            if !seen.insert(d.key()) {
                bail!("document {} appears more than once in the corpus", d.key());
            }
            docs.push(d);
        }
    }
    Ok(docs)
}

pub fn load_templates(config: &RunConfig) -> Result<Templates> {
    match &config.template_dir {
        Some(dir) => Templates::load_overrides(dir).with_context(|| format!("loading templates from {}", dir.display())),
        None => Ok(Templates::default()),
    }
}

/// Builds the configured backend, wrapped in the response cache if one is set.
pub fn build_backend(config: &RunConfig, docs: &[Document], templates: &Templates) -> Result<Box<dyn CompletionBackend>> {
    let inner: Box<dyn CompletionBackend> = match &config.backend {
        BackendSpec::Http => Box::new(HttpBackend::new(config.llm.clone())),
        BackendSpec::Replay(path) => Box::new(ReplayBackend::load(path)?),
        BackendSpec::EchoGold => Box::new(EchoGoldBackend::new(docs, templates.clone())),
    };
    Ok(match &config.cache {
        Some(path) => Box::new(CachedBackend::new(inner, Arc::new(ResponseCache::open(path)?))),
        None => inner,
    })
}

pub fn build_provider<'a>(
    config: &'a RunConfig,
    backend: &'a dyn CompletionBackend,
    templates: &'a Templates,
) -> Result<MentionProvider<'a>> {
    let spec = if config.template == TemplateKind::Md {
        MentionSpec::Llm
    } else {
        config.mentions.clone()
    };
    Ok(match spec {
        MentionSpec::Gold => MentionProvider::Gold,
        MentionSpec::File(path) => MentionProvider::External(
            ExternalMentions::load(&path, config.dialect, &config.language)
                .with_context(|| format!("reading predicted mentions {}", path.display()))?,
        ),
        MentionSpec::Llm => MentionProvider::Llm {
            backend,
            settings: &config.llm,
            templates,
        },
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocDiagnostics {
    pub alignment: AlignmentDiagnostics,
    pub prompts: usize,
    pub truncated_completions: usize,
    /// Predicted mentions dropped as out of bounds or crossing.
    pub rejected_mentions: usize,
    /// Mention-detection strings not found in the document.
    pub ungrounded_md: usize,
    /// QA answers naming no antecedent.
    pub qa_no_antecedent: usize,
    /// QA answers that matched no candidate.
    pub qa_ungrounded: usize,
}

impl DocDiagnostics {
    pub fn merge(&mut self, o: &DocDiagnostics) {
        self.alignment.merge(&o.alignment);
        self.prompts += o.prompts;
        self.truncated_completions += o.truncated_completions;
        self.rejected_mentions += o.rejected_mentions;
        self.ungrounded_md += o.ungrounded_md;
        self.qa_no_antecedent += o.qa_no_antecedent;
        self.qa_ungrounded += o.qa_ungrounded;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub prediction: Clustering,
    pub candidates: BTreeSet<MentionSpan>,
    pub diagnostics: DocDiagnostics,
}

pub struct Pipeline<'a> {
    pub config: &'a RunConfig,
    pub templates: &'a Templates,
    pub backend: &'a dyn CompletionBackend,
    pub provider: MentionProvider<'a>,
}

impl<'a> Pipeline<'a> {
    pub fn new(config: &'a RunConfig, templates: &'a Templates, backend: &'a dyn CompletionBackend) -> Result<Self> {
        Ok(Pipeline {
            config,
            templates,
            backend,
            provider: build_provider(config, backend, templates)?,
        })
    }

    pub fn mention_source(&self) -> MentionSource {
        self.provider.source()
    }

    pub fn resolve(&self, doc: &Document) -> Result<Resolved> {
        let cands = mentions_for(doc, &self.provider)?;
        let mut diag = DocDiagnostics {
            rejected_mentions: cands.rejected.len(),
            ungrounded_md: cands.ungrounded.len(),
            prompts: usize::from(cands.md_lists.is_some()),
            ..Default::default()
        };
        let keep_unmatched = self.config.policy.keeps_response_singletons();
        let prediction = match self.config.template {
            TemplateKind::Md => Clustering::new(cands.mentions.iter().map(|&m| vec![m]).collect())?,
            TemplateKind::Document => {
                let marked = mark_mentions(doc, &cands.mentions)?;
                let prompt = render_document_prompt(&marked, self.templates);
                let request = self.config.llm.request_for(&prompt)?;
                let response = self.backend.complete(&request)?;
                diag.prompts += 1;
                if response.truncated() {
                    log::warn!("{}: completion hit the output limit", doc.key());
                    diag.truncated_completions += 1;
                }
                let alignment = align_output(doc, &marked.registry, &response.text, &self.config.align);
                diag.alignment = alignment.diagnostics();
                build_clustering(&alignment, keep_unmatched)
            }
            TemplateKind::Qa => self.resolve_qa(doc, &cands.mentions, &mut diag)?,
        };
        Ok(Resolved {
            prediction,
            candidates: cands.mentions,
            diagnostics: diag,
        })
    }

    /// Asks one question per mention and closes the resulting links transitively.
    fn resolve_qa(&self, doc: &Document, mentions: &BTreeSet<MentionSpan>, diag: &mut DocDiagnostics) -> Result<Clustering> {
        let mut ordered: Vec<MentionSpan> = mentions.iter().copied().collect();
        ordered.sort_by(document_order);
        let index: HashMap<MentionSpan, usize> = ordered.iter().enumerate().map(|(i, &m)| (m, i)).collect();
        let mut parent: Vec<usize> = (0..ordered.len()).collect();
        for (i, &target) in ordered.iter().enumerate() {
            let candidates: Vec<MentionSpan> = match self.config.qa.candidates {
                QaCandidates::Preceding => ordered[..i].to_vec(),
                QaCandidates::All => ordered.iter().copied().filter(|&m| m != target).collect(),
            };
            if candidates.is_empty() {
                continue;
            }
            let prompt = render_qa_prompt(doc, target, self.templates)?;
            let request = self.config.llm.request_for(&prompt)?;
            let response = self.backend.complete(&request)?;
            diag.prompts += 1;
            if response.truncated() {
                diag.truncated_completions += 1;
            }
            let Some(answer) = parse_qa_answer(&response.text) else {
                diag.qa_no_antecedent += 1;
                continue;
            };
            match ground_answer(doc, &candidates, target, &answer, self.config.qa.answer_threshold) {
                Some(antecedent) => union(&mut parent, i, index[&antecedent]),
                None => diag.qa_ungrounded += 1,
            }
        }
        let mut groups: HashMap<usize, Vec<MentionSpan>> = HashMap::new();
        for (i, &m) in ordered.iter().enumerate() {
            groups.entry(find(&mut parent, i)).or_default().push(m);
        }
        let keep_singletons = self.config.policy.keeps_response_singletons();
        let clusters = groups.into_values().filter(|c| keep_singletons || c.len() > 1).collect();
        Ok(Clustering::new(clusters)?)
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        parent[ra.max(rb)] = ra.min(rb);
    }
}

/// Paths of the files a resolve run writes into its output directory.
#[derive(Debug, Clone)]
pub struct OutputPaths {
    pub manifest: PathBuf,
    pub predictions_conll: PathBuf,
    pub predictions_jsonl: PathBuf,
    pub score_json: PathBuf,
    pub score_txt: PathBuf,
    pub diagnostics_csv: PathBuf,
}

impl OutputPaths {
    pub fn new(dir: &std::path::Path) -> Self {
        OutputPaths {
            manifest: dir.join("manifest.json"),
            predictions_conll: dir.join("predictions.conll"),
            predictions_jsonl: dir.join("predictions.jsonl"),
            score_json: dir.join("score.json"),
            score_txt: dir.join("score.txt"),
            diagnostics_csv: dir.join("diagnostics.csv"),
        }
    }
}
