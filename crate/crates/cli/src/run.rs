use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{Context, Result};
use corefprompt::corpus::{serialize_conll, Document};
use corefprompt::mention_detect::{mentions_for, MentionSource};
use corefprompt::metrics::{
    md_recall_tallies, mention_counts, mention_prf, merge_tallies, tally_rates, CorpusScorer, MentionType, MetricCounts,
    ScoreReport, TypeTallies, PRF,
};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::output::{write_atomic, write_json};
use crate::resolve::{build_backend, load_corpus, load_templates, DocDiagnostics, OutputPaths, Pipeline, Resolved};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum DocStatus {
    Scored,
    /// Resolved, but the document carries no gold annotation.
    Unscored,
    Skipped(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocRecord {
    pub key: String,
    #[serde(flatten)]
    pub status: DocStatus,
    pub diagnostics: DocDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: RunConfig,
    pub templates_version: String,
    pub backend_id: String,
    pub mention_source: MentionSource,
    pub documents: Vec<DocRecord>,
    pub diagnostics: DocDiagnostics,
    pub score: Option<ScoreReport>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }

    pub fn skipped(&self) -> usize {
        self.documents
            .iter()
            .filter(|d| matches!(d.status, DocStatus::Skipped(_)))
            .count()
    }

    /// Skipped documents are hard failures.
    pub fn succeeded(&self) -> bool {
        self.skipped() == 0
    }
}

/// Runs `f` over `items` on a bounded pool of scoped threads. Results come
/// back in input order regardless of completion order.
pub fn run_pool<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, items.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(item) = items.get(i) else { break };
                let r = f(item);
                *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().unwrap_or_else(|e| e.into_inner()).expect("every item is processed"))
        .collect()
}

#[derive(Serialize)]
struct PredictionLine {
    key: String,
    clusters: Vec<Vec<(usize, usize)>>,
    surfaces: Vec<Vec<String>>,
}

const DIAG_HEADER: &str = "doc_key,status,reason,prompts,registry_entries,grounded,unmatched_output,unmatched_input,malformed,unmatched_lines,truncated,rejected_mentions,ungrounded_md,qa_no_antecedent,qa_ungrounded\n";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn diag_row(out: &mut String, r: &DocRecord) {
    let (status, reason) = match &r.status {
        DocStatus::Scored => ("scored", ""),
        DocStatus::Unscored => ("unscored", ""),
        DocStatus::Skipped(why) => ("skipped", why.as_str()),
    };
    let d = &r.diagnostics;
    let a = &d.alignment;
    let _ = writeln!(
        out,
        "{},{status},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        csv_field(&r.key),
        csv_field(reason),
        d.prompts,
        a.registry_entries,
        a.grounded,
        a.unmatched_output,
        a.unmatched_input,
        a.malformed,
        a.unmatched_lines,
        d.truncated_completions,
        d.rejected_mentions,
        d.ungrounded_md,
        d.qa_no_antecedent,
        d.qa_ungrounded
    );
}

/// Resolves every document, scores against gold where present and writes
/// the manifest, predictions (CoNLL and JSON lines), score report and
/// diagnostics CSV into `config.out`. Output is ordered by document key.
pub fn cmd_resolve(config: &RunConfig) -> Result<RunManifest> {
    let mut docs = load_corpus(config)?;
    docs.sort_by_key(Document::key);
    let templates = load_templates(config)?;
    let backend = build_backend(config, &docs, &templates)?;
    let pipeline = Pipeline::new(config, &templates, backend.as_ref())?;

    let results: Vec<Result<Resolved>> = run_pool(&docs, config.worker_count(), |doc| pipeline.resolve(doc));

    let mut scorer = CorpusScorer::new(config.policy);
    let mut records = Vec::with_capacity(docs.len());
    let mut totals = DocDiagnostics::default();
    let mut conll = String::new();
    let mut jsonl = String::new();
    let mut diag_csv = String::from(DIAG_HEADER);
    let mut skipped_with_gold = 0;
    for (doc, result) in docs.iter().zip(results) {
        let record = match result {
            Ok(r) => {
                conll.push_str(&serialize_conll(doc, &r.prediction)?);
                let line = PredictionLine {
                    key: doc.key(),
                    clusters: r
                        .prediction
                        .clusters()
                        .iter()
                        .map(|c| c.iter().map(|m| (m.start, m.end)).collect())
                        .collect(),
                    surfaces: r
                        .prediction
                        .clusters()
                        .iter()
                        .map(|c| c.iter().map(|m| doc.span_text(m)).collect())
                        .collect(),
                };
                jsonl.push_str(&serde_json::to_string(&line)?);
                jsonl.push('\n');
                let status = match &doc.gold_clusters {
                    Some(gold) => {
                        scorer.add_document(doc, gold, &r.prediction, Some(&r.candidates));
                        DocStatus::Scored
                    }
                    None => DocStatus::Unscored,
                };
                DocRecord {
                    key: doc.key(),
                    status,
                    diagnostics: r.diagnostics,
                }
            }
            Err(e) => {
                log::error!("{}: skipped: {e:#}", doc.key());
                skipped_with_gold += usize::from(doc.gold_clusters.is_some());
                DocRecord {
                    key: doc.key(),
                    status: DocStatus::Skipped(format!("{e:#}")),
                    diagnostics: DocDiagnostics::default(),
                }
            }
        };
        totals.merge(&record.diagnostics);
        diag_row(&mut diag_csv, &record);
        records.push(record);
    }

    let score = (scorer.documents() > 0).then(|| {
        let mut report = scorer.finish();
        if skipped_with_gold > 0 {
            report
                .notes
                .push(format!("{skipped_with_gold} annotated documents were skipped and are not scored"));
        }
        report
    });

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        templates_version: templates.version.clone(),
        backend_id: backend.id(),
        mention_source: pipeline.mention_source(),
        documents: records,
        diagnostics: totals,
        score,
    };

    let paths = OutputPaths::new(&config.out);
    write_atomic(&paths.predictions_conll, conll.as_bytes())?;
    write_atomic(&paths.predictions_jsonl, jsonl.as_bytes())?;
    write_atomic(&paths.diagnostics_csv, diag_csv.as_bytes())?;
    if let Some(report) = &manifest.score {
        write_json(&paths.score_json, report)?;
        write_atomic(&paths.score_txt, corefprompt::metrics::render_report(report).as_bytes())?;
    }
    write_json(&paths.manifest, &manifest)?;
    Ok(manifest)
}

/// Mention-detection quality of a mention source against gold mentions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MdReport {
    pub mention_source: String,
    pub overall: PRF,
    pub recall_by_type: BTreeMap<MentionType, f64>,
    pub per_doc: BTreeMap<String, PRF>,
    pub ungrounded_strings: usize,
    pub rejected_mentions: usize,
    pub skipped: BTreeMap<String, String>,
}

impl MdReport {
    pub fn render(&self) -> String {
        let pct = |v: f64| format!("{:.1}", v * 100.0);
        let mut out = format!(
            "Mentions: {}\nP {}  R {}  F1 {}\nRecall by type:",
            self.mention_source,
            pct(self.overall.precision),
            pct(self.overall.recall),
            pct(self.overall.f1)
        );
        for t in MentionType::ALL {
            let v = self.recall_by_type.get(&t).map_or_else(|| "-".into(), |v| pct(*v));
            let _ = write!(out, " {t} {v}");
        }
        let _ = writeln!(
            out,
            "\nUngrounded strings: {}  Rejected spans: {}  Skipped documents: {}",
            self.ungrounded_strings,
            self.rejected_mentions,
            self.skipped.len()
        );
        out
    }
}

/// Evaluates the configured mention source (the mention-detection prompt
/// when the template is `md`) against the gold mentions of each document.
pub fn cmd_md_eval(config: &RunConfig) -> Result<MdReport> {
    let mut docs = load_corpus(config)?;
    docs.sort_by_key(Document::key);
    let templates = load_templates(config)?;
    let backend = build_backend(config, &docs, &templates)?;
    let pipeline = Pipeline::new(config, &templates, backend.as_ref())?;
    let results = run_pool(&docs, config.worker_count(), |doc| mentions_for(doc, &pipeline.provider));

    let mut report = MdReport {
        mention_source: pipeline.mention_source().to_string(),
        ..Default::default()
    };
    let mut counts = MetricCounts::default();
    let mut tallies = TypeTallies::new();
    for (doc, result) in docs.iter().zip(results) {
        let Some(gold) = doc.gold_clusters.as_ref() else {
            report.skipped.insert(doc.key(), "no gold annotation".into());
            continue;
        };
        match result {
            Ok(c) => {
                let gold_mentions = gold.mentions();
                report.per_doc.insert(doc.key(), mention_prf(&c.mentions, &gold_mentions));
                report.ungrounded_strings += c.ungrounded.len();
                report.rejected_mentions += c.rejected.len();
                counts.add(&mention_counts(&c.mentions, &gold_mentions));
                merge_tallies(&mut tallies, &md_recall_tallies(&c.mentions, &gold_mentions, doc));
            }
            Err(e) => {
                report.skipped.insert(doc.key(), e.to_string());
            }
        }
    }
    report.overall = counts.prf();
    report.recall_by_type = tally_rates(&tallies);
    Ok(report)
}
