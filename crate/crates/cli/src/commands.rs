use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use corefprompt::corpus::{corpus_stats, index_by_key, parse_conll_file, Clustering, Dialect, Document, StatsReport};
use corefprompt::mention_detect::MentionSourceKind;
use corefprompt::metrics::{render_table, render_tsv, CorpusScorer, ResultRow, ScoreReport, SingletonPolicy};
use corefprompt::sampling::{read_profiles, stratified_sample, DocProfile, SampleResult, SamplingConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{BackendSpec, TemplateKind};
use crate::run::RunManifest;

/// Scores a response file against a key file, matching documents by key.
///
/// Key documents missing from the response are scored against an empty
/// clustering; response documents absent from the key are ignored.
pub fn cmd_score(key_path: &Path, response_path: &Path, dialect: Dialect, language: &str, policy: SingletonPolicy) -> Result<ScoreReport> {
    let key_docs = parse_conll_file(key_path, dialect, language).with_context(|| format!("reading key {}", key_path.display()))?;
    let resp_docs = parse_conll_file(response_path, dialect, language)
        .with_context(|| format!("reading response {}", response_path.display()))?;
    let responses = index_by_key(&resp_docs);
    let mut scorer = CorpusScorer::new(policy);
    let mut notes = Vec::new();
    let empty = Clustering::empty();
    let mut keys: Vec<&Document> = index_by_key(&key_docs).into_values().collect();
    keys.sort_by_key(|d| d.key());
    for doc in keys {
        let Some(gold) = doc.gold_clusters.as_ref() else {
            notes.push(format!("{}: key has no coreference annotation; not scored", doc.key()));
            continue;
        };
        let response = match responses.get(&doc.key()) {
            Some(r) => {
                if r.tokens.len() != doc.tokens.len() {
                    bail!(
                        "{}: key has {} tokens but response has {}",
                        doc.key(),
                        doc.tokens.len(),
                        r.tokens.len()
                    );
                }
                r.gold_clusters.as_ref().unwrap_or(&empty)
            }
            None => {
                notes.push(format!("{}: missing from the response; scored as empty", doc.key()));
                &empty
            }
        };
        scorer.add_document(doc, gold, response, None);
    }
    let mut report = scorer.finish();
    report.notes.extend(notes);
    Ok(report)
}

pub fn cmd_stats(paths: &[PathBuf], dialect: Dialect, language: &str) -> Result<StatsReport> {
    let mut docs = Vec::new();
    for p in paths {
        docs.extend(parse_conll_file(p, dialect, language).with_context(|| format!("reading {}", p.display()))?);
    }
    Ok(corpus_stats(&docs))
}

/// Profiles from a CSV/JSON profile table, or computed from a CoNLL corpus.
pub fn load_profiles(path: &Path, dialect: Dialect, language: &str) -> Result<Vec<DocProfile>> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    if ext == "csv" || ext == "json" {
        return Ok(read_profiles(path)?);
    }
    let docs = parse_conll_file(path, dialect, language).with_context(|| format!("reading {}", path.display()))?;
    Ok(docs.iter().map(DocProfile::from_document).collect())
}

pub fn cmd_sample(candidates: &[DocProfile], reference: &[DocProfile], config: &SamplingConfig) -> Result<SampleResult> {
    Ok(stratified_sample(candidates, reference, config)?)
}

/// Stored rows: either a bare array of fraction-valued rows or an object
/// naming its scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoredRows {
    #[serde(default)]
    pub scale: Scale,
    pub rows: Vec<ResultRow>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Fraction,
    Percent,
}

impl StoredRows {
    pub fn into_fractions(self) -> Vec<ResultRow> {
        if self.scale == Scale::Fraction {
            return self.rows;
        }
        self.rows
            .into_iter()
            .map(|mut r| {
                for prf in [&mut r.muc, &mut r.b3, &mut r.ceaf_phi4].into_iter().flatten() {
                    prf.precision /= 100.0;
                    prf.recall /= 100.0;
                    prf.f1 /= 100.0;
                }
                r.conll_only = r.conll_only.map(|v| v / 100.0);
                r.md_f1 = r.md_f1.map(|v| v / 100.0);
                r
            })
            .collect()
    }
}

pub fn manifest_row(m: &RunManifest) -> Result<ResultRow> {
    let Some(score) = &m.score else {
        bail!("run into {} has no score report", m.config.out.display());
    };
    let setting = match m.mention_source.kind {
        MentionSourceKind::Gold => "gold mentions",
        _ => "predicted mentions",
    };
    let mut system = match m.config.backend {
        BackendSpec::Http => m.config.llm.model.clone(),
        _ => m.backend_id.clone(),
    };
    if m.config.template != TemplateKind::Document {
        let _ = write!(system, " ({})", m.config.template);
    }
    Ok(ResultRow::from_report(setting, system, score))
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Reads one report input: a run manifest, a score report, or stored rows.
pub fn load_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let parse_err = || format!("{}: not a manifest, score report or row table", path.display());
    if value.is_array() {
        return serde_json::from_value(value).with_context(parse_err);
    }
    let has = |k: &str| value.get(k).is_some();
    if has("config") && has("documents") {
        let m: RunManifest = serde_json::from_value(value).with_context(parse_err)?;
        return Ok(vec![manifest_row(&m)?]);
    }
    if has("singleton_policy") && has("per_doc") {
        let r: ScoreReport = serde_json::from_value(value).with_context(parse_err)?;
        return Ok(vec![ResultRow::from_report(r.singleton_policy.as_str(), file_stem(path), &r)]);
    }
    let stored: StoredRows = serde_json::from_value(value).with_context(parse_err)?;
    Ok(stored.into_fractions())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOutput {
    pub rows: Vec<ResultRow>,
    pub table: String,
    pub tsv: String,
    /// `(MD F1, CoNLL F1)` pairs for rows that carry both.
    pub figure_csv: String,
}

pub fn render_rows(rows: Vec<ResultRow>) -> ReportOutput {
    let mut figure_csv = String::from("setting,system,md_f1,conll_f1\n");
    for r in &rows {
        if let (Some(md), Some(conll)) = (r.md_f1, r.conll()) {
            let _ = writeln!(figure_csv, "{},{},{md:.6},{conll:.6}", quote(&r.setting), quote(&r.system));
        }
    }
    ReportOutput {
        table: render_table(&rows),
        tsv: render_tsv(&rows),
        figure_csv,
        rows,
    }
}

fn quote(s: &str) -> String {
    if s.contains([',', '"']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One table row per run manifest or score report; stored row tables add
/// all their rows.
pub fn cmd_report(inputs: &[PathBuf]) -> Result<ReportOutput> {
    let mut rows = Vec::new();
    for p in inputs {
        rows.extend(load_rows(p)?);
    }
    Ok(render_rows(rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use corefprompt::metrics::PRF;

    #[test]
    fn percent_rows_are_scaled() {
        let json = r#"{"scale":"percent","rows":[{"setting":"s","system":"x","muc":{"precision":50,"recall":50,"f1":50},"b3":null,"ceaf_phi4":null,"conll_only":null}]}"#;
        let stored: StoredRows = serde_json::from_str(json).unwrap();
        let rows = stored.into_fractions();
        assert_eq!(rows[0].muc, Some(PRF { precision: 0.5, recall: 0.5, f1: 0.5 }));
    }

    #[test]
    fn figure_csv_needs_both_values() {
        let row = |md| ResultRow {
            setting: "a,b".into(),
            system: "s".into(),
            muc: None,
            b3: None,
            ceaf_phi4: None,
            conll_only: Some(0.5),
            md_f1: md,
        };
        let out = render_rows(vec![row(Some(0.25)), row(None)]);
        assert_eq!(out.figure_csv, "setting,system,md_f1,conll_f1\n\"a,b\",s,0.250000,0.500000\n");
    }
}
