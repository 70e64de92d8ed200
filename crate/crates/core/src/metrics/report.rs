use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::coref::{
    apply_singleton_policy, b_cubed_counts, ceaf_phi4_counts, conll_f1, muc_counts, MetricCounts, SingletonPolicy, PRF,
};
use super::mentions::{
    md_recall_tallies, mention_counts, merge_tallies, resolution_tallies, tally_rates, MentionType, TypeTallies,
};
use crate::corpus::{Clustering, Document, MentionSpan};

/// Scores for one document, or the corpus micro-average.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DocScore {
    pub muc: PRF,
    pub b3: PRF,
    pub ceaf_phi4: PRF,
    pub conll_f1: f64,
    pub md: PRF,
    pub md_recall_by_type: BTreeMap<MentionType, f64>,
    pub resolution_accuracy: BTreeMap<MentionType, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    #[serde(flatten)]
    pub overall: DocScore,
    pub singleton_policy: SingletonPolicy,
    pub per_doc: BTreeMap<String, DocScore>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct Accumulated {
    muc: MetricCounts,
    b3: MetricCounts,
    ceaf: MetricCounts,
    md: MetricCounts,
    md_types: TypeTallies,
    resolution: TypeTallies,
}

impl Accumulated {
    fn add(&mut self, other: &Accumulated) {
        self.muc.add(&other.muc);
        self.b3.add(&other.b3);
        self.ceaf.add(&other.ceaf);
        self.md.add(&other.md);
        merge_tallies(&mut self.md_types, &other.md_types);
        merge_tallies(&mut self.resolution, &other.resolution);
    }

    fn score(&self) -> DocScore {
        let (muc, b3, ceaf_phi4) = (self.muc.prf(), self.b3.prf(), self.ceaf.prf());
        DocScore {
            conll_f1: conll_f1(&muc, &b3, &ceaf_phi4),
            muc,
            b3,
            ceaf_phi4,
            md: self.md.prf(),
            md_recall_by_type: tally_rates(&self.md_types),
            resolution_accuracy: tally_rates(&self.resolution),
        }
    }
}

/// Micro-averaging fold over documents: counts are summed, then divided once.
#[derive(Debug, Clone, Default)]
pub struct CorpusScorer {
    policy: SingletonPolicy,
    total: Accumulated,
    per_doc: BTreeMap<String, DocScore>,
    clusters_after_policy: (usize, usize),
}

impl CorpusScorer {
    pub fn new(policy: SingletonPolicy) -> Self {
        CorpusScorer {
            policy,
            ..Default::default()
        }
    }

    /// Scores one document.
    ///
    /// `candidates` is the mention set handed to the linker; mention detection
    /// and resolution accuracy are measured against it before the singleton
    /// policy applies. When absent, the response mentions stand in.
    pub fn add_document(
        &mut self,
        doc: &Document,
        key: &Clustering,
        response: &Clustering,
        candidates: Option<&BTreeSet<MentionSpan>>,
    ) -> DocScore {
        let (k, r) = apply_singleton_policy(key, response, self.policy);
        let gold_mentions = key.mentions();
        let predicted = candidates.cloned().unwrap_or_else(|| response.mentions());
        let recalled: BTreeSet<MentionSpan> = predicted.intersection(&gold_mentions).copied().collect();
        let acc = Accumulated {
            muc: muc_counts(&k, &r),
            b3: b_cubed_counts(&k, &r),
            ceaf: ceaf_phi4_counts(&k, &r),
            md: mention_counts(&predicted, &gold_mentions),
            md_types: md_recall_tallies(&predicted, &gold_mentions, doc),
            resolution: resolution_tallies(key, response, &recalled, doc),
        };
        self.clusters_after_policy.0 += k.len();
        self.clusters_after_policy.1 += r.len();
        self.total.add(&acc);
        let score = acc.score();
        self.per_doc.insert(doc.key(), score.clone());
        score
    }

    pub fn documents(&self) -> usize {
        self.per_doc.len()
    }

    pub fn finish(self) -> ScoreReport {
        let mut notes = Vec::new();
        if self.per_doc.is_empty() {
            notes.push("no documents were scored".to_string());
        } else if self.clusters_after_policy == (0, 0) {
            notes.push(format!(
                "no clusters remain under the {} singleton policy; all coreference metrics are 0",
                self.policy
            ));
        }
        ScoreReport {
            overall: self.total.score(),
            singleton_policy: self.policy,
            per_doc: self.per_doc,
            notes,
        }
    }
}

/// Scores a whole corpus of (document, key, response) triples.
pub fn score_corpus<'a, I>(items: I, policy: SingletonPolicy) -> ScoreReport
where
    I: IntoIterator<Item = (&'a Document, &'a Clustering, &'a Clustering)>,
{
    let mut scorer = CorpusScorer::new(policy);
    for (doc, key, response) in items {
        scorer.add_document(doc, key, response, None);
    }
    scorer.finish()
}

/// One line of a results table: metric triples plus CoNLL F1.
///
/// Values are fractions in [0, 1]. A row with all three triples renders the
/// CoNLL column as their F1 mean; rows carrying only a CoNLL figure (systems
/// that report nothing else) use `conll_only`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub setting: String,
    pub system: String,
    #[serde(default)]
    pub muc: Option<PRF>,
    #[serde(default)]
    pub b3: Option<PRF>,
    #[serde(default)]
    pub ceaf_phi4: Option<PRF>,
    #[serde(default)]
    pub conll_only: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub md_f1: Option<f64>,
}

impl ResultRow {
    pub fn from_report(setting: impl Into<String>, system: impl Into<String>, report: &ScoreReport) -> Self {
        ResultRow {
            setting: setting.into(),
            system: system.into(),
            muc: Some(report.overall.muc),
            b3: Some(report.overall.b3),
            ceaf_phi4: Some(report.overall.ceaf_phi4),
            conll_only: None,
            md_f1: Some(report.overall.md.f1),
        }
    }

    pub fn conll(&self) -> Option<f64> {
        match (&self.muc, &self.b3, &self.ceaf_phi4) {
            (Some(m), Some(b), Some(c)) => Some(conll_f1(m, b, c)),
            _ => self.conll_only,
        }
    }
}

fn pct(v: f64) -> String {
    format!("{:.1}", v * 100.0)
}

fn triple(p: &Option<PRF>) -> [String; 3] {
    match p {
        Some(p) => [pct(p.precision), pct(p.recall), pct(p.f1)],
        None => ["-".into(), "-".into(), "-".into()],
    }
}

const HEADER: [&str; 12] = [
    "Setting", "System", "MUC P", "MUC R", "MUC F1", "B3 P", "B3 R", "B3 F1", "CEAFφ4 P", "CEAFφ4 R", "CEAFφ4 F1", "CoNLL F1",
];

fn row_cells(row: &ResultRow) -> Vec<String> {
    let mut cells = vec![row.setting.clone(), row.system.clone()];
    for t in [&row.muc, &row.b3, &row.ceaf_phi4] {
        cells.extend(triple(t));
    }
    cells.push(row.conll().map_or_else(|| "-".to_string(), pct));
    cells
}

/// Aligned text table in percent with one decimal.
pub fn render_table(rows: &[ResultRow]) -> String {
    let body: Vec<Vec<String>> = rows.iter().map(row_cells).collect();
    let mut widths: Vec<usize> = HEADER.iter().map(|h| h.chars().count()).collect();
    for cells in &body {
        for (w, c) in widths.iter_mut().zip(cells) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[&str]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, &w))| {
                let pad = w - c.chars().count();
                if i < 2 {
                    format!("{c}{}", " ".repeat(pad))
                } else {
                    format!("{}{c}", " ".repeat(pad))
                }
            })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut out, &HEADER);
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    line(&mut out, &rule.iter().map(String::as_str).collect::<Vec<_>>());
    for cells in &body {
        line(&mut out, &cells.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}

pub fn render_tsv(rows: &[ResultRow]) -> String {
    let mut out = HEADER.join("\t");
    out.push('\n');
    for row in rows {
        out.push_str(&row_cells(row).join("\t"));
        out.push('\n');
    }
    out
}

/// Summary table for a single report, followed by per-class breakdowns.
pub fn render_report(report: &ScoreReport) -> String {
    let row = ResultRow::from_report(report.singleton_policy.as_str(), "overall", report);
    let mut out = render_table(&[row]);
    let md = &report.overall.md;
    let _ = writeln!(out, "\nMention detection: P {} R {} F1 {}", pct(md.precision), pct(md.recall), pct(md.f1));
    for (title, map) in [
        ("MD recall by type", &report.overall.md_recall_by_type),
        ("Resolution accuracy", &report.overall.resolution_accuracy),
    ] {
        let cells: Vec<String> = MentionType::ALL
            .iter()
            .map(|t| format!("{t} {}", map.get(t).map_or_else(|| "-".to_string(), |v| pct(*v))))
            .collect();
        let _ = writeln!(out, "{title}: {}", cells.join(", "));
    }
    let _ = writeln!(out, "Documents: {}", report.per_doc.len());
    for note in &report.notes {
        let _ = writeln!(out, "Note: {note}");
    }
    out
}
