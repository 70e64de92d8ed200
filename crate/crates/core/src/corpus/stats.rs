use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Document;

/// Counts for one slice of a corpus (whole corpus, a language or a genre).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub doc_count: usize,
    pub token_count: usize,
    pub mean_tokens_per_doc: f64,
    pub annotated_docs: usize,
    pub cluster_count: usize,
    pub mention_count: usize,
    pub singleton_count: usize,
    /// Size-1 clusters over all clusters; absent when no document is annotated.
    pub singleton_fraction: Option<f64>,
}

impl GroupStats {
    fn add(&mut self, doc: &Document) {
        self.doc_count += 1;
        self.token_count += doc.tokens.len();
        if let Some(gold) = &doc.gold_clusters {
            self.annotated_docs += 1;
            self.cluster_count += gold.len();
            self.mention_count += gold.mention_count();
            self.singleton_count += gold.singleton_count();
        }
    }

    fn finish(&mut self) {
        self.mean_tokens_per_doc = if self.doc_count == 0 {
            0.0
        } else {
            self.token_count as f64 / self.doc_count as f64
        };
        self.singleton_fraction = (self.annotated_docs > 0).then(|| {
            if self.cluster_count == 0 {
                0.0
            } else {
                self.singleton_count as f64 / self.cluster_count as f64
            }
        });
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    #[serde(flatten)]
    pub overall: GroupStats,
    pub by_language: BTreeMap<String, GroupStats>,
    pub by_genre: BTreeMap<String, GroupStats>,
}

impl StatsReport {
    pub fn doc_count(&self) -> usize {
        self.overall.doc_count
    }

    pub fn mean_tokens_per_doc(&self) -> f64 {
        self.overall.mean_tokens_per_doc
    }

    pub fn singleton_fraction(&self) -> Option<f64> {
        self.overall.singleton_fraction
    }

    /// Tab-separated table: one row for the corpus, then one per language and genre.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("group\tdocs\ttoks_per_doc\tclusters\tmentions\tpct_singletons\n");
        let mut row = |name: &str, g: &GroupStats| {
            let pct = g
                .singleton_fraction
                .map(|f| format!("{:.1}", f * 100.0))
                .unwrap_or_else(|| "-".into());
            out.push_str(&format!(
                "{name}\t{}\t{:.0}\t{}\t{}\t{pct}\n",
                g.doc_count, g.mean_tokens_per_doc, g.cluster_count, g.mention_count
            ));
        };
        row("all", &self.overall);
        for (lang, g) in &self.by_language {
            row(&format!("language:{lang}"), g);
        }
        for (genre, g) in &self.by_genre {
            row(&format!("genre:{genre}"), g);
        }
        out
    }
}

pub fn corpus_stats(docs: &[Document]) -> StatsReport {
    let mut report = StatsReport::default();
    for doc in docs {
        report.overall.add(doc);
        report.by_language.entry(doc.language.clone()).or_default().add(doc);
        if let Some(genre) = &doc.genre {
            report.by_genre.entry(genre.clone()).or_default().add(doc);
        }
    }
    report.overall.finish();
    report.by_language.values_mut().for_each(GroupStats::finish);
    report.by_genre.values_mut().for_each(GroupStats::finish);
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Clustering, MentionSpan};

    fn doc_with(n_tokens: usize, clusters: Vec<Vec<MentionSpan>>) -> Document {
        let words: Vec<String> = (0..n_tokens).map(|i| format!("w{i}")).collect();
        Document::from_sentences("d", "en", &[words])
            .with_gold(Clustering::new(clusters).unwrap())
            .unwrap()
    }

    #[test]
    fn mean_tokens() {
        let report = corpus_stats(&[doc_with(100, vec![]), doc_with(300, vec![])]);
        assert_eq!(report.doc_count(), 2);
        assert_eq!(report.mean_tokens_per_doc(), 200.0);
    }

    #[test]
    fn singleton_fraction_half() {
        let s = MentionSpan::single;
        let report = corpus_stats(&[doc_with(5, vec![vec![s(0), s(1)], vec![s(2)]])]);
        assert_eq!(report.singleton_fraction(), Some(0.5));
    }

    #[test]
    fn all_singletons() {
        let clusters = (0..10).map(|i| vec![MentionSpan::single(i)]).collect();
        let report = corpus_stats(&[doc_with(10, clusters)]);
        assert_eq!(report.singleton_fraction(), Some(1.0));
    }

    #[test]
    fn no_clusters_is_zero_and_unannotated_is_absent() {
        assert_eq!(corpus_stats(&[doc_with(3, vec![])]).singleton_fraction(), Some(0.0));
        let raw = Document::from_text("d", "en", "a b");
        assert_eq!(corpus_stats(&[raw]).singleton_fraction(), None);
    }

    #[test]
    fn permutation_invariant() {
        let s = MentionSpan::single;
        let a = doc_with(4, vec![vec![s(0), s(1)]]);
        let mut b = doc_with(9, vec![vec![s(3)]]);
        b.language = "zh".into();
        let x = corpus_stats(&[a.clone(), b.clone()]);
        let y = corpus_stats(&[b, a]);
        assert_eq!(x, y);
        assert_eq!(x.by_language.len(), 2);
        assert!(x.to_tsv().starts_with("group\tdocs"));
    }
}
