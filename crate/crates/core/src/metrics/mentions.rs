use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use super::coref::PRF;
use crate::corpus::{document_order, Clustering, Document, MentionSpan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MentionType {
    Name,
    Pronoun,
    Nominal,
}

impl MentionType {
    pub const ALL: [MentionType; 3] = [MentionType::Name, MentionType::Pronoun, MentionType::Nominal];

    pub fn as_str(&self) -> &'static str {
        match self {
            MentionType::Name => "name",
            MentionType::Pronoun => "pronoun",
            MentionType::Nominal => "nominal",
        }
    }
}

impl fmt::Display for MentionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A hit/total pair that sums across documents.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub hits: usize,
    pub total: usize,
}

impl Tally {
    pub fn rate(&self) -> Option<f64> {
        (self.total > 0).then(|| self.hits as f64 / self.total as f64)
    }

    pub fn add(&mut self, other: &Tally) {
        self.hits += other.hits;
        self.total += other.total;
    }
}

pub type TypeTallies = BTreeMap<MentionType, Tally>;

pub fn tally_rates(tallies: &TypeTallies) -> BTreeMap<MentionType, f64> {
    tallies.iter().filter_map(|(t, c)| c.rate().map(|r| (*t, r))).collect()
}

pub fn merge_tallies(into: &mut TypeTallies, other: &TypeTallies) {
    for (t, c) in other {
        into.entry(*t).or_default().add(c);
    }
}

pub const PRONOUN_LANGUAGES: [&str; 7] = ["en", "zh", "ar", "ca", "nl", "it", "es"];

fn pronoun_resource(language: &str) -> Option<&'static str> {
    Some(match language {
        "en" => include_str!("../../resources/pronouns/en.txt"),
        "zh" => include_str!("../../resources/pronouns/zh.txt"),
        "ar" => include_str!("../../resources/pronouns/ar.txt"),
        "ca" => include_str!("../../resources/pronouns/ca.txt"),
        "nl" => include_str!("../../resources/pronouns/nl.txt"),
        "it" => include_str!("../../resources/pronouns/it.txt"),
        "es" => include_str!("../../resources/pronouns/es.txt"),
        _ => return None,
    })
}

fn pronoun_lists() -> &'static HashMap<&'static str, HashSet<&'static str>> {
    static LISTS: OnceLock<HashMap<&'static str, HashSet<&'static str>>> = OnceLock::new();
    LISTS.get_or_init(|| {
        PRONOUN_LANGUAGES
            .iter()
            .map(|&lang| {
                let words = pronoun_resource(lang)
                    .unwrap_or_default()
                    .lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty() && !l.starts_with('#'))
                    .collect();
                (lang, words)
            })
            .collect()
    })
}

/// The closed pronoun list for a language code (`en`, `zh`, ...).
pub fn pronouns_for(language: &str) -> Option<&'static HashSet<&'static str>> {
    let code = language.split(['-', '_']).next().unwrap_or(language).to_ascii_lowercase();
    pronoun_lists().get(code.as_str())
}

fn warn_unsupported(language: &str) {
    static WARNED: OnceLock<Mutex<BTreeSet<String>>> = OnceLock::new();
    let mut warned = WARNED.get_or_init(Default::default).lock().unwrap_or_else(|e| e.into_inner());
    if warned.insert(language.to_string()) {
        log::warn!("no pronoun list for language `{language}`; mentions classified as name or nominal only");
    }
}

fn is_capitalized(s: &str) -> bool {
    s.chars().next().is_some_and(char::is_uppercase)
}

fn sentence_initial(doc: &Document, index: usize) -> bool {
    index == 0 || doc.tokens[index - 1].sentence_index != doc.tokens[index].sentence_index
}

/// Assigns the coarse mention class.
///
/// Single-token spans in the language's pronoun list are pronouns. With an
/// NE column, any NE-tagged token makes a name. Without one, a capitalized
/// head (last alphabetic token) makes a name, unless the head opens its
/// sentence and never appears capitalized elsewhere mid-sentence.
pub fn classify_mention(doc: &Document, span: &MentionSpan) -> MentionType {
    let tokens = &doc.tokens[span.tokens()];
    match pronouns_for(&doc.language) {
        Some(list) => {
            if tokens.len() == 1 && list.contains(tokens[0].surface.to_lowercase().as_str()) {
                return MentionType::Pronoun;
            }
        }
        None => warn_unsupported(&doc.language),
    }
    if doc.ne_annotated {
        if tokens.iter().any(|t| t.ne_tag.as_deref().is_some_and(|tag| !tag.is_empty())) {
            return MentionType::Name;
        }
        return MentionType::Nominal;
    }
    let head = (span.start..=span.end)
        .rev()
        .find(|&i| doc.tokens[i].surface.chars().next().is_some_and(char::is_alphabetic));
    if let Some(h) = head {
        let surface = &doc.tokens[h].surface;
        if is_capitalized(surface) {
            let elsewhere = || {
                doc.tokens
                    .iter()
                    .enumerate()
                    .any(|(i, t)| i != h && &t.surface == surface && !sentence_initial(doc, i))
            };
            if !sentence_initial(doc, h) || elsewhere() {
                return MentionType::Name;
            }
        }
    }
    MentionType::Nominal
}

pub fn mention_counts(predicted: &BTreeSet<MentionSpan>, gold: &BTreeSet<MentionSpan>) -> super::MetricCounts {
    let common = predicted.intersection(gold).count() as f64;
    super::MetricCounts {
        recall_num: common,
        recall_den: gold.len() as f64,
        precision_num: common,
        precision_den: predicted.len() as f64,
    }
}

/// Exact-span mention detection precision, recall and F1.
pub fn mention_prf(predicted: &BTreeSet<MentionSpan>, gold: &BTreeSet<MentionSpan>) -> PRF {
    mention_counts(predicted, gold).prf()
}

pub fn md_recall_tallies(predicted: &BTreeSet<MentionSpan>, gold: &BTreeSet<MentionSpan>, doc: &Document) -> TypeTallies {
    let mut out = TypeTallies::new();
    for m in gold {
        let t = out.entry(classify_mention(doc, m)).or_default();
        t.total += 1;
        t.hits += usize::from(predicted.contains(m));
    }
    out
}

/// Recall over the gold mentions of each class; classes absent from gold are omitted.
pub fn md_recall_by_type(
    predicted: &BTreeSet<MentionSpan>,
    gold: &BTreeSet<MentionSpan>,
    doc: &Document,
) -> BTreeMap<MentionType, f64> {
    tally_rates(&md_recall_tallies(predicted, gold, doc))
}

pub fn resolution_tallies(
    key: &Clustering,
    response: &Clustering,
    recalled: &BTreeSet<MentionSpan>,
    doc: &Document,
) -> TypeTallies {
    let key_index = key.cluster_index();
    let resp_index = response.cluster_index();
    let mut out = TypeTallies::new();
    for cluster in key.clusters() {
        // Clusters are stored in document order.
        for (pos, m) in cluster.iter().enumerate() {
            if pos == 0 || !recalled.contains(m) {
                continue;
            }
            let t = out.entry(classify_mention(doc, m)).or_default();
            t.total += 1;
            let Some(&r) = resp_index.get(m) else { continue };
            let correct = response.clusters()[r].iter().any(|a| {
                document_order(a, m).is_lt() && key_index.get(a) == key_index.get(m)
            });
            t.hits += usize::from(correct);
        }
    }
    out
}

/// Fraction of recalled anaphors whose response cluster holds a preceding
/// key-coreferent mention, per class. First mentions are not anaphors.
pub fn resolution_accuracy(
    key: &Clustering,
    response: &Clustering,
    recalled: &BTreeSet<MentionSpan>,
    doc: &Document,
) -> BTreeMap<MentionType, f64> {
    tally_rates(&resolution_tallies(key, response, recalled, doc))
}

/// Mentions whose antecedent decision disagrees with the key: linked to
/// something when the key starts a new entity, left unlinked when the key
/// has an antecedent, or linked only to mentions of other key entities.
pub fn misclustered_mentions(key: &Clustering, response: &Clustering) -> Vec<MentionSpan> {
    let key_index = key.cluster_index();
    let resp_index = response.cluster_index();
    let preceding = |c: &Clustering, idx: &HashMap<MentionSpan, usize>, m: &MentionSpan| -> Vec<MentionSpan> {
        idx.get(m)
            .map(|&i| c.clusters()[i].iter().copied().filter(|a| document_order(a, m).is_lt()).collect())
            .unwrap_or_default()
    };
    let mut all: Vec<MentionSpan> = key.mentions().union(&response.mentions()).copied().collect();
    all.sort_by(document_order);
    all.into_iter()
        .filter(|m| {
            let key_ante = preceding(key, &key_index, m);
            let resp_ante = preceding(response, &resp_index, m);
            match (key_ante.is_empty(), resp_ante.is_empty()) {
                (true, true) => false,
                (false, false) => !resp_ante.iter().any(|a| key_ante.contains(a)),
                _ => true,
            }
        })
        .collect()
}
