//! Seeded generator of small annotated English documents for tests and demos.
//!
//! Documents mix names, pronouns and nominal phrases, including nested
//! mentions (`Ann Lee 's dog`, `the friend of Ann Lee`) and entities that
//! are mentioned only once.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Clustering, Document, MentionSpan};

const FIRST: &[&str] = &["Ann", "Bob", "Carla", "Dev", "Erin", "Farid", "Gwen", "Hiro", "Ines", "Jonas", "Kemal", "Lena"];
const LAST: &[&str] = &["Lee", "Moreno", "Novak", "Okafor", "Price", "Quinn", "Rossi", "Sato", "Tran", "Ueda"];
const NOUNS: &[&str] = &["dog", "bridge", "report", "company", "garden", "council", "ship", "museum", "letter", "team"];
const ADJS: &[&str] = &["old", "new", "small", "famous", "long-term", "local", "well-known", "quiet"];
const VERBS: &[&str] = &["saw", "praised", "visited", "called", "joined", "described", "met", "left"];
const PREPS: &[&str] = &["near", "with", "after", "before", "about"];
const ADVERBS: &[&str] = &["yesterday", "again", "twice", "in 1998", "on Monday", "at 12 - year intervals"];
const PRONOUNS: &[&str] = &["he", "she", "it", "they", "him", "her", "them"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub documents: usize,
    pub min_sentences: usize,
    pub max_sentences: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            documents: 50,
            min_sentences: 20,
            max_sentences: 40,
            seed: 0,
        }
    }
}

struct Builder<'r> {
    rng: &'r mut ChaCha8Rng,
    tokens: Vec<String>,
    names: Vec<String>,
    nouns: Vec<String>,
    mentions: BTreeMap<MentionSpan, usize>,
    next_entity: usize,
}

impl Builder<'_> {
    fn push_words(&mut self, words: &str) {
        self.tokens.extend(words.split_whitespace().map(str::to_string));
    }

    /// Either a known entity (with some probability) or a fresh one.
    fn entity(&mut self, pool_len: usize) -> usize {
        if self.next_entity > 0 && self.rng.random_bool(0.6) {
            self.rng.random_range(0..self.next_entity.min(pool_len.max(1)))
        } else {
            self.next_entity += 1;
            self.next_entity - 1
        }
    }

    fn name_for(&mut self, entity: usize) -> String {
        while self.names.len() <= entity {
            let n = format!("{} {}", FIRST.choose(self.rng).unwrap(), LAST.choose(self.rng).unwrap());
            self.names.push(n);
        }
        self.names[entity].clone()
    }

    fn noun_for(&mut self, entity: usize) -> String {
        while self.nouns.len() <= entity {
            let n = format!("{} {}", ADJS.choose(self.rng).unwrap(), NOUNS.choose(self.rng).unwrap());
            self.nouns.push(n);
        }
        self.nouns[entity].clone()
    }

    fn mark(&mut self, start: usize, entity: usize) {
        self.mentions.insert(MentionSpan::new(start, self.tokens.len() - 1), entity);
    }

    fn simple_mention(&mut self) {
        let start = self.tokens.len();
        let entity = self.entity(12);
        match self.rng.random_range(0..3) {
            0 => {
                let name = self.name_for(entity);
                // Later mentions sometimes use only the family name.
                if entity < self.next_entity - 1 && self.rng.random_bool(0.3) {
                    let family = name.split_whitespace().last().unwrap_or(&name).to_string();
                    self.push_words(&family);
                } else {
                    self.push_words(&name);
                }
            }
            1 if entity < self.next_entity - 1 => {
                let p = PRONOUNS.choose(self.rng).unwrap();
                self.push_words(p);
            }
            _ => {
                let noun = self.noun_for(entity);
                self.push_words(&format!("the {noun}"));
            }
        }
        self.mark(start, entity);
    }

    fn mention(&mut self, depth: usize) {
        if depth >= 2 || !self.rng.random_bool(0.25) {
            self.simple_mention();
            return;
        }
        let start = self.tokens.len();
        let outer = self.next_entity;
        self.next_entity += 1;
        if self.rng.random_bool(0.5) {
            self.mention(depth + 1);
            let noun = NOUNS.choose(self.rng).unwrap();
            self.push_words(&format!("'s {noun}"));
        } else {
            let noun = NOUNS.choose(self.rng).unwrap();
            self.push_words(&format!("the {noun} of"));
            self.mention(depth + 1);
        }
        self.mark(start, outer);
    }

    fn sentence(&mut self) -> Vec<String> {
        let begin = self.tokens.len();
        self.mention(0);
        let verb = VERBS.choose(self.rng).unwrap();
        self.push_words(verb);
        self.mention(0);
        if self.rng.random_bool(0.5) {
            let prep = PREPS.choose(self.rng).unwrap();
            self.push_words(prep);
            self.mention(0);
        }
        if self.rng.random_bool(0.4) {
            let adv = ADVERBS.choose(self.rng).unwrap();
            self.push_words(adv);
        }
        self.push_words(".");
        // Sentence-initial words are capitalized.
        let first = &mut self.tokens[begin];
        let mut chars = first.chars();
        if let Some(c) = chars.next() {
            *first = c.to_uppercase().chain(chars).collect();
        }
        self.tokens[begin..].to_vec()
    }
}

/// Generates one document with gold clusters.
pub fn generate_document(doc_id: &str, sentences: usize, rng: &mut ChaCha8Rng) -> Document {
    let mut b = Builder {
        rng,
        tokens: Vec::new(),
        names: Vec::new(),
        nouns: Vec::new(),
        mentions: BTreeMap::new(),
        next_entity: 0,
    };
    let sents: Vec<Vec<String>> = (0..sentences.max(1)).map(|_| b.sentence()).collect();
    let mut by_entity: BTreeMap<usize, Vec<MentionSpan>> = BTreeMap::new();
    for (span, entity) in b.mentions {
        by_entity.entry(entity).or_default().push(span);
    }
    let clustering = Clustering::new(by_entity.into_values().collect()).expect("generated mentions are distinct");
    Document::from_sentences(doc_id, "en", &sents)
        .with_gold(clustering)
        .expect("generated mentions lie within the document")
}

pub fn generate_corpus(config: &SyntheticConfig) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (0..config.documents)
        .map(|i| {
            let lo = config.min_sentences.max(1);
            let hi = config.max_sentences.max(lo);
            let n = rng.random_range(lo..=hi);
            generate_document(&format!("synth/{:04}", i), n, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_valid() {
        let cfg = SyntheticConfig {
            documents: 5,
            ..Default::default()
        };
        let a = generate_corpus(&cfg);
        assert_eq!(a, generate_corpus(&cfg));
        for d in &a {
            d.validate().unwrap();
            assert!((20..=40).contains(&d.sentence_count));
        }
    }

    #[test]
    fn has_nesting_and_singletons() {
        let docs = generate_corpus(&SyntheticConfig {
            documents: 3,
            ..Default::default()
        });
        let gold: Vec<_> = docs.iter().map(|d| d.gold_clusters.clone().unwrap()).collect();
        assert!(gold.iter().any(|g| g.has_singletons()));
        assert!(gold.iter().any(|g| g.clusters().iter().any(|c| c.len() > 2)));
        let nested = gold.iter().any(|g| {
            let ms: Vec<_> = g.mentions().into_iter().collect();
            ms.iter().any(|a| ms.iter().any(|b| a != b && a.contains(b)))
        });
        assert!(nested);
    }
}
