//! CoNLL-2012 and SemEval-2010 column formats.
//!
//! Both dialects share one bracket engine for the coreference column
//! (`(id`, `id)`, `(id)`, joined with `|`); a [`ColumnMap`] says where the
//! other columns live.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{genre_from_id, Clustering, CorpusError, Document, MentionSpan, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dialect {
    Conll2012,
    Semeval2010,
}

/// Column positions for a dialect. The coreference column is always last.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnMap {
    pub word: usize,
    pub pos: usize,
    pub ne: usize,
    pub min_columns: usize,
}

impl Dialect {
    pub fn columns(&self) -> ColumnMap {
        match self {
            Dialect::Conll2012 => ColumnMap {
                word: 3,
                pos: 4,
                ne: 10,
                min_columns: 5,
            },
            Dialect::Semeval2010 => ColumnMap {
                word: 1,
                pos: 4,
                ne: 12,
                min_columns: 3,
            },
        }
    }
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dialect::Conll2012 => "conll2012",
            Dialect::Semeval2010 => "semeval2010",
        })
    }
}

impl FromStr for Dialect {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "conll2012" | "conll" | "conll-2012" => Ok(Dialect::Conll2012),
            "semeval2010" | "semeval" | "semeval-2010" => Ok(Dialect::Semeval2010),
            other => Err(format!("unknown dialect `{other}` (expected conll2012 or semeval2010)")),
        }
    }
}

fn is_empty_cell(cell: &str) -> bool {
    matches!(cell, "-" | "_")
}

enum CorefPart<'a> {
    Open(&'a str),
    Close(&'a str),
    Single(&'a str),
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_coref_cell(cell: &str) -> Option<Vec<CorefPart<'_>>> {
    if is_empty_cell(cell) {
        return Some(Vec::new());
    }
    cell.split('|')
        .map(|part| {
            let opens = part.starts_with('(');
            let closes = part.ends_with(')');
            let inner = part
                .strip_prefix('(')
                .unwrap_or(part)
                .strip_suffix(')')
                .unwrap_or(part.strip_prefix('(').unwrap_or(part));
            if !valid_id(inner) {
                return None;
            }
            match (opens, closes) {
                (true, true) => Some(CorefPart::Single(inner)),
                (true, false) => Some(CorefPart::Open(inner)),
                (false, true) => Some(CorefPart::Close(inner)),
                (false, false) => None,
            }
        })
        .collect()
}

#[derive(Default)]
struct NeState {
    open: Option<String>,
}

impl NeState {
    /// Returns the entity label covering this token.
    fn step(&mut self, cell: &str) -> Option<String> {
        let cell = cell.trim();
        if let Some(rest) = cell.strip_prefix('(') {
            let closes = rest.ends_with(')');
            let label = rest.trim_end_matches(')').trim_end_matches('*').to_string();
            if closes {
                self.open = None;
            } else {
                self.open = Some(label.clone());
            }
            return (!label.is_empty()).then_some(label);
        }
        let current = self.open.clone();
        if cell.ends_with(')') {
            self.open = None;
        }
        current
    }
}

struct DocBuilder {
    doc_id: String,
    part: u32,
    tokens: Vec<Token>,
    sentence: usize,
    sentence_has_tokens: bool,
    ne_annotated: bool,
    ne: NeState,
    open: HashMap<String, Vec<(usize, usize)>>,
    dense: HashMap<String, usize>,
    clusters: Vec<Vec<MentionSpan>>,
}

impl DocBuilder {
    fn new(doc_id: String, part: u32) -> Self {
        DocBuilder {
            doc_id,
            part,
            tokens: Vec::new(),
            sentence: 0,
            sentence_has_tokens: false,
            ne_annotated: false,
            ne: NeState::default(),
            open: HashMap::new(),
            dense: HashMap::new(),
            clusters: Vec::new(),
        }
    }

    fn label(&self) -> String {
        format!("{}#{:03}", self.doc_id, self.part)
    }

    fn cluster_slot(&mut self, raw: &str) -> usize {
        let next = self.dense.len();
        let idx = *self.dense.entry(raw.to_string()).or_insert(next);
        if idx == self.clusters.len() {
            self.clusters.push(Vec::new());
        }
        idx
    }

    fn end_sentence(&mut self) {
        if self.sentence_has_tokens {
            self.sentence += 1;
            self.sentence_has_tokens = false;
        }
    }

    fn push_row(
        &mut self,
        cols: &[&str],
        map: &ColumnMap,
        dialect: Dialect,
        line: usize,
    ) -> Result<(), CorpusError> {
        if cols.len() < map.min_columns {
            return Err(CorpusError::Dialect {
                dialect,
                line,
                expected: map.min_columns,
                found: cols.len(),
            });
        }
        let last = cols.len() - 1;
        let index = self.tokens.len();
        let pos_tag = (map.pos < last && !is_empty_cell(cols[map.pos])).then(|| cols[map.pos].to_string());
        let ne_tag = if map.ne < last {
            self.ne_annotated = true;
            self.ne.step(cols[map.ne])
        } else {
            None
        };
        self.tokens.push(Token {
            surface: cols[map.word].to_string(),
            doc_index: index,
            sentence_index: self.sentence,
            pos_tag,
            ne_tag,
        });
        self.sentence_has_tokens = true;

        let cell = cols[last];
        let parts = parse_coref_cell(cell).ok_or_else(|| CorpusError::MalformedCell {
            doc_id: self.label(),
            line,
            cell: cell.to_string(),
        })?;
        for part in parts {
            match part {
                CorefPart::Single(id) => {
                    let slot = self.cluster_slot(id);
                    self.clusters[slot].push(MentionSpan::single(index));
                }
                CorefPart::Open(id) => {
                    self.cluster_slot(id);
                    self.open.entry(id.to_string()).or_default().push((index, line));
                }
                CorefPart::Close(id) => {
                    let start = self
                        .open
                        .get_mut(id)
                        .and_then(Vec::pop)
                        .ok_or_else(|| CorpusError::UnmatchedClose {
                            doc_id: self.label(),
                            line,
                            cluster: id.to_string(),
                        })?;
                    let slot = self.dense[id];
                    self.clusters[slot].push(MentionSpan::new(start.0, index));
                }
            }
        }
        Ok(())
    }

    fn finish(self, language: &str) -> Result<Document, CorpusError> {
        let label = self.label();
        if let Some((id, &(_, line))) = self
            .open
            .iter()
            .filter_map(|(id, stack)| stack.first().map(|s| (id, s)))
            .min_by_key(|(_, s)| s.1)
        {
            return Err(CorpusError::Unclosed {
                doc_id: label,
                line,
                cluster: id.clone(),
            });
        }
        let clustering = Clustering::new(self.clusters).map_err(|source| CorpusError::Clustering {
            doc_id: label,
            source,
        })?;
        let sentence_count = if self.tokens.is_empty() {
            0
        } else {
            self.sentence + usize::from(self.sentence_has_tokens)
        };
        Ok(Document {
            genre: genre_from_id(&self.doc_id),
            doc_id: self.doc_id,
            part: self.part,
            language: language.to_string(),
            tokens: self.tokens,
            sentence_count,
            gold_clusters: Some(clustering),
            ne_annotated: self.ne_annotated,
        })
    }
}

fn parse_header(rest: &str) -> (String, u32) {
    let rest = rest.trim();
    let (id, tail) = if let Some(inner) = rest.strip_prefix('(') {
        match inner.find(')') {
            Some(close) => (inner[..close].to_string(), &inner[close + 1..]),
            None => (inner.to_string(), ""),
        }
    } else {
        match rest.find(';') {
            Some(semi) => (rest[..semi].trim().to_string(), &rest[semi..]),
            None => (rest.to_string(), ""),
        }
    };
    let part = tail
        .trim_start_matches(';')
        .trim()
        .strip_prefix("part")
        .and_then(|p| p.trim().parse().ok())
        .unwrap_or(0);
    (id, part)
}

/// Parses every `#begin document` … `#end document` block in `input`.
pub fn parse_conll<R: BufRead>(input: R, dialect: Dialect, language: &str) -> Result<Vec<Document>, CorpusError> {
    let map = dialect.columns();
    let mut docs = Vec::new();
    let mut current: Option<DocBuilder> = None;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let trimmed = line.trim();
        if let Some(rest) = trimmed.strip_prefix("#begin document") {
            if let Some(open) = current.take() {
                return Err(CorpusError::Structure {
                    line: lineno,
                    message: format!("document {} not closed before the next #begin", open.label()),
                });
            }
            let (id, part) = parse_header(rest);
            current = Some(DocBuilder::new(id, part));
            continue;
        }
        if trimmed.starts_with("#end document") {
            let doc = current.take().ok_or_else(|| CorpusError::Structure {
                line: lineno,
                message: "#end document without #begin".into(),
            })?;
            docs.push(doc.finish(language)?);
            continue;
        }
        if trimmed.is_empty() {
            if let Some(doc) = current.as_mut() {
                doc.end_sentence();
            }
            continue;
        }
        if trimmed.starts_with('#') {
            continue;
        }
        let doc = current.as_mut().ok_or_else(|| CorpusError::Structure {
            line: lineno,
            message: "token row outside of a document".into(),
        })?;
        let cols: Vec<&str> = trimmed.split_whitespace().collect();
        doc.push_row(&cols, &map, dialect, lineno)?;
    }
    if let Some(open) = current {
        return Err(CorpusError::Structure {
            line: 0,
            message: format!("document {} has no #end document", open.label()),
        });
    }
    Ok(docs)
}

pub fn parse_conll_file(path: impl AsRef<Path>, dialect: Dialect, language: &str) -> Result<Vec<Document>, CorpusError> {
    let file = File::open(path)?;
    parse_conll(BufReader::new(file), dialect, language)
}

fn coref_cells(doc: &Document, clustering: &Clustering) -> Vec<String> {
    let n = doc.tokens.len();
    // (span, cluster) grouped by start and end token
    let mut opens: Vec<Vec<(MentionSpan, usize)>> = vec![Vec::new(); n];
    let mut closes: Vec<Vec<(MentionSpan, usize)>> = vec![Vec::new(); n];
    for (id, cluster) in clustering.clusters().iter().enumerate() {
        for &m in cluster {
            opens[m.start].push((m, id));
            if m.start != m.end {
                closes[m.end].push((m, id));
            }
        }
    }
    (0..n)
        .map(|t| {
            let mut starting = std::mem::take(&mut opens[t]);
            starting.sort_by(|a, b| b.0.end.cmp(&a.0.end).then(a.1.cmp(&b.1)));
            let mut ending = std::mem::take(&mut closes[t]);
            ending.sort_by(|a, b| b.0.start.cmp(&a.0.start).then(a.1.cmp(&b.1)));
            let mut parts: Vec<String> = Vec::new();
            for (m, id) in &starting {
                if m.end != m.start {
                    parts.push(format!("({id}"));
                }
            }
            for (m, id) in &starting {
                if m.end == m.start {
                    parts.push(format!("({id})"));
                }
            }
            for (_, id) in &ending {
                parts.push(format!("{id})"));
            }
            if parts.is_empty() {
                "-".to_string()
            } else {
                parts.join("|")
            }
        })
        .collect()
}

fn ne_cells(doc: &Document) -> Vec<String> {
    let tags: Vec<Option<&str>> = doc.tokens.iter().map(|t| t.ne_tag.as_deref()).collect();
    (0..tags.len())
        .map(|i| match tags[i] {
            None => "*".to_string(),
            Some(label) => {
                let same = |j: usize| {
                    tags[j] == Some(label) && doc.tokens[j].sentence_index == doc.tokens[i].sentence_index
                };
                let starts = i == 0 || !same(i - 1);
                let ends = i + 1 == tags.len() || !same(i + 1);
                match (starts, ends) {
                    (true, true) => format!("({label})"),
                    (true, false) => format!("({label}*"),
                    (false, true) => "*)".to_string(),
                    (false, false) => "*".to_string(),
                }
            }
        })
        .collect()
}

/// Writes `doc` in CoNLL-2012 layout with `clustering` in the last column.
///
/// Cluster ids are the canonical (first-appearance) indices of `clustering`.
/// Adjacent named entities of the same type are merged in the NE column.
pub fn serialize_conll(doc: &Document, clustering: &Clustering) -> Result<String, CorpusError> {
    doc.check_clustering(clustering)?;
    let coref = coref_cells(doc, clustering);
    let ne = ne_cells(doc);
    let mut out = format!("#begin document ({}); part {:03}\n", doc.doc_id, doc.part);
    let mut word_in_sentence = 0;
    for (i, t) in doc.tokens.iter().enumerate() {
        if i > 0 && t.sentence_index != doc.tokens[i - 1].sentence_index {
            out.push('\n');
            word_in_sentence = 0;
        }
        let row = [
            doc.doc_id.as_str(),
            &doc.part.to_string(),
            &word_in_sentence.to_string(),
            &t.surface,
            t.pos_tag.as_deref().unwrap_or("-"),
            "-",
            "-",
            "-",
            "-",
            "-",
            &ne[i],
            &coref[i],
        ]
        .join("\t");
        out.push_str(&row);
        out.push('\n');
        word_in_sentence += 1;
    }
    if !doc.tokens.is_empty() {
        out.push('\n');
    }
    out.push_str("#end document\n");
    Ok(out)
}

/// Groups documents by key, keeping the first occurrence.
pub fn index_by_key(docs: &[Document]) -> BTreeMap<String, &Document> {
    let mut map = BTreeMap::new();
    for d in docs {
        map.entry(d.key()).or_insert(d);
    }
    map
}
