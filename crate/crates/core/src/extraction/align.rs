use std::collections::HashMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::annotations::{parse_annotations, AnnotatedSpan};
use crate::corpus::{Clustering, Document, MentionSpan};
use crate::prompting::{MarkerRegistry, RegistryEntry};
use crate::text::{edit_similarity, normalize_tokens, overlap_similarity};

/// Fuzzy-matching thresholds. Both are similarities in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignConfig {
    /// Minimum token edit similarity for pairing an output line with input sentences.
    pub sentence_threshold: f64,
    /// Minimum token-overlap (Dice) similarity for grounding an annotation.
    pub span_threshold: f64,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            sentence_threshold: 0.8,
            span_threshold: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grounding {
    pub annotation: AnnotatedSpan,
    pub entry: RegistryEntry,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentencePair {
    /// Index of the line in the marker-stripped completion.
    pub output_line: usize,
    /// Input sentences covered by that line (usually exactly one).
    pub input_sentences: Range<usize>,
    pub similarity: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub matches: Vec<Grounding>,
    pub unmatched_output: Vec<AnnotatedSpan>,
    pub unmatched_input: Vec<RegistryEntry>,
    pub sentence_map: Vec<SentencePair>,
    pub malformed: usize,
    /// Non-blank output lines that paired with no input sentence.
    pub unmatched_lines: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentDiagnostics {
    pub registry_entries: usize,
    pub grounded: usize,
    pub unmatched_output: usize,
    pub unmatched_input: usize,
    pub malformed: usize,
    pub unmatched_lines: usize,
}

impl AlignmentDiagnostics {
    /// No unmatched annotations, registry entries, lines or malformed fragments.
    pub fn is_clean(&self) -> bool {
        self.unmatched_output == 0 && self.unmatched_input == 0 && self.malformed == 0 && self.unmatched_lines == 0
    }

    pub fn merge(&mut self, other: &AlignmentDiagnostics) {
        self.registry_entries += other.registry_entries;
        self.grounded += other.grounded;
        self.unmatched_output += other.unmatched_output;
        self.unmatched_input += other.unmatched_input;
        self.malformed += other.malformed;
        self.unmatched_lines += other.unmatched_lines;
    }
}

impl AlignmentResult {
    pub fn diagnostics(&self) -> AlignmentDiagnostics {
        AlignmentDiagnostics {
            registry_entries: self.matches.len() + self.unmatched_input.len(),
            grounded: self.matches.len(),
            unmatched_output: self.unmatched_output.len(),
            unmatched_input: self.unmatched_input.len(),
            malformed: self.malformed,
            unmatched_lines: self.unmatched_lines,
        }
    }

    /// Registry span grounded for each annotation, keyed by open offset.
    pub fn span_map(&self) -> HashMap<usize, MentionSpan> {
        self.matches.iter().map(|g| (g.annotation.open_offset, g.entry.span)).collect()
    }
}

struct InputSentences {
    norm: Vec<Vec<String>>,
    /// Position of each token's first normalized token within its sentence.
    token_pos: Vec<usize>,
}

impl InputSentences {
    fn new(doc: &Document) -> Self {
        let ranges = doc.sentence_ranges();
        let mut norm = Vec::with_capacity(ranges.len());
        let mut token_pos = vec![0; doc.tokens.len()];
        for r in ranges {
            let mut seq = Vec::new();
            for t in r {
                token_pos[t] = seq.len();
                seq.extend(normalize_tokens(&doc.tokens[t].surface));
            }
            norm.push(seq);
        }
        InputSentences { norm, token_pos }
    }

    fn group(&self, range: Range<usize>) -> Vec<String> {
        self.norm[range].iter().flatten().cloned().collect()
    }
}

fn similarity_bound(a: usize, b: usize) -> f64 {
    let (lo, hi) = (a.min(b), a.max(b));
    if hi == 0 {
        1.0
    } else {
        lo as f64 / hi as f64
    }
}

/// Finds the best sentence (or run of consecutive sentences) at or after
/// `cursor` for one output line.
fn pair_line(line: &[String], input: &InputSentences, cursor: usize, threshold: f64) -> Option<(Range<usize>, f64)> {
    let n = input.norm.len();
    let mut best: Option<(Range<usize>, f64)> = None;
    let consider = |best: &mut Option<(Range<usize>, f64)>, range: Range<usize>, seq: &[String]| {
        if similarity_bound(line.len(), seq.len()) < threshold {
            return;
        }
        let sim = edit_similarity(line, seq);
        if sim >= threshold && best.as_ref().is_none_or(|b| sim > b.1) {
            *best = Some((range, sim));
        }
    };
    for j in cursor..n {
        consider(&mut best, j..j + 1, &input.norm[j]);
    }
    if best.is_some() {
        return best;
    }
    // The completion may have merged several sentences onto one line.
    for start in cursor..n.min(cursor + 3) {
        let mut total = 0;
        let mut end = start;
        while end < n && total + input.norm[end].len() <= line.len() {
            total += input.norm[end].len();
            end += 1;
        }
        for stop in [end.saturating_sub(1), end, end + 1] {
            if stop > start + 1 && stop <= n {
                consider(&mut best, start..stop, &input.group(start..stop));
            }
        }
    }
    best
}

/// Aligns a document-template completion with the input, sentence by
/// sentence, and grounds each annotation to a registry entry.
///
/// Output lines pair greedily and in order with input sentences whose
/// normalized token edit similarity clears `sentence_threshold`. Inside a
/// pair, annotations (left to right) take the unused registry entry with the
/// highest token-overlap similarity, ties broken by position then ordinal.
pub fn align_output(doc: &Document, registry: &MarkerRegistry, output_text: &str, config: &AlignConfig) -> AlignmentResult {
    let parsed = parse_annotations(output_text);
    let input = InputSentences::new(doc);
    let mut entries_by_sentence: Vec<Vec<&RegistryEntry>> = vec![Vec::new(); doc.sentence_count];
    for e in registry.entries() {
        if doc.contains_span(&e.span) {
            entries_by_sentence[doc.sentence_of(e.span.start)].push(e);
        }
    }

    let plain = &parsed.plain_text;
    let mut lines: Vec<Range<usize>> = Vec::new();
    let mut start = 0;
    for (i, c) in plain.char_indices() {
        if c == '\n' {
            lines.push(start..i);
            start = i + 1;
        }
    }
    lines.push(start..plain.len());

    let mut consumed = vec![false; registry.len()];
    let mut result = AlignmentResult {
        malformed: parsed.malformed,
        ..AlignmentResult::default()
    };
    let mut spans = parsed.spans.into_iter().peekable();
    let mut cursor = 0;
    for (li, line) in lines.iter().enumerate() {
        let mut line_spans = Vec::new();
        while let Some(s) = spans.next_if(|s| s.plain_range.start <= line.end) {
            line_spans.push(s);
        }
        let line_norm = normalize_tokens(&plain[line.clone()]);
        if line_norm.is_empty() {
            result.unmatched_output.extend(line_spans);
            continue;
        }
        let Some((group, sim)) = pair_line(&line_norm, &input, cursor, config.sentence_threshold) else {
            result.unmatched_lines += 1;
            result.unmatched_output.extend(line_spans);
            continue;
        };
        cursor = group.end;
        result.sentence_map.push(SentencePair {
            output_line: li,
            input_sentences: group.clone(),
            similarity: sim,
        });

        // Candidate entries with their normalized surface and position in the group.
        let mut offset = 0;
        let mut candidates = Vec::new();
        for s in group.clone() {
            for e in &entries_by_sentence[s] {
                let surface = normalize_tokens(&doc.span_text(&e.span));
                candidates.push((*e, surface, offset + input.token_pos[e.span.start]));
            }
            offset += input.norm[s].len();
        }

        for ann in line_spans {
            let ann_norm = normalize_tokens(&ann.surface);
            let ann_pos = normalize_tokens(&plain[line.start..ann.plain_range.start.max(line.start)]).len();
            let mut best: Option<(f64, usize, usize, usize)> = None; // (sim, dist, ordinal, idx)
            for (idx, (entry, surface, pos)) in candidates.iter().enumerate() {
                if consumed[entry.ordinal] {
                    continue;
                }
                let sim = overlap_similarity(&ann_norm, surface);
                if sim < config.span_threshold {
                    continue;
                }
                let dist = pos.abs_diff(ann_pos);
                let better = match best {
                    None => true,
                    Some((bs, bd, bo, _)) => sim > bs || (sim == bs && (dist < bd || (dist == bd && entry.ordinal < bo))),
                };
                if better {
                    best = Some((sim, dist, entry.ordinal, idx));
                }
            }
            match best {
                Some((sim, _, ordinal, idx)) => {
                    consumed[ordinal] = true;
                    result.matches.push(Grounding {
                        annotation: ann,
                        entry: *candidates[idx].0,
                        similarity: sim,
                    });
                }
                None => result.unmatched_output.push(ann),
            }
        }
    }
    result.unmatched_output.extend(spans);
    result.unmatched_input = registry
        .entries()
        .iter()
        .filter(|e| !consumed[e.ordinal])
        .copied()
        .collect();
    result
}

/// Case- and whitespace-insensitive label key; empty labels stay distinct.
pub fn normalize_label(label: &str) -> String {
    label.trim().to_lowercase()
}

/// Groups grounded annotations by normalized cluster label.
///
/// Annotations left with an empty label become singletons. Registry entries
/// with no surviving annotation are added as singletons only when
/// `keep_unmatched` is set.
pub fn build_clustering(alignment: &AlignmentResult, keep_unmatched: bool) -> Clustering {
    let mut by_label: Vec<(String, Vec<MentionSpan>)> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut clusters: Vec<Vec<MentionSpan>> = Vec::new();
    for g in &alignment.matches {
        let label = normalize_label(&g.annotation.cluster_label);
        if label.is_empty() {
            clusters.push(vec![g.entry.span]);
            continue;
        }
        match index.get(&label) {
            Some(&i) => by_label[i].1.push(g.entry.span),
            None => {
                index.insert(label.clone(), by_label.len());
                by_label.push((label, vec![g.entry.span]));
            }
        }
    }
    clusters.extend(by_label.into_iter().map(|(_, spans)| spans));
    if keep_unmatched {
        clusters.extend(alignment.unmatched_input.iter().map(|e| vec![e.span]));
    }
    Clustering::new(clusters).expect("grounding never reuses a registry entry")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompting::mark_mentions;
    use std::collections::BTreeSet;

    fn setup() -> (Document, MarkerRegistry, String) {
        let doc = Document::from_text(
            "d",
            "en",
            "Gennifer Flowers claims she had a 12 - year affair with Bill Clinton .\n\
             Although Mr. Clinton denied it , he did speak .\n\
             She said she felt vindicated .",
        );
        let spans: BTreeSet<MentionSpan> = [(0, 1), (3, 3), (11, 12), (15, 16), (18, 18), (20, 20), (24, 24), (26, 26)]
            .iter()
            .map(|&(s, e)| MentionSpan::new(s, e))
            .collect();
        let marked = mark_mentions(&doc, &spans).unwrap();
        (doc, marked.registry, marked.text)
    }

    fn label_all(marked: &str, labels: &[&str]) -> String {
        let mut out = String::new();
        let mut rest = marked;
        let mut i = 0;
        while let Some(p) = rest.find("](#)") {
            out.push_str(&rest[..p]);
            out.push_str(&format!("](#{})", labels[i]));
            i += 1;
            rest = &rest[p + 4..];
        }
        out.push_str(rest);
        out
    }

    const LABELS: [&str; 8] = ["c6", "c6", "c3", "c3", "c8", "c3", "c6", "c6"];

    #[test]
    fn identity_alignment() {
        let (doc, reg, marked) = setup();
        let out = label_all(&marked, &LABELS);
        let a = align_output(&doc, &reg, &out, &AlignConfig::default());
        assert!(a.diagnostics().is_clean(), "{:?}", a.diagnostics());
        for g in &a.matches {
            assert_eq!(doc.span_text(&g.entry.span), g.annotation.surface);
        }
        let c = build_clustering(&a, false);
        assert_eq!(c.len(), 3);
    }

    #[test]
    fn dropped_sentence_leaves_its_entries_unmatched() {
        let (doc, reg, marked) = setup();
        let out = label_all(&marked, &LABELS);
        let kept: Vec<&str> = out.lines().enumerate().filter(|(i, _)| *i != 1).map(|(_, l)| l).collect();
        let a = align_output(&doc, &reg, &kept.join("\n"), &AlignConfig::default());
        let missing: Vec<MentionSpan> = a.unmatched_input.iter().map(|e| e.span).collect();
        assert_eq!(
            missing,
            vec![MentionSpan::new(15, 16), MentionSpan::single(18), MentionSpan::single(20)]
        );
        assert_eq!(a.matches.len(), 5);
        assert!(a.unmatched_output.is_empty());
    }

    #[test]
    fn rehyphenated_output_still_grounds() {
        let (doc, reg, marked) = setup();
        let out = label_all(&marked, &LABELS).replace("12 - year", "12-year");
        let a = align_output(&doc, &reg, &out, &AlignConfig::default());
        assert_eq!(a.matches.len(), 8);
    }

    #[test]
    fn merged_lines_still_pair() {
        let (doc, reg, marked) = setup();
        let out = label_all(&marked, &LABELS).replace('\n', " ");
        let a = align_output(&doc, &reg, &out, &AlignConfig::default());
        assert_eq!(a.matches.len(), 8, "{:?}", a.diagnostics());
        assert_eq!(a.sentence_map[0].input_sentences, 0..3);
    }

    #[test]
    fn empty_output_leaves_everything_unmatched() {
        let (doc, reg, _) = setup();
        let a = align_output(&doc, &reg, "", &AlignConfig::default());
        assert_eq!(a.unmatched_input.len(), reg.len());
        assert!(build_clustering(&a, false).is_empty());
        assert_eq!(build_clustering(&a, true).len(), reg.len());
    }

    #[test]
    fn labels_normalized_by_case() {
        let (doc, reg, marked) = setup();
        let out = label_all(&marked, &["Cluster_1", " cluster_1", "x", "y", "z", "w", "v", "u"]);
        let a = align_output(&doc, &reg, &out, &AlignConfig::default());
        let c = build_clustering(&a, false);
        assert_eq!(c.clusters()[0], vec![MentionSpan::new(0, 1), MentionSpan::single(3)]);
    }

    #[test]
    fn repeated_surfaces_ground_by_position() {
        let doc = Document::from_text("d", "en", "he said he left and he returned");
        let spans: BTreeSet<MentionSpan> = [0, 2, 5].iter().map(|&i| MentionSpan::single(i)).collect();
        let marked = mark_mentions(&doc, &spans).unwrap();
        // the model left the first marker unlabeled and removed its brackets
        let out = "he said [he](#a) left and [he](#a) returned";
        let a = align_output(&doc, &marked.registry, out, &AlignConfig::default());
        let grounded: Vec<MentionSpan> = a.matches.iter().map(|g| g.entry.span).collect();
        assert_eq!(grounded, vec![MentionSpan::single(2), MentionSpan::single(5)]);
        assert_eq!(a.unmatched_input[0].span, MentionSpan::single(0));
    }

    #[test]
    fn hallucinated_span_is_unmatched_output() {
        let (doc, reg, marked) = setup();
        let out = label_all(&marked, &LABELS).replace("a 12 - year affair", "a 12 - year [affair](#c9)");
        let a = align_output(&doc, &reg, &out, &AlignConfig::default());
        assert_eq!(a.unmatched_output.len(), 1);
        assert_eq!(a.unmatched_output[0].surface, "affair");
        assert_eq!(a.matches.len(), 8);
    }
}
