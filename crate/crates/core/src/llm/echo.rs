use std::collections::HashMap;

use super::{CompletionBackend, CompletionRequest, CompletionResponse, FinishReason, LlmError, Usage};
use crate::corpus::{document_order, Document, MentionSpan};
use crate::extraction::parse_annotations;
use crate::metrics::{classify_mention, MentionType};
use crate::prompting::Templates;
use crate::text::normalize_tokens;

/// Oracle backend answering from the gold clusters of a known corpus.
///
/// Document prompts come back with every `(#)` filled as `(#cluster_<id>)`
/// (marked spans outside the gold annotation get a fresh label each). QA
/// prompts name a preceding gold antecedent. Mention-detection prompts list
/// the gold mentions by class.
pub struct EchoGoldBackend {
    templates: Templates,
    docs: Vec<Document>,
    by_text: HashMap<String, usize>,
    by_flat: HashMap<String, usize>,
}

fn split_template<'a>(template: &'a str, slot: &str) -> Option<(&'a str, &'a str)> {
    template.split_once(&format!("{{{slot}}}"))
}

fn flat_text(doc: &Document) -> String {
    doc.tokens.iter().map(|t| t.surface.as_str()).collect::<Vec<_>>().join(" ")
}

/// Token spans of a text built by joining tokens with single separators.
fn span_at(doc: &Document, start_byte: usize, end_byte: usize) -> Option<MentionSpan> {
    let mut offset = 0;
    let (mut first, mut last) = (None, None);
    for (i, t) in doc.tokens.iter().enumerate() {
        if offset == start_byte {
            first = Some(i);
        }
        offset += t.surface.len();
        if offset == end_byte {
            last = Some(i);
        }
        offset += 1;
    }
    match (first, last) {
        (Some(a), Some(b)) if a <= b => Some(MentionSpan::new(a, b)),
        _ => None,
    }
}

impl EchoGoldBackend {
    pub fn new(docs: &[Document], templates: Templates) -> Self {
        let mut by_text = HashMap::new();
        let mut by_flat = HashMap::new();
        for (i, d) in docs.iter().enumerate() {
            by_text.entry(d.detokenize()).or_insert(i);
            by_flat.entry(flat_text(d)).or_insert(i);
        }
        EchoGoldBackend {
            templates,
            docs: docs.to_vec(),
            by_text,
            by_flat,
        }
    }

    fn gold_index(&self, doc: &Document) -> HashMap<MentionSpan, usize> {
        doc.gold_clusters.as_ref().map(|c| c.cluster_index()).unwrap_or_default()
    }

    fn answer_document(&self, body: &str) -> Result<String, LlmError> {
        let parsed = parse_annotations(body);
        let doc = self
            .by_text
            .get(&parsed.plain_text)
            .map(|&i| &self.docs[i])
            .ok_or_else(|| LlmError::Unsupported("echo-gold: document not in the loaded corpus".into()))?;
        let gold = self.gold_index(doc);
        let mut out = String::with_capacity(body.len() * 2);
        let mut cursor = 0;
        let mut fresh = 0;
        let mut closes: Vec<_> = parsed
            .spans
            .iter()
            .map(|s| {
                let span = span_at(doc, s.plain_range.start, s.plain_range.end);
                let label = match span.and_then(|sp| gold.get(&sp)) {
                    Some(id) => format!("cluster_{id}"),
                    None => {
                        fresh += 1;
                        format!("cluster_x{fresh}")
                    }
                };
                (s.close_range.clone(), label)
            })
            .collect();
        closes.sort_by_key(|(r, _)| r.start);
        for (range, label) in closes {
            out.push_str(&body[cursor..range.start]);
            out.push_str(&format!("](#{label})"));
            cursor = range.end;
        }
        out.push_str(&body[cursor..]);
        Ok(out)
    }

    fn answer_qa(&self, context: &str, mention: &str) -> Result<String, LlmError> {
        let unknown = || LlmError::Unsupported("echo-gold: QA context not in the loaded corpus".into());
        let (doc, target) = context
            .match_indices('*')
            .find_map(|(i, _)| {
                let rest = context[i + 1..].strip_prefix(mention)?.strip_prefix('*')?;
                let plain = format!("{}{mention}{rest}", &context[..i]);
                let doc = &self.docs[*self.by_flat.get(&plain)?];
                Some((doc, span_at(doc, i, i + mention.len())?))
            })
            .ok_or_else(unknown)?;
        let gold = self.gold_index(doc);
        let mut mentions: Vec<MentionSpan> = gold.keys().copied().collect();
        mentions.sort_by(document_order);
        let norm = |m: &MentionSpan| normalize_tokens(&doc.span_text(m));
        let antecedent = gold.get(&target).and_then(|&cluster| {
            let preceding: Vec<MentionSpan> = mentions.iter().copied().filter(|m| document_order(m, &target).is_lt()).collect();
            let coreferent: Vec<MentionSpan> = preceding.iter().rev().copied().filter(|m| gold[m] == cluster).collect();
            // Prefer an antecedent whose surface no closer non-coreferent mention shares.
            coreferent
                .iter()
                .copied()
                .find(|a| {
                    let dist = a.start.abs_diff(target.start);
                    let surface = norm(a);
                    !preceding
                        .iter()
                        .any(|c| gold[c] != cluster && c.start.abs_diff(target.start) <= dist && norm(c) == surface)
                })
                .or_else(|| coreferent.first().copied())
        });
        Ok(match antecedent {
            Some(a) => format!(" *{mention}* refers to {}.", doc.span_text(&a)),
            None => format!(" *{mention}* refers to nothing."),
        })
    }

    fn answer_md(&self, body: &str) -> Result<String, LlmError> {
        let doc = self
            .by_text
            .get(body)
            .map(|&i| &self.docs[i])
            .ok_or_else(|| LlmError::Unsupported("echo-gold: document not in the loaded corpus".into()))?;
        let mut mentions: Vec<MentionSpan> = self.gold_index(doc).into_keys().collect();
        mentions.sort_by(document_order);
        let mut lists: [Vec<String>; 3] = Default::default();
        for m in &mentions {
            let slot = match classify_mention(doc, m) {
                MentionType::Name => 0,
                MentionType::Pronoun => 1,
                MentionType::Nominal => 2,
            };
            lists[slot].push(doc.span_text(m));
        }
        Ok(format!(
            "\nNamed Entities: {}\nPronouns: {}\nNominal Noun Phrases: {}",
            lists[0].join(", "),
            lists[1].join(", "),
            lists[2].join(", ")
        ))
    }

    fn answer(&self, prompt: &str) -> Result<String, LlmError> {
        let t = &self.templates;
        for (template, is_document) in [(&t.document, true), (&t.mention_detection, false)] {
            if let Some((pre, post)) = split_template(template, "input") {
                if let Some(body) = prompt.strip_prefix(pre).and_then(|r| r.strip_suffix(post)) {
                    return if is_document {
                        self.answer_document(body)
                    } else {
                        self.answer_md(body)
                    };
                }
            }
        }
        if let Some((pre, rest)) = split_template(&t.qa, "context") {
            if let Some((mid, post)) = split_template(rest, "mention") {
                if let Some(inner) = prompt.strip_prefix(pre).and_then(|r| r.strip_suffix(post)) {
                    if let Some((context, mention)) = inner.rsplit_once(mid) {
                        return self.answer_qa(context, mention);
                    }
                }
            }
        }
        Err(LlmError::Unsupported("echo-gold: prompt matches no template".into()))
    }
}

impl CompletionBackend for EchoGoldBackend {
    fn id(&self) -> String {
        "echo-gold".into()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, LlmError> {
        let text = self.answer(&request.prompt)?;
        Ok(CompletionResponse {
            text,
            finish_reason: FinishReason::Stop,
            usage: Usage::default(),
            backend_id: self.id(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Clustering;
    use crate::extraction::{parse_md_output, parse_qa_answer};
    use crate::prompting::{mark_mentions, render_document_prompt, render_md_prompt, render_qa_prompt};

    fn doc() -> Document {
        let d = Document::from_text("d", "en", "Disney said it will open .\nThe park and Disney grew .");
        let s = MentionSpan::new;
        let gold = Clustering::new(vec![vec![s(0, 0), s(2, 2), s(9, 9)], vec![s(6, 7)]]).unwrap();
        d.with_gold(gold).unwrap()
    }

    fn ask(backend: &EchoGoldBackend, prompt: &str) -> String {
        backend.complete(&CompletionRequest::new(prompt, "m", 100)).unwrap().text
    }

    #[test]
    fn document_prompt_filled_with_gold_ids() {
        let d = doc();
        let t = Templates::default();
        let backend = EchoGoldBackend::new(std::slice::from_ref(&d), t.clone());
        let mut mentions = d.gold_clusters.as_ref().unwrap().mentions();
        mentions.insert(MentionSpan::single(4));
        let p = render_document_prompt(&mark_mentions(&d, &mentions).unwrap(), &t);
        assert_eq!(
            ask(&backend, &p.text),
            "[Disney](#cluster_0) said [it](#cluster_0) will [open](#cluster_x1) .\n[The park](#cluster_1) and [Disney](#cluster_0) grew ."
        );
    }

    #[test]
    fn qa_names_preceding_antecedent() {
        let d = doc();
        let t = Templates::default();
        let backend = EchoGoldBackend::new(std::slice::from_ref(&d), t.clone());
        let p = render_qa_prompt(&d, MentionSpan::single(2), &t).unwrap();
        assert_eq!(parse_qa_answer(&ask(&backend, &p.text)).as_deref(), Some("Disney"));
        let first = render_qa_prompt(&d, MentionSpan::single(0), &t).unwrap();
        assert_eq!(parse_qa_answer(&ask(&backend, &first.text)), None);
    }

    #[test]
    fn md_lists_gold_mentions() {
        let d = doc();
        let t = Templates::default();
        let backend = EchoGoldBackend::new(std::slice::from_ref(&d), t.clone());
        let lists = parse_md_output(&ask(&backend, &render_md_prompt(&d, &t).text));
        assert_eq!(lists.names, vec!["Disney", "Disney"]);
        assert_eq!(lists.pronouns, vec!["it"]);
        assert_eq!(lists.nominals, vec!["The park"]);
    }

    #[test]
    fn unknown_prompt_is_error() {
        let backend = EchoGoldBackend::new(&[doc()], Templates::default());
        assert!(backend.complete(&CompletionRequest::new("hello", "m", 1)).is_err());
    }
}
