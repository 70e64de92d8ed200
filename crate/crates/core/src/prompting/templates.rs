use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PromptError;

const DOCUMENT_V1: &str = include_str!("../../resources/templates/document.v1.txt");
const QA_V1: &str = include_str!("../../resources/templates/qa.v1.txt");
const MENTION_DETECTION_V1: &str = include_str!("../../resources/templates/mention_detection.v1.txt");

/// Prompt template texts with `{placeholder}` slots.
///
/// Document and mention-detection templates take `{input}`; the QA template
/// takes `{context}` and `{mention}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Templates {
    pub version: String,
    pub document: String,
    pub qa: String,
    pub mention_detection: String,
}

impl Default for Templates {
    fn default() -> Self {
        Templates {
            version: "v1".into(),
            document: strip_final_newline(DOCUMENT_V1),
            qa: strip_final_newline(QA_V1),
            mention_detection: strip_final_newline(MENTION_DETECTION_V1),
        }
    }
}

fn strip_final_newline(s: &str) -> String {
    s.strip_suffix('\n').unwrap_or(s).to_string()
}

impl Templates {
    /// Replaces any of `document.txt`, `qa.txt`, `mention_detection.txt`
    /// found in `dir`; missing files keep the built-in text.
    pub fn load_overrides(dir: impl AsRef<Path>) -> Result<Self, PromptError> {
        let dir = dir.as_ref();
        let mut t = Templates {
            version: format!("custom:{}", dir.display()),
            ..Templates::default()
        };
        for (name, slot) in [
            ("document.txt", &mut t.document),
            ("qa.txt", &mut t.qa),
            ("mention_detection.txt", &mut t.mention_detection),
        ] {
            let path = dir.join(name);
            if path.exists() {
                let text = fs::read_to_string(&path).map_err(|e| PromptError::Template(format!("{}: {e}", path.display())))?;
                *slot = strip_final_newline(&text);
            }
        }
        t.check()?;
        Ok(t)
    }

    fn check(&self) -> Result<(), PromptError> {
        for (name, text, slots) in [
            ("document", &self.document, &["input"][..]),
            ("qa", &self.qa, &["context", "mention"][..]),
            ("mention_detection", &self.mention_detection, &["input"][..]),
        ] {
            for slot in slots {
                if !text.contains(&format!("{{{slot}}}")) {
                    return Err(PromptError::Template(format!("{name} template lacks {{{slot}}}")));
                }
            }
        }
        Ok(())
    }
}

/// Single-pass placeholder substitution; values are never rescanned.
pub(crate) fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + values.iter().map(|v| v.1.len()).sum::<usize>());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let replaced = after.find('}').and_then(|close| {
            let name = &after[..close];
            values
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| (*v, close))
        });
        match replaced {
            Some((value, close)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fill_does_not_rescan_values() {
        let s = fill("a {x} b {y} {z}", &[("x", "{y}"), ("y", "Y")]);
        assert_eq!(s, "a {y} b Y {z}");
    }

    #[test]
    fn builtin_templates_have_slots() {
        Templates::default().check().unwrap();
    }

    #[test]
    fn overrides_from_dir() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("document.txt"), "Label:\nInput: {input}\nOutput:\n").unwrap();
        let t = Templates::load_overrides(dir.path()).unwrap();
        assert_eq!(t.document, "Label:\nInput: {input}\nOutput:");
        assert_eq!(t.qa, Templates::default().qa);

        fs::write(dir.path().join("qa.txt"), "no slots").unwrap();
        assert!(Templates::load_overrides(dir.path()).is_err());
    }
}
