use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use corefprompt::corpus::Dialect;
use corefprompt::extraction::AlignConfig;
use corefprompt::llm::LlmSettings;
use corefprompt::metrics::SingletonPolicy;
use serde::{Deserialize, Serialize};

/// Where candidate mentions come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "path", rename_all = "snake_case")]
pub enum MentionSpec {
    Gold,
    File(PathBuf),
    Llm,
}

impl FromStr for MentionSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gold" => Ok(MentionSpec::Gold),
            "llm" => Ok(MentionSpec::Llm),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(MentionSpec::File(p.into())),
                _ => Err(format!("expected gold, llm or file:PATH, got {s:?}")),
            },
        }
    }
}

impl fmt::Display for MentionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MentionSpec::Gold => f.write_str("gold"),
            MentionSpec::File(p) => write!(f, "file:{}", p.display()),
            MentionSpec::Llm => f.write_str("llm"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    #[default]
    Document,
    Qa,
    Md,
}

impl FromStr for TemplateKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "document" | "doc" => Ok(TemplateKind::Document),
            "qa" => Ok(TemplateKind::Qa),
            "md" | "mention-detection" => Ok(TemplateKind::Md),
            _ => Err(format!("expected document, qa or md, got {s:?}")),
        }
    }
}

impl fmt::Display for TemplateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TemplateKind::Document => "document",
            TemplateKind::Qa => "qa",
            TemplateKind::Md => "md",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "path", rename_all = "kebab-case")]
pub enum BackendSpec {
    Http,
    Replay(PathBuf),
    EchoGold,
}

impl FromStr for BackendSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "http" => Ok(BackendSpec::Http),
            "echo-gold" | "echo_gold" => Ok(BackendSpec::EchoGold),
            _ => match s.strip_prefix("replay:") {
                Some(p) if !p.is_empty() => Ok(BackendSpec::Replay(p.into())),
                _ => Err(format!("expected http, echo-gold or replay:PATH, got {s:?}")),
            },
        }
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::Http => f.write_str("http"),
            BackendSpec::Replay(p) => write!(f, "replay:{}", p.display()),
            BackendSpec::EchoGold => f.write_str("echo-gold"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QaCandidates {
    /// Only mentions that precede the target.
    #[default]
    Preceding,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QaConfig {
    pub candidates: QaCandidates,
    /// Minimum Dice overlap between the answer and an antecedent's surface.
    pub answer_threshold: f64,
}

impl Default for QaConfig {
    fn default() -> Self {
        QaConfig {
            candidates: QaCandidates::Preceding,
            answer_threshold: 0.5,
        }
    }
}

/// Everything a resolve or md-eval run depends on. Serialized verbatim
/// into the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub corpus: Vec<PathBuf>,
    pub dialect: Dialect,
    pub language: String,
    pub mentions: MentionSpec,
    pub template: TemplateKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_dir: Option<PathBuf>,
    pub backend: BackendSpec,
    #[serde(default)]
    pub llm: LlmSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache: Option<PathBuf>,
    #[serde(default)]
    pub policy: SingletonPolicy,
    #[serde(default)]
    pub align: AlignConfig,
    #[serde(default)]
    pub qa: QaConfig,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 means the backend's in-flight limit.
    #[serde(default)]
    pub workers: usize,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn new(corpus: Vec<PathBuf>, out: impl Into<PathBuf>) -> Self {
        RunConfig {
            corpus,
            dialect: Dialect::Conll2012,
            language: "en".into(),
            mentions: MentionSpec::Gold,
            template: TemplateKind::Document,
            template_dir: None,
            backend: BackendSpec::EchoGold,
            llm: LlmSettings::default(),
            cache: None,
            policy: SingletonPolicy::default(),
            align: AlignConfig::default(),
            qa: QaConfig::default(),
            seed: 0,
            workers: 0,
            out: out.into(),
        }
    }

    pub fn worker_count(&self) -> usize {
        match self.workers {
            0 => self.llm.max_in_flight.max(1),
            n => n,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specs_parse_and_display() {
        for s in ["gold", "llm", "file:/tmp/x.conll"] {
            assert_eq!(s.parse::<MentionSpec>().unwrap().to_string(), s);
        }
        for s in ["http", "echo-gold", "replay:fix.jsonl"] {
            assert_eq!(s.parse::<BackendSpec>().unwrap().to_string(), s);
        }
        assert!("file:".parse::<MentionSpec>().is_err());
        assert!("gpt".parse::<BackendSpec>().is_err());
        assert_eq!("qa".parse::<TemplateKind>().unwrap(), TemplateKind::Qa);
    }

    #[test]
    fn config_round_trips_through_json() {
        let mut c = RunConfig::new(vec!["a.conll".into()], "out");
        c.mentions = MentionSpec::File("p.conll".into());
        c.backend = BackendSpec::Replay("r.jsonl".into());
        c.policy = SingletonPolicy::DropBoth;
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&json).unwrap(), c);
    }
}
