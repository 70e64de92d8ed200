use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use corefprompt::corpus::Dialect;
use corefprompt::metrics::{render_report, SingletonPolicy};
use corefprompt::sampling::SamplingConfig;
use corefprompt_cli::output::{write_atomic, write_json};
use corefprompt_cli::{
    cmd_md_eval, cmd_report, cmd_resolve, cmd_sample, cmd_score, cmd_stats, load_profiles, BackendSpec, MentionSpec,
    QaCandidates, RunConfig, RunManifest, TemplateKind,
};

#[derive(Parser)]
#[command(name = "corefprompt", version, about = "Coreference resolution by prompting a completion model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Resolve coreference over a corpus and write predictions, scores and a run manifest.
    Resolve(RunArgs),
    /// Score a response CoNLL file against a key file.
    Score {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        response: PathBuf,
        #[arg(long, default_value = "conll2012")]
        dialect: Dialect,
        #[arg(long, default_value = "en")]
        language: String,
        #[arg(long, default_value = "keep-both")]
        policy: SingletonPolicy,
        /// Also write the report as JSON here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Evaluate a mention source against gold mentions.
    MdEval(RunArgs),
    /// Corpus statistics as TSV (or JSON with --json).
    Stats {
        #[arg(long, required = true)]
        corpus: Vec<PathBuf>,
        #[arg(long, default_value = "conll2012")]
        dialect: Dialect,
        #[arg(long, default_value = "en")]
        language: String,
        #[arg(long)]
        json: bool,
    },
    /// Stratified sample of candidate documents matching a reference histogram.
    Sample {
        /// CoNLL corpus, or a CSV/JSON table of doc_id,token_count,mention_count.
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long, default_value_t = 500)]
        length_bin: usize,
        #[arg(long, default_value_t = 50)]
        mention_bin: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "conll2012")]
        dialect: Dialect,
        #[arg(long, default_value = "en")]
        language: String,
        /// Write the full result (ids and shortfalls) as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate run manifests, score reports or stored row tables.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        tsv: Option<PathBuf>,
        /// CSV of (MD F1, CoNLL F1) pairs.
        #[arg(long)]
        figure_csv: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Replay the configuration stored in an earlier run manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    corpus: Vec<PathBuf>,
    #[arg(long, default_value = "conll2012")]
    dialect: Dialect,
    #[arg(long, default_value = "en")]
    language: String,
    /// gold, llm or file:PATH
    #[arg(long, default_value = "gold")]
    mentions: MentionSpec,
    /// document, qa or md
    #[arg(long, default_value = "document")]
    template: TemplateKind,
    /// Directory with document/qa/mention_detection template overrides.
    #[arg(long)]
    template_dir: Option<PathBuf>,
    /// http, echo-gold or replay:PATH
    #[arg(long, default_value = "http")]
    backend: BackendSpec,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    base_url: Option<String>,
    /// Append-only response cache (JSON lines).
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long, default_value = "keep-both")]
    policy: SingletonPolicy,
    #[arg(long)]
    sentence_threshold: Option<f64>,
    #[arg(long)]
    span_threshold: Option<f64>,
    /// Offer every other mention, not only preceding ones, as a QA antecedent.
    #[arg(long)]
    qa_all_candidates: bool,
    #[arg(long)]
    token_budget: Option<usize>,
    /// Attempts per request, first try included.
    #[arg(long)]
    max_attempts: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn into_config(self) -> Result<RunConfig> {
        if let Some(path) = &self.manifest {
            let mut config = RunManifest::load(path)?.config;
            if let Some(out) = self.out {
                config.out = out;
            }
            return Ok(config);
        }
        let mut c = RunConfig::new(self.corpus, self.out.unwrap_or_else(|| PathBuf::from("run")));
        c.dialect = self.dialect;
        c.language = self.language;
        c.mentions = self.mentions;
        c.template = self.template;
        c.template_dir = self.template_dir;
        c.backend = self.backend;
        if let Some(m) = self.model {
            c.llm.model = m;
        }
        if let Some(u) = self.base_url {
            c.llm.base_url = u;
        }
        if self.token_budget.is_some() {
            c.llm.token_budget = self.token_budget;
        }
        if let Some(n) = self.max_attempts {
            c.llm.max_attempts = n.max(1);
        }
        c.cache = self.cache;
        c.policy = self.policy;
        if let Some(t) = self.sentence_threshold {
            c.align.sentence_threshold = t;
        }
        if let Some(t) = self.span_threshold {
            c.align.span_threshold = t;
        }
        if self.qa_all_candidates {
            c.qa.candidates = QaCandidates::All;
        }
        c.seed = self.seed;
        c.workers = self.workers;
        Ok(c)
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Resolve(args) => {
            let config = args.into_config()?;
            let manifest = cmd_resolve(&config)?;
            match &manifest.score {
                Some(report) => print!("{}", render_report(report)),
                None => println!("no annotated documents; nothing scored"),
            }
            let skipped = manifest.skipped();
            eprintln!(
                "{} documents, {} skipped; outputs in {}",
                manifest.documents.len(),
                skipped,
                config.out.display()
            );
            Ok(if manifest.succeeded() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Score {
            key,
            response,
            dialect,
            language,
            policy,
            json,
        } => {
            let report = cmd_score(&key, &response, dialect, &language, policy)?;
            print!("{}", render_report(&report));
            if let Some(path) = json {
                write_json(&path, &report)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::MdEval(args) => {
            let config = args.into_config()?;
            let report = cmd_md_eval(&config)?;
            print!("{}", report.render());
            if config.out.as_os_str() != "run" {
                write_json(&config.out.join("md_report.json"), &report)?;
            }
            Ok(if report.skipped.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Stats {
            corpus,
            dialect,
            language,
            json,
        } => {
            let report = cmd_stats(&corpus, dialect, &language)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", report.to_tsv());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sample {
            candidates,
            reference,
            length_bin,
            mention_bin,
            seed,
            dialect,
            language,
            out,
        } => {
            let cands = load_profiles(&candidates, dialect, &language)?;
            let refs = load_profiles(&reference, dialect, &language)?;
            let config = SamplingConfig {
                length_bin_width: length_bin,
                mention_bin_width: mention_bin,
                seed,
            };
            let result = cmd_sample(&cands, &refs, &config)?;
            for id in &result.doc_ids {
                println!("{id}");
            }
            for s in &result.shortfalls {
                eprintln!(
                    "shortfall in stratum (length {}, mentions {}): wanted {}, available {}",
                    s.stratum.length_bin, s.stratum.mention_bin, s.wanted, s.available
                );
            }
            if let Some(path) = out {
                write_json(&path, &result)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Report {
            inputs,
            tsv,
            figure_csv,
        } => {
            let out = cmd_report(&inputs)?;
            print!("{}", out.table);
            if let Some(p) = tsv {
                write_atomic(&p, out.tsv.as_bytes()).context("writing TSV")?;
            }
            if let Some(p) = figure_csv {
                write_atomic(&p, out.figure_csv.as_bytes()).context("writing figure CSV")?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
