//! Command implementations behind the `corefprompt` binary.
//!
//! `resolve` runs the prompting pipeline over a corpus and writes a run
//! manifest next to its predictions; the other commands score, evaluate
//! mention detection, describe or sample corpora, and tabulate runs.

pub mod commands;
pub mod config;
pub mod output;
pub mod resolve;
pub mod run;

pub use commands::{cmd_report, cmd_sample, cmd_score, cmd_stats, load_profiles, load_rows, render_rows, ReportOutput, StoredRows};
pub use config::{BackendSpec, MentionSpec, QaCandidates, QaConfig, RunConfig, TemplateKind};
pub use resolve::{build_backend, load_corpus, load_templates, DocDiagnostics, OutputPaths, Pipeline, Resolved};
pub use run::{cmd_md_eval, cmd_resolve, run_pool, DocRecord, DocStatus, MdReport, RunManifest};
