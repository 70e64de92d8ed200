//! Zero-shot prompt-based coreference resolution toolkit.
//!
//! The pipeline marks candidate mentions in a tokenized document, renders a
//! prompt for a completion backend, extracts predicted clusters from the
//! completion by fuzzy alignment, and scores the result with the standard
//! coreference metrics (MUC, B³, CEAF_φ4, CoNLL F1).
//!
//! Modules:
//! - [`corpus`]: CoNLL-2012 / SemEval-2010 documents, clusterings and statistics.
//! - [`prompting`]: document, QA and mention-detection prompt rendering.
//! - [`llm`]: completion backends (HTTP, replay, echo-gold) and the response cache.
//! - [`extraction`]: annotation parsing, output alignment, cluster assembly.
//! - [`metrics`]: coreference and mention-detection scoring.
//! - [`mention_detect`]: candidate mention sources.
//! - [`sampling`]: stratified sampling by document length and mention count.
//! - [`synthetic`]: seeded synthetic annotated documents for tests and demos.

pub mod corpus;
pub mod extraction;
pub mod llm;
pub mod mention_detect;
pub mod metrics;
pub mod prompting;
pub mod sampling;
pub mod synthetic;
pub mod text;

pub use corpus::{Clustering, Document, MentionSpan, Token};
