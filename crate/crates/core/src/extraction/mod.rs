//! Turning completions back into clusterings.
//!
//! [`parse_annotations`] finds `[surface](#label)` markup, [`align_output`]
//! pairs the completion with the input sentence by sentence and grounds each
//! annotation to a candidate mention, and [`build_clustering`] groups the
//! grounded mentions by label. Mention-detection completions go through
//! [`parse_md_output`] and [`ground_md_strings`].

mod align;
mod annotations;
mod md;

pub use align::{
    align_output, build_clustering, normalize_label, AlignConfig, AlignmentDiagnostics, AlignmentResult, Grounding,
    SentencePair,
};
pub use annotations::{parse_annotations, AnnotatedSpan, ParsedAnnotations};
pub use md::{ground_answer, ground_md_strings, parse_md_output, parse_qa_answer, MdCategory, MdGrounding, MdLists};
