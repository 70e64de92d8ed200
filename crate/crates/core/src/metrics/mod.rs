//! Coreference and mention-detection scoring.
//!
//! MUC, B³ and CEAF_φ4 compare mentions by exact span identity. Every
//! metric has a `*_counts` form returning unreduced numerators and
//! denominators so corpus scores can be micro-averaged; 0/0 is 0 throughout.

mod assignment;
mod coref;
mod mentions;
mod report;

pub use assignment::max_weight_assignment;
pub use coref::{
    apply_singleton_policy, b_cubed, b_cubed_counts, ceaf_phi4, ceaf_phi4_counts, conll_f1, muc, muc_counts, phi4,
    MetricCounts, SingletonPolicy, PRF,
};
pub use mentions::{
    classify_mention, md_recall_by_type, md_recall_tallies, mention_counts, mention_prf, misclustered_mentions,
    merge_tallies, pronouns_for, resolution_accuracy, resolution_tallies, tally_rates, MentionType, Tally, TypeTallies,
    PRONOUN_LANGUAGES,
};
pub use report::{render_report, render_table, render_tsv, score_corpus, CorpusScorer, DocScore, ResultRow, ScoreReport};
