//! Finite languages with a known log-probability rank, and factor models fit
//! to them, to measure how much of a true distribution each output
//! activation can represent at a given hidden width.

mod compare;
mod language;
mod model;

pub use compare::{compare_activations, ComparisonRow, ComparisonTable, KindAggregate, RankSummary};
pub use language::{
    bigram_language, bigram_language_from_text, generate_language, LanguageSummary, SyntheticLanguage,
    UNKNOWN_TOKEN,
};
pub use model::{fit, nll_and_gradients, per_context_kl, FactorModel, FitReport, Gradients};
