//! Accuracy scoring, seed aggregation, challenge/standard categorization and
//! paired bootstrap significance.

mod aggregate;
mod bootstrap;
mod categorize;
mod report;
mod score;

pub use aggregate::{
    aggregate, bootstrap_compare, pooled_bits, DatasetStats, EvalReport, Significance,
    SystemReport, POOLING_NOTE, STD_NOTE,
};
pub use bootstrap::{paired_bootstrap, DEFAULT_RESAMPLES, ZERO_TOLERANCE};
pub use categorize::{categorize, Categorization, Category, CHALLENGE_THRESHOLD};
pub use score::{score, RunResult, ScoreMode, META_LABEL_SPACE};
