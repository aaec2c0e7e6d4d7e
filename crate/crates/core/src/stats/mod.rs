//! Agreement and significance statistics.

mod kendall;
mod scores;
pub mod special;
mod ttest;

use thiserror::Error;

pub use kendall::{kendall_tau, kendall_tau_variant, KendallVariant};
pub use scores::{
    agreement_table, setting_means, AgreementTable, Measure, ReviewerScoreSet, ReviewerSettingMean, ScoreRow,
    SettingMean, SettingMeans, SCORE_HEADER,
};
pub use ttest::{mean, sample_variance, t_test, StatResult, TestKind};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("coverage mismatch, missing keys: {}", .0.join(", "))]
    CoverageMismatch(Vec<String>),
    #[error("duplicate score row `{0}`")]
    DuplicateRow(String),
    #[error("value out of range: {0}")]
    Range(String),
    #[error("no reviewer scores")]
    EmptyScores,
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
}
