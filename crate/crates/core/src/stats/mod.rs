//! Nonparametric tests and the study analysis pipeline.
//!
//! All tests are two-sided. Tail probabilities come from the functions in
//! [`special`], so no external statistics library is involved.

pub mod analysis;
pub mod kruskal;
pub mod mann_whitney;
pub mod shapiro;
pub mod special;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use analysis::{run_analysis, AnalysisPlan, AnalysisReport, GroupNormality, PairwiseResult};
pub use kruskal::kruskal_wallis;
pub use mann_whitney::{mann_whitney_u, MwMode};
pub use shapiro::shapiro_wilk;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: String,
    /// Sample size of each group.
    pub n: Vec<usize>,
    /// Whether the p-value comes from the exact null distribution.
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("sample of {n} is too small (need at least {min})")]
    SampleTooSmall { n: usize, min: usize },
    #[error("sample of {n} is too large (at most {max})")]
    SampleTooLarge { n: usize, max: usize },
    #[error("all values are equal")]
    ZeroVariance,
    #[error("empty sample")]
    EmptySample,
    #[error("need at least two groups, got {found}")]
    TooFewGroups { found: usize },
    #[error("group {index} is empty")]
    EmptyGroup { index: usize },
    #[error("non-finite value in sample")]
    NonFinite,
    #[error("grouping yields {found} non-empty group(s); at least two are needed")]
    InsufficientGroups { found: usize },
    #[error("alpha must lie strictly between 0 and 1, got {0}")]
    InvalidAlpha(String),
    #[error("unknown grouping key `{0}`")]
    UnknownGroupKey(String),
    #[error(transparent)]
    MissingEvent(#[from] crate::study::MissingEvent),
}

/// Ranks starting at 1, ties sharing the mean of their positions.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end share their mean
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// `Σ (t³ - t)` over groups of tied values.
pub fn tie_term(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start + 1;
        while end < sorted.len() && sorted[end] == sorted[start] {
            end += 1;
        }
        let t = (end - start) as f64;
        total += t * t * t - t;
        start = end;
    }
    total
}

/// Per-test significance level after Bonferroni correction.
///
/// # Panics
///
/// If `n_tests` is zero.
pub fn bonferroni(alpha: f64, n_tests: usize) -> f64 {
    assert!(n_tests >= 1, "bonferroni correction needs at least one test");
    alpha / n_tests as f64
}

pub fn check_alpha(alpha: f64) -> Result<f64, StatsError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(alpha)
    } else {
        Err(StatsError::InvalidAlpha(alpha.to_string()))
    }
}
