//! Two-sample tests for comparing one match's gaps against a career.
//!
//! Every test returns a [`TestReport`]. Degenerate samples (for example two
//! constant samples) produce a report with `degenerate = true` and no
//! statistic instead of an error, so batch runs survive odd matches.
//!
//! Tail convention, shared by all tests: [`Tail::Greater`] is the
//! alternative that `x` tends to be larger than `y` (for Levene: more
//! dispersed), [`Tail::Less`] the reverse.

mod hypothesis;
pub mod special;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use hypothesis::{ks_two_sample, ks_two_sample_with, levene, welch_t, wilcoxon_rank_sum, wilcoxon_rank_sum_with, KsMethod, LeveneCenter, WilcoxonMethod};
pub use special::DomainError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("{test}: sample {which} needs at least {need} values, got {got}")]
    TooFewValues { test: &'static str, which: &'static str, need: usize, got: usize },
    #[error("{test}: non-finite value in sample {which}")]
    NonFinite { test: &'static str, which: &'static str },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tail {
    #[serde(rename = "one_sided_less")]
    Less,
    #[serde(rename = "one_sided_greater")]
    Greater,
    #[serde(rename = "two_sided")]
    TwoSided,
}

impl std::str::FromStr for Tail {
    type Err = String;

    fn from_str(s: &str) -> Result<Tail, String> {
        match s {
            "less" | "one_sided_less" => Ok(Tail::Less),
            "greater" | "one_sided_greater" => Ok(Tail::Greater),
            "two_sided" | "two-sided" => Ok(Tail::TwoSided),
            _ => Err(format!("unknown tail {s:?} (less|greater|two_sided)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Df {
    One(f64),
    Pair(f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test: String,
    pub statistic: Option<f64>,
    pub df: Option<Df>,
    pub p: Option<f64>,
    pub tail: Tail,
    pub effect_size: Option<f64>,
    pub n1: usize,
    pub n2: usize,
    /// Mann-Whitney U of the first sample (rank-sum test only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    /// Normal score before continuity correction (rank-sum test only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    /// How the p-value was obtained, e.g. "exact" or "normal".
    pub method: String,
    pub degenerate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl TestReport {
    fn new(test: &str, tail: Tail, n1: usize, n2: usize, method: &str) -> TestReport {
        TestReport {
            test: test.into(),
            statistic: None,
            df: None,
            p: None,
            tail,
            effect_size: None,
            n1,
            n2,
            u: None,
            z: None,
            method: method.into(),
            degenerate: false,
            note: None,
        }
    }

    fn degenerate(mut self, why: &str) -> TestReport {
        self.degenerate = true;
        self.note = Some(why.into());
        self
    }

    pub fn rejects_at(&self, alpha: f64) -> bool {
        self.p.is_some_and(|p| p < alpha)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub n: usize,
    pub mean: f64,
    /// Denominator n - 1; absent for a single value.
    pub sd: Option<f64>,
    pub variance: Option<f64>,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

/// Sum in ascending order so the result is independent of input order.
pub(crate) fn sorted_sum(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    sorted_sum(values) / values.len() as f64
}

/// Sample variance with denominator n - 1 (two-pass).
pub(crate) fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    let sq: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    sorted_sum(&sq) / (values.len() as f64 - 1.0)
}

/// Quantile by linear interpolation between order statistics: position
/// `(n - 1) p` in the sorted sample (the default of R and numpy).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty() && (0.0..=1.0).contains(&p));
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(x: &[f64]) -> Result<SampleSummary, StatsError> {
    check_sample("summarize", "x", x, 1)?;
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let variance = (x.len() > 1).then(|| variance(x));
    Ok(SampleSummary {
        n: x.len(),
        mean: mean(x),
        sd: variance.map(f64::sqrt),
        variance,
        median: quantile_sorted(&s, 0.5),
        q1: quantile_sorted(&s, 0.25),
        q3: quantile_sorted(&s, 0.75),
        min: s[0],
        max: s[s.len() - 1],
    })
}

pub(crate) fn check_sample(test: &'static str, which: &'static str, x: &[f64], need: usize) -> Result<(), StatsError> {
    if x.len() < need {
        return Err(StatsError::TooFewValues { test, which, need, got: x.len() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite { test, which });
    }
    Ok(())
}

/// Equal-width histogram of the pooled range. Returns (lower edge, upper
/// edge, count x, count y) per bin; the last bin is closed on the right.
pub fn histogram(x: &[f64], y: &[f64], bins: usize) -> Vec<(f64, f64, usize, usize)> {
    assert!(bins >= 1);
    let all = x.iter().chain(y);
    let lo = all.clone().cloned().fold(f64::INFINITY, f64::min);
    let hi = all.cloned().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        return Vec::new();
    }
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let bin_of = |v: f64| (((v - lo) / width) as usize).min(bins - 1);
    let mut out: Vec<_> =
        (0..bins).map(|b| (lo + b as f64 * width, lo + (b + 1) as f64 * width, 0, 0)).collect();
    for &v in x {
        out[bin_of(v)].2 += 1;
    }
    for &v in y {
        out[bin_of(v)].3 += 1;
    }
    out
}
