use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::special::student_t_two_sided;
use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    /// Unequal-variance two-sample test.
    WelchT,
    PairedT,
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestKind::WelchT => "welch_t",
            TestKind::PairedT => "paired_t",
        })
    }
}

impl FromStr for TestKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "welch_t" | "welch" => Ok(TestKind::WelchT),
            "paired_t" | "paired" => Ok(TestKind::PairedT),
            other => Err(format!("unknown test kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatResult {
    pub test: TestKind,
    pub statistic: f64,
    pub degrees_of_freedom: f64,
    /// Two-sided.
    pub p_value: f64,
    pub mean_a: f64,
    pub mean_b: f64,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (n - 1 denominator).
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

fn check_finite(xs: &[f64]) -> Result<(), StatsError> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite)
    }
}

// The statistic can be astronomically large for well-separated samples; keep
// p strictly positive so it stays a valid probability.
fn p_from(t: f64, df: f64) -> f64 {
    student_t_two_sided(t, df).max(f64::MIN_POSITIVE)
}

pub fn t_test(a: &[f64], b: &[f64], kind: TestKind) -> Result<StatResult, StatsError> {
    check_finite(a)?;
    check_finite(b)?;
    match kind {
        TestKind::WelchT => welch(a, b),
        TestKind::PairedT => paired(a, b),
    }
}

fn welch(a: &[f64], b: &[f64]) -> Result<StatResult, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::DegenerateInput(
            "welch test needs at least two values per sample".into(),
        ));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let sa = sample_variance(a) / na;
    let sb = sample_variance(b) / nb;
    if sa + sb == 0.0 {
        return Err(StatsError::DegenerateInput("both samples have zero variance".into()));
    }
    let statistic = (ma - mb) / (sa + sb).sqrt();
    let df = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(StatResult {
        test: TestKind::WelchT,
        statistic,
        degrees_of_freedom: df,
        p_value: p_from(statistic, df),
        mean_a: ma,
        mean_b: mb,
    })
}

fn paired(a: &[f64], b: &[f64]) -> Result<StatResult, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(StatsError::DegenerateInput("paired test needs at least two pairs".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    if d.iter().all(|&x| x == 0.0) {
        // No difference at all: nothing to reject.
        return Ok(StatResult {
            test: TestKind::PairedT,
            statistic: 0.0,
            degrees_of_freedom: n - 1.0,
            p_value: 1.0,
            mean_a: mean(a),
            mean_b: mean(b),
        });
    }
    let var = sample_variance(&d);
    if var == 0.0 {
        return Err(StatsError::DegenerateInput("paired differences have zero variance".into()));
    }
    let statistic = mean(&d) / (var / n).sqrt();
    let df = n - 1.0;
    Ok(StatResult {
        test: TestKind::PairedT,
        statistic,
        degrees_of_freedom: df,
        p_value: p_from(statistic, df),
        mean_a: mean(a),
        mean_b: mean(b),
    })
}
