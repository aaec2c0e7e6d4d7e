//! Reviewer score ingestion, per-setting means and pairwise agreement.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::kendall::{kendall_tau_variant, KendallVariant};
use super::StatsError;
use crate::record::Provenance;

pub const SCORE_HEADER: [&str; 5] = ["reviewer_id", "record_id", "setting", "accuracy", "error_count"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Accuracy,
    ErrorCount,
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Measure::Accuracy => "accuracy",
            Measure::ErrorCount => "error_count",
        })
    }
}

impl FromStr for Measure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "accuracy" => Ok(Measure::Accuracy),
            "error_count" => Ok(Measure::ErrorCount),
            other => Err(format!("unknown measure `{other}` (expected accuracy|error_count)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub reviewer_id: String,
    pub record_id: String,
    pub setting: Provenance,
    pub accuracy: f64,
    pub error_count: u32,
}

impl ScoreRow {
    pub fn value(&self, measure: Measure) -> f64 {
        match measure {
            Measure::Accuracy => self.accuracy,
            Measure::ErrorCount => f64::from(self.error_count),
        }
    }
}

/// Rows keyed uniquely by (reviewer, record, setting).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReviewerScoreSet {
    rows: Vec<ScoreRow>,
}

impl ReviewerScoreSet {
    pub fn new(rows: Vec<ScoreRow>) -> Result<Self, StatsError> {
        let mut seen = HashSet::new();
        for row in &rows {
            if !(0.0..=1.0).contains(&row.accuracy) {
                return Err(StatsError::Range(format!(
                    "accuracy {} for {}/{}/{} is outside [0, 1]",
                    row.accuracy, row.reviewer_id, row.record_id, row.setting
                )));
            }
            if !seen.insert((row.reviewer_id.as_str(), row.record_id.as_str(), row.setting)) {
                return Err(StatsError::DuplicateRow(format!(
                    "{},{},{}",
                    row.reviewer_id, row.record_id, row.setting
                )));
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[ScoreRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn reviewers(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| r.reviewer_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self, StatsError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| StatsError::Format(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != SCORE_HEADER {
            return Err(StatsError::Format(format!(
                "expected header `{}`, found `{}`",
                SCORE_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.deserialize::<ScoreRow>().enumerate() {
            // header is line 1
            let row = rec.map_err(|e| StatsError::Format(format!("line {}: {e}", i + 2)))?;
            rows.push(row);
        }
        Self::new(rows)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, StatsError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| StatsError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_csv_reader(file)
    }

    /// Per-record values for one setting, averaged over reviewers, ordered by record id.
    pub fn per_record_values(&self, setting: Provenance, measure: Measure) -> Vec<(String, f64)> {
        let mut acc: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
        for r in self.rows.iter().filter(|r| r.setting == setting) {
            let e = acc.entry(&r.record_id).or_default();
            e.0 += r.value(measure);
            e.1 += 1;
        }
        acc.into_iter()
            .map(|(id, (sum, n))| (id.to_string(), sum / n as f64))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewerSettingMean {
    pub reviewer_id: String,
    pub setting: Provenance,
    pub records: usize,
    pub mean_accuracy: f64,
    pub mean_error_count: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingMean {
    pub setting: Provenance,
    pub reviewers: usize,
    pub mean_accuracy: f64,
    pub mean_error_count: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingMeans {
    pub per_reviewer: Vec<ReviewerSettingMean>,
    /// Mean over reviewers of the per-reviewer means.
    pub per_setting: Vec<SettingMean>,
}

impl SettingMeans {
    pub fn setting(&self, setting: Provenance) -> Option<&SettingMean> {
        self.per_setting.iter().find(|s| s.setting == setting)
    }
}

pub fn setting_means(scores: &ReviewerScoreSet) -> Result<SettingMeans, StatsError> {
    if scores.is_empty() {
        return Err(StatsError::EmptyScores);
    }
    let mut sums: BTreeMap<(Provenance, &str), (f64, f64, usize)> = BTreeMap::new();
    for r in scores.rows() {
        let e = sums.entry((r.setting, &r.reviewer_id)).or_default();
        e.0 += r.accuracy;
        e.1 += f64::from(r.error_count);
        e.2 += 1;
    }
    let per_reviewer: Vec<ReviewerSettingMean> = sums
        .into_iter()
        .map(|((setting, reviewer), (acc, err, n))| ReviewerSettingMean {
            reviewer_id: reviewer.to_string(),
            setting,
            records: n,
            mean_accuracy: acc / n as f64,
            mean_error_count: err / n as f64,
        })
        .collect();
    let per_setting = Provenance::ALL
        .iter()
        .filter_map(|&setting| {
            let rows: Vec<_> = per_reviewer.iter().filter(|r| r.setting == setting).collect();
            if rows.is_empty() {
                return None;
            }
            let k = rows.len() as f64;
            Some(SettingMean {
                setting,
                reviewers: rows.len(),
                mean_accuracy: rows.iter().map(|r| r.mean_accuracy).sum::<f64>() / k,
                mean_error_count: rows.iter().map(|r| r.mean_error_count).sum::<f64>() / k,
            })
        })
        .collect();
    Ok(SettingMeans {
        per_reviewer,
        per_setting,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementTable {
    pub measure: Measure,
    pub variant: KendallVariant,
    pub reviewers: Vec<String>,
    /// `None` where a reviewer's values are entirely tied.
    pub tau: Vec<Vec<Option<f64>>>,
}

impl AgreementTable {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.reviewers.iter().position(|r| r == a)?;
        let j = self.reviewers.iter().position(|r| r == b)?;
        self.tau[i][j]
    }
}

/// Pairwise Kendall tau between reviewers, over the shared
/// (record, setting) keys in lexicographic order.
pub fn agreement_table(
    scores: &ReviewerScoreSet,
    measure: Measure,
    variant: KendallVariant,
) -> Result<AgreementTable, StatsError> {
    if scores.is_empty() {
        return Err(StatsError::EmptyScores);
    }
    let mut by_reviewer: BTreeMap<&str, BTreeMap<(&str, &str), f64>> = BTreeMap::new();
    for r in scores.rows() {
        by_reviewer
            .entry(&r.reviewer_id)
            .or_default()
            .insert((&r.record_id, r.setting.as_str()), r.value(measure));
    }
    let all_keys: BTreeSet<(&str, &str)> = by_reviewer.values().flat_map(|m| m.keys().copied()).collect();
    let mut missing = Vec::new();
    for (reviewer, values) in &by_reviewer {
        for key in all_keys.iter().filter(|k| !values.contains_key(k)) {
            missing.push(format!("{reviewer}:{}/{}", key.0, key.1));
        }
    }
    if !missing.is_empty() {
        return Err(StatsError::CoverageMismatch(missing));
    }

    let reviewers: Vec<String> = by_reviewer.keys().map(|s| s.to_string()).collect();
    let vectors: Vec<Vec<f64>> = by_reviewer.values().map(|m| m.values().copied().collect()).collect();
    let k = vectors.len();
    let mut tau = vec![vec![None; k]; k];
    for i in 0..k {
        for j in i..k {
            let value = match kendall_tau_variant(&vectors[i], &vectors[j], variant) {
                Ok(_) if i == j => Some(1.0),
                Ok(t) => Some(t),
                Err(StatsError::DegenerateInput(_)) => None,
                Err(e) => return Err(e),
            };
            tau[i][j] = value;
            tau[j][i] = value;
        }
    }
    Ok(AgreementTable {
        measure,
        variant,
        reviewers,
        tau,
    })
}
