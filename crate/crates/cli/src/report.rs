//! Markdown summary of a full run. Output depends only on its inputs.

use std::collections::BTreeSet;
use std::fmt::Write;

use fairify_core::adherence::CorpusAdherence;
use fairify_core::stats::{AgreementTable, Measure, SettingMeans, StatResult};
use serde::{Deserialize, Serialize};

/// Contents of a `stats` output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRecord {
    pub label_a: String,
    pub label_b: String,
    pub metric: Measure,
    /// `reports` or `scores`.
    pub source: String,
    pub n_a: usize,
    pub n_b: usize,
    pub result: StatResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setting_means: Option<SettingMeans>,
}

/// Contents of an `agree` output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementRecord {
    pub tables: Vec<AgreementTable>,
}

fn f4(x: f64) -> String {
    format!("{x:.4}")
}

fn p_value(p: f64) -> String {
    if p < 1e-4 {
        format!("{p:.2e}")
    } else {
        format!("{p:.4}")
    }
}

pub fn render_report(
    settings: [&CorpusAdherence; 3],
    agreement: Option<&AgreementRecord>,
    stats: &[StatsRecord],
) -> String {
    let mut out = String::from("# Metadata adherence report\n\n## Automated evaluation\n\n");
    let _ = writeln!(out, "| measure | {} | {} | {} |", settings[0].label, settings[1].label, settings[2].label);
    out.push_str("|---|---:|---:|---:|\n");
    let row = |out: &mut String, name: &str, f: &dyn Fn(&CorpusAdherence) -> String| {
        let _ = writeln!(out, "| {name} | {} | {} | {} |", f(settings[0]), f(settings[1]), f(settings[2]));
    };
    row(&mut out, "records", &|c| c.record_count.to_string());
    row(&mut out, "mean accuracy", &|c| f4(c.mean_accuracy));
    row(&mut out, "mean error count", &|c| f4(c.mean_error_count));
    row(&mut out, "field-name adherence", &|c| f4(c.field_name_adherence));
    let fields: BTreeSet<&String> = settings.iter().flat_map(|c| c.per_binding_adherence.keys()).collect();
    for field in fields {
        row(&mut out, &format!("`{field}` ontology adherence"), &|c| {
            match (c.per_binding_adherence.get(field), c.per_binding_counts.get(field)) {
                (Some(v), Some(t)) => format!("{} ({}/{})", f4(*v), t.passing, t.total),
                _ => "n/a".to_string(),
            }
        });
    }

    if let Some(agreement) = agreement {
        for table in &agreement.tables {
            let _ = write!(
                out,
                "\n## Reviewer agreement: {} (Kendall {})\n\n| reviewer |",
                table.measure,
                match table.variant {
                    fairify_core::stats::KendallVariant::TauB => "tau-b",
                    fairify_core::stats::KendallVariant::TauA => "tau-a",
                }
            );
            for r in &table.reviewers {
                let _ = write!(out, " {r} |");
            }
            out.push_str("\n|---|");
            out.push_str(&"---:|".repeat(table.reviewers.len()));
            out.push('\n');
            for (r, cells) in table.reviewers.iter().zip(&table.tau) {
                let _ = write!(out, "| {r} |");
                for c in cells {
                    let _ = write!(out, " {} |", c.map(f4).unwrap_or_else(|| "n/a".into()));
                }
                out.push('\n');
            }
        }
    }

    if !stats.is_empty() {
        out.push_str("\n## Significance tests\n\n");
        out.push_str("| comparison | metric | test | mean a | mean b | t | df | p |\n");
        out.push_str("|---|---|---|---:|---:|---:|---:|---:|\n");
        for s in stats {
            let r = &s.result;
            let _ = writeln!(
                out,
                "| {} vs {} ({}) | {} | {} | {} | {} | {} | {} | {} |",
                s.label_a,
                s.label_b,
                s.source,
                s.metric,
                r.test,
                f4(r.mean_a),
                f4(r.mean_b),
                f4(r.statistic),
                f4(r.degrees_of_freedom),
                p_value(r.p_value)
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use fairify_core::stats::TestKind;

    #[test]
    fn p_value_formats() {
        assert_eq!(p_value(0.19233707), "0.1923");
        assert_eq!(p_value(3.73e-45), "3.73e-45");
        assert_eq!(p_value(1.0), "1.0000");
    }

    #[test]
    fn stats_record_round_trip() {
        let s = StatsRecord {
            label_a: "original".into(),
            label_b: "llm_cedar".into(),
            metric: Measure::Accuracy,
            source: "reports".into(),
            n_a: 2,
            n_b: 2,
            result: StatResult {
                test: TestKind::WelchT,
                statistic: -1.0,
                degrees_of_freedom: 2.0,
                p_value: 0.4,
                mean_a: 0.5,
                mean_b: 0.7,
            },
            setting_means: None,
        };
        let back: StatsRecord = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
