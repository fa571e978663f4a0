use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::Task;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn label(self) -> &'static str {
        match self {
            Split::Train => "Train",
            Split::Validation => "Validation",
            Split::Test => "Test",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    R2,
    Mape,
    Accuracy,
    Precision,
    Recall,
    RepresentationError,
    CorrectRate,
}

impl MetricName {
    pub fn label(self) -> &'static str {
        match self {
            MetricName::R2 => "R2",
            MetricName::Mape => "MAPE",
            MetricName::Accuracy => "Accuracy",
            MetricName::Precision => "Precision",
            MetricName::Recall => "Recall",
            MetricName::RepresentationError => "Representation error",
            MetricName::CorrectRate => "Correct rate",
        }
    }

    fn key(self) -> &'static str {
        match self {
            MetricName::R2 => "r2",
            MetricName::Mape => "mape",
            MetricName::Accuracy => "accuracy",
            MetricName::Precision => "precision",
            MetricName::Recall => "recall",
            MetricName::RepresentationError => "representation_error",
            MetricName::CorrectRate => "correct_rate",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub split: Split,
    pub metric: MetricName,
    pub value: f64,
}

/// Metrics of one scenario run. R² is a fraction; every other metric is a
/// percentage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub name: String,
    pub scenario: u8,
    pub seed: u64,
    pub task: Task,
    pub manifest_digest: String,
    /// Unix seconds; kept out of the CSV form so that stays reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_unix: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_unix: Option<u64>,
    pub rows: Vec<MetricRow>,
}

impl MetricsTable {
    pub fn get(&self, split: Split, metric: MetricName) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.split == split && r.metric == metric)
            .map(|r| r.value)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::InvalidArgument(format!(
                "unknown report format '{other}'"
            ))),
        }
    }
}

/// Renders tables as text (split × metric rows, one column per table
/// ordered by scenario), long-form CSV, or JSON.
pub fn emit_report(tables: &[MetricsTable], format: ReportFormat) -> Result<String> {
    if tables.is_empty() {
        return Err(Error::InvalidArgument(
            "report needs at least one table".into(),
        ));
    }
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(tables)?),
        ReportFormat::Csv => Ok(to_csv(tables)),
        ReportFormat::Text => Ok(to_text(tables)),
    }
}

pub fn parse_json_report(text: &str) -> Result<Vec<MetricsTable>> {
    Ok(serde_json::from_str(text)?)
}

fn to_csv(tables: &[MetricsTable]) -> String {
    let mut out = String::from("name,scenario,seed,manifest_digest,split,metric,value\n");
    for t in tables {
        for r in &t.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                csv_field(&t.name),
                t.scenario,
                t.seed,
                t.manifest_digest,
                r.split.label().to_lowercase(),
                r.metric.key(),
                r.value
            );
        }
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn to_text(tables: &[MetricsTable]) -> String {
    let mut order: Vec<&MetricsTable> = tables.iter().collect();
    order.sort_by_key(|t| t.scenario);
    let mut metrics: Vec<MetricName> = tables
        .iter()
        .flat_map(|t| t.rows.iter().map(|r| r.metric))
        .collect();
    metrics.sort();
    metrics.dedup();

    let mut header = vec!["".to_owned(), "".to_owned()];
    header.extend(order.iter().map(|t| format!("Scenario {}", t.scenario)));
    let mut lines = vec![header];
    for split in Split::ALL {
        for (i, &m) in metrics.iter().enumerate() {
            let mut line = vec![
                if i == 0 {
                    split.label().to_owned()
                } else {
                    String::new()
                },
                m.label().to_owned(),
            ];
            line.extend(order.iter().map(|t| match t.get(split, m) {
                Some(v) if m == MetricName::R2 => format!("{v:.2}"),
                Some(v) => format!("{v:.2}%"),
                None => "-".to_owned(),
            }));
            lines.push(line);
        }
    }

    let cols = lines[0].len();
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            lines
                .iter()
                .map(|l| l[c].chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for (n, line) in lines.iter().enumerate() {
        let cells: Vec<String> = line
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c < 2 {
                    format!("{s:<w$}", w = widths[c])
                } else {
                    format!("{s:>w$}", w = widths[c])
                }
            })
            .collect();
        let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        if n == 0 {
            let _ = writeln!(
                out,
                "{}",
                "-".repeat(widths.iter().sum::<usize>() + 2 * (cols - 1))
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(scenario: u8, rows: &[(Split, MetricName, f64)]) -> MetricsTable {
        MetricsTable {
            name: "toy".into(),
            scenario,
            seed: 1,
            task: Task::Regression,
            manifest_digest: "abc".into(),
            started_unix: Some(1_700_000_000),
            finished_unix: None,
            rows: rows
                .iter()
                .map(|&(split, metric, value)| MetricRow {
                    split,
                    metric,
                    value,
                })
                .collect(),
        }
    }

    fn regression(scenario: u8, r2: f64) -> MetricsTable {
        let mut rows = Vec::new();
        for s in Split::ALL {
            rows.push((s, MetricName::R2, r2));
            rows.push((s, MetricName::Mape, 12.3456));
        }
        table(scenario, &rows)
    }

    #[test]
    fn single_s0_text_layout() {
        let text = emit_report(&[regression(0, 0.876)], ReportFormat::Text).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].ends_with("Scenario 0"));
        assert_eq!(lines.len(), 2 + 6);
        assert!(
            lines[2].starts_with("Train") && lines[2].contains("R2") && lines[2].ends_with("0.88")
        );
        assert!(lines[3].contains("MAPE") && lines[3].ends_with("12.35%"));
        assert!(lines[4].starts_with("Validation"));
        assert!(lines[6].starts_with("Test"));
    }

    #[test]
    fn columns_follow_scenario_order() {
        let tables: Vec<MetricsTable> = [3, 0, 4, 1, 2]
            .iter()
            .map(|&s| regression(s, 0.5))
            .collect();
        let text = emit_report(&tables, ReportFormat::Text).unwrap();
        let header = text.lines().next().unwrap();
        let positions: Vec<usize> = (0..5)
            .map(|s| header.find(&format!("Scenario {s}")).unwrap())
            .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn missing_metrics_show_a_dash() {
        let mut s1 = regression(1, 0.4);
        s1.rows.push(MetricRow {
            split: Split::Test,
            metric: MetricName::RepresentationError,
            value: 7.0,
        });
        let text = emit_report(&[regression(0, 0.5), s1], ReportFormat::Text).unwrap();
        let line = text
            .lines()
            .find(|l| l.contains("Representation error") && l.contains('7'))
            .unwrap();
        assert!(line.contains('-') && line.ends_with("7.00%"), "{line}");
    }

    #[test]
    fn json_round_trip() {
        let tables = vec![regression(0, 0.1 + 0.2), regression(1, -1.0 / 3.0)];
        let json = emit_report(&tables, ReportFormat::Json).unwrap();
        assert_eq!(parse_json_report(&json).unwrap(), tables);
    }

    #[test]
    fn csv_is_full_precision_without_timestamps() {
        let csv = emit_report(&[regression(2, 0.1 + 0.2)], ReportFormat::Csv).unwrap();
        assert!(csv.contains("toy,2,1,abc,train,r2,0.30000000000000004"));
        assert!(!csv.contains("1700000000"));
        assert_eq!(csv.lines().count(), 7);
    }

    #[test]
    fn empty_report_rejected() {
        assert!(emit_report(&[], ReportFormat::Text).is_err());
    }
}
