use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{HarnessError, MetricsRow};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Json,
    Markdown,
}

impl FromStr for TableFormat {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TableFormat::Csv),
            "json" => Ok(TableFormat::Json),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            _ => Err(HarnessError::UnknownFormat(s.to_string())),
        }
    }
}

const HEADERS: [&str; 15] = [
    "setting",
    "method",
    "mean_bias",
    "se_est_mean",
    "se_empirical",
    "coverage",
    "rmse_left",
    "logloss_left",
    "rmse_right",
    "logloss_right",
    "coverage_grand_oracle",
    "oracle_mean",
    "mean_estimate",
    "n_ok",
    "n_failed",
];

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.4}"))
}

/// Renders the metrics. CSV and JSON keep full precision; markdown rounds
/// to four decimals. Missing values are blank.
pub fn emit_table(rows: &[MetricsRow], format: TableFormat) -> Result<String, HarnessError> {
    match format {
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            if rows.is_empty() {
                w.write_record(HEADERS)?;
            }
            for r in rows {
                w.serialize(r)?;
            }
            let bytes = w.into_inner().map_err(|e| HarnessError::Io(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        TableFormat::Json => {
            let mut s = serde_json::to_string_pretty(rows)?;
            s.push('\n');
            Ok(s)
        }
        TableFormat::Markdown => {
            let mut s = String::new();
            let _ = writeln!(s, "| {} |", HEADERS.join(" | "));
            let _ = writeln!(s, "|{}", "---|".repeat(HEADERS.len()));
            for r in rows {
                let cells = [
                    r.setting.clone(),
                    r.method.clone(),
                    cell(r.mean_bias),
                    cell(r.se_est_mean),
                    cell(r.se_empirical),
                    cell(r.coverage),
                    cell(r.rmse_left),
                    cell(r.logloss_left),
                    cell(r.rmse_right),
                    cell(r.logloss_right),
                    cell(r.coverage_grand_oracle),
                    cell(r.oracle_mean),
                    cell(r.mean_estimate),
                    r.n_ok.to_string(),
                    r.n_failed.to_string(),
                ];
                let _ = writeln!(s, "| {} |", cells.join(" | "));
            }
            Ok(s)
        }
    }
}

pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricsRow>, HarnessError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<Result<Vec<MetricsRow>, _>>()?)
}
