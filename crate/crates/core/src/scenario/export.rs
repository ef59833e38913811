//! Batch exports and between-method comparison.

use crate::metrics::{anova_one_way_groups, AnovaResult, MetricsReport};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};

use super::ScenarioError;

/// One run in the CSV export. Undefined metrics are written as blanks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub method: String,
    pub seed: u64,
    pub ie_s: f64,
    pub nt_s: f64,
    pub rad: Option<f64>,
    pub fo_s: Option<f64>,
    pub total_s: f64,
    pub puzzle_parts: u64,
    pub cmd_rate: Option<f64>,
    pub task_rate: Option<f64>,
    pub comm_rate: Option<f64>,
}

pub const CSV_COLUMNS: [&str; 11] = [
    "method",
    "seed",
    "ie_s",
    "nt_s",
    "rad",
    "fo_s",
    "total_s",
    "puzzle_parts",
    "cmd_rate",
    "task_rate",
    "comm_rate",
];

impl From<&MetricsReport> for CsvRow {
    fn from(m: &MetricsReport) -> Self {
        CsvRow {
            method: m.method.clone(),
            seed: m.seed,
            ie_s: m.ie_s,
            nt_s: m.nt_s,
            rad: m.rad,
            fo_s: m.fo_s,
            total_s: m.total_task_time_s,
            puzzle_parts: m.solved_puzzle_parts,
            cmd_rate: m.command_success_rate,
            task_rate: m.task_success_rate,
            comm_rate: m.communication_success_rate,
        }
    }
}

fn csv_error(e: csv::Error) -> ScenarioError {
    ScenarioError::Log(format!("csv: {e}"))
}

pub fn write_csv<W: Write>(reports: &[MetricsReport], out: W) -> Result<(), ScenarioError> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    writer.write_record(CSV_COLUMNS).map_err(csv_error)?;
    for report in reports {
        writer.serialize(CsvRow::from(report)).map_err(csv_error)?;
    }
    writer.flush().map_err(|e| ScenarioError::Log(e.to_string()))
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<CsvRow>, ScenarioError> {
    csv::Reader::from_reader(input)
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(csv_error)
}

pub fn write_json<W: Write>(reports: &[MetricsReport], out: W) -> Result<(), ScenarioError> {
    serde_json::to_writer_pretty(out, reports).map_err(|e| ScenarioError::Log(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

/// One metric compared across methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub metric: String,
    pub groups: BTreeMap<String, GroupStats>,
    pub anova: Option<AnovaResult>,
    /// Why no test was run, when `anova` is absent.
    pub note: Option<String>,
}

fn stats(values: &[f64]) -> GroupStats {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n.max(1) as f64;
    let sd = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    GroupStats { n, mean, sd }
}

type Extract = fn(&CsvRow) -> Option<f64>;

const METRICS: [(&str, Extract); 9] = [
    ("ie_s", |r| Some(r.ie_s)),
    ("nt_s", |r| Some(r.nt_s)),
    ("rad", |r| r.rad),
    ("fo_s", |r| r.fo_s),
    ("total_s", |r| Some(r.total_s)),
    ("puzzle_parts", |r| Some(r.puzzle_parts as f64)),
    ("cmd_rate", |r| r.cmd_rate),
    ("task_rate", |r| r.task_rate),
    ("comm_rate", |r| r.comm_rate),
];

/// Groups runs by method and tests each metric with one-way ANOVA.
/// Runs where a metric is undefined are left out of that metric's groups.
pub fn compare(rows: &[CsvRow]) -> Vec<Comparison> {
    METRICS
        .iter()
        .map(|(name, extract)| {
            let mut by_method: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for row in rows {
                if let Some(v) = extract(row) {
                    by_method.entry(row.method.clone()).or_default().push(v);
                }
            }
            let groups = by_method.iter().map(|(m, v)| (m.clone(), stats(v))).collect();
            let slices: Vec<&[f64]> = by_method.values().map(Vec::as_slice).collect();
            let (anova, note) = match anova_one_way_groups(&slices) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            Comparison {
                metric: name.to_string(),
                groups,
                anova,
                note,
            }
        })
        .collect()
}
