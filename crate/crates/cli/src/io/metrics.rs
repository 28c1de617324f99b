//! Metric records and batch-plan emission, plus the report formats
//! (aligned human table and plot-ready CSV).

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use servesim_core::{BatchPlan, SimMetrics};

use super::IoError;

pub fn load_metrics(path: &Path) -> Result<SimMetrics, IoError> {
    let file = File::open(path).map_err(|e| IoError::io(path, e))?;
    let metrics: SimMetrics = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| IoError::parse(path, None, e.to_string()))?;
    metrics
        .validate()
        .map_err(|e| IoError::validation(path, None, e))?;
    Ok(metrics)
}

pub fn write_metrics(mut writer: impl Write, metrics: &SimMetrics) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut writer, metrics)?;
    writeln!(writer)
}

pub fn save_metrics(path: &Path, metrics: &SimMetrics) -> Result<(), IoError> {
    let out = File::create(path).map_err(|e| IoError::io(path, e))?;
    let mut writer = BufWriter::new(out);
    write_metrics(&mut writer, metrics).map_err(|e| IoError::io(path, e))?;
    writer.flush().map_err(|e| IoError::io(path, e))
}

#[derive(Serialize)]
struct PlanList<'a> {
    batches: &'a [BatchPlan],
}

pub fn write_plans(mut writer: impl Write, plans: &[BatchPlan]) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut writer, &PlanList { batches: plans })?;
    writeln!(writer)
}

/// Column order shared by the table and the CSV.
const COLUMNS: [&str; 9] = [
    "label",
    "requests",
    "batches",
    "mean_latency_s",
    "p95_latency_s",
    "throughput_tok_s",
    "slo_violation_rate",
    "makespan_s",
    "mean_utilization",
];

fn row_values(label: &str, m: &SimMetrics) -> Vec<String> {
    let mean_util = if m.device_utilization.is_empty() {
        0.0
    } else {
        m.device_utilization.iter().sum::<f64>() / m.device_utilization.len() as f64
    };
    vec![
        label.to_string(),
        m.per_request.len().to_string(),
        m.num_batches.to_string(),
        format!("{:.4}", m.mean_latency),
        format!("{:.4}", m.p95_latency),
        format!("{:.2}", m.throughput),
        format!("{:.4}", m.slo_violation_rate),
        format!("{:.4}", m.makespan),
        format!("{:.4}", mean_util),
    ]
}

/// Aligned table, one row per record.
pub fn render_table(records: &[(String, SimMetrics)]) -> String {
    let mut rows: Vec<Vec<String>> = vec![COLUMNS.iter().map(|c| c.to_string()).collect()];
    rows.extend(records.iter().map(|(label, m)| row_values(label, m)));
    let widths: Vec<usize> = (0..COLUMNS.len())
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &rows {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:<w$}"))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// CSV with one row per record, stable column order.
pub fn render_csv(records: &[(String, SimMetrics)]) -> String {
    let mut out = COLUMNS.join(",");
    out.push('\n');
    for (label, m) in records {
        out.push_str(&row_values(label, m).join(","));
        out.push('\n');
    }
    out
}
