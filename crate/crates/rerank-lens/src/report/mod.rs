//! Rendering evaluation outputs as plot-ready documents.
//!
//! Everything here is a pure function of its inputs: identical inputs
//! yield byte-identical documents. Images are out of scope — the
//! histogram and partition outputs are CSV laid out for gnuplot-style
//! tooling.

mod histogram;

pub use histogram::{histogram, HistBin, Histogram};

use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, DatasetStats};
use crate::metrics::{EvalReport, PartitionTable};

/// One grid cell: a re-ranker evaluated on a dataset under a transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub dataset: String,
    pub reranker: String,
    pub transform: String,
    pub p_at_1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_p_at_1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci95: Option<(f64, f64)>,
}

/// Output format for [`render_grid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridFormat {
    Markdown,
    Csv,
    Json,
}

impl std::str::FromStr for GridFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "markdown" | "md" => Ok(GridFormat::Markdown),
            "csv" => Ok(GridFormat::Csv),
            "json" => Ok(GridFormat::Json),
            other => Err(format!("unknown grid format {other}")),
        }
    }
}

impl GridFormat {
    pub fn extension(self) -> &'static str {
        match self {
            GridFormat::Markdown => "md",
            GridFormat::Csv => "csv",
            GridFormat::Json => "json",
        }
    }
}

/// Builds grid rows from evaluation reports, one row per report.
pub fn build_grid(reports: &[EvalReport]) -> Vec<GridRow> {
    reports
        .iter()
        .filter_map(|r| {
            let p = r.metric("p@1")?;
            Some(GridRow {
                dataset: r.dataset.clone(),
                reranker: r.reranker.clone(),
                transform: r.transform.clone(),
                p_at_1: p.value,
                delta_p_at_1: r.metric("delta_p@1").map(|m| m.value),
                ci95: p.ci95,
            })
        })
        .collect()
}

fn sorted_with_flags(rows: &[GridRow]) -> Vec<(GridRow, bool)> {
    let mut sorted: Vec<GridRow> = rows.to_vec();
    sorted.sort_by(|a, b| {
        (&a.dataset, &a.reranker, &a.transform).cmp(&(&b.dataset, &b.reranker, &b.transform))
    });
    // Top score per (dataset, transform) group; ties all flagged.
    sorted
        .iter()
        .map(|row| {
            let best = sorted
                .iter()
                .filter(|r| r.dataset == row.dataset && r.transform == row.transform)
                .map(|r| r.p_at_1)
                .fold(f64::NEG_INFINITY, f64::max);
            (row.clone(), row.p_at_1 == best)
        })
        .collect()
}

fn format_cell(row: &GridRow) -> String {
    match row.delta_p_at_1 {
        Some(d) => format!("{:.2} ({:.2})", row.p_at_1, d),
        None => format!("{:.2}", row.p_at_1),
    }
}

/// Renders the P@1 / ΔP@1 grid. Row order is (dataset, re-ranker,
/// transform); the top P@1 per (dataset, transform) group is flagged —
/// bold in markdown, a `top` column in csv and json. ΔP@1 renders in
/// parentheses to 2 decimals.
pub fn render_grid(rows: &[GridRow], format: GridFormat) -> String {
    let flagged = sorted_with_flags(rows);
    match format {
        GridFormat::Markdown => {
            let mut out = String::new();
            out.push_str("| Dataset | Re-ranker | Transform | P@1 (ΔP@1) | 95% CI |\n");
            out.push_str("|---|---|---|---|---|\n");
            for (row, top) in &flagged {
                let cell = format_cell(row);
                let cell = if *top { format!("**{cell}**") } else { cell };
                let ci = row
                    .ci95
                    .map(|(lo, hi)| format!("[{lo:.2}, {hi:.2}]"))
                    .unwrap_or_else(|| "—".to_string());
                out.push_str(&format!(
                    "| {} | {} | {} | {} | {} |\n",
                    row.dataset, row.reranker, row.transform, cell, ci
                ));
            }
            out
        }
        GridFormat::Csv => {
            let mut writer = csv::Writer::from_writer(Vec::new());
            writer
                .write_record([
                    "dataset",
                    "reranker",
                    "transform",
                    "p_at_1",
                    "delta_p_at_1",
                    "ci_lo",
                    "ci_hi",
                    "top",
                ])
                .expect("csv write");
            for (row, top) in &flagged {
                writer
                    .write_record([
                        row.dataset.clone(),
                        row.reranker.clone(),
                        row.transform.clone(),
                        format!("{}", row.p_at_1),
                        row.delta_p_at_1.map(|d| d.to_string()).unwrap_or_default(),
                        row.ci95.map(|(lo, _)| lo.to_string()).unwrap_or_default(),
                        row.ci95.map(|(_, hi)| hi.to_string()).unwrap_or_default(),
                        top.to_string(),
                    ])
                    .expect("csv write");
            }
            String::from_utf8(writer.into_inner().expect("csv flush")).expect("utf8")
        }
        GridFormat::Json => {
            #[derive(Serialize)]
            struct JsonRow<'a> {
                #[serde(flatten)]
                row: &'a GridRow,
                top: bool,
            }
            let rows: Vec<JsonRow> = flagged
                .iter()
                .map(|(row, top)| JsonRow { row, top: *top })
                .collect();
            let mut out = serde_json::to_string_pretty(&rows).expect("json");
            out.push('\n');
            out
        }
    }
}

/// Renders partition tables as CSV: one below/above row pair per table.
pub fn render_partitions_csv(tables: &[PartitionTable]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["measure", "threshold", "partition", "n", "share", "p_at_1"])
        .expect("csv write");
    for t in tables {
        for (label, row) in [("below", &t.below), ("above", &t.above)] {
            writer
                .write_record([
                    t.measure.clone(),
                    t.threshold.to_string(),
                    label.to_string(),
                    row.n.to_string(),
                    row.share.to_string(),
                    row.p_at_1.map(|p| p.to_string()).unwrap_or_default(),
                ])
                .expect("csv write");
        }
    }
    String::from_utf8(writer.into_inner().expect("csv flush")).expect("utf8")
}

/// Dataset statistics: sample count, passages per sample, golds per sample.
pub fn dataset_stats(dataset: &Dataset) -> DatasetStats {
    dataset.stats().clone()
}

/// Renders dataset statistics as CSV. The gold distribution is encoded
/// as space-separated `golds:count` pairs.
pub fn render_stats_csv(stats: &[(String, DatasetStats)]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record([
            "dataset",
            "samples",
            "passages_mean",
            "passages_min",
            "passages_max",
            "gold_per_sample",
        ])
        .expect("csv write");
    for (name, s) in stats {
        let gold_dist = s
            .gold_per_sample
            .iter()
            .map(|(golds, count)| format!("{golds}:{count}"))
            .collect::<Vec<_>>()
            .join(" ");
        writer
            .write_record([
                name.clone(),
                s.samples.to_string(),
                s.mean_passages.to_string(),
                s.min_passages.to_string(),
                s.max_passages.to_string(),
                gold_dist,
            ])
            .expect("csv write");
    }
    String::from_utf8(writer.into_inner().expect("csv flush")).expect("utf8")
}
