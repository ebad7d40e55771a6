//! Markdown tables over metric and rubric records, grouped by model and by
//! ablation condition.

use std::collections::BTreeMap;

use crate::judge::{aggregate_by, DimensionMeans, RubricScore, DIMENSIONS};
use crate::pipeline::MetricsRecord;
use mi_core::strategy::{COMPLEX_RATIO_THRESHOLD, OPEN_QUESTION_THRESHOLD, RQ_RATIO_THRESHOLD};

#[derive(Clone, Copy)]
enum Fmt {
    /// Unit-interval metric shown as a percentage, one decimal.
    Percent,
    /// Unbounded metric shown as-is, one decimal.
    Plain,
}

struct MetricRow {
    label: &'static str,
    fmt: Fmt,
    /// Group means above the threshold get a check mark.
    threshold: Option<f64>,
    get: fn(&MetricsRecord) -> Option<f64>,
}

fn metric_rows() -> Vec<MetricRow> {
    vec![
        MetricRow {
            label: "Token Entropy (%)",
            fmt: Fmt::Percent,
            threshold: None,
            get: |m| m.token_entropy,
        },
        MetricRow {
            label: "Distinct-2 (%)",
            fmt: Fmt::Percent,
            threshold: None,
            get: |m| m.distinct_2,
        },
        MetricRow {
            label: "Self-BLEU (%)",
            fmt: Fmt::Percent,
            threshold: None,
            get: |m| m.self_bleu,
        },
        MetricRow {
            label: "Perplexity",
            fmt: Fmt::Plain,
            threshold: None,
            get: |m| m.perplexity,
        },
        MetricRow {
            label: "Code Entropy (%)",
            fmt: Fmt::Percent,
            threshold: None,
            get: |m| m.code_entropy,
        },
        MetricRow {
            label: "Strategy Adherence (%)",
            fmt: Fmt::Percent,
            threshold: None,
            get: |m| m.strategy_adherence,
        },
        MetricRow {
            label: "Reflection Depth (%)",
            fmt: Fmt::Percent,
            threshold: None,
            get: |m| m.reflection_depth,
        },
        MetricRow {
            label: "Complex Reflection Ratio (%)",
            fmt: Fmt::Percent,
            threshold: Some(COMPLEX_RATIO_THRESHOLD),
            get: |m| m.complex_reflection_ratio,
        },
        MetricRow {
            label: "Open Question Ratio (%)",
            fmt: Fmt::Percent,
            threshold: Some(OPEN_QUESTION_THRESHOLD),
            get: |m| m.open_question_ratio,
        },
        MetricRow {
            label: "R/Q Ratio",
            fmt: Fmt::Plain,
            threshold: Some(RQ_RATIO_THRESHOLD),
            get: |m| m.reflection_question_ratio,
        },
    ]
}

/// Mean over present values; all-absent groups render as "-".
fn group_mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let vals: Vec<f64> = values.flatten().collect();
    if vals.is_empty() {
        None
    } else {
        Some(vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

fn metric_cell(row: &MetricRow, mean: Option<f64>) -> String {
    let Some(v) = mean else { return "-".to_string() };
    let base = match row.fmt {
        Fmt::Percent => format!("{:.1}", v * 100.0),
        Fmt::Plain => format!("{v:.1}"),
    };
    match row.threshold {
        Some(t) => format!("{base} {}", if v > t { "\u{2713}" } else { "\u{2717}" }),
        None => base,
    }
}

fn table(first_header: &str, columns: &[&str], rows: &[(String, Vec<String>)]) -> String {
    let mut out = String::new();
    out.push_str(&format!("| {first_header} |"));
    for c in columns {
        out.push_str(&format!(" {c} |"));
    }
    out.push('\n');
    out.push_str("| --- |");
    for _ in columns {
        out.push_str(" --- |");
    }
    out.push('\n');
    for (label, cells) in rows {
        out.push_str(&format!("| {label} |"));
        for cell in cells {
            out.push_str(&format!(" {cell} |"));
        }
        out.push('\n');
    }
    out
}

/// Metric table with one column per group, rows in fixed metric order.
fn metrics_table(
    metrics: &[MetricsRecord],
    first_header: &str,
    columns: &[(String, String)],
    key: impl Fn(&MetricsRecord) -> &str,
) -> String {
    let rows: Vec<(String, Vec<String>)> = std::iter::once((
        "Sessions".to_string(),
        columns
            .iter()
            .map(|(k, _)| metrics.iter().filter(|m| key(m) == k).count().to_string())
            .collect(),
    ))
    .chain(metric_rows().iter().map(|row| {
        let cells = columns
            .iter()
            .map(|(k, _)| {
                let mean =
                    group_mean(metrics.iter().filter(|m| key(m) == k).map(|m| (row.get)(m)));
                metric_cell(row, mean)
            })
            .collect();
        (row.label.to_string(), cells)
    }))
    .collect();
    let headers: Vec<&str> = columns.iter().map(|(_, display)| display.as_str()).collect();
    table(first_header, &headers, &rows)
}

fn capitalize(name: &str) -> String {
    let mut chars = name.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

fn rubric_table(first_header: &str, groups: &BTreeMap<String, DimensionMeans>) -> String {
    let columns: Vec<&str> = groups.keys().map(|k| k.as_str()).collect();
    let mut rows: Vec<(String, Vec<String>)> = vec![(
        "Sessions".to_string(),
        groups.values().map(|g| g.n.to_string()).collect(),
    )];
    for dim in DIMENSIONS {
        rows.push((
            capitalize(dim),
            groups
                .values()
                .map(|g| format!("{:.2}", g.dimension(dim).unwrap()))
                .collect(),
        ));
    }
    rows.push((
        "Overall".to_string(),
        groups.values().map(|g| format!("{:.2}", g.overall)).collect(),
    ));
    table(first_header, &columns, &rows)
}

const ABLATION_DISPLAY: [(&str, &str); 4] = [
    ("full", "Full"),
    ("no_story", "w/o Story"),
    ("no_mi", "w/o MI"),
    ("no_both", "w/o Both"),
];

fn ablation_columns(present: impl Fn(&str) -> bool) -> Vec<(String, String)> {
    ABLATION_DISPLAY
        .iter()
        .filter(|(key, _)| present(key))
        .map(|(key, display)| (key.to_string(), display.to_string()))
        .collect()
}

/// The full Markdown report: lexical and strategy metrics by model and by
/// ablation condition, then rubric scores when judgments exist.
pub fn render_report(metrics: &[MetricsRecord], judgments: &[RubricScore]) -> String {
    let mut out = String::new();
    out.push_str("# Evaluation report\n\n");
    out.push_str(&format!(
        "{} sessions evaluated, {} judged.\n\n",
        metrics.len(),
        judgments.len()
    ));

    let mut models: Vec<String> = metrics.iter().map(|m| m.model_name.clone()).collect();
    models.sort();
    models.dedup();
    let model_columns: Vec<(String, String)> =
        models.iter().map(|m| (m.clone(), m.clone())).collect();
    out.push_str("## Metrics by model\n\n");
    out.push_str(&metrics_table(metrics, "Metric", &model_columns, |m| &m.model_name));
    out.push('\n');

    out.push_str("## Metrics by ablation\n\n");
    let columns = ablation_columns(|key| metrics.iter().any(|m| m.ablation == key));
    out.push_str(&metrics_table(metrics, "Metric", &columns, |m| &m.ablation));
    out.push('\n');

    if !judgments.is_empty() {
        // Judgments carry only session ids; the generator model and ablation
        // come from the metric rows.
        let by_session: BTreeMap<&str, (&str, &str)> = metrics
            .iter()
            .map(|m| (m.session_id.as_str(), (m.model_name.as_str(), m.ablation.as_str())))
            .collect();
        let lookup_model = |j: &RubricScore| -> String {
            by_session
                .get(j.session_id.as_str())
                .map(|&(model, _)| model.to_string())
                .unwrap_or_else(|| "unknown".to_string())
        };
        let lookup_ablation = |j: &RubricScore| -> String {
            by_session
                .get(j.session_id.as_str())
                .map(|&(_, ablation)| ablation.to_string())
                .unwrap_or_else(|| "unknown".to_string())
        };
        out.push_str("## Rubric scores by model\n\n");
        out.push_str(&rubric_table("Dimension", &aggregate_by(judgments, lookup_model)));
        out.push('\n');
        out.push_str("## Rubric scores by ablation\n\n");
        let by_label = aggregate_by(judgments, lookup_ablation);
        let display: BTreeMap<String, DimensionMeans> = by_label
            .into_iter()
            .map(|(k, v)| {
                let name = ABLATION_DISPLAY
                    .iter()
                    .find(|(key, _)| *key == k)
                    .map(|(_, d)| d.to_string())
                    .unwrap_or(k);
                (name, v)
            })
            .collect();
        out.push_str(&rubric_table("Dimension", &display));
        out.push('\n');
    }
    out
}
