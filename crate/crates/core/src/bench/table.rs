use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use super::{savings_fraction, time_ratio, BenchError, BenchReport};

/// An externally measured time, e.g. a published baseline.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ExternalRow {
    pub label: String,
    #[serde(default)]
    pub engine: String,
    pub total_seconds: f64,
}

impl ExternalRow {
    pub fn new(label: impl Into<String>, engine: impl Into<String>, total_seconds: f64) -> Self {
        Self {
            label: label.into(),
            engine: engine.into(),
            total_seconds,
        }
    }

    fn is_manual(&self) -> bool {
        self.label.eq_ignore_ascii_case("manual")
    }
}

/// Reads a `label,engine,total_seconds` CSV.
pub fn load_external_rows(path: &Path) -> Result<Vec<ExternalRow>, BenchError> {
    let io = |e: csv::Error| BenchError::Io(format!("{}: {e}", path.display()));
    csv::Reader::from_path(path)
        .map_err(io)?
        .deserialize()
        .collect::<Result<Vec<_>, _>>()
        .map_err(io)
}

struct Cell {
    label: String,
    engine: String,
    seconds: f64,
}

fn pct(x: f64) -> String {
    format!("{:.3}", x * 100.0)
}

/// Comparison table with the measured report as the reference row.
pub fn render_comparison(report: &BenchReport, external_rows: &[ExternalRow]) -> String {
    render_comparison_with(Some(report), external_rows, &report.label)
}

/// Comparison table: a manual row, a model by engine grid of seconds per
/// document, then derived metrics. Savings are against the external row
/// labelled `manual`; ratios are `reference / row` within the same engine.
pub fn render_comparison_with(
    report: Option<&BenchReport>,
    external_rows: &[ExternalRow],
    reference: &str,
) -> String {
    let manual = external_rows
        .iter()
        .find(|r| r.is_manual())
        .map(|r| r.total_seconds);
    let mut cells: Vec<Cell> = external_rows
        .iter()
        .filter(|r| !r.is_manual())
        .map(|r| Cell {
            label: r.label.clone(),
            engine: r.engine.clone(),
            seconds: r.total_seconds,
        })
        .collect();
    if let Some(rep) = report {
        cells.push(Cell {
            label: rep.label.clone(),
            engine: rep.engine.to_string(),
            seconds: rep.mean_total_seconds(),
        });
    }

    let mut labels: Vec<&str> = Vec::new();
    for c in &cells {
        if !labels.contains(&c.label.as_str()) {
            labels.push(&c.label);
        }
    }
    let engines: Vec<&str> = {
        let mut seen = Vec::new();
        for c in &cells {
            if !seen.contains(&c.engine.as_str()) {
                seen.push(c.engine.as_str());
            }
        }
        seen
    };
    let lookup = |label: &str, engine: &str| {
        cells
            .iter()
            .find(|c| c.label == label && c.engine == engine)
            .map(|c| c.seconds)
    };

    let lw = labels
        .iter()
        .map(|l| l.chars().count())
        .chain([14])
        .max()
        .unwrap_or(14);
    let cw = engines
        .iter()
        .map(|e| e.chars().count())
        .chain([12])
        .max()
        .unwrap_or(12);
    let mut out = String::new();
    if let Some(m) = manual {
        let _ = writeln!(
            out,
            "{:<lw$} | {:>cw$}",
            "Manual process",
            format!("{m:.3} s")
        );
    }
    let _ = write!(out, "{:<lw$}", "Model");
    for e in &engines {
        let _ = write!(out, " | {e:>cw$}");
    }
    out.push('\n');
    let _ = writeln!(out, "{}", "-".repeat(lw + engines.len() * (cw + 3)));
    for label in &labels {
        let _ = write!(out, "{label:<lw$}");
        for e in &engines {
            let cell = lookup(label, e)
                .map(|s| format!("{s:.3} s"))
                .unwrap_or_else(|| "-".into());
            let _ = write!(out, " | {cell:>cw$}");
        }
        out.push('\n');
    }

    let _ = writeln!(out);
    let _ = writeln!(out, "Derived metrics (reference: {reference})");
    let ew = engines
        .iter()
        .map(|e| e.chars().count())
        .chain([6])
        .max()
        .unwrap_or(6);
    let _ = writeln!(
        out,
        "{:<lw$} | {:<ew$} | {:>12} | {:>19} | {:>19}",
        "Model", "Engine", "Seconds", "Savings vs manual %", "Reference / row %"
    );
    let _ = writeln!(out, "{}", "-".repeat(lw + ew + 12 + 19 + 19 + 12));
    let engine_order: BTreeSet<(usize, usize)> = cells
        .iter()
        .map(|c| {
            (
                engines.iter().position(|e| *e == c.engine).unwrap_or(0),
                labels.iter().position(|l| *l == c.label).unwrap_or(0),
            )
        })
        .collect();
    for (ei, li) in engine_order {
        let (engine, label) = (engines[ei], labels[li]);
        let Some(seconds) = lookup(label, engine) else {
            continue;
        };
        let savings = manual
            .and_then(|m| savings_fraction(m, seconds).ok())
            .map(pct)
            .unwrap_or_else(|| "-".into());
        let ratio = match lookup(reference, engine) {
            Some(r) if label != reference => time_ratio(r, seconds).ok().map(pct),
            _ => None,
        }
        .unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{label:<lw$} | {engine:<ew$} | {:>12} | {savings:>19} | {ratio:>19}",
            format!("{seconds:.3}")
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn published_times() -> Vec<ExternalRow> {
        vec![
            ExternalRow::new("manual", "", 160.0),
            ExternalRow::new("UiPath", "paddleocr", 16.8),
            ExternalRow::new("UiPath", "doctr", 16.7),
            ExternalRow::new("Automation Anywhere", "paddleocr", 18.52),
            ExternalRow::new("Automation Anywhere", "doctr", 18.65),
            ExternalRow::new("ERPA", "paddleocr", 9.94),
            ExternalRow::new("ERPA", "doctr", 10.16),
        ]
    }

    /// (savings %, ratio %) cells of a derived-metrics line.
    fn derived(table: &str, label: &str, engine: &str) -> (Option<f64>, Option<f64>) {
        let cols: Vec<String> = table
            .lines()
            .skip_while(|l| !l.starts_with("Derived metrics"))
            .map(|l| {
                l.split('|')
                    .map(|c| c.trim().to_string())
                    .collect::<Vec<_>>()
            })
            .find(|c| c.len() == 5 && c[0] == label && c[1] == engine)
            .unwrap();
        (cols[3].parse().ok(), cols[4].parse().ok())
    }

    #[test]
    fn published_rows_produce_published_metrics() {
        let t = render_comparison_with(None, &published_times(), "ERPA");
        assert!(t.starts_with("Manual process"));
        let close = |x: Option<f64>, want: f64, tol: f64| (x.unwrap() - want).abs() <= tol;
        assert!(close(derived(&t, "ERPA", "paddleocr").0, 93.78, 0.01));
        assert!(close(derived(&t, "UiPath", "doctr").0, 89.56, 0.01));
        assert!(close(
            derived(&t, "Automation Anywhere", "doctr").0,
            88.34,
            0.01
        ));
        assert!(close(derived(&t, "UiPath", "paddleocr").1, 59.0, 0.2));
        assert!(close(
            derived(&t, "Automation Anywhere", "paddleocr").1,
            53.67,
            0.01
        ));
        assert_eq!(derived(&t, "ERPA", "doctr").1, None);
    }

    #[test]
    fn deterministic_and_no_external_rows() {
        let t = render_comparison_with(None, &published_times(), "ERPA");
        assert_eq!(t, render_comparison_with(None, &published_times(), "ERPA"));
        let empty = render_comparison_with(None, &[], "ERPA");
        assert!(!empty.contains("Manual"));
    }

    #[test]
    fn external_csv() {
        let tmp = tempfile::tempdir().unwrap();
        let p = tmp.path().join("ext.csv");
        std::fs::write(
            &p,
            "label,engine,total_seconds\nmanual,,160\nUiPath,paddleocr,16.8\n",
        )
        .unwrap();
        let rows = load_external_rows(&p).unwrap();
        assert_eq!(rows, published_times()[..2].to_vec());
    }
}
