use std::fmt::Write as _;

use chrono::{DateTime, Utc};

use super::{format_timestamp, DatasetRow, CSV_HEADER};

pub const REPORT_TITLE: &str = "ERPA Processing Report";

/// Values the renderer must not read from a clock or the database itself.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportContext {
    pub generated_at: DateTime<Utc>,
    /// Mean per-document pipeline latency, taken from the processing log.
    pub mean_latency_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    pub documents: usize,
    pub mean_confidence: f64,
    pub mean_latency_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSection {
    pub heading: String,
    /// (column name, cell) for every column except `source_id`.
    pub fields: Vec<(&'static str, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportDoc {
    pub title: &'static str,
    pub generated_at: String,
    pub summary: ReportSummary,
    pub sections: Vec<ReportSection>,
}

pub fn render_report(rows: &[DatasetRow], ctx: &ReportContext) -> ReportDoc {
    let mean_confidence = if rows.is_empty() {
        0.0
    } else {
        rows.iter().map(DatasetRow::confidence).sum::<f64>() / rows.len() as f64
    };
    let sections = rows
        .iter()
        .map(|row| ReportSection {
            heading: row.source_id.clone(),
            fields: CSV_HEADER
                .iter()
                .zip(row.values())
                .skip(1)
                .map(|(k, v)| (*k, v.to_string()))
                .collect(),
        })
        .collect();
    ReportDoc {
        title: REPORT_TITLE,
        generated_at: format_timestamp(&ctx.generated_at),
        summary: ReportSummary {
            documents: rows.len(),
            mean_confidence,
            mean_latency_ms: ctx.mean_latency_ms,
        },
        sections,
    }
}

fn md_cell(s: &str) -> String {
    s.replace('|', "\\|").replace('\n', " ")
}

fn html_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

impl ReportDoc {
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let s = &self.summary;
        let _ = writeln!(out, "# {}\n", self.title);
        let _ = writeln!(out, "Generated: {}\n", self.generated_at);
        let _ = writeln!(out, "Documents processed: {}", s.documents);
        let _ = writeln!(out, "Mean confidence: {:.3}", s.mean_confidence);
        let _ = writeln!(out, "Mean latency (ms): {:.1}", s.mean_latency_ms);
        for section in &self.sections {
            let _ = writeln!(out, "\n## {}\n", md_cell(&section.heading));
            out.push_str("| Field | Value |\n|---|---|\n");
            for (k, v) in &section.fields {
                let _ = writeln!(out, "| {k} | {} |", md_cell(v));
            }
        }
        out
    }

    pub fn to_html(&self) -> String {
        let mut out = String::new();
        let s = &self.summary;
        let title = html_escape(self.title);
        let _ = writeln!(
            out,
            "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">"
        );
        let _ = writeln!(out, "<title>{title}</title>\n</head>\n<body>");
        let _ = writeln!(out, "<h1>{title}</h1>");
        let _ = writeln!(out, "<p>Generated: {}</p>", html_escape(&self.generated_at));
        let _ = writeln!(out, "<ul>");
        let _ = writeln!(out, "<li>Documents processed: {}</li>", s.documents);
        let _ = writeln!(out, "<li>Mean confidence: {:.3}</li>", s.mean_confidence);
        let _ = writeln!(out, "<li>Mean latency (ms): {:.1}</li>", s.mean_latency_ms);
        let _ = writeln!(out, "</ul>");
        for section in &self.sections {
            let _ = writeln!(out, "<h2>{}</h2>", html_escape(&section.heading));
            let _ = writeln!(out, "<table>\n<tr><th>Field</th><th>Value</th></tr>");
            for (k, v) in &section.fields {
                let _ = writeln!(out, "<tr><td>{k}</td><td>{}</td></tr>", html_escape(v));
            }
            let _ = writeln!(out, "</table>");
        }
        let _ = writeln!(out, "</body>\n</html>");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn ctx() -> ReportContext {
        ReportContext {
            generated_at: Utc.with_ymd_and_hms(2024, 5, 1, 12, 0, 0).unwrap(),
            mean_latency_ms: 12.34,
        }
    }

    fn row(id: &str, conf: &str) -> DatasetRow {
        DatasetRow {
            source_id: id.into(),
            processed_at: "2024-05-01T11:59:00.000Z".into(),
            full_name: "A | B".into(),
            birth_date: "1990-01-01".into(),
            document_number: "1".into(),
            cpf: String::new(),
            filiation: String::new(),
            issue_date: String::new(),
            extraction_confidence: conf.into(),
            engine: "mock".into(),
        }
    }

    #[test]
    fn empty_report() {
        let md = render_report(&[], &ctx()).to_markdown();
        assert_eq!(
            md,
            "# ERPA Processing Report\n\nGenerated: 2024-05-01T12:00:00.000Z\n\n\
             Documents processed: 0\nMean confidence: 0.000\nMean latency (ms): 12.3\n"
        );
    }

    #[test]
    fn one_section_per_row() {
        let rows = [
            row("a.png", "0.9000"),
            row("b.png", "0.8000"),
            row("c.png", "1.0000"),
        ];
        let doc = render_report(&rows, &ctx());
        assert_eq!(doc.sections.len(), 3);
        let md = doc.to_markdown();
        assert!(md.contains("Documents processed: 3\nMean confidence: 0.900\n"));
        assert_eq!(md.matches("\n## ").count(), 3);
        assert!(md.contains("| full_name | A \\| B |"));
        assert_eq!(md, render_report(&rows, &ctx()).to_markdown());
        let html = doc.to_html();
        assert_eq!(html.matches("<h2>").count(), 3);
        assert!(html.contains("<td>A | B</td>"));
    }
}
