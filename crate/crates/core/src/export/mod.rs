//! Persistence and presentation of extracted records.
//!
//! A validated [`IdRecord`] is projected onto a flat [`DatasetRow`], stored in
//! an embedded SQLite database keyed by content hash, appended to a CSV file
//! and summarised in a Markdown/HTML report.

mod report;
mod store;

use std::io::Read;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::model::{EngineId, IdRecord};

pub use report::{render_report, ReportContext, ReportDoc, ReportSection, ReportSummary};
pub use store::{AppendOutcome, LogEntry, RecordStore, StageMillis, StoreError, StoreReader};

/// Exact CSV header line, in column order.
pub const CSV_HEADER: [&str; 10] = [
    "source_id",
    "processed_at",
    "full_name",
    "birth_date",
    "document_number",
    "cpf",
    "filiation",
    "issue_date",
    "extraction_confidence",
    "engine",
];

pub const FILIATION_SEPARATOR: &str = "; ";

/// Flat tabular projection of a record. Absent optionals are empty strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub source_id: String,
    pub processed_at: String,
    pub full_name: String,
    pub birth_date: String,
    pub document_number: String,
    pub cpf: String,
    pub filiation: String,
    pub issue_date: String,
    pub extraction_confidence: String,
    pub engine: String,
}

impl DatasetRow {
    pub fn values(&self) -> [&str; 10] {
        [
            &self.source_id,
            &self.processed_at,
            &self.full_name,
            &self.birth_date,
            &self.document_number,
            &self.cpf,
            &self.filiation,
            &self.issue_date,
            &self.extraction_confidence,
            &self.engine,
        ]
    }

    /// Parsed confidence; unparseable cells count as 0.
    pub fn confidence(&self) -> f64 {
        self.extraction_confidence.parse().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowMeta {
    pub processed_at: DateTime<Utc>,
    pub engine: EngineId,
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn map_to_row(r: &IdRecord, meta: &RowMeta) -> DatasetRow {
    DatasetRow {
        source_id: r.source_id.clone(),
        processed_at: format_timestamp(&meta.processed_at),
        full_name: r.full_name.clone(),
        birth_date: r.birth_date.to_string(),
        document_number: r.document_number.clone(),
        cpf: r.cpf.clone().unwrap_or_default(),
        filiation: r.filiation.join(FILIATION_SEPARATOR),
        issue_date: r.issue_date.map(|d| d.to_string()).unwrap_or_default(),
        extraction_confidence: format!("{:.4}", r.extraction_confidence),
        engine: meta.engine.as_str().to_string(),
    }
}

/// Serializes rows with the header, LF line endings.
pub fn write_csv<W: std::io::Write>(out: W, rows: &[DatasetRow]) -> csv::Result<()> {
    let mut w = csv_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.write_record(row.values())?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_writer<W: std::io::Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// Reads rows back; the header must match [`CSV_HEADER`] exactly.
pub fn read_csv<R: Read>(input: R) -> csv::Result<Vec<DatasetRow>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(csv::Error::from(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!(
                "unexpected CSV header: {}",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        )));
    }
    r.deserialize().collect()
}
