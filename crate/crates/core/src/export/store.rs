use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::{DateTime, Utc};
use rusqlite::{params, Connection, ErrorCode, OpenFlags, OptionalExtension};

use super::{csv_writer, format_timestamp, write_csv, DatasetRow, ReportDoc};
use crate::model::ContentHash;

pub const CSV_FILE: &str = "records.csv";
pub const DB_FILE: &str = "erpa.sqlite3";
pub const REPORT_MD_FILE: &str = "report.md";
pub const REPORT_HTML_FILE: &str = "report.html";

const BUSY_TIMEOUT: Duration = Duration::from_secs(5);

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS records (
    seq INTEGER PRIMARY KEY AUTOINCREMENT,
    content_hash TEXT NOT NULL UNIQUE,
    source_id TEXT NOT NULL,
    processed_at TEXT NOT NULL,
    full_name TEXT NOT NULL,
    birth_date TEXT NOT NULL,
    document_number TEXT NOT NULL,
    cpf TEXT NOT NULL,
    filiation TEXT NOT NULL,
    issue_date TEXT NOT NULL,
    extraction_confidence TEXT NOT NULL,
    engine TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS processing_log (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    logged_at TEXT NOT NULL,
    source_path TEXT NOT NULL,
    content_hash TEXT,
    outcome TEXT NOT NULL,
    stage TEXT,
    error TEXT,
    detect_ms REAL,
    ocr_ms REAL,
    extract_ms REAL,
    store_ms REAL,
    report_ms REAL
);
";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("store is locked by another writer")]
    StoreLocked,
    #[error("store I/O failure on {path}: {reason}")]
    IoFailure { path: PathBuf, reason: String },
}

impl StoreError {
    fn io(path: &Path, reason: impl ToString) -> Self {
        StoreError::IoFailure {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        }
    }

    fn sql(path: &Path, e: rusqlite::Error) -> Self {
        match e.sqlite_error_code() {
            Some(ErrorCode::DatabaseBusy | ErrorCode::DatabaseLocked) => StoreError::StoreLocked,
            _ => Self::io(path, e),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppendOutcome {
    /// `record_id` is the row's sequence number in the records table.
    Inserted {
        record_id: i64,
    },
    DuplicateSkipped,
}

/// Stage durations in milliseconds; `None` for stages that did not run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageMillis {
    pub detect: Option<f64>,
    pub ocr: Option<f64>,
    pub extract: Option<f64>,
    pub store: Option<f64>,
    pub report: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub logged_at: DateTime<Utc>,
    pub source_path: String,
    pub content_hash: Option<String>,
    /// `succeeded`, `duplicate-skipped`, `ignored-non-image` or `failed`.
    pub outcome: String,
    pub stage: Option<String>,
    pub error: Option<String>,
    pub timings: StageMillis,
}

/// Owner of the database, CSV and report files under one directory.
///
/// Exactly one `RecordStore` should write a directory at a time; concurrent
/// readers use [`StoreReader`].
#[derive(Debug)]
pub struct RecordStore {
    dir: PathBuf,
    conn: Connection,
}

impl RecordStore {
    /// Opens or creates the store. A missing CSV is rebuilt from the database.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| StoreError::io(&dir, e))?;
        let db = dir.join(DB_FILE);
        let conn = Connection::open(&db).map_err(|e| StoreError::sql(&db, e))?;
        conn.busy_timeout(BUSY_TIMEOUT)
            .map_err(|e| StoreError::sql(&db, e))?;
        conn.execute_batch(SCHEMA)
            .map_err(|e| StoreError::sql(&db, e))?;
        let store = Self { dir, conn };
        let csv = store.csv_path();
        if !csv.exists() {
            let rows = store.rows()?;
            let file = fs::File::create(&csv).map_err(|e| StoreError::io(&csv, e))?;
            write_csv(file, &rows).map_err(|e| StoreError::io(&csv, e))?;
        }
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn csv_path(&self) -> PathBuf {
        self.dir.join(CSV_FILE)
    }

    pub fn db_path(&self) -> PathBuf {
        self.dir.join(DB_FILE)
    }

    pub fn report_path(&self) -> PathBuf {
        self.dir.join(REPORT_MD_FILE)
    }

    pub fn report_html_path(&self) -> PathBuf {
        self.dir.join(REPORT_HTML_FILE)
    }

    fn ensure_files(&self) -> Result<(), StoreError> {
        for p in [self.db_path(), self.csv_path()] {
            if !p.is_file() {
                return Err(StoreError::io(&p, "file no longer exists"));
            }
        }
        Ok(())
    }

    pub fn contains(&self, hash: &ContentHash) -> Result<bool, StoreError> {
        contains(&self.conn, &self.db_path(), hash)
    }

    /// Inserts the row under `hash` and appends it to the CSV, or does nothing
    /// if the hash is already stored.
    pub fn append_row(
        &mut self,
        hash: &ContentHash,
        row: &DatasetRow,
    ) -> Result<AppendOutcome, StoreError> {
        self.ensure_files()?;
        let db = self.db_path();
        let csv = self.csv_path();
        let tx = self
            .conn
            .transaction()
            .map_err(|e| StoreError::sql(&db, e))?;
        let v = row.values();
        let inserted = tx
            .execute(
                "INSERT OR IGNORE INTO records (content_hash, source_id, processed_at, full_name, birth_date,
                 document_number, cpf, filiation, issue_date, extraction_confidence, engine)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10, ?11)",
                params![hash.as_str(), v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9]],
            )
            .map_err(|e| StoreError::sql(&db, e))?;
        if inserted == 0 {
            return Ok(AppendOutcome::DuplicateSkipped);
        }
        // the CSV line is written inside the transaction so a failed append
        // leaves the database untouched
        let file = OpenOptions::new()
            .append(true)
            .open(&csv)
            .map_err(|e| StoreError::io(&csv, e))?;
        let mut w = csv_writer(file);
        w.write_record(v).map_err(|e| StoreError::io(&csv, e))?;
        w.flush().map_err(|e| StoreError::io(&csv, e))?;
        let record_id = tx.last_insert_rowid();
        tx.commit().map_err(|e| StoreError::sql(&db, e))?;
        Ok(AppendOutcome::Inserted { record_id })
    }

    pub fn log(&mut self, entry: &LogEntry) -> Result<i64, StoreError> {
        self.ensure_files()?;
        let db = self.db_path();
        let t = &entry.timings;
        self.conn
            .execute(
                "INSERT INTO processing_log (logged_at, source_path, content_hash, outcome, stage, error,
                 detect_ms, ocr_ms, extract_ms, store_ms, report_ms)
                 VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10, ?11)",
                params![
                    format_timestamp(&entry.logged_at),
                    entry.source_path,
                    entry.content_hash,
                    entry.outcome,
                    entry.stage,
                    entry.error,
                    t.detect,
                    t.ocr,
                    t.extract,
                    t.store,
                    t.report
                ],
            )
            .map_err(|e| StoreError::sql(&db, e))?;
        Ok(self.conn.last_insert_rowid())
    }

    /// Fills in the report duration of an existing log row.
    pub fn set_report_ms(&mut self, log_id: i64, ms: f64) -> Result<(), StoreError> {
        let db = self.db_path();
        self.conn
            .execute(
                "UPDATE processing_log SET report_ms = ?1 WHERE id = ?2",
                params![ms, log_id],
            )
            .map_err(|e| StoreError::sql(&db, e))?;
        Ok(())
    }

    /// Rows in insertion order.
    pub fn rows(&self) -> Result<Vec<DatasetRow>, StoreError> {
        let db = self.db_path();
        let mut stmt = self
            .conn
            .prepare(
                "SELECT source_id, processed_at, full_name, birth_date, document_number, cpf, filiation,
                 issue_date, extraction_confidence, engine FROM records ORDER BY seq",
            )
            .map_err(|e| StoreError::sql(&db, e))?;
        let rows = stmt
            .query_map([], |r| {
                Ok(DatasetRow {
                    source_id: r.get(0)?,
                    processed_at: r.get(1)?,
                    full_name: r.get(2)?,
                    birth_date: r.get(3)?,
                    document_number: r.get(4)?,
                    cpf: r.get(5)?,
                    filiation: r.get(6)?,
                    issue_date: r.get(7)?,
                    extraction_confidence: r.get(8)?,
                    engine: r.get(9)?,
                })
            })
            .and_then(|it| it.collect::<Result<Vec<_>, _>>())
            .map_err(|e| StoreError::sql(&db, e))?;
        Ok(rows)
    }

    pub fn record_count(&self) -> Result<usize, StoreError> {
        self.count("SELECT COUNT(*) FROM records")
    }

    pub fn log_count(&self) -> Result<usize, StoreError> {
        self.count("SELECT COUNT(*) FROM processing_log")
    }

    fn count(&self, sql: &str) -> Result<usize, StoreError> {
        let db = self.db_path();
        self.conn
            .query_row(sql, [], |r| r.get::<_, i64>(0))
            .map(|n| n as usize)
            .map_err(|e| StoreError::sql(&db, e))
    }

    /// Mean of detect + ocr + extract + store over succeeded files; 0 when none.
    pub fn mean_latency_ms(&self) -> Result<f64, StoreError> {
        let db = self.db_path();
        self.conn
            .query_row(
                "SELECT AVG(COALESCE(detect_ms, 0) + COALESCE(ocr_ms, 0) + COALESCE(extract_ms, 0) + COALESCE(store_ms, 0))
                 FROM processing_log WHERE outcome = 'succeeded'",
                [],
                |r| r.get::<_, Option<f64>>(0),
            )
            .map(|v| v.unwrap_or(0.0))
            .map_err(|e| StoreError::sql(&db, e))
    }

    /// Writes `report.md` and `report.html`, each replaced atomically.
    pub fn write_report(&self, doc: &ReportDoc) -> Result<(), StoreError> {
        replace_file(&self.report_path(), doc.to_markdown().as_bytes())?;
        replace_file(&self.report_html_path(), doc.to_html().as_bytes())
    }
}

fn replace_file(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| StoreError::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| StoreError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| StoreError::io(path, e))
}

fn contains(conn: &Connection, db: &Path, hash: &ContentHash) -> Result<bool, StoreError> {
    conn.query_row(
        "SELECT 1 FROM records WHERE content_hash = ?1",
        params![hash.as_str()],
        |_| Ok(()),
    )
    .optional()
    .map(|r| r.is_some())
    .map_err(|e| StoreError::sql(db, e))
}

/// Read-only handle used by workers for the duplicate gate.
#[derive(Debug)]
pub struct StoreReader {
    db: PathBuf,
    conn: Connection,
}

impl StoreReader {
    /// The store must already have been created by [`RecordStore::open`].
    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        let db = dir.join(DB_FILE);
        let conn = Connection::open_with_flags(
            &db,
            OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX,
        )
        .map_err(|e| StoreError::sql(&db, e))?;
        conn.busy_timeout(BUSY_TIMEOUT)
            .map_err(|e| StoreError::sql(&db, e))?;
        Ok(Self { db, conn })
    }

    pub fn contains(&self, hash: &ContentHash) -> Result<bool, StoreError> {
        contains(&self.conn, &self.db, hash)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::export::read_csv;
    use crate::model::content_hash;

    fn row(id: &str) -> DatasetRow {
        DatasetRow {
            source_id: id.into(),
            processed_at: "2024-05-01T12:00:00.000Z".into(),
            full_name: "MARIA".into(),
            birth_date: "1991-03-05".into(),
            document_number: "1".into(),
            cpf: String::new(),
            filiation: "A; B".into(),
            issue_date: String::new(),
            extraction_confidence: "0.9000".into(),
            engine: "mock".into(),
        }
    }

    fn csv_lines(store: &RecordStore) -> usize {
        fs::read_to_string(store.csv_path())
            .unwrap()
            .lines()
            .count()
    }

    #[test]
    fn insert_then_duplicate() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = RecordStore::open(dir.path()).unwrap();
        assert_eq!(csv_lines(&store), 1);
        let h = content_hash(b"one");
        assert_eq!(
            store.append_row(&h, &row("a")).unwrap(),
            AppendOutcome::Inserted { record_id: 1 }
        );
        assert_eq!(csv_lines(&store), 2);
        assert_eq!(store.record_count().unwrap(), 1);
        let before = fs::read(store.csv_path()).unwrap();
        assert_eq!(
            store.append_row(&h, &row("b")).unwrap(),
            AppendOutcome::DuplicateSkipped
        );
        assert_eq!(fs::read(store.csv_path()).unwrap(), before);
        assert!(store.contains(&h).unwrap());
        assert!(StoreReader::open(dir.path()).unwrap().contains(&h).unwrap());
    }

    #[test]
    fn deleted_file_is_io_failure() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = RecordStore::open(dir.path()).unwrap();
        fs::remove_file(store.csv_path()).unwrap();
        assert!(matches!(
            store.append_row(&content_hash(b"x"), &row("a")),
            Err(StoreError::IoFailure { .. })
        ));
    }

    #[test]
    fn csv_is_rebuilt_from_database() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut store = RecordStore::open(dir.path()).unwrap();
            store.append_row(&content_hash(b"1"), &row("a")).unwrap();
            store.append_row(&content_hash(b"2"), &row("b")).unwrap();
            fs::remove_file(store.csv_path()).unwrap();
        }
        let store = RecordStore::open(dir.path()).unwrap();
        let rows = read_csv(fs::File::open(store.csv_path()).unwrap()).unwrap();
        assert_eq!(rows, vec![row("a"), row("b")]);
        assert_eq!(rows, store.rows().unwrap());
    }

    #[test]
    fn latency_mean_over_succeeded() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = RecordStore::open(dir.path()).unwrap();
        assert_eq!(store.mean_latency_ms().unwrap(), 0.0);
        let entry = |outcome: &str, ms: f64| LogEntry {
            logged_at: Utc::now(),
            source_path: "x".into(),
            content_hash: None,
            outcome: outcome.into(),
            stage: None,
            error: None,
            timings: StageMillis {
                detect: Some(ms),
                ocr: Some(ms),
                extract: Some(ms),
                store: Some(ms),
                report: Some(1000.0),
            },
        };
        store.log(&entry("succeeded", 1.0)).unwrap();
        store.log(&entry("succeeded", 2.0)).unwrap();
        store.log(&entry("failed", 50.0)).unwrap();
        assert!((store.mean_latency_ms().unwrap() - 6.0).abs() < 1e-9);
        assert_eq!(store.log_count().unwrap(), 3);
    }
}
