//! The detect → OCR → extract → store → report loop.
//!
//! [`Pipeline::process_file`] runs one document start to finish. The
//! continuous loop in [`run_loop`] splits the same work in two: workers run
//! [`Pipeline::prepare`] (gates, OCR, extraction) in parallel and a single
//! writer thread runs [`Pipeline::commit`] (store, log, report, failure
//! routing), so only one thread ever mutates the store.

mod failure;
mod run;

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::Utc;

use crate::export::{
    map_to_row, render_report, AppendOutcome, LogEntry, RecordStore, ReportContext, RowMeta,
    StageMillis, StoreError,
};
use crate::extractor::{ExtractionStrategy, Extractor};
use crate::model::{content_hash_file, ContentHash, EngineId, IdRecord};
use crate::ocr::{extract_text, MockBackend, OcrBackend, SidecarBackend, TextExtraction};
use crate::watcher::{is_valid_image, WatchConfig};

pub use failure::route_failure;
pub use run::{run_loop, LoopHandle, RunSummary};

#[derive(Debug, Clone, PartialEq)]
pub struct OcrSettings {
    /// Command line that starts the sidecar, program first.
    pub sidecar_cmd: Vec<String>,
    pub sidecar_processes: usize,
    pub timeout: Duration,
    /// Artificial delay added by the mock backend.
    pub mock_latency: Duration,
}

impl Default for OcrSettings {
    fn default() -> Self {
        Self {
            sidecar_cmd: vec!["python3".into(), "ocr_sidecar.py".into()],
            sidecar_processes: 1,
            timeout: crate::ocr::sidecar::DEFAULT_TIMEOUT,
            mock_latency: Duration::ZERO,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub watch: WatchConfig,
    pub engine: EngineId,
    pub ocr: OcrSettings,
    pub strategy: ExtractionStrategy,
    pub store_dir: PathBuf,
    pub workers: usize,
    pub failure_dir: PathBuf,
    /// The loop stops once this file exists.
    pub stop_file: Option<PathBuf>,
    pub queue_capacity: usize,
}

impl PipelineConfig {
    /// Mock OCR, rules extraction, one worker; store and failure directories
    /// next to the watched root.
    pub fn new(watch_root: impl Into<PathBuf>, store_dir: impl Into<PathBuf>) -> Self {
        let watch = WatchConfig::new(watch_root);
        let failure_dir = watch.root.with_file_name("failed");
        Self {
            watch,
            engine: EngineId::mock(),
            ocr: OcrSettings::default(),
            strategy: ExtractionStrategy::Rules,
            store_dir: store_dir.into(),
            workers: 1,
            failure_dir,
            stop_file: None,
            queue_capacity: 64,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::FatalConfig(m));
        self.watch.validate().or_else(bad)?;
        if self.workers == 0 {
            return bad("pipeline.workers must be >= 1".into());
        }
        if self.queue_capacity == 0 {
            return bad("queue capacity must be >= 1".into());
        }
        if !self.engine.is_mock() && self.ocr.sidecar_cmd.is_empty() {
            return bad(format!("engine {} needs ocr.sidecar_cmd", self.engine));
        }
        if let ExtractionStrategy::LlmHttp(s) = &self.strategy {
            if s.endpoint.is_empty() || s.model.is_empty() {
                return bad(
                    "extract.llm.endpoint and extract.llm.model are required for llm-http".into(),
                );
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    FatalConfig(String),
    #[error("fatal I/O error: {0}")]
    FatalIo(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Hash,
    Ocr,
    Extract,
    Store,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Hash => "hash",
            Stage::Ocr => "ocr",
            Stage::Extract => "extract",
            Stage::Store => "store",
            Stage::Report => "report",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeStatus {
    Succeeded,
    SkippedDuplicate,
    IgnoredNonImage,
    Failed { stage: Stage, error: String },
}

impl OutcomeStatus {
    pub fn label(&self) -> &'static str {
        match self {
            OutcomeStatus::Succeeded => "succeeded",
            OutcomeStatus::SkippedDuplicate => "skipped-duplicate",
            OutcomeStatus::IgnoredNonImage => "ignored-non-image",
            OutcomeStatus::Failed { .. } => "failed",
        }
    }

    pub fn is_failed(&self) -> bool {
        matches!(self, OutcomeStatus::Failed { .. })
    }
}

impl fmt::Display for OutcomeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutcomeStatus::Failed { stage, error } => write!(f, "failed({stage}): {error}"),
            other => f.write_str(other.label()),
        }
    }
}

/// Per-stage wall-clock durations. `detect_to_start` runs from detection to
/// the start of OCR and so includes queueing, gating and hashing.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub detect_to_start: Option<Duration>,
    pub ocr: Option<Duration>,
    pub extract: Option<Duration>,
    pub store: Option<Duration>,
    pub report: Option<Duration>,
}

impl StageTimings {
    pub fn is_complete(&self) -> bool {
        self.detect_to_start.is_some()
            && self.ocr.is_some()
            && self.extract.is_some()
            && self.store.is_some()
            && self.report.is_some()
    }

    /// Sum of the stages that ran.
    pub fn total(&self) -> Duration {
        [
            self.detect_to_start,
            self.ocr,
            self.extract,
            self.store,
            self.report,
        ]
        .into_iter()
        .flatten()
        .sum()
    }

    pub fn as_millis(&self) -> StageMillis {
        let ms = |d: Option<Duration>| d.map(|d| d.as_secs_f64() * 1000.0);
        StageMillis {
            detect: ms(self.detect_to_start),
            ocr: ms(self.ocr),
            extract: ms(self.extract),
            store: ms(self.store),
            report: ms(self.report),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessingOutcome {
    pub path: PathBuf,
    pub content_hash: Option<ContentHash>,
    pub status: OutcomeStatus,
    pub timings: StageTimings,
    /// Sequence number in the records table, set on success.
    pub record_id: Option<i64>,
    pub record: Option<IdRecord>,
    /// Where a failed file was moved to, if routing succeeded.
    pub routed_to: Option<PathBuf>,
}

impl ProcessingOutcome {
    fn new(path: &Path, status: OutcomeStatus) -> Self {
        Self {
            path: path.to_path_buf(),
            content_hash: None,
            status,
            timings: StageTimings::default(),
            record_id: None,
            record: None,
            routed_to: None,
        }
    }
}

/// Result of the worker half of processing.
#[derive(Debug)]
pub enum Prepared {
    /// Gated out or failed before anything needed storing.
    Done(ProcessingOutcome),
    /// Extracted and awaiting the store writer.
    Ready {
        outcome: ProcessingOutcome,
        extraction: TextExtraction,
    },
}

/// Builds the OCR backend named by the configuration.
pub fn build_backend(cfg: &PipelineConfig) -> Arc<dyn OcrBackend> {
    if cfg.engine.is_mock() {
        Arc::new(MockBackend::with_latency(cfg.ocr.mock_latency))
    } else {
        Arc::new(SidecarBackend::new(
            cfg.engine.clone(),
            cfg.ocr.sidecar_cmd.clone(),
            cfg.ocr.sidecar_processes,
            cfg.ocr.timeout,
        ))
    }
}

/// Immutable processing context shared by all workers.
pub struct Pipeline {
    cfg: PipelineConfig,
    backend: Arc<dyn OcrBackend>,
    extractor: Extractor,
}

impl fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Pipeline")
            .field("engine", self.backend.engine())
            .field("strategy", self.extractor.strategy())
            .finish()
    }
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self, PipelineError> {
        let backend = build_backend(&cfg);
        Self::with_backend(cfg, backend)
    }

    /// Uses a caller-supplied backend instead of the configured engine.
    pub fn with_backend(
        cfg: PipelineConfig,
        backend: Arc<dyn OcrBackend>,
    ) -> Result<Self, PipelineError> {
        cfg.validate()?;
        let extractor = Extractor::new(cfg.strategy.clone());
        Ok(Self {
            cfg,
            backend,
            extractor,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    /// Image gate, duplicate gate, OCR and extraction. `seen` answers whether
    /// a content hash is already stored.
    pub fn prepare(
        &self,
        path: &Path,
        detected_at: Instant,
        seen: impl Fn(&ContentHash) -> Result<bool, StoreError>,
    ) -> Prepared {
        if !is_valid_image(path, &self.cfg.watch) {
            return Prepared::Done(ProcessingOutcome::new(path, OutcomeStatus::IgnoredNonImage));
        }
        let failed = |stage, error: String| OutcomeStatus::Failed { stage, error };

        let mut outcome = ProcessingOutcome::new(path, OutcomeStatus::Succeeded);
        let hash = match content_hash_file(path) {
            Ok(h) => h,
            Err(e) => {
                outcome.status = failed(Stage::Hash, e.to_string());
                return Prepared::Done(outcome);
            }
        };
        outcome.content_hash = Some(hash.clone());
        match seen(&hash) {
            Ok(true) => {
                outcome.status = OutcomeStatus::SkippedDuplicate;
                return Prepared::Done(outcome);
            }
            Ok(false) => {}
            Err(e) => {
                outcome.status = failed(Stage::Hash, e.to_string());
                return Prepared::Done(outcome);
            }
        }

        let started = Instant::now();
        outcome.timings.detect_to_start = Some(started.saturating_duration_since(detected_at));
        let extraction = extract_text(self.backend.as_ref(), path);
        outcome.timings.ocr = Some(started.elapsed());
        let extraction = match extraction {
            Ok(t) => t,
            Err(e) => {
                outcome.status = failed(Stage::Ocr, e.to_string());
                return Prepared::Done(outcome);
            }
        };

        let started = Instant::now();
        let record = self.extractor.extract(&extraction);
        outcome.timings.extract = Some(started.elapsed());
        match record {
            Ok(r) => {
                outcome.record = Some(r);
                Prepared::Ready {
                    outcome,
                    extraction,
                }
            }
            Err(e) => {
                outcome.status = failed(Stage::Extract, e.to_string());
                Prepared::Done(outcome)
            }
        }
    }

    /// Store half: appends the row, logs, refreshes the report and routes
    /// failures. Must only be called by the thread that owns `store`.
    pub fn commit(&self, prepared: Prepared, store: &mut RecordStore) -> ProcessingOutcome {
        let mut outcome = match prepared {
            Prepared::Done(outcome) => outcome,
            Prepared::Ready {
                outcome,
                extraction,
            } => self.store_and_report(outcome, &extraction, store),
        };
        let log_outcome = match &outcome.status {
            OutcomeStatus::SkippedDuplicate => "duplicate-skipped",
            s => s.label(),
        };
        let (stage, error) = match &outcome.status {
            OutcomeStatus::Failed { stage, error } => {
                (Some(stage.to_string()), Some(error.clone()))
            }
            _ => (None, None),
        };
        // succeeded files were logged before the report was rendered
        if outcome.status != OutcomeStatus::Succeeded {
            let entry = LogEntry {
                logged_at: Utc::now(),
                source_path: outcome.path.display().to_string(),
                content_hash: outcome.content_hash.as_ref().map(|h| h.to_string()),
                outcome: log_outcome.to_string(),
                stage,
                error,
                timings: outcome.timings.as_millis(),
            };
            if let Err(e) = store.log(&entry) {
                log::error!("could not log outcome for {}: {e}", outcome.path.display());
            }
        }
        match &outcome.status {
            OutcomeStatus::Succeeded => log::info!("{}: stored", outcome.path.display()),
            OutcomeStatus::SkippedDuplicate => {
                log::info!("{}: duplicate content, skipped", outcome.path.display())
            }
            OutcomeStatus::IgnoredNonImage => {
                log::debug!("{}: not an image, ignored", outcome.path.display())
            }
            OutcomeStatus::Failed { stage, error } => {
                log::warn!("{}: failed at {stage}: {error}", outcome.path.display());
                match route_failure(
                    &outcome.path,
                    outcome.content_hash.as_ref(),
                    &self.cfg.failure_dir,
                ) {
                    Ok(dest) => outcome.routed_to = Some(dest),
                    Err(e) => log::error!(
                        "could not move {} to failure dir: {e}",
                        outcome.path.display()
                    ),
                }
            }
        }
        outcome
    }

    fn store_and_report(
        &self,
        mut outcome: ProcessingOutcome,
        extraction: &TextExtraction,
        store: &mut RecordStore,
    ) -> ProcessingOutcome {
        let record = outcome
            .record
            .as_ref()
            .expect("ready outcome carries a record");
        let hash = outcome
            .content_hash
            .clone()
            .expect("ready outcome carries a hash");
        let meta = RowMeta {
            processed_at: Utc::now(),
            engine: extraction.engine.clone(),
        };
        let started = Instant::now();
        let appended = store.append_row(&hash, &map_to_row(record, &meta));
        outcome.timings.store = Some(started.elapsed());
        match appended {
            Ok(AppendOutcome::Inserted { record_id }) => outcome.record_id = Some(record_id),
            // two workers raced on identical content
            Ok(AppendOutcome::DuplicateSkipped) => {
                outcome.status = OutcomeStatus::SkippedDuplicate;
                outcome.record = None;
                return outcome;
            }
            Err(e) => {
                outcome.status = OutcomeStatus::Failed {
                    stage: Stage::Store,
                    error: e.to_string(),
                };
                return outcome;
            }
        }

        let entry = LogEntry {
            logged_at: Utc::now(),
            source_path: outcome.path.display().to_string(),
            content_hash: Some(hash.to_string()),
            outcome: OutcomeStatus::Succeeded.label().to_string(),
            stage: None,
            error: None,
            timings: outcome.timings.as_millis(),
        };
        let log_id = store.log(&entry);

        let started = Instant::now();
        let rendered = refresh_report(store);
        let report_time = started.elapsed();
        outcome.timings.report = Some(report_time);
        match (rendered, log_id) {
            (Ok(()), Ok(id)) => {
                if let Err(e) = store.set_report_ms(id, report_time.as_secs_f64() * 1000.0) {
                    log::warn!("could not record report time: {e}");
                }
            }
            (Err(e), _) | (Ok(()), Err(e)) => {
                outcome.status = OutcomeStatus::Failed {
                    stage: Stage::Report,
                    error: e.to_string(),
                }
            }
        }
        outcome
    }

    /// Runs one file start to finish against `store`.
    pub fn process_file(
        &self,
        path: &Path,
        detected_at: Instant,
        store: &mut RecordStore,
    ) -> ProcessingOutcome {
        let prepared = self.prepare(path, detected_at, |h| store.contains(h));
        self.commit(prepared, store)
    }
}

/// Regenerates `report.md` / `report.html` from every stored row.
pub fn refresh_report(store: &RecordStore) -> Result<(), StoreError> {
    let rows = store.rows()?;
    let ctx = ReportContext {
        generated_at: Utc::now(),
        mean_latency_ms: store.mean_latency_ms()?,
    };
    store.write_report(&render_report(&rows, &ctx))
}
