use std::fs;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, unbounded, Receiver, Sender};

use super::{OutcomeStatus, Pipeline, PipelineConfig, PipelineError, Prepared, ProcessingOutcome};
use crate::export::{RecordStore, StoreReader};
use crate::watcher::DirectoryWatcher;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub succeeded: usize,
    pub skipped_duplicate: usize,
    pub ignored_non_image: usize,
    pub failed: usize,
}

impl RunSummary {
    fn count(&mut self, status: &OutcomeStatus) {
        match status {
            OutcomeStatus::Succeeded => self.succeeded += 1,
            OutcomeStatus::SkippedDuplicate => self.skipped_duplicate += 1,
            OutcomeStatus::IgnoredNonImage => self.ignored_non_image += 1,
            OutcomeStatus::Failed { .. } => self.failed += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.succeeded + self.skipped_duplicate + self.ignored_non_image + self.failed
    }
}

fn stop_requested(stop: &AtomicBool, cfg: &PipelineConfig) -> bool {
    stop.load(Ordering::SeqCst) || cfg.stop_file.as_ref().is_some_and(|p| p.exists())
}

/// Sleeps up to `total`, waking early on a stop request.
fn nap(total: Duration, stop: &AtomicBool, cfg: &PipelineConfig) {
    let until = Instant::now() + total;
    while Instant::now() < until && !stop_requested(stop, cfg) {
        thread::sleep((until - Instant::now()).min(Duration::from_millis(20)));
    }
}

/// Watches, processes and stores until `stop` is set or the stop file
/// appears, then drains queued work and returns.
pub fn run_loop(cfg: PipelineConfig, stop: Arc<AtomicBool>) -> Result<RunSummary, PipelineError> {
    let pipeline = Arc::new(Pipeline::new(cfg)?);
    run_pipeline(pipeline, stop, None)
}

pub(crate) fn run_pipeline(
    pipeline: Arc<Pipeline>,
    stop: Arc<AtomicBool>,
    outcomes: Option<Sender<ProcessingOutcome>>,
) -> Result<RunSummary, PipelineError> {
    let cfg = pipeline.config().clone();
    for dir in [&cfg.watch.root, &cfg.failure_dir] {
        fs::create_dir_all(dir)
            .map_err(|e| PipelineError::FatalIo(format!("{}: {e}", dir.display())))?;
    }
    let mut store =
        RecordStore::open(&cfg.store_dir).map_err(|e| PipelineError::FatalIo(e.to_string()))?;
    let stop_file = cfg.stop_file.as_ref().and_then(|p| {
        fs::canonicalize(p.parent()?)
            .ok()
            .map(|d| (d, p.file_name().map(|n| n.to_owned())))
    });

    let (job_tx, job_rx) = bounded::<(PathBuf, Instant)>(cfg.queue_capacity);
    let (done_tx, done_rx) = unbounded::<Prepared>();

    let mut workers = Vec::with_capacity(cfg.workers);
    for n in 0..cfg.workers {
        let reader =
            StoreReader::open(&cfg.store_dir).map_err(|e| PipelineError::FatalIo(e.to_string()))?;
        let (rx, tx, p) = (job_rx.clone(), done_tx.clone(), Arc::clone(&pipeline));
        workers.push(
            thread::Builder::new()
                .name(format!("erpa-worker-{n}"))
                .spawn(move || worker(p, reader, rx, tx))
                .map_err(|e| PipelineError::FatalIo(e.to_string()))?,
        );
    }
    drop(job_rx);
    drop(done_tx);

    let writer_pipeline = Arc::clone(&pipeline);
    let writer = thread::Builder::new()
        .name("erpa-store-writer".into())
        .spawn(move || {
            let mut summary = RunSummary::default();
            for prepared in done_rx {
                let outcome = writer_pipeline.commit(prepared, &mut store);
                summary.count(&outcome.status);
                if let Some(tx) = &outcomes {
                    let _ = tx.send(outcome);
                }
            }
            summary
        })
        .map_err(|e| PipelineError::FatalIo(e.to_string()))?;

    let mut watcher = DirectoryWatcher::new(cfg.watch.clone());
    log::info!("watching {}", cfg.watch.root.display());
    while !stop_requested(&stop, &cfg) {
        match watcher.poll() {
            Ok(ready) => {
                for path in ready {
                    let is_stop_file = stop_file.as_ref().is_some_and(|(dir, name)| {
                        path.file_name() == name.as_deref()
                            && path
                                .parent()
                                .and_then(|p| fs::canonicalize(p).ok())
                                .as_ref()
                                == Some(dir)
                    });
                    if is_stop_file {
                        continue;
                    }
                    if job_tx.send((path, Instant::now())).is_err() {
                        break;
                    }
                }
            }
            Err(e) => log::error!("poll failed: {e}"),
        }
        nap(cfg.watch.poll_interval, &stop, &cfg);
    }
    log::info!("stop requested, draining in-flight work");
    drop(job_tx);
    for w in workers {
        let _ = w.join();
    }
    writer
        .join()
        .map_err(|_| PipelineError::FatalIo("store writer panicked".into()))
}

fn worker(
    pipeline: Arc<Pipeline>,
    reader: StoreReader,
    jobs: Receiver<(PathBuf, Instant)>,
    done: Sender<Prepared>,
) {
    for (path, detected_at) in jobs {
        let prepared = pipeline.prepare(&path, detected_at, |h| reader.contains(h));
        if done.send(prepared).is_err() {
            return;
        }
    }
}

/// A loop running on a background thread, with access to every outcome as
/// the store writer produces it.
#[derive(Debug)]
pub struct LoopHandle {
    stop: Arc<AtomicBool>,
    outcomes: Receiver<ProcessingOutcome>,
    thread: Option<thread::JoinHandle<Result<RunSummary, PipelineError>>>,
}

impl LoopHandle {
    pub fn spawn(cfg: PipelineConfig) -> Result<Self, PipelineError> {
        Self::spawn_pipeline(Pipeline::new(cfg)?)
    }

    pub fn spawn_pipeline(pipeline: Pipeline) -> Result<Self, PipelineError> {
        let stop = Arc::new(AtomicBool::new(false));
        let (tx, rx) = unbounded();
        let (pipeline, flag) = (Arc::new(pipeline), Arc::clone(&stop));
        let thread = thread::Builder::new()
            .name("erpa-loop".into())
            .spawn(move || run_pipeline(pipeline, flag, Some(tx)))
            .map_err(|e| PipelineError::FatalIo(e.to_string()))?;
        Ok(Self {
            stop,
            outcomes: rx,
            thread: Some(thread),
        })
    }

    pub fn outcomes(&self) -> &Receiver<ProcessingOutcome> {
        &self.outcomes
    }

    /// Waits for `n` outcomes or until `timeout` passes, returning what arrived.
    pub fn collect(&self, n: usize, timeout: Duration) -> Vec<ProcessingOutcome> {
        let deadline = Instant::now() + timeout;
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            match self.outcomes.recv_deadline(deadline) {
                Ok(o) => out.push(o),
                Err(_) => break,
            }
        }
        out
    }

    pub fn stop_flag(&self) -> Arc<AtomicBool> {
        Arc::clone(&self.stop)
    }

    /// Requests a stop and waits for the drain to finish.
    pub fn stop(mut self) -> Result<RunSummary, PipelineError> {
        self.stop.store(true, Ordering::SeqCst);
        self.join_inner()
    }

    fn join_inner(&mut self) -> Result<RunSummary, PipelineError> {
        match self.thread.take() {
            Some(t) => t
                .join()
                .unwrap_or_else(|_| Err(PipelineError::FatalIo("loop thread panicked".into()))),
            None => Ok(RunSummary::default()),
        }
    }
}

impl Drop for LoopHandle {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = self.join_inner();
    }
}
