use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::Serialize;

use super::{BenchError, SyntheticDoc};
use crate::export::RecordStore;
use crate::extractor::ExtractionStrategy;
use crate::model::EngineId;
use crate::orchestrator::{OcrSettings, OutcomeStatus, Pipeline, PipelineConfig, StageTimings};

pub const STAGE_NAMES: [&str; 5] = ["detect_to_start", "ocr", "extract", "store", "report"];

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub engine: EngineId,
    pub ocr: OcrSettings,
    pub strategy: ExtractionStrategy,
    /// Scratch directory; each run gets a fresh `run-<k>` subdirectory.
    pub work_dir: PathBuf,
    pub workers: usize,
    /// Row label in comparison tables. Defaults to `ERPA (<strategy>)`.
    pub label: Option<String>,
}

impl BenchConfig {
    pub fn new(work_dir: impl Into<PathBuf>) -> Self {
        Self {
            engine: EngineId::mock(),
            ocr: OcrSettings::default(),
            strategy: ExtractionStrategy::Rules,
            work_dir: work_dir.into(),
            workers: 1,
            label: None,
        }
    }

    fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| match &self.strategy {
            ExtractionStrategy::Rules => "ERPA (rules)".to_string(),
            ExtractionStrategy::LlmHttp(s) => format!("ERPA ({})", s.model),
        })
    }
}

/// One document in one run. Times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingSample {
    pub run: usize,
    pub source_id: String,
    pub detect_to_start: f64,
    pub ocr: f64,
    pub extract: f64,
    pub store: f64,
    pub report: f64,
    pub total: f64,
}

impl TimingSample {
    fn new(run: usize, source_id: String, t: &StageTimings) -> Self {
        let s = |d: Option<Duration>| d.unwrap_or_default().as_secs_f64();
        Self {
            run,
            source_id,
            detect_to_start: s(t.detect_to_start),
            ocr: s(t.ocr),
            extract: s(t.extract),
            store: s(t.store),
            report: s(t.report),
            total: t.total().as_secs_f64(),
        }
    }

    pub fn stage(&self, name: &str) -> Option<f64> {
        Some(match name {
            "detect_to_start" => self.detect_to_start,
            "ocr" => self.ocr,
            "extract" => self.extract,
            "store" => self.store,
            "report" => self.report,
            "total" => self.total,
            _ => return None,
        })
    }
}

/// Mean over runs of the per-run mean, seconds per document. `stddev` is the
/// sample standard deviation of the per-run means, absent for a single run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageStats {
    pub mean: f64,
    pub stddev: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub label: String,
    pub engine: EngineId,
    pub strategy: String,
    pub runs: usize,
    pub corpus_size: usize,
    /// `runs * corpus_size` samples, run-major in corpus order.
    pub samples: Vec<TimingSample>,
}

impl BenchReport {
    fn run_means(&self, stage: &str) -> Vec<f64> {
        (0..self.runs)
            .map(|run| {
                let xs: Vec<f64> = self
                    .samples
                    .iter()
                    .filter(|s| s.run == run)
                    .filter_map(|s| s.stage(stage))
                    .collect();
                xs.iter().sum::<f64>() / xs.len().max(1) as f64
            })
            .collect()
    }

    /// Statistics for a stage name from [`STAGE_NAMES`] or `"total"`.
    pub fn stats(&self, stage: &str) -> StageStats {
        let means = self.run_means(stage);
        let n = means.len() as f64;
        let mean = means.iter().sum::<f64>() / n.max(1.0);
        let stddev = (means.len() > 1)
            .then(|| (means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
        StageStats { mean, stddev }
    }

    /// Mean end-to-end seconds per document.
    pub fn mean_total_seconds(&self) -> f64 {
        self.stats("total").mean
    }

    pub fn write_raw_timings(&self, path: &Path) -> Result<(), BenchError> {
        let io = |e: csv::Error| BenchError::Io(format!("{}: {e}", path.display()));
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)
            .map_err(io)?;
        for s in &self.samples {
            w.serialize(s).map_err(io)?;
        }
        w.flush().map_err(|e| BenchError::Io(e.to_string()))
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> BenchError {
    BenchError::Io(format!("{}: {e}", path.display()))
}

/// Processes the corpus `runs` times, each time into a fresh store, calling
/// the pipeline directly (no watcher polling in the measured path).
pub fn run_benchmark(
    corpus: &[SyntheticDoc],
    cfg: &BenchConfig,
    runs: usize,
) -> Result<BenchReport, BenchError> {
    if corpus.is_empty() {
        return Err(BenchError::EmptyCorpus);
    }
    if runs == 0 {
        return Err(BenchError::NoRuns);
    }
    let mut samples = Vec::with_capacity(runs * corpus.len());
    for run in 0..runs {
        let dir = cfg.work_dir.join(format!("run-{run}"));
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        }
        let inbox = dir.join("inbox");
        fs::create_dir_all(&inbox).map_err(|e| io_err(&inbox, e))?;
        let paths = corpus
            .iter()
            .map(|d| d.install_into(&inbox))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| io_err(&inbox, e))?;

        let mut pcfg = PipelineConfig::new(&inbox, dir.join("store"));
        pcfg.engine = cfg.engine.clone();
        pcfg.ocr = cfg.ocr.clone();
        pcfg.strategy = cfg.strategy.clone();
        pcfg.workers = cfg.workers.max(1);
        pcfg.failure_dir = dir.join("failed");
        let pipeline = Pipeline::new(pcfg)?;
        let mut store =
            RecordStore::open(dir.join("store")).map_err(|e| BenchError::Io(e.to_string()))?;

        for (doc, path) in corpus.iter().zip(&paths) {
            let outcome = pipeline.process_file(path, Instant::now(), &mut store);
            if outcome.status != OutcomeStatus::Succeeded {
                return Err(BenchError::PipelineFailure {
                    run,
                    document: doc.file_name.clone(),
                    status: outcome.status.to_string(),
                });
            }
            samples.push(TimingSample::new(
                run,
                doc.file_name.clone(),
                &outcome.timings,
            ));
        }
        log::info!("benchmark run {} of {runs} done", run + 1);
    }
    Ok(BenchReport {
        label: cfg.label(),
        engine: cfg.engine.clone(),
        strategy: cfg.strategy.kind().to_string(),
        runs,
        corpus_size: corpus.len(),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::generate_corpus;

    #[test]
    fn samples_per_run_and_stddev_presence() {
        let tmp = tempfile::tempdir().unwrap();
        let corpus = generate_corpus(4, 11, 0.0);
        let cfg = BenchConfig::new(tmp.path());
        let report = run_benchmark(&corpus, &cfg, 2).unwrap();
        assert_eq!(report.samples.len(), 8);
        assert!(report.stats("total").stddev.is_some());
        let single = run_benchmark(&corpus, &cfg, 1).unwrap();
        assert_eq!(single.stats("ocr").stddev, None);
        let path = tmp.path().join("raw.csv");
        single.write_raw_timings(&path).unwrap();
        assert_eq!(fs::read_to_string(path).unwrap().lines().count(), 5);
    }

    #[test]
    fn preconditions() {
        let cfg = BenchConfig::new("/tmp/unused");
        assert!(matches!(
            run_benchmark(&[], &cfg, 3),
            Err(BenchError::EmptyCorpus)
        ));
        assert!(matches!(
            run_benchmark(&generate_corpus(1, 1, 0.0), &cfg, 0),
            Err(BenchError::NoRuns)
        ));
    }

    #[test]
    fn stats_from_raw_samples() {
        let sample = |run, total| TimingSample {
            run,
            source_id: String::new(),
            detect_to_start: 0.0,
            ocr: 0.0,
            extract: 0.0,
            store: 0.0,
            report: 0.0,
            total,
        };
        let report = BenchReport {
            label: "x".into(),
            engine: EngineId::mock(),
            strategy: "rules".into(),
            runs: 3,
            corpus_size: 2,
            samples: vec![
                sample(0, 1.0),
                sample(0, 3.0),
                sample(1, 2.0),
                sample(1, 4.0),
                sample(2, 3.0),
                sample(2, 5.0),
            ],
        };
        let s = report.stats("total");
        // run means 2, 3, 4
        assert!((s.mean - 3.0).abs() < 1e-12);
        assert!((s.stddev.unwrap() - 1.0).abs() < 1e-12);
    }
}
