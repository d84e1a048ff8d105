use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use anyhow::Context;
use chrono::Utc;
use clap::{Parser, Subcommand};

use erpa::bench::{self, BenchConfig};
use erpa::config::{ConfigError, Settings};
use erpa::export::{render_report, RecordStore, ReportContext};
use erpa::extractor::Extractor;
use erpa::ocr::sidecar::{serve, MockSidecarHandler};
use erpa::orchestrator::{build_backend, run_loop, PipelineError};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "erpa", version, about = "Unattended ID-document processing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Watch a directory and process every new image until interrupted.
    Watch {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run OCR and extraction on one image and print the record as JSON.
    Process {
        image: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        engine: Option<String>,
        /// `rules` or `llm-http`.
        #[arg(long)]
        strategy: Option<String>,
    },
    /// Render the report for a store. `.html` output selects HTML.
    Report {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Store directory; overrides the config.
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Time the pipeline over a synthetic corpus.
    Bench {
        #[arg(long, default_value_t = 20)]
        corpus_size: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 3)]
        runs: usize,
        #[arg(long)]
        engine: Option<String>,
        #[arg(long)]
        strategy: Option<String>,
        /// CSV with columns label,engine,total_seconds.
        #[arg(long)]
        external_baselines: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "erpa-bench")]
        work_dir: PathBuf,
    },
    /// Write a synthetic corpus (images plus ground truth) to a directory.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
    /// Serve the sidecar protocol on stdio from ground-truth files.
    #[command(hide = true)]
    SidecarMock {
        #[arg(long, value_delimiter = ',', default_value = "mock")]
        engines: Vec<String>,
    },
}

enum Failure {
    Config(String),
    Io(String),
    Other(anyhow::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Unreadable { .. } => Failure::Io(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::FatalConfig(m) => Failure::Config(m),
            PipelineError::FatalIo(m) => Failure::Io(m),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn settings(
    config: Option<&Path>,
    overrides: &[(&str, Option<&String>)],
) -> Result<Settings, Failure> {
    let base = match config {
        Some(p) => Settings::from_file(p)?,
        None => Settings::default(),
    };
    let mut s = base.with_env(std::env::vars())?;
    for (key, value) in overrides {
        if let Some(v) = value {
            s.set(key, v)?;
        }
    }
    Ok(s)
}

/// Writes to stdout; a reader that went away (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::Io(e.to_string())),
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Watch { config } => {
            let cfg = settings(config.as_deref(), &[])?.pipeline_config()?;
            let stop = Arc::new(AtomicBool::new(false));
            let flag = Arc::clone(&stop);
            ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst))
                .map_err(|e| Failure::Io(format!("cannot install interrupt handler: {e}")))?;
            let summary = run_loop(cfg, stop)?;
            eprintln!(
                "succeeded {}, duplicates {}, ignored {}, failed {}",
                summary.succeeded,
                summary.skipped_duplicate,
                summary.ignored_non_image,
                summary.failed
            );
        }
        Command::Process {
            image,
            config,
            engine,
            strategy,
        } => {
            let s = settings(
                config.as_deref(),
                &[
                    ("ocr.engine", engine.as_ref()),
                    ("extract.strategy", strategy.as_ref()),
                ],
            )?;
            let cfg = s.pipeline_config()?;
            let backend = build_backend(&cfg);
            let text = backend
                .extract(&image)
                .with_context(|| format!("OCR failed for {}", image.display()))?;
            let record = Extractor::new(cfg.strategy.clone())
                .extract(&text)
                .with_context(|| format!("extraction failed for {}", image.display()))?;
            let json = serde_json::to_string_pretty(&record).context("serializing record")?;
            emit(&format!("{json}\n"))?;
        }
        Command::Report { out, config, store } => {
            let dir = match store {
                Some(d) => d,
                None => settings(config.as_deref(), &[])?.store_dir(),
            };
            let store = RecordStore::open(&dir).map_err(|e| Failure::Io(e.to_string()))?;
            let rows = store.rows().map_err(|e| Failure::Io(e.to_string()))?;
            let ctx = ReportContext {
                generated_at: Utc::now(),
                mean_latency_ms: store
                    .mean_latency_ms()
                    .map_err(|e| Failure::Io(e.to_string()))?,
            };
            let doc = render_report(&rows, &ctx);
            let html = out
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("html"));
            let body = if html {
                doc.to_html()
            } else {
                doc.to_markdown()
            };
            std::fs::write(&out, body)
                .map_err(|e| Failure::Io(format!("{}: {e}", out.display())))?;
        }
        Command::Bench {
            corpus_size,
            seed,
            noise,
            runs,
            engine,
            strategy,
            external_baselines,
            config,
            work_dir,
        } => {
            if !(0.0..=1.0).contains(&noise) {
                return Err(Failure::Config(format!(
                    "--noise must be in [0,1], got {noise}"
                )));
            }
            let s = settings(
                config.as_deref(),
                &[
                    ("ocr.engine", engine.as_ref()),
                    ("extract.strategy", strategy.as_ref()),
                ],
            )?;
            let pcfg = s.pipeline_config()?;
            let external = match &external_baselines {
                Some(p) => bench::load_external_rows(p).map_err(|e| Failure::Io(e.to_string()))?,
                None => Vec::new(),
            };
            let corpus = bench::generate_corpus(corpus_size, seed, noise);
            let mut cfg = BenchConfig::new(&work_dir);
            cfg.engine = pcfg.engine;
            cfg.ocr = pcfg.ocr;
            cfg.strategy = pcfg.strategy;
            let report = bench::run_benchmark(&corpus, &cfg, runs).context("benchmark failed")?;
            let raw = work_dir.join("raw_timings.csv");
            report
                .write_raw_timings(&raw)
                .map_err(|e| Failure::Io(e.to_string()))?;
            emit(&bench::render_comparison(&report, &external))?;
            eprintln!("raw timings: {}", raw.display());
        }
        Command::Generate {
            out,
            count,
            seed,
            noise,
        } => {
            std::fs::create_dir_all(&out)
                .map_err(|e| Failure::Io(format!("{}: {e}", out.display())))?;
            for doc in bench::generate_corpus(count, seed, noise) {
                doc.install_into(&out)
                    .map_err(|e| Failure::Io(format!("{}: {e}", out.display())))?;
            }
        }
        Command::SidecarMock { engines } => {
            let handler = MockSidecarHandler { engines };
            let stdin = std::io::stdin().lock();
            let stdout = std::io::stdout().lock();
            serve(stdin, stdout, &handler).map_err(|e| Failure::Io(e.to_string()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("erpa: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Io(m)) => {
            eprintln!("erpa: {m}");
            ExitCode::from(EXIT_IO)
        }
        Err(Failure::Other(e)) => {
            eprintln!("erpa: {e:#}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
