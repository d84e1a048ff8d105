use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use erpa::bench::generate_corpus;
use erpa::export::{read_csv, RecordStore};
use erpa::model::EngineId;
use erpa::ocr::{ground_truth_path, BBox, GroundTruth, TextBlock};
use erpa::orchestrator::{
    LoopHandle, OutcomeStatus, Pipeline, PipelineConfig, PipelineError, ProcessingOutcome, Stage,
};

fn fast_config(root: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::new(root.join("inbox"), root.join("store"));
    cfg.watch.poll_interval = Duration::from_millis(20);
    cfg.watch.stability_window = Duration::from_millis(20);
    cfg.failure_dir = root.join("failed");
    cfg
}

/// Waits for `n` outcomes other than ignored non-images (ground-truth
/// companions and stray files also produce outcomes).
fn collect_images(handle: &LoopHandle, n: usize, timeout: Duration) -> Vec<ProcessingOutcome> {
    let deadline = Instant::now() + timeout;
    let mut out = Vec::new();
    while out.len() < n {
        match handle.outcomes().recv_deadline(deadline) {
            Ok(o) if o.status == OutcomeStatus::IgnoredNonImage => {}
            Ok(o) => out.push(o),
            Err(_) => break,
        }
    }
    out
}

fn write_junk(dir: &Path, name: &str) {
    let img = dir.join(name);
    fs::write(&img, name.as_bytes()).unwrap();
    let gt = GroundTruth {
        blocks: vec![TextBlock::new(
            "illegible smudge",
            0.4,
            BBox::new(0.0, 0.0, 10.0, 10.0),
        )],
    };
    fs::write(ground_truth_path(&img), serde_json::to_string(&gt).unwrap()).unwrap();
}

#[test]
fn loop_with_workers_handles_mixed_inbox() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = fast_config(tmp.path());
    cfg.workers = 3;
    let inbox = cfg.watch.root.clone();
    fs::create_dir_all(&inbox).unwrap();

    let corpus = generate_corpus(12, 77, 0.0);
    for d in &corpus {
        d.install_into(&inbox).unwrap();
    }
    write_junk(&inbox, "junk.png");
    fs::write(inbox.join("notes.txt"), "hello").unwrap();
    // Same bytes as the first document under another name.
    fs::write(inbox.join("copy.bmp"), &corpus[0].image).unwrap();
    fs::copy(
        ground_truth_path(&inbox.join(&corpus[0].file_name)),
        ground_truth_path(&inbox.join("copy.bmp")),
    )
    .unwrap();

    let handle = LoopHandle::spawn(cfg.clone()).unwrap();
    let outcomes = collect_images(&handle, 14, Duration::from_secs(20));
    let summary = handle.stop().unwrap();
    assert_eq!(outcomes.len(), 14);
    assert_eq!(summary.succeeded, 12);
    assert_eq!(summary.skipped_duplicate, 1);
    // notes.txt plus one .gt.json per image
    assert_eq!(summary.ignored_non_image, 15);
    assert_eq!(summary.failed, 1);

    let junk = outcomes
        .iter()
        .find(|o| o.path.ends_with("junk.png"))
        .unwrap();
    assert!(matches!(
        junk.status,
        OutcomeStatus::Failed {
            stage: Stage::Extract,
            ..
        }
    ));
    assert!(cfg.failure_dir.join("junk.png").exists());
    assert!(!inbox.join("junk.png").exists());

    for o in outcomes
        .iter()
        .filter(|o| o.status == OutcomeStatus::Succeeded)
    {
        assert!(o.timings.is_complete(), "{:?}", o.timings);
        assert!(o.record_id.is_some());
    }

    let store = RecordStore::open(&cfg.store_dir).unwrap();
    assert_eq!(store.record_count().unwrap(), 12);
    // every outcome is logged, ignored files included
    assert_eq!(store.log_count().unwrap(), 29);
    let csv_rows = read_csv(fs::File::open(store.csv_path()).unwrap()).unwrap();
    assert_eq!(csv_rows, store.rows().unwrap());
    let report = fs::read_to_string(store.report_path()).unwrap();
    assert!(report.contains("Documents processed: 12\n"));
    assert!(store.report_html_path().exists());
}

#[test]
fn restart_reprocesses_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = fast_config(tmp.path());
    fs::create_dir_all(&cfg.watch.root).unwrap();
    for d in generate_corpus(5, 3, 0.0) {
        d.install_into(&cfg.watch.root).unwrap();
    }
    let first = LoopHandle::spawn(cfg.clone()).unwrap();
    assert_eq!(collect_images(&first, 5, Duration::from_secs(10)).len(), 5);
    first.stop().unwrap();

    let second = LoopHandle::spawn(cfg.clone()).unwrap();
    let again = collect_images(&second, 5, Duration::from_secs(10));
    let summary = second.stop().unwrap();
    assert_eq!(summary.skipped_duplicate, 5);
    assert!(again
        .iter()
        .all(|o| o.status == OutcomeStatus::SkippedDuplicate));
    assert_eq!(
        RecordStore::open(&cfg.store_dir)
            .unwrap()
            .record_count()
            .unwrap(),
        5
    );
}

#[test]
fn stop_file_ends_the_loop() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = fast_config(tmp.path());
    let stop = cfg.watch.root.join("STOP");
    cfg.stop_file = Some(stop.clone());
    fs::create_dir_all(&cfg.watch.root).unwrap();
    let handle = LoopHandle::spawn(cfg).unwrap();
    fs::write(&stop, "").unwrap();
    let deadline = Instant::now() + Duration::from_secs(10);
    // The loop exits by itself: the outcome channel disconnects.
    while handle.outcomes().recv_deadline(deadline).is_ok() {}
    assert!(Instant::now() < deadline);
    assert_eq!(handle.stop().unwrap().total(), 0);
}

#[test]
fn unusable_store_is_fatal_io() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = fast_config(tmp.path());
    fs::create_dir_all(&cfg.watch.root).unwrap();
    cfg.store_dir = tmp.path().join("occupied");
    fs::write(&cfg.store_dir, "a file, not a directory").unwrap();
    let handle = LoopHandle::spawn(cfg).unwrap();
    assert!(matches!(handle.stop(), Err(PipelineError::FatalIo(_))));
}

#[test]
fn process_file_through_sidecar_engine() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = fast_config(tmp.path());
    cfg.engine = EngineId::new("paddleocr").unwrap();
    cfg.ocr.sidecar_cmd = vec![
        env!("CARGO_BIN_EXE_erpa").into(),
        "sidecar-mock".into(),
        "--engines".into(),
        "paddleocr".into(),
    ];
    fs::create_dir_all(&cfg.watch.root).unwrap();
    let doc = &generate_corpus(1, 8, 0.0)[0];
    let path = doc.install_into(&cfg.watch.root).unwrap();

    let pipeline = Pipeline::new(cfg.clone()).unwrap();
    let mut store = RecordStore::open(&cfg.store_dir).unwrap();
    let outcome = pipeline.process_file(&path, Instant::now(), &mut store);
    assert_eq!(
        outcome.status,
        OutcomeStatus::Succeeded,
        "{}",
        outcome.status
    );
    assert_eq!(outcome.record.as_ref(), Some(&doc.record));
    let rows = store.rows().unwrap();
    assert_eq!(rows[0].engine, "paddleocr");
}
