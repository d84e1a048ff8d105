//! The long-running loop: watcher, worker pool and single writer.
//!
//! Files are dropped while the loop runs; outcomes stream back as they
//! complete. A document whose text cannot be parsed is moved aside.
//!
//! `cargo run --example watch_loop`

use std::fs;
use std::time::Duration;

use erpa::bench::generate_corpus;
use erpa::ocr::{ground_truth_path, BBox, GroundTruth, TextBlock};
use erpa::orchestrator::{LoopHandle, OutcomeStatus, PipelineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tmp = tempfile::tempdir()?;
    let inbox = tmp.path().join("inbox");
    fs::create_dir_all(&inbox)?;
    let mut cfg = PipelineConfig::new(&inbox, tmp.path().join("store"));
    cfg.workers = 4;
    cfg.watch.poll_interval = Duration::from_millis(100);
    cfg.watch.stability_window = Duration::from_millis(100);
    let failed_dir = cfg.failure_dir.clone();

    let handle = LoopHandle::spawn(cfg)?;
    for doc in generate_corpus(8, 12, 0.0) {
        doc.install_into(&inbox)?;
    }
    let smudge = inbox.join("smudged.png");
    let gt = GroundTruth {
        blocks: vec![TextBlock::new(
            "#### ####",
            0.2,
            BBox::new(0.0, 0.0, 1.0, 1.0),
        )],
    };
    fs::write(ground_truth_path(&smudge), serde_json::to_string(&gt)?)?;
    fs::write(&smudge, b"smudge")?;

    let mut images = 0;
    while images < 9 {
        let Ok(o) = handle.outcomes().recv_timeout(Duration::from_secs(10)) else {
            break;
        };
        if o.status == OutcomeStatus::IgnoredNonImage {
            continue;
        }
        images += 1;
        println!(
            "{:<14} {}",
            o.path.file_name().unwrap().to_string_lossy(),
            o.status
        );
    }
    let summary = handle.stop()?;
    println!("\n{summary:?}");
    println!(
        "moved aside: {:?}",
        fs::read_dir(&failed_dir)?
            .map(|e| e.unwrap().file_name())
            .collect::<Vec<_>>()
    );
    Ok(())
}
