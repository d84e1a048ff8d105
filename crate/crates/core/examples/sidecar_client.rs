//! Talking NDJSON to an OCR sidecar process.
//!
//! The sidecar here is this crate's own binary in mock mode, so no OCR model
//! is needed. Point `SidecarBackend` at `python3 ocr_sidecar.py` for real
//! engines.
//!
//! `cargo build --bin erpa && cargo run --example sidecar_client`

use std::path::PathBuf;
use std::time::Duration;

use erpa::bench::generate_corpus;
use erpa::model::EngineId;
use erpa::ocr::{extract_text, SidecarBackend, SidecarClient};

fn erpa_binary() -> PathBuf {
    let exe = std::env::current_exe().expect("current exe");
    // target/<profile>/examples/<name> -> target/<profile>/erpa
    exe.parent()
        .and_then(|p| p.parent())
        .expect("target dir")
        .join("erpa")
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bin = erpa_binary();
    if !bin.exists() {
        eprintln!("build the binary first: cargo build --bin erpa");
        std::process::exit(1);
    }
    let cmd: Vec<String> = vec![
        bin.display().to_string(),
        "sidecar-mock".into(),
        "--engines".into(),
        "paddleocr,doctr".into(),
    ];

    let mut client = SidecarClient::spawn(&cmd, Duration::from_secs(10))?;
    println!("sidecar engines: {:?}", client.engines());
    let missing = client.ocr("doctr", "/no/such/file.png".as_ref())?;
    println!(
        "ocr on a missing file: ok={} error={:?}",
        missing.ok, missing.error
    );

    let tmp = tempfile::tempdir()?;
    let image = generate_corpus(1, 1, 0.0)[0].install_into(tmp.path())?;
    let backend = SidecarBackend::new(EngineId::new("paddleocr")?, cmd, 2, Duration::from_secs(10));
    let text = extract_text(&backend, &image)?;
    println!(
        "{} blocks from {} in {:?}",
        text.blocks.len(),
        text.engine,
        text.engine_latency
    );
    for b in &text.blocks {
        println!("  {:.2}  {}", b.confidence, b.text);
    }
    Ok(())
}
