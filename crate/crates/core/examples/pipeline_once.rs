//! One document at a time through hash, OCR, extraction and storage.
//!
//! `cargo run --example pipeline_once`

use std::fs;
use std::time::Instant;

use erpa::bench::generate_corpus;
use erpa::export::RecordStore;
use erpa::orchestrator::{Pipeline, PipelineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tmp = tempfile::tempdir()?;
    let inbox = tmp.path().join("inbox");
    fs::create_dir_all(&inbox)?;
    let cfg = PipelineConfig::new(&inbox, tmp.path().join("store"));
    let pipeline = Pipeline::new(cfg)?;
    let mut store = RecordStore::open(tmp.path().join("store"))?;

    let doc = &generate_corpus(1, 4, 0.0)[0];
    let image = doc.install_into(&inbox)?;
    let copy = inbox.join("same-bytes.bmp");
    fs::copy(&image, &copy)?;
    let stray = inbox.join("readme.txt");
    fs::write(&stray, "not a scan")?;

    for path in [&image, &copy, &stray] {
        let o = pipeline.process_file(path, Instant::now(), &mut store);
        println!(
            "{:<16} {:<18} total {:?}",
            path.file_name().unwrap().to_string_lossy(),
            o.status.label(),
            o.timings.total()
        );
        if let Some(r) = &o.record {
            println!("  {} born {} cpf {:?}", r.full_name, r.birth_date, r.cpf);
        }
    }
    println!("\n{}", fs::read_to_string(store.csv_path())?);
    Ok(())
}
