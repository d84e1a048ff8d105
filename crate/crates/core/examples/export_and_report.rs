//! Rows, CSV, the SQLite-backed record store and the rendered report.
//!
//! `cargo run --example export_and_report`

use chrono::Utc;
use erpa::bench::generate_corpus;
use erpa::export::{
    map_to_row, render_report, write_csv, AppendOutcome, RecordStore, ReportContext, RowMeta,
};
use erpa::model::{content_hash, EngineId};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = generate_corpus(3, 8, 0.0);
    let meta = RowMeta {
        processed_at: Utc::now(),
        engine: EngineId::mock(),
    };
    let rows: Vec<_> = corpus
        .iter()
        .map(|d| map_to_row(&d.record, &meta))
        .collect();

    let mut csv = Vec::new();
    write_csv(&mut csv, &rows)?;
    println!("{}", String::from_utf8(csv)?);

    let tmp = tempfile::tempdir()?;
    let mut store = RecordStore::open(tmp.path())?;
    for (doc, row) in corpus.iter().zip(&rows) {
        let hash = content_hash(&doc.image);
        let first = store.append_row(&hash, row)?;
        let again = store.append_row(&hash, row)?;
        println!("{}: {first:?}, then {again:?}", doc.file_name);
        assert_eq!(again, AppendOutcome::DuplicateSkipped);
    }
    println!("records in store: {}", store.record_count()?);

    let ctx = ReportContext {
        generated_at: Utc::now(),
        mean_latency_ms: 1.5,
    };
    let doc = render_report(&store.rows()?, &ctx);
    store.write_report(&doc)?;
    println!("\n{}", doc.to_markdown());
    println!(
        "written: {} and {}",
        store.report_path().display(),
        store.report_html_path().display()
    );
    Ok(())
}
