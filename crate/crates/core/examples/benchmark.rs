//! Per-stage latency over a synthetic corpus, compared with published times.
//!
//! `cargo run --release --example benchmark`

use erpa::bench::{
    generate_corpus, render_comparison_with, run_benchmark, savings_fraction, time_ratio,
    BenchConfig, ExternalRow, STAGE_NAMES,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tmp = tempfile::tempdir()?;
    let corpus = generate_corpus(20, 42, 0.0);
    let report = run_benchmark(&corpus, &BenchConfig::new(tmp.path()), 3)?;

    for stage in STAGE_NAMES.iter().chain(&["total"]) {
        let s = report.stats(stage);
        println!(
            "{stage:<16} {:>8.3} ms  sd {:>7.3}",
            s.mean * 1000.0,
            s.stddev.unwrap_or(0.0) * 1000.0
        );
    }

    // Seconds per document reported for a manual process and two RPA tools.
    let external = [
        ExternalRow::new("manual", "", 160.0),
        ExternalRow::new("UiPath", "paddleocr", 16.8),
        ExternalRow::new("UiPath", "doctr", 16.7),
        ExternalRow::new("Automation Anywhere", "paddleocr", 18.52),
        ExternalRow::new("Automation Anywhere", "doctr", 18.65),
        ExternalRow::new("ERPA", "paddleocr", 9.94),
        ExternalRow::new("ERPA", "doctr", 10.16),
    ];
    // Ratios are taken against the published ERPA times within each engine.
    println!(
        "\n{}",
        render_comparison_with(Some(&report), &external, "ERPA")
    );

    println!(
        "savings vs manual at 9.94 s: {:.2}%",
        savings_fraction(160.0, 9.94)? * 100.0
    );
    println!(
        "9.94 s as a share of 16.8 s: {:.2}%",
        time_ratio(9.94, 16.8)? * 100.0
    );
    Ok(())
}
