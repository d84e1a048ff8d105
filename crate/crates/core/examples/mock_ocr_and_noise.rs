//! The ground-truth mock OCR backend and seeded confusion noise.
//!
//! `cargo run --example mock_ocr_and_noise`

use erpa::bench::generate_corpus;
use erpa::ocr::{apply_noise, blocks_to_text, extract_text, MockBackend, CONFUSION_PAIRS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tmp = tempfile::tempdir()?;
    let doc = &generate_corpus(1, 3, 0.0)[0];
    let image = doc.install_into(tmp.path())?;

    let text = extract_text(&MockBackend::new(), &image)?;
    println!(
        "{} via {}: {} blocks, mean confidence {:.3}",
        text.source_id,
        text.engine,
        text.blocks.len(),
        text.mean_confidence()
    );
    println!("{}\n", blocks_to_text(&text));

    println!("confusion pairs: {CONFUSION_PAIRS:?}");
    for rate in [0.03, 0.2] {
        let noisy = apply_noise(&text, 42, rate);
        println!("\nrate {rate}:\n{}", blocks_to_text(&noisy));
    }
    Ok(())
}
