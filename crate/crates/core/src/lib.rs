//! Unattended processing of scanned identity documents.

pub mod bench;
pub mod config;
pub mod export;
pub mod extractor;
pub mod model;
pub mod ocr;
pub mod orchestrator;
pub mod watcher;
