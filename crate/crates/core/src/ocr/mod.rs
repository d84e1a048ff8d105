//! OCR backend abstraction.
//!
//! A backend turns an image path into a [`TextExtraction`]: ordered text blocks
//! with geometry and confidence. Two implementations ship here: a
//! deterministic [`MockBackend`] that replays a ground-truth file stored next
//! to the image, and a [`SidecarBackend`] that talks NDJSON to an external
//! OCR process.

mod mock;
mod noise;
pub mod sidecar;

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::model::EngineId;

pub use mock::{ground_truth_path, mock_load, GroundTruth, MockBackend, MockError};
pub use noise::{apply_noise, confusions_for, CONFUSION_PAIRS};
pub use sidecar::{SidecarBackend, SidecarClient, SidecarError, SidecarRequest, SidecarResponse};

/// Axis-aligned box in pixels, `[x0, y0, x1, y1]` on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn is_well_formed(&self) -> bool {
        [self.x0, self.y0, self.x1, self.y1]
            .iter()
            .all(|v| v.is_finite())
            && self.x0 <= self.x1
            && self.y0 <= self.y1
    }
}

impl From<[f64; 4]> for BBox {
    fn from(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x0, b.y0, b.x1, b.y1]
    }
}

/// One recognized text fragment. Wire form: `{"text", "conf", "bbox"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextBlock {
    pub text: String,
    #[serde(rename = "conf")]
    pub confidence: f64,
    pub bbox: BBox,
}

impl TextBlock {
    pub fn new(text: impl Into<String>, confidence: f64, bbox: BBox) -> Self {
        Self {
            text: text.into(),
            confidence,
            bbox,
        }
    }

    /// Checks the confidence range and box ordering.
    pub fn check(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(format!(
                "block {:?} has confidence {} outside [0,1]",
                self.text, self.confidence
            ));
        }
        if !self.bbox.is_well_formed() {
            return Err(format!(
                "block {:?} has malformed bbox {:?}",
                self.text, self.bbox
            ));
        }
        Ok(())
    }
}

/// OCR output for one document, blocks in engine reading order.
#[derive(Debug, Clone, PartialEq)]
pub struct TextExtraction {
    pub source_id: String,
    pub engine: EngineId,
    pub blocks: Vec<TextBlock>,
    pub engine_latency: Duration,
}

impl TextExtraction {
    /// Mean block confidence; 1.0 when there are no blocks.
    pub fn mean_confidence(&self) -> f64 {
        mean_confidence(&self.blocks)
    }
}

pub fn mean_confidence(blocks: &[TextBlock]) -> f64 {
    if blocks.is_empty() {
        1.0
    } else {
        blocks.iter().map(|b| b.confidence).sum::<f64>() / blocks.len() as f64
    }
}

/// Joins block texts with `\n` in block order, without a trailing newline.
pub fn blocks_to_text(t: &TextExtraction) -> String {
    t.blocks
        .iter()
        .map(|b| b.text.as_str())
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OcrError {
    #[error("OCR backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("OCR engine failure: {0}")]
    EngineFailure(String),
    #[error("OCR request timed out after {0:?}")]
    Timeout(Duration),
}

pub trait OcrBackend: Send + Sync {
    fn engine(&self) -> &EngineId;

    fn extract(&self, document: &Path) -> Result<TextExtraction, OcrError>;
}

/// Runs `backend` on `document`. Failures are always errors, never an empty
/// extraction.
pub fn extract_text(backend: &dyn OcrBackend, document: &Path) -> Result<TextExtraction, OcrError> {
    backend.extract(document)
}

pub(crate) fn source_id_of(document: &Path) -> String {
    document
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| document.display().to_string())
}
