use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{source_id_of, OcrBackend, OcrError, TextBlock, TextExtraction};
use crate::model::EngineId;

/// Ground-truth file format, shared with the sidecar wire schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub blocks: Vec<TextBlock>,
}

#[derive(Debug, thiserror::Error)]
pub enum MockError {
    #[error("no ground-truth file at {0}")]
    MissingGroundTruth(PathBuf),
    #[error("malformed ground-truth file {path}: {reason}")]
    MalformedGroundTruth { path: PathBuf, reason: String },
}

/// `<document>.gt.json`, beside the image.
pub fn ground_truth_path(document: &Path) -> PathBuf {
    let mut name = document.as_os_str().to_owned();
    name.push(".gt.json");
    PathBuf::from(name)
}

/// Reads the blocks listed in the document's ground-truth file.
pub fn mock_load(document: &Path) -> Result<TextExtraction, MockError> {
    let started = Instant::now();
    let gt_path = ground_truth_path(document);
    let raw = match std::fs::read_to_string(&gt_path) {
        Ok(s) => s,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(MockError::MissingGroundTruth(gt_path))
        }
        Err(e) => {
            return Err(MockError::MalformedGroundTruth {
                path: gt_path,
                reason: e.to_string(),
            })
        }
    };
    let gt: GroundTruth =
        serde_json::from_str(&raw).map_err(|e| MockError::MalformedGroundTruth {
            path: gt_path.clone(),
            reason: e.to_string(),
        })?;
    for block in &gt.blocks {
        block
            .check()
            .map_err(|reason| MockError::MalformedGroundTruth {
                path: gt_path.clone(),
                reason,
            })?;
    }
    Ok(TextExtraction {
        source_id: source_id_of(document),
        engine: EngineId::mock(),
        blocks: gt.blocks,
        engine_latency: started.elapsed(),
    })
}

/// Replays ground-truth files. An optional fixed latency can be injected to
/// stand in for a real engine.
#[derive(Debug, Clone)]
pub struct MockBackend {
    engine: EngineId,
    injected_latency: Duration,
}

impl Default for MockBackend {
    fn default() -> Self {
        Self::new()
    }
}

impl MockBackend {
    pub fn new() -> Self {
        Self {
            engine: EngineId::mock(),
            injected_latency: Duration::ZERO,
        }
    }

    pub fn with_latency(latency: Duration) -> Self {
        Self {
            injected_latency: latency,
            ..Self::new()
        }
    }
}

impl OcrBackend for MockBackend {
    fn engine(&self) -> &EngineId {
        &self.engine
    }

    fn extract(&self, document: &Path) -> Result<TextExtraction, OcrError> {
        let started = Instant::now();
        if !self.injected_latency.is_zero() {
            std::thread::sleep(self.injected_latency);
        }
        let mut t = mock_load(document).map_err(|e| OcrError::EngineFailure(e.to_string()))?;
        t.engine_latency = started.elapsed();
        Ok(t)
    }
}
