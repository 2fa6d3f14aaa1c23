use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::PipelineError;

/// Stage outputs on disk, one canonical JSON file per video and stage at
/// `<root>/<video_id>/stage<n>.json`.
#[derive(Debug, Clone)]
pub struct StageStore {
    root: PathBuf,
}

impl StageStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, video_id: &str, stage: u8) -> PathBuf {
        self.root.join(video_id).join(format!("stage{stage}.json"))
    }

    pub fn exists(&self, video_id: &str, stage: u8) -> bool {
        self.path(video_id, stage).is_file()
    }

    pub fn save<T: Serialize>(&self, video_id: &str, stage: u8, value: &T) -> Result<(), PipelineError> {
        let path = self.path(video_id, stage);
        let text = crate::dataset::canonical_string(value);
        crate::io::write_atomic(&path, text.as_bytes()).map_err(|e| PipelineError::StageFile {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn load<T: DeserializeOwned>(&self, video_id: &str, stage: u8) -> Result<Option<T>, PipelineError> {
        let path = self.path(video_id, stage);
        if !path.is_file() {
            return Ok(None);
        }
        let err = |message: String| PipelineError::StageFile {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(&path).map_err(|e| err(e.to_string()))?;
        serde_json::from_str(&text).map(Some).map_err(|e| err(e.to_string()))
    }
}
