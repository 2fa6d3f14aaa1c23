//! Splitting long source videos into annotation-ready clips.
//!
//! A source is cut into consecutive bins of `bin_size` frames. Only the first
//! and last bins are used, and each contributes its leading `clip_len`
//! frames. Frame indices are 0-based.

use std::path::{Path, PathBuf};

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClipSpec {
    pub source_id: String,
    /// Inclusive start index in the source.
    pub start_frame: usize,
    pub length: usize,
}

impl ClipSpec {
    pub fn end_frame(&self) -> usize {
        self.start_frame + self.length
    }

    pub fn frames(&self) -> std::ops::Range<usize> {
        self.start_frame..self.end_frame()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipConfig {
    pub bin_size: usize,
    pub clip_len: usize,
    /// Clips shorter than this are dropped.
    pub min_len: usize,
}

impl Default for ClipConfig {
    fn default() -> Self {
        Self {
            bin_size: 1000,
            clip_len: 500,
            min_len: 100,
        }
    }
}

/// Clip list for a source of `source_frame_count` frames. Zero-sized bins or
/// clips yield nothing.
pub fn extract_clips(source_id: &str, source_frame_count: usize, config: &ClipConfig) -> Vec<ClipSpec> {
    if source_frame_count == 0 || config.bin_size == 0 || config.clip_len == 0 {
        return Vec::new();
    }
    let bins = source_frame_count.div_ceil(config.bin_size);
    let mut chosen = vec![0];
    if bins > 1 {
        chosen.push(bins - 1);
    }
    chosen
        .into_iter()
        .filter_map(|b| {
            let start = b * config.bin_size;
            let population = config.bin_size.min(source_frame_count - start);
            let length = config.clip_len.min(population);
            (length >= config.min_len.max(1)).then(|| ClipSpec {
                source_id: source_id.to_string(),
                start_frame: start,
                length,
            })
        })
        .collect()
}

#[derive(Debug, Error)]
#[error("frame {index}: {reason}")]
pub struct FrameReadError {
    pub index: usize,
    pub reason: String,
}

/// Random access to the frames of one source video.
pub trait FrameSource {
    type Frame;

    fn frame_count(&self) -> usize;

    fn read_frame(&self, index: usize) -> Result<Self::Frame, FrameReadError>;
}

impl<T: Clone> FrameSource for [T] {
    type Frame = T;

    fn frame_count(&self) -> usize {
        self.len()
    }

    fn read_frame(&self, index: usize) -> Result<T, FrameReadError> {
        self.get(index).cloned().ok_or_else(|| FrameReadError {
            index,
            reason: format!("source has {} frames", self.len()),
        })
    }
}

impl<T: Clone> FrameSource for Vec<T> {
    type Frame = T;

    fn frame_count(&self) -> usize {
        self.len()
    }

    fn read_frame(&self, index: usize) -> Result<T, FrameReadError> {
        self[..].read_frame(index)
    }
}

/// Reads exactly the frames of `spec`, in order.
pub fn materialize_clip<S: FrameSource + ?Sized>(spec: &ClipSpec, source: &S) -> Result<Vec<S::Frame>, FrameReadError> {
    if spec.end_frame() > source.frame_count() {
        return Err(FrameReadError {
            index: spec.end_frame() - 1,
            reason: format!(
                "clip [{}, {}) exceeds source of {} frames",
                spec.start_frame,
                spec.end_frame(),
                source.frame_count()
            ),
        });
    }
    spec.frames().map(|i| source.read_frame(i)).collect()
}

const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg"];

/// Ordered list of frame image paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameList {
    pub paths: Vec<PathBuf>,
}

impl FrameList {
    /// Image files in `dir`, sorted by file name.
    pub fn from_dir(dir: &Path) -> std::io::Result<Self> {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension()
                    .and_then(|x| x.to_str())
                    .is_some_and(|x| IMAGE_EXTENSIONS.contains(&x.to_ascii_lowercase().as_str()))
            })
            .collect();
        paths.sort();
        Ok(Self { paths })
    }

    /// One path per non-empty line; relative paths resolve against the
    /// manifest's directory.
    pub fn from_manifest(file: &Path) -> std::io::Result<Self> {
        let base = file.parent().unwrap_or(Path::new("."));
        let text = std::fs::read_to_string(file)?;
        let paths = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| base.join(l))
            .collect();
        Ok(Self { paths })
    }

    /// Directory listing or manifest, whichever `path` is.
    pub fn open(path: &Path) -> std::io::Result<Self> {
        if path.is_dir() {
            Self::from_dir(path)
        } else {
            Self::from_manifest(path)
        }
    }

    pub fn names(&self) -> Vec<String> {
        self.paths
            .iter()
            .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
            .collect()
    }
}

impl FrameSource for FrameList {
    type Frame = PathBuf;

    fn frame_count(&self) -> usize {
        self.paths.len()
    }

    fn read_frame(&self, index: usize) -> Result<PathBuf, FrameReadError> {
        self.paths[..].read_frame(index)
    }
}

/// Decodes frames of a [`FrameList`] to RGB on access.
pub struct DecodedFrames(pub FrameList);

impl FrameSource for DecodedFrames {
    type Frame = RgbImage;

    fn frame_count(&self) -> usize {
        self.0.frame_count()
    }

    fn read_frame(&self, index: usize) -> Result<RgbImage, FrameReadError> {
        let path = self.0.read_frame(index)?;
        image::open(&path).map(|img| img.to_rgb8()).map_err(|e| FrameReadError {
            index,
            reason: format!("{}: {e}", path.display()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spans(n: usize, cfg: &ClipConfig) -> Vec<(usize, usize)> {
        extract_clips("s", n, cfg)
            .iter()
            .map(|c| (c.start_frame, c.end_frame()))
            .collect()
    }

    #[test]
    fn worked_examples() {
        let cfg = ClipConfig::default();
        assert_eq!(spans(2500, &cfg), [(0, 500), (2000, 2500)]);
        assert_eq!(spans(1000, &cfg), [(0, 500)]);
        assert_eq!(spans(1200, &cfg), [(0, 500), (1000, 1200)]);
        let strict = ClipConfig { min_len: 300, ..cfg };
        assert_eq!(spans(1200, &strict), [(0, 500)]);
    }

    #[test]
    fn short_sources() {
        let cfg = ClipConfig::default();
        assert_eq!(spans(1, &ClipConfig { min_len: 1, ..cfg }), [(0, 1)]);
        assert_eq!(spans(99, &cfg), []);
        assert_eq!(spans(0, &cfg), []);
    }

    #[test]
    fn materialize() {
        let source: Vec<u32> = (0..500).collect();
        let one = ClipSpec {
            source_id: "s".into(),
            start_frame: 7,
            length: 1,
        };
        assert_eq!(materialize_clip(&one, &source[..]).unwrap(), vec![7]);
        let all = ClipSpec {
            source_id: "s".into(),
            start_frame: 0,
            length: 500,
        };
        assert_eq!(materialize_clip(&all, &source[..]).unwrap(), source);
        let over = ClipSpec {
            source_id: "s".into(),
            start_frame: 400,
            length: 101,
        };
        let err = materialize_clip(&over, &source[..]).unwrap_err();
        assert_eq!(err.index, 500);
    }

    #[test]
    fn frame_list_sources() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["b.png", "a.png", "notes.txt"] {
            std::fs::write(dir.path().join(name), b"").unwrap();
        }
        let list = FrameList::from_dir(dir.path()).unwrap();
        assert_eq!(list.names(), ["a.png", "b.png"]);

        let manifest = dir.path().join("frames.txt");
        std::fs::write(&manifest, "x/1.jpg\n\nx/2.jpg\n").unwrap();
        let list = FrameList::open(&manifest).unwrap();
        assert_eq!(list.frame_count(), 2);
        assert_eq!(list.paths[0], dir.path().join("x/1.jpg"));

        // empty file is not a decodable image
        let bad = FrameList::from_dir(dir.path()).unwrap();
        assert!(DecodedFrames(bad).read_frame(0).is_err());
    }
}
