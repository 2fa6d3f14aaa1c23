//! Import of per-frame indexed-palette PNG annotations.
//!
//! Pixel value 0 is background; value `k > 0` belongs to the object with
//! index label `k - 1`. Frames are read in file-name order.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{ObjectAnnotation, Video};
use crate::mask::{BinaryMask, MaskError};

#[derive(Debug, Error)]
pub enum PngImportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Decode {
        path: PathBuf,
        #[source]
        source: png::DecodingError,
    },
    #[error("{path}: unsupported png layout {color:?} at {depth} bits")]
    Unsupported {
        path: PathBuf,
        color: png::ColorType,
        depth: u8,
    },
    #[error("{path}: frame is {got:?}, expected {expected:?}")]
    SizeMismatch {
        path: PathBuf,
        got: (usize, usize),
        expected: (usize, usize),
    },
    #[error("no png frames in {0}")]
    NoFrames(PathBuf),
    #[error(transparent)]
    Mask(#[from] MaskError),
}

struct IndexFrame {
    height: usize,
    width: usize,
    values: Vec<u8>,
}

fn read_index_png(path: &Path) -> Result<IndexFrame, PngImportError> {
    let file = File::open(path).map_err(|source| PngImportError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut decoder = png::Decoder::new(file);
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(|source| PngImportError::Decode {
        path: path.to_path_buf(),
        source,
    })?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|source| PngImportError::Decode {
        path: path.to_path_buf(),
        source,
    })?;
    let depth = info.bit_depth as u8;
    if !matches!(info.color_type, png::ColorType::Indexed | png::ColorType::Grayscale) || depth > 8 {
        return Err(PngImportError::Unsupported {
            path: path.to_path_buf(),
            color: info.color_type,
            depth,
        });
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let per_byte = 8 / depth as usize;
    let mask = ((1u16 << depth) - 1) as u8;
    let mut values = Vec::with_capacity(w * h);
    for row in buf[..info.line_size * h].chunks(info.line_size) {
        for x in 0..w {
            let byte = row[x / per_byte];
            let shift = 8 - depth as usize * (x % per_byte + 1);
            values.push((byte >> shift) & mask);
        }
    }
    Ok(IndexFrame {
        height: h,
        width: w,
        values,
    })
}

/// Builds a video (objects and tracks, no expressions) from a directory of
/// index PNGs. Object ids are the index labels rendered as decimal strings.
pub fn import_palette_pngs(dir: &Path) -> Result<Video, PngImportError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|source| PngImportError::Io {
            path: dir.to_path_buf(),
            source,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|x| x.to_str())
                .is_some_and(|x| x.eq_ignore_ascii_case("png"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(PngImportError::NoFrames(dir.to_path_buf()));
    }

    let frames: Vec<IndexFrame> = paths.iter().map(|p| read_index_png(p)).collect::<Result<_, _>>()?;
    let (h, w) = (frames[0].height, frames[0].width);
    let mut video = Video::new(frames.len(), h, w);
    video.frames = paths
        .iter()
        .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
        .collect();

    let mut per_label: BTreeMap<u8, Vec<(usize, BinaryMask)>> = BTreeMap::new();
    for (fi, (frame, path)) in frames.iter().zip(&paths).enumerate() {
        if (frame.height, frame.width) != (h, w) {
            return Err(PngImportError::SizeMismatch {
                path: path.clone(),
                got: (frame.height, frame.width),
                expected: (h, w),
            });
        }
        let mut masks: BTreeMap<u8, BinaryMask> = BTreeMap::new();
        for (i, &v) in frame.values.iter().enumerate() {
            if v == 0 {
                continue;
            }
            masks
                .entry(v)
                .or_insert_with(|| BinaryMask::empty(h, w).expect("nonzero dims"))
                .set(i / w, i % w, true);
        }
        for (v, m) in masks {
            per_label.entry(v).or_default().push((fi, m));
        }
    }

    for (value, masks) in per_label {
        let label = value as u32 - 1;
        let mut track = video.empty_track()?;
        for (fi, m) in masks {
            track.insert_mask(fi, &m)?;
        }
        let id = label.to_string();
        video.objects.insert(
            id.clone(),
            ObjectAnnotation {
                object_id: id,
                index_label: label,
                category: String::new(),
                appearance: String::new(),
                motion: String::new(),
                track,
            },
        );
    }
    Ok(video)
}
