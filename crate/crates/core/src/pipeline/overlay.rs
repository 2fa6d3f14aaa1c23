//! Colored mask overlays with index labels, as shown to the vision model.

use std::collections::BTreeMap;
use std::io::Cursor;

use image::{ImageFormat, Rgb, RgbImage};
use thiserror::Error;

use crate::mask::{BinaryMask, MaskTrack};

/// Twelve hues 30 degrees apart, ordered so that consecutive labels sit
/// 150 degrees apart on the color wheel.
pub const PALETTE: [[u8; 3]; 12] = [
    [255, 0, 0],
    [0, 255, 128],
    [255, 0, 255],
    [128, 255, 0],
    [0, 0, 255],
    [255, 128, 0],
    [0, 255, 255],
    [255, 0, 128],
    [0, 255, 0],
    [128, 0, 255],
    [255, 255, 0],
    [0, 128, 255],
];

pub const GLYPH_COLOR: [u8; 3] = [255, 255, 255];
const GLYPH_H: usize = 5;
const GLYPH_W: usize = 3;

#[rustfmt::skip]
const DIGITS: [[u8; GLYPH_H]; 10] = [
    [0b111, 0b101, 0b101, 0b101, 0b111],
    [0b010, 0b110, 0b010, 0b010, 0b111],
    [0b111, 0b001, 0b111, 0b100, 0b111],
    [0b111, 0b001, 0b111, 0b001, 0b111],
    [0b101, 0b101, 0b111, 0b001, 0b001],
    [0b111, 0b100, 0b111, 0b001, 0b111],
    [0b111, 0b100, 0b111, 0b101, 0b111],
    [0b111, 0b001, 0b001, 0b001, 0b001],
    [0b111, 0b101, 0b111, 0b101, 0b111],
    [0b111, 0b101, 0b111, 0b001, 0b111],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverlayMode {
    /// Only the object with this index label is tinted and labeled.
    SingleObject(u32),
    AllObjects,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OverlayError {
    #[error("track for label {label} is {track:?} but the frame is {frame:?}")]
    ResolutionMismatch {
        label: u32,
        track: (usize, usize),
        frame: (usize, usize),
    },
    #[error("no track with index label {0}")]
    UnknownIndex(u32),
}

pub fn palette_color(label: u32) -> [u8; 3] {
    PALETTE[label as usize % PALETTE.len()]
}

/// Bounding-box size of the rendered label text, as (height, width).
pub fn glyph_size(label: u32) -> (usize, usize) {
    let n = label.to_string().len();
    (GLYPH_H, n * (GLYPH_W + 1) - 1)
}

fn blend(px: &mut Rgb<u8>, color: [u8; 3]) {
    for (c, k) in px.0.iter_mut().zip(color) {
        *c = (*c as u16 + k as u16).div_ceil(2) as u8;
    }
}

fn draw_label(img: &mut RgbImage, label: u32, mask: &BinaryMask) {
    let area = mask.area();
    let (gh, gw) = glyph_size(label);
    if area == 0 || area < gh * gw {
        return;
    }
    let (sr, sc) = mask
        .foreground()
        .fold((0usize, 0usize), |(r, c), (pr, pc)| (r + pr, c + pc));
    let cr = (sr as f64 / area as f64).round() as i64;
    let cc = (sc as f64 / area as f64).round() as i64;
    let top = cr - (gh as i64) / 2;
    let left = cc - (gw as i64) / 2;
    for (i, d) in label.to_string().bytes().enumerate() {
        let rows = DIGITS[(d - b'0') as usize];
        for (r, bits) in rows.iter().enumerate() {
            for c in 0..GLYPH_W {
                if bits >> (GLYPH_W - 1 - c) & 1 == 0 {
                    continue;
                }
                let y = top + r as i64;
                let x = left + (i * (GLYPH_W + 1) + c) as i64;
                if y >= 0 && x >= 0 && (y as u32) < img.height() && (x as u32) < img.width() {
                    img.put_pixel(x as u32, y as u32, Rgb(GLYPH_COLOR));
                }
            }
        }
    }
}

/// Overlay for frame `frame_index` of the clip.
pub fn render_overlay_frame(
    frame_index: usize,
    frame: &RgbImage,
    tracks: &BTreeMap<u32, MaskTrack>,
    mode: OverlayMode,
) -> Result<RgbImage, OverlayError> {
    let dims = (frame.height() as usize, frame.width() as usize);
    let selected: Vec<(u32, &MaskTrack)> = match mode {
        OverlayMode::SingleObject(label) => {
            let t = tracks.get(&label).ok_or(OverlayError::UnknownIndex(label))?;
            vec![(label, t)]
        }
        OverlayMode::AllObjects => tracks.iter().map(|(&l, t)| (l, t)).collect(),
    };
    for &(label, t) in &selected {
        if t.resolution() != dims {
            return Err(OverlayError::ResolutionMismatch {
                label,
                track: t.resolution(),
                frame: dims,
            });
        }
    }
    let mut out = frame.clone();
    let masks: Vec<(u32, BinaryMask)> = selected.iter().map(|&(l, t)| (l, t.mask(frame_index))).collect();
    for (label, mask) in &masks {
        let color = palette_color(*label);
        for (r, c) in mask.foreground() {
            blend(out.get_pixel_mut(c as u32, r as u32), color);
        }
    }
    for (label, mask) in &masks {
        draw_label(&mut out, *label, mask);
    }
    Ok(out)
}

/// Overlays for a whole clip; `frames[i]` is frame `i` of every track.
pub fn render_overlay(
    frames: &[RgbImage],
    tracks: &BTreeMap<u32, MaskTrack>,
    mode: OverlayMode,
) -> Result<Vec<RgbImage>, OverlayError> {
    frames
        .iter()
        .enumerate()
        .map(|(i, f)| render_overlay_frame(i, f, tracks, mode))
        .collect()
}

/// `count` frame indices spread evenly over `0..frame_count`, endpoints
/// included.
pub fn sample_frame_indices(frame_count: usize, count: usize) -> Vec<usize> {
    if frame_count == 0 || count == 0 {
        return Vec::new();
    }
    if frame_count <= count {
        return (0..frame_count).collect();
    }
    if count == 1 {
        return vec![0];
    }
    (0..count).map(|i| i * (frame_count - 1) / (count - 1)).collect()
}

pub fn encode_png(img: &RgbImage) -> Vec<u8> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)
        .expect("png encoding to memory");
    buf.into_inner()
}
