//! Binary masks, the column-major run-length codec, and the small set of
//! morphology operations the metrics are built from.
//!
//! Pixels of a [`BinaryMask`] are stored row-major. [`RleMask`] counts are
//! column-major and always start with a background run, which may be zero.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MaskError {
    #[error("mask dimensions must be at least 1x1, got {height}x{width}")]
    InvalidDimensions { height: usize, width: usize },
    #[error("expected {expected} pixels, got {actual}")]
    BitsLength { expected: usize, actual: usize },
    #[error("rle counts sum to {actual}, expected {expected}")]
    CountSumMismatch { expected: u64, actual: u64 },
    #[error("rle count at position {position} is zero")]
    InteriorZeroCount { position: usize },
    #[error("resolution mismatch: {left:?} vs {right:?}")]
    ResolutionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("frame index {index} out of range for a track of {frame_count} frames")]
    FrameOutOfRange { index: usize, frame_count: usize },
}

/// A foreground/background mask for a single frame.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    /// All-background mask.
    pub fn empty(height: usize, width: usize) -> Result<Self, MaskError> {
        check_dims(height, width)?;
        Ok(Self {
            height,
            width,
            bits: vec![false; height * width],
        })
    }

    pub fn full(height: usize, width: usize) -> Result<Self, MaskError> {
        check_dims(height, width)?;
        Ok(Self {
            height,
            width,
            bits: vec![true; height * width],
        })
    }

    /// Builds a mask from row-major bits.
    pub fn from_bits(height: usize, width: usize, bits: Vec<bool>) -> Result<Self, MaskError> {
        check_dims(height, width)?;
        if bits.len() != height * width {
            return Err(MaskError::BitsLength {
                expected: height * width,
                actual: bits.len(),
            });
        }
        Ok(Self { height, width, bits })
    }

    /// Builds a mask by evaluating `f(row, col)` for every pixel.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self, MaskError> {
        check_dims(height, width)?;
        let mut bits = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                bits.push(f(r, c));
            }
        }
        Ok(Self { height, width, bits })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    /// Number of foreground pixels.
    pub fn area(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// `(row, col)` of every foreground pixel in row-major order.
    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i / w, i % w))
    }

    /// True when every foreground pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.resolution() == other.resolution() && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn ensure_same_resolution(&self, other: &BinaryMask) -> Result<(), MaskError> {
        if self.resolution() != other.resolution() {
            return Err(MaskError::ResolutionMismatch {
                left: self.resolution(),
                right: other.resolution(),
            });
        }
        Ok(())
    }
}

fn check_dims(height: usize, width: usize) -> Result<(), MaskError> {
    if height == 0 || width == 0 {
        return Err(MaskError::InvalidDimensions { height, width });
    }
    Ok(())
}

/// Column-major run-length encoded mask.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RleMask {
    height: usize,
    width: usize,
    counts: Vec<u32>,
}

impl RleMask {
    /// Validates the count invariants: the sum covers every pixel and only
    /// the leading count may be zero.
    pub fn new(height: usize, width: usize, counts: Vec<u32>) -> Result<Self, MaskError> {
        check_dims(height, width)?;
        if let Some(pos) = counts.iter().skip(1).position(|&c| c == 0) {
            return Err(MaskError::InteriorZeroCount { position: pos + 1 });
        }
        let actual: u64 = counts.iter().map(|&c| c as u64).sum();
        let expected = (height * width) as u64;
        if actual != expected {
            return Err(MaskError::CountSumMismatch { expected, actual });
        }
        Ok(Self { height, width, counts })
    }

    /// An all-background encoding.
    pub fn empty(height: usize, width: usize) -> Result<Self, MaskError> {
        check_dims(height, width)?;
        Ok(Self {
            height,
            width,
            counts: vec![(height * width) as u32],
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Foreground pixel count, read off the odd runs.
    pub fn area(&self) -> u64 {
        self.counts.iter().skip(1).step_by(2).map(|&c| c as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.area() == 0
    }
}

pub fn rle_encode(mask: &BinaryMask) -> RleMask {
    let (h, w) = mask.resolution();
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u32;
    for c in 0..w {
        for r in 0..h {
            let v = mask.get(r, c);
            if v != current {
                counts.push(run);
                run = 0;
                current = v;
            }
            run += 1;
        }
    }
    counts.push(run);
    RleMask {
        height: h,
        width: w,
        counts,
    }
}

pub fn rle_decode(rle: &RleMask) -> Result<BinaryMask, MaskError> {
    let (h, w) = rle.resolution();
    let expected = (h * w) as u64;
    let actual: u64 = rle.counts.iter().map(|&c| c as u64).sum();
    if actual != expected {
        return Err(MaskError::CountSumMismatch { expected, actual });
    }
    let mut mask = BinaryMask::empty(h, w)?;
    let mut idx = 0usize;
    let mut value = false;
    for &count in &rle.counts {
        if value {
            for k in idx..idx + count as usize {
                // column-major flat index
                mask.bits[(k % h) * w + k / h] = true;
            }
        }
        idx += count as usize;
        value = !value;
    }
    Ok(mask)
}

#[derive(Serialize, Deserialize)]
struct RleJson {
    size: [usize; 2],
    counts: Vec<u32>,
}

impl Serialize for RleMask {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        RleJson {
            size: [self.height, self.width],
            counts: self.counts.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RleMask {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = RleJson::deserialize(deserializer)?;
        RleMask::new(raw.size[0], raw.size[1], raw.counts).map_err(serde::de::Error::custom)
    }
}

fn zip_bits(a: &BinaryMask, b: &BinaryMask, op: impl Fn(bool, bool) -> bool) -> Result<BinaryMask, MaskError> {
    a.ensure_same_resolution(b)?;
    Ok(BinaryMask {
        height: a.height,
        width: a.width,
        bits: a.bits.iter().zip(&b.bits).map(|(&x, &y)| op(x, y)).collect(),
    })
}

pub fn mask_union(a: &BinaryMask, b: &BinaryMask) -> Result<BinaryMask, MaskError> {
    zip_bits(a, b, |x, y| x || y)
}

pub fn mask_intersection(a: &BinaryMask, b: &BinaryMask) -> Result<BinaryMask, MaskError> {
    zip_bits(a, b, |x, y| x && y)
}

/// Foreground pixels with at least one 4-neighbour in the background.
/// Pixels on the image border always qualify.
pub fn boundary_pixels(mask: &BinaryMask) -> BinaryMask {
    let (h, w) = mask.resolution();
    let mut out = BinaryMask {
        height: h,
        width: w,
        bits: vec![false; h * w],
    };
    for r in 0..h {
        for c in 0..w {
            if !mask.get(r, c) {
                continue;
            }
            let edge = r == 0 || c == 0 || r + 1 == h || c + 1 == w;
            if edge || !mask.get(r - 1, c) || !mask.get(r + 1, c) || !mask.get(r, c - 1) || !mask.get(r, c + 1) {
                out.bits[r * w + c] = true;
            }
        }
    }
    out
}

/// Half-widths of the Euclidean disc of `radius`, one per row offset
/// `-radius..=radius`.
fn disc_half_widths(radius: usize) -> Vec<usize> {
    let r2 = (radius * radius) as u64;
    (0..=2 * radius)
        .map(|i| {
            let dy = i.abs_diff(radius) as u64;
            (r2 - dy * dy).isqrt() as usize
        })
        .collect()
}

/// Sets every pixel within Euclidean distance `radius` of a foreground pixel.
pub fn dilate_disc(mask: &BinaryMask, radius: usize) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let (h, w) = mask.resolution();
    // Any radius past the diagonal reaches every pixel.
    let diag = ((h - 1) * (h - 1) + (w - 1) * (w - 1)) as u64;
    let radius = radius.min(diag.isqrt() as usize + 1);
    let half = disc_half_widths(radius);
    let mut out = BinaryMask {
        height: h,
        width: w,
        bits: vec![false; h * w],
    };
    for (r, c) in mask.foreground() {
        let r0 = r.saturating_sub(radius);
        let r1 = (r + radius).min(h - 1);
        for rr in r0..=r1 {
            let hw = half[rr + radius - r];
            let c0 = c.saturating_sub(hw);
            let c1 = (c + hw).min(w - 1);
            out.bits[rr * w + c0..=rr * w + c1].fill(true);
        }
    }
    out
}

/// Per-object sequence of frame masks. Frames without a stored mask are empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskTrack {
    frame_count: usize,
    height: usize,
    width: usize,
    masks: BTreeMap<usize, RleMask>,
}

impl MaskTrack {
    pub fn new(frame_count: usize, height: usize, width: usize) -> Result<Self, MaskError> {
        check_dims(height, width)?;
        Ok(Self {
            frame_count,
            height,
            width,
            masks: BTreeMap::new(),
        })
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn insert(&mut self, frame: usize, rle: RleMask) -> Result<(), MaskError> {
        if frame >= self.frame_count {
            return Err(MaskError::FrameOutOfRange {
                index: frame,
                frame_count: self.frame_count,
            });
        }
        if rle.resolution() != self.resolution() {
            return Err(MaskError::ResolutionMismatch {
                left: self.resolution(),
                right: rle.resolution(),
            });
        }
        if rle.is_empty() {
            self.masks.remove(&frame);
        } else {
            self.masks.insert(frame, rle);
        }
        Ok(())
    }

    pub fn insert_mask(&mut self, frame: usize, mask: &BinaryMask) -> Result<(), MaskError> {
        self.insert(frame, rle_encode(mask))
    }

    pub fn rle(&self, frame: usize) -> Option<&RleMask> {
        self.masks.get(&frame)
    }

    /// Decoded mask for `frame`; empty when nothing is stored.
    pub fn mask(&self, frame: usize) -> BinaryMask {
        match self.masks.get(&frame) {
            // Stored masks are validated on insert, so decoding cannot fail.
            Some(rle) => rle_decode(rle).expect("validated rle"),
            None => BinaryMask {
                height: self.height,
                width: self.width,
                bits: vec![false; self.height * self.width],
            },
        }
    }

    /// Stored (nonempty) frames in ascending order.
    pub fn stored_frames(&self) -> impl Iterator<Item = (usize, &RleMask)> {
        self.masks.iter().map(|(&k, v)| (k, v))
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    /// Frame-wise union with another track of identical shape.
    pub fn union(&self, other: &MaskTrack) -> Result<MaskTrack, MaskError> {
        if self.resolution() != other.resolution() {
            return Err(MaskError::ResolutionMismatch {
                left: self.resolution(),
                right: other.resolution(),
            });
        }
        let mut out = MaskTrack::new(self.frame_count.max(other.frame_count), self.height, self.width)?;
        let frames: std::collections::BTreeSet<usize> = self.masks.keys().chain(other.masks.keys()).copied().collect();
        for f in frames {
            let merged = match (self.masks.get(&f), other.masks.get(&f)) {
                (Some(a), None) => a.clone(),
                (None, Some(b)) => b.clone(),
                _ => rle_encode(&mask_union(&self.mask(f), &other.mask(f))?),
            };
            out.insert(f, merged)?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(h: usize, w: usize, on: &[(usize, usize)]) -> BinaryMask {
        let mut m = BinaryMask::empty(h, w).unwrap();
        for &(r, c) in on {
            m.set(r, c, true);
        }
        m
    }

    #[test]
    fn encode_uniform_masks() {
        assert_eq!(rle_encode(&BinaryMask::full(2, 2).unwrap()).counts(), &[0, 4]);
        assert_eq!(rle_encode(&BinaryMask::empty(2, 2).unwrap()).counts(), &[4]);
    }

    #[test]
    fn encode_is_column_major() {
        let m = mask(2, 2, &[(0, 1)]);
        assert_eq!(rle_encode(&m).counts(), &[2, 1, 1]);
    }

    #[test]
    fn decode_examples() {
        let full = rle_decode(&RleMask::new(2, 2, vec![0, 4]).unwrap()).unwrap();
        assert_eq!(full, BinaryMask::full(2, 2).unwrap());
        let empty = rle_decode(&RleMask::new(2, 2, vec![4]).unwrap()).unwrap();
        assert!(empty.is_empty());
        let one = rle_decode(&RleMask::new(2, 2, vec![2, 1, 1]).unwrap()).unwrap();
        assert_eq!(one, mask(2, 2, &[(0, 1)]));
    }

    #[test]
    fn bad_counts_rejected() {
        assert_eq!(
            RleMask::new(2, 2, vec![1, 1]),
            Err(MaskError::CountSumMismatch { expected: 4, actual: 2 })
        );
        assert_eq!(
            RleMask::new(2, 2, vec![2, 0, 2]),
            Err(MaskError::InteriorZeroCount { position: 1 })
        );
        // decode still checks the sum even on a hand-built value
        let bogus = RleMask {
            height: 2,
            width: 2,
            counts: vec![3],
        };
        assert!(matches!(rle_decode(&bogus), Err(MaskError::CountSumMismatch { .. })));
    }

    #[test]
    fn rle_json_shape() {
        let rle = rle_encode(&mask(2, 2, &[(0, 1)]));
        let s = serde_json::to_string(&rle).unwrap();
        assert_eq!(s, r#"{"size":[2,2],"counts":[2,1,1]}"#);
        let back: RleMask = serde_json::from_str(&s).unwrap();
        assert_eq!(back, rle);
        assert!(serde_json::from_str::<RleMask>(r#"{"size":[2,2],"counts":[2,1]}"#).is_err());
    }

    #[test]
    fn set_ops() {
        let a = mask(3, 3, &[(0, 0)]);
        let b = mask(3, 3, &[(2, 2)]);
        let e = BinaryMask::empty(3, 3).unwrap();
        assert_eq!(mask_union(&a, &e).unwrap(), a);
        assert_eq!(mask_intersection(&a, &a).unwrap(), a);
        let u = mask_union(&a, &b).unwrap();
        assert_eq!(u.area(), 2);
        assert!(u.get(0, 0) && u.get(2, 2));
        assert!(matches!(
            mask_union(&a, &BinaryMask::empty(2, 3).unwrap()),
            Err(MaskError::ResolutionMismatch { .. })
        ));
    }

    #[test]
    fn boundary_examples() {
        let single = BinaryMask::full(1, 1).unwrap();
        assert_eq!(boundary_pixels(&single), single);

        let b = boundary_pixels(&BinaryMask::full(4, 4).unwrap());
        assert_eq!(b.area(), 12);
        assert!(!b.get(1, 1) && !b.get(1, 2) && !b.get(2, 1) && !b.get(2, 2));

        assert!(boundary_pixels(&BinaryMask::empty(4, 4).unwrap()).is_empty());
    }

    #[test]
    fn dilate_examples() {
        let m = mask(5, 5, &[(2, 2)]);
        assert_eq!(dilate_disc(&m, 0), m);
        let plus = dilate_disc(&m, 1);
        assert_eq!(plus, mask(5, 5, &[(2, 2), (1, 2), (3, 2), (2, 1), (2, 3)]));
        let corner = mask(5, 7, &[(0, 0)]);
        assert_eq!(dilate_disc(&corner, 9), BinaryMask::full(5, 7).unwrap());
        assert_eq!(dilate_disc(&corner, 1000), BinaryMask::full(5, 7).unwrap());
    }

    #[test]
    fn track_absent_frames_are_empty() {
        let mut t = MaskTrack::new(3, 2, 2).unwrap();
        t.insert_mask(1, &mask(2, 2, &[(1, 1)])).unwrap();
        assert!(t.mask(0).is_empty());
        assert_eq!(t.mask(1).area(), 1);
        assert!(matches!(
            t.insert_mask(3, &mask(2, 2, &[])),
            Err(MaskError::FrameOutOfRange { .. })
        ));
        assert!(matches!(
            t.insert_mask(0, &BinaryMask::empty(3, 2).unwrap()),
            Err(MaskError::ResolutionMismatch { .. })
        ));
    }
}
