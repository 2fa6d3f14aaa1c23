//! Region similarity (J), boundary accuracy (F), their mean, and the two
//! reference mask losses (dice and pixel-wise binary cross-entropy).

use serde::{Deserialize, Serialize};

use crate::mask::{boundary_pixels, dilate_disc, BinaryMask, MaskError};

/// Contour tolerance as a fraction of the image diagonal.
pub const DEFAULT_TOLERANCE_RATIO: f64 = 0.008;

/// Probability clamp used by [`pixelwise_bce`].
pub const BCE_EPSILON: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameScore {
    pub j: f64,
    pub f: f64,
}

/// Per-expression averages over frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpressionScore {
    pub j_mean: f64,
    pub f_mean: f64,
    pub jf: f64,
    pub frame_count: usize,
}

impl ExpressionScore {
    /// Averages frame scores in slice order. An empty slice scores zero.
    pub fn from_frames(frames: &[FrameScore]) -> Self {
        if frames.is_empty() {
            return Self::from_means(0.0, 0.0, 0);
        }
        let n = frames.len() as f64;
        let j = frames.iter().map(|s| s.j).sum::<f64>() / n;
        let f = frames.iter().map(|s| s.f).sum::<f64>() / n;
        Self::from_means(j, f, frames.len())
    }

    pub fn from_means(j_mean: f64, f_mean: f64, frame_count: usize) -> Self {
        Self {
            j_mean,
            f_mean,
            jf: jf_score(j_mean, f_mean),
            frame_count,
        }
    }
}

fn counts(pred: &BinaryMask, gt: &BinaryMask) -> Result<(usize, usize, usize), MaskError> {
    pred.ensure_same_resolution(gt)?;
    let mut inter = 0;
    let mut p = 0;
    let mut g = 0;
    for (&a, &b) in pred.bits().iter().zip(gt.bits()) {
        p += a as usize;
        g += b as usize;
        inter += (a && b) as usize;
    }
    Ok((inter, p, g))
}

/// Intersection over union. Two empty masks score 1.
pub fn jaccard(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64, MaskError> {
    let (inter, p, g) = counts(pred, gt)?;
    let union = p + g - inter;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

pub fn dice_coefficient(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64, MaskError> {
    let (inter, p, g) = counts(pred, gt)?;
    if p + g == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (p + g) as f64)
}

/// Matching radius in pixels for a tolerance expressed as a fraction of the
/// image diagonal.
pub fn tolerance_radius(height: usize, width: usize, tolerance_ratio: f64) -> usize {
    let diag = ((height * height + width * width) as f64).sqrt();
    (tolerance_ratio * diag).ceil() as usize
}

/// Boundary F-measure with a disc tolerance of
/// `ceil(tolerance_ratio * diagonal)` pixels.
pub fn boundary_f(pred: &BinaryMask, gt: &BinaryMask, tolerance_ratio: f64) -> Result<f64, MaskError> {
    pred.ensure_same_resolution(gt)?;
    let radius = tolerance_radius(pred.height(), pred.width(), tolerance_ratio);
    let pred_b = boundary_pixels(pred);
    let gt_b = boundary_pixels(gt);
    let n_pred = pred_b.area();
    let n_gt = gt_b.area();
    match (n_pred, n_gt) {
        (0, 0) => return Ok(1.0),
        (0, _) | (_, 0) => return Ok(0.0),
        _ => {}
    }
    let gt_zone = dilate_disc(&gt_b, radius);
    let pred_zone = dilate_disc(&pred_b, radius);
    let hit_pred = matched(&pred_b, &gt_zone);
    let hit_gt = matched(&gt_b, &pred_zone);
    let precision = hit_pred as f64 / n_pred as f64;
    let recall = hit_gt as f64 / n_gt as f64;
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

fn matched(points: &BinaryMask, zone: &BinaryMask) -> usize {
    points.bits().iter().zip(zone.bits()).filter(|(&a, &b)| a && b).count()
}

pub fn frame_score(pred: &BinaryMask, gt: &BinaryMask, tolerance_ratio: f64) -> Result<FrameScore, MaskError> {
    Ok(FrameScore {
        j: jaccard(pred, gt)?,
        f: boundary_f(pred, gt, tolerance_ratio)?,
    })
}

/// J&F: the plain average of the two scores, on whatever scale they arrive in.
pub fn jf_score(j: f64, f: f64) -> f64 {
    (j + f) / 2.0
}

/// Mean binary cross-entropy of row-major probabilities against `gt`.
/// Probabilities are clamped to `[BCE_EPSILON, 1 - BCE_EPSILON]`.
pub fn pixelwise_bce(pred_probs: &[f64], gt: &BinaryMask) -> Result<f64, MaskError> {
    if pred_probs.len() != gt.bits().len() {
        return Err(MaskError::BitsLength {
            expected: gt.bits().len(),
            actual: pred_probs.len(),
        });
    }
    let total: f64 = pred_probs
        .iter()
        .zip(gt.bits())
        .map(|(&p, &y)| {
            let p = p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
            if y {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(total / pred_probs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(h: usize, w: usize, r0: usize, r1: usize, c0: usize, c1: usize) -> BinaryMask {
        BinaryMask::from_fn(h, w, |r, c| (r0..=r1).contains(&r) && (c0..=c1).contains(&c)).unwrap()
    }

    #[test]
    fn jaccard_examples() {
        let a = rect(4, 4, 0, 1, 0, 1);
        assert_eq!(jaccard(&a, &a).unwrap(), 1.0);
        let e = BinaryMask::empty(4, 4).unwrap();
        assert_eq!(jaccard(&e, &e).unwrap(), 1.0);
        assert_eq!(jaccard(&a, &e).unwrap(), 0.0);
        let b = rect(4, 4, 1, 2, 1, 2);
        assert!((jaccard(&a, &b).unwrap() - 1.0 / 7.0).abs() < 1e-15);
        assert!(jaccard(&a, &BinaryMask::empty(4, 5).unwrap()).is_err());
    }

    #[test]
    fn dice_examples() {
        let a = rect(4, 4, 0, 1, 0, 1);
        let b = rect(4, 4, 1, 2, 1, 2);
        let far = rect(4, 4, 3, 3, 3, 3);
        assert_eq!(dice_coefficient(&a, &a).unwrap(), 1.0);
        assert_eq!(dice_coefficient(&a, &far).unwrap(), 0.0);
        assert_eq!(dice_coefficient(&a, &b).unwrap(), 0.25);
        let e = BinaryMask::empty(4, 4).unwrap();
        assert_eq!(dice_coefficient(&e, &e).unwrap(), 1.0);
    }

    #[test]
    fn boundary_f_examples() {
        let a = rect(8, 8, 0, 2, 0, 2);
        assert_eq!(boundary_f(&a, &a, 0.008).unwrap(), 1.0);
        let e = BinaryMask::empty(8, 8).unwrap();
        assert_eq!(boundary_f(&e, &a, 0.008).unwrap(), 0.0);
        assert_eq!(boundary_f(&e, &e, 0.008).unwrap(), 1.0);
        // Frozen from a brute-force boundary matcher: 7 of 8 boundary
        // pixels match on each side.
        let shifted = rect(8, 8, 1, 3, 1, 3);
        assert_eq!(tolerance_radius(8, 8, 0.008), 1);
        assert!((boundary_f(&a, &shifted, 0.008).unwrap() - 0.875).abs() < 1e-12);
    }

    #[test]
    fn jf_examples() {
        assert!((jf_score(53.8, 57.7) - 55.75).abs() < 1e-9);
        assert!((jf_score(49.4, 50.8) - 50.1).abs() < 1e-9);
        assert_eq!(jf_score(0.0, 0.0), 0.0);
    }

    #[test]
    fn bce_examples() {
        let gt = rect(4, 4, 0, 1, 0, 3);
        let half = vec![0.5; 16];
        assert!((pixelwise_bce(&half, &gt).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);

        let exact: Vec<f64> = gt.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let v = pixelwise_bce(&exact, &gt).unwrap();
        assert!((v - -(1.0 - BCE_EPSILON).ln()).abs() < 1e-15);
        assert!(v > 0.0 && v < 2e-7);

        assert!(pixelwise_bce(&half[..15], &gt).is_err());
    }

    #[test]
    fn expression_score_averages() {
        let s = ExpressionScore::from_frames(&[FrameScore { j: 1.0, f: 0.5 }, FrameScore { j: 0.0, f: 0.5 }]);
        assert_eq!(s.j_mean, 0.5);
        assert_eq!(s.f_mean, 0.5);
        assert_eq!(s.jf, 0.5);
        assert_eq!(s.frame_count, 2);
    }
}
