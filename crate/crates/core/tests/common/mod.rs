//! Independent oracles and fixtures shared by the integration suites.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::Rng;
use rvos_core::dataset::{
    DatasetMeta, Direction, Expression, ExpressionType, InteractionInfo, InteractionLevel, ObjectAnnotation, Video,
};
use rvos_core::mask::{BinaryMask, MaskTrack};

pub type Pixel = (usize, usize);

pub fn pixel_set(m: &BinaryMask) -> HashSet<Pixel> {
    let mut s = HashSet::new();
    for r in 0..m.height() {
        for c in 0..m.width() {
            if m.get(r, c) {
                s.insert((r, c));
            }
        }
    }
    s
}

pub fn oracle_jaccard(a: &BinaryMask, b: &BinaryMask) -> f64 {
    let (a, b) = (pixel_set(a), pixel_set(b));
    let union = a.union(&b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

pub fn oracle_dice(a: &BinaryMask, b: &BinaryMask) -> f64 {
    let (a, b) = (pixel_set(a), pixel_set(b));
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    2.0 * a.intersection(&b).count() as f64 / (a.len() + b.len()) as f64
}

/// Foreground pixels touching the background or the image edge through a
/// 4-neighbour.
pub fn oracle_boundary(m: &BinaryMask) -> Vec<Pixel> {
    let (h, w) = (m.height() as i64, m.width() as i64);
    let fg = |r: i64, c: i64| r >= 0 && c >= 0 && r < h && c < w && m.get(r as usize, c as usize);
    let mut out = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if fg(r, c)
                && [(-1, 0), (1, 0), (0, -1), (0, 1)]
                    .iter()
                    .any(|(dr, dc)| !fg(r + dr, c + dc))
            {
                out.push((r as usize, c as usize));
            }
        }
    }
    out
}

fn within(p: Pixel, others: &[Pixel], radius: f64) -> bool {
    others.iter().any(|&q| {
        let dr = p.0 as f64 - q.0 as f64;
        let dc = p.1 as f64 - q.1 as f64;
        (dr * dr + dc * dc).sqrt() <= radius
    })
}

/// Boundary F by direct distance search between boundary point sets.
pub fn oracle_boundary_f(pred: &BinaryMask, gt: &BinaryMask, tolerance_ratio: f64) -> f64 {
    let h = pred.height() as f64;
    let w = pred.width() as f64;
    let radius = (tolerance_ratio * (h * h + w * w).sqrt()).ceil();
    let pb = oracle_boundary(pred);
    let gb = oracle_boundary(gt);
    if pb.is_empty() && gb.is_empty() {
        return 1.0;
    }
    if pb.is_empty() || gb.is_empty() {
        return 0.0;
    }
    let precision = pb.iter().filter(|&&p| within(p, &gb, radius)).count() as f64 / pb.len() as f64;
    let recall = gb.iter().filter(|&&g| within(g, &pb, radius)).count() as f64 / gb.len() as f64;
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Column-major run lengths starting with a background run.
pub fn oracle_rle_counts(m: &BinaryMask) -> Vec<u32> {
    let mut seq = Vec::with_capacity(m.height() * m.width());
    for c in 0..m.width() {
        for r in 0..m.height() {
            seq.push(m.get(r, c));
        }
    }
    let mut counts = vec![0u32];
    let mut cur = false;
    for v in seq {
        if v == cur {
            *counts.last_mut().unwrap() += 1;
        } else {
            counts.push(1);
            cur = v;
        }
    }
    counts
}

/// Random mask of the given size: either pixel noise at a random density or a
/// union of a few rectangles and discs.
pub fn random_mask(rng: &mut impl Rng, h: usize, w: usize) -> BinaryMask {
    match rng.gen_range(0..4) {
        0 => {
            let p: f64 = rng.gen();
            BinaryMask::from_fn(h, w, |_, _| rng.gen_bool(p)).unwrap()
        }
        1 => BinaryMask::empty(h, w).unwrap(),
        _ => {
            let mut m = BinaryMask::empty(h, w).unwrap();
            for _ in 0..rng.gen_range(1..=3) {
                let (r0, c0) = (rng.gen_range(0..h), rng.gen_range(0..w));
                let (r1, c1) = (rng.gen_range(r0..h), rng.gen_range(c0..w));
                let disc = rng.gen_bool(0.5);
                let (cr, cc) = ((r0 + r1) as f64 / 2.0, (c0 + c1) as f64 / 2.0);
                let rad = ((r1 - r0).min(c1 - c0) as f64 / 2.0).max(0.5);
                for r in r0..=r1 {
                    for c in c0..=c1 {
                        let inside = !disc || ((r as f64 - cr).powi(2) + (c as f64 - cc).powi(2)) <= rad * rad;
                        if inside {
                            m.set(r, c, true);
                        }
                    }
                }
            }
            m
        }
    }
}

pub fn random_sized_mask(rng: &mut impl Rng, max: usize) -> BinaryMask {
    let h = rng.gen_range(1..=max);
    let w = rng.gen_range(1..=max);
    random_mask(rng, h, w)
}

pub fn random_track(rng: &mut impl Rng, frames: usize, h: usize, w: usize) -> MaskTrack {
    let mut t = MaskTrack::new(frames, h, w).unwrap();
    for f in 0..frames {
        t.insert_mask(f, &random_mask(rng, h, w)).unwrap();
    }
    t
}

pub fn object(id: &str, label: u32, track: MaskTrack) -> ObjectAnnotation {
    ObjectAnnotation {
        object_id: id.into(),
        index_label: label,
        category: "person".into(),
        appearance: "in a coat".into(),
        motion: "walking".into(),
        track,
    }
}

pub fn single(id: &str, obj: &str, kind: ExpressionType) -> Expression {
    Expression {
        expression_id: id.into(),
        text: format!("the person {id}"),
        kind,
        object_ids: vec![obj.into()],
        interaction: None,
    }
}

pub fn uni(id: &str, actors: &[&str], targets: &[&str], pair: Option<&str>) -> Expression {
    let actor_ids: BTreeSet<String> = actors.iter().map(|s| s.to_string()).collect();
    let target_ids: BTreeSet<String> = targets.iter().map(|s| s.to_string()).collect();
    Expression {
        expression_id: id.into(),
        text: format!("{actors:?} acting on {targets:?}"),
        kind: ExpressionType::Interaction,
        object_ids: actor_ids.union(&target_ids).cloned().collect(),
        interaction: Some(InteractionInfo {
            direction: Direction::Unidirectional,
            actor_ids,
            target_ids,
            pair_id: pair.map(String::from),
            level: InteractionLevel::Class,
        }),
    }
}

/// Random dataset with single, multi-instance and paired interaction
/// expressions whose tracks are random masks.
pub fn random_meta(rng: &mut impl Rng) -> DatasetMeta {
    let mut meta = DatasetMeta::default();
    for v in 0..rng.gen_range(1..=3) {
        let (frames, h, w) = (rng.gen_range(1..=3), rng.gen_range(4..=12), rng.gen_range(4..=12));
        let mut video = Video::new(frames, h, w);
        video.frames = (0..frames).map(|i| format!("{i:05}.jpg")).collect();
        let n = rng.gen_range(2..=4);
        let ids: Vec<String> = (0..n).map(|i| format!("o{i}")).collect();
        for (i, id) in ids.iter().enumerate() {
            video
                .objects
                .insert(id.clone(), object(id, i as u32, random_track(rng, frames, h, w)));
        }
        let mut exprs = vec![
            single(&format!("v{v}-s0"), &ids[0], ExpressionType::SingleMotion),
            single(&format!("v{v}-s1"), &ids[1], ExpressionType::SingleAppearance),
            Expression {
                expression_id: format!("v{v}-m"),
                text: "both people".into(),
                kind: ExpressionType::MultiInstance,
                object_ids: ids[..2].to_vec(),
                interaction: None,
            },
        ];
        if rng.gen_bool(0.8) {
            let (f, r) = (format!("v{v}-fwd"), format!("v{v}-rev"));
            exprs.push(uni(&f, &[&ids[0]], &[&ids[1]], Some(&r)));
            exprs.push(uni(&r, &[&ids[1]], &[&ids[0]], Some(&f)));
        }
        if rng.gen_bool(0.5) {
            exprs.push(uni(&format!("v{v}-lone"), &[&ids[1]], &[&ids[0]], None));
        }
        for e in exprs {
            video.expressions.insert(e.expression_id.clone(), e);
        }
        meta.videos.insert(format!("video{v}"), video);
    }
    meta
}

pub fn label_map(pairs: &[(u32, &str)]) -> BTreeMap<u32, String> {
    pairs.iter().map(|&(k, v)| (k, v.to_string())).collect()
}
