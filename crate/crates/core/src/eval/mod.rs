//! Three-category evaluation (Referring / Actor-Target / Overall), the
//! dual-mask actor-target scorer, and evaluation-split construction.

mod predictions;
mod report;
mod split;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{merged_gt_track, role_tracks, DatasetError, DatasetMeta, Direction, Expression, ExpressionType};
use crate::mask::{MaskError, MaskTrack};
use crate::metrics::{frame_score, ExpressionScore, FrameScore, DEFAULT_TOLERANCE_RATIO};

pub use predictions::{parse_predictions, predictions_to_json, Prediction, PredictionSet};
pub use report::{format_cell, render_report, ReportOptions, RoundingMode, Scale};
pub use split::{build_eval_split, ConfigError, SplitConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Referring,
    ActorTarget,
}

/// Paired unidirectional interactions form the Actor-Target category;
/// everything else is Referring.
pub fn categorize(expr: &Expression) -> Category {
    match &expr.interaction {
        Some(info)
            if expr.kind == ExpressionType::Interaction
                && info.direction == Direction::Unidirectional
                && info.pair_id.is_some() =>
        {
            Category::ActorTarget
        }
        _ => Category::Referring,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub tolerance_ratio: f64,
    pub workers: usize,
    /// Skip frames whose ground truth is empty. If that leaves no frames the
    /// expression falls back to all frames.
    pub exclude_empty_gt_frames: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            tolerance_ratio: DEFAULT_TOLERANCE_RATIO,
            workers: 1,
            exclude_empty_gt_frames: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("expression {expression_id}: {source}")]
    ResolutionMismatch {
        expression_id: String,
        #[source]
        source: MaskError,
    },
    #[error("expression {0} is actor-target but its prediction has no target track")]
    MissingTargetTrack(String),
    #[error("prediction parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// Every expression against its own merged ground truth.
    Independent,
    /// Actor-target expressions only, actor and target tracks both scored.
    Dual,
}

impl EvalMode {
    pub fn describe(self) -> &'static str {
        match self {
            EvalMode::Independent => "independent (each expression vs. its merged ground truth)",
            EvalMode::Dual => "dual (actor and target tracks scored per actor-target expression)",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub j: f64,
    pub f: f64,
    pub jf: f64,
    pub expression_count: usize,
}

impl CategoryScore {
    pub const ZERO: CategoryScore = CategoryScore {
        j: 0.0,
        f: 0.0,
        jf: 0.0,
        expression_count: 0,
    };

    /// Unweighted mean over expressions, summed in the given order.
    fn mean<'a>(scores: impl Iterator<Item = &'a ExpressionScore>) -> Self {
        let mut n = 0usize;
        let mut j = 0.0;
        let mut f = 0.0;
        for s in scores {
            n += 1;
            j += s.j_mean;
            f += s.f_mean;
        }
        if n == 0 {
            return Self::ZERO;
        }
        let (j, f) = (j / n as f64, f / n as f64);
        Self {
            j,
            f,
            jf: crate::metrics::jf_score(j, f),
            expression_count: n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub tolerance_ratio: f64,
    pub per_expression: BTreeMap<String, ExpressionScore>,
    pub referring: CategoryScore,
    pub actor_target: CategoryScore,
    pub overall: CategoryScore,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        crate::dataset::canonical_string(self)
    }
}

/// Scores `pred` against `gt` frame by frame.
pub fn score_tracks(pred: &MaskTrack, gt: &MaskTrack, config: &EvalConfig) -> Result<ExpressionScore, MaskError> {
    if pred.resolution() != gt.resolution() {
        return Err(MaskError::ResolutionMismatch {
            left: pred.resolution(),
            right: gt.resolution(),
        });
    }
    let frame_count = gt.frame_count();
    let mut frames: Vec<usize> = if config.exclude_empty_gt_frames {
        gt.stored_frames().map(|(f, _)| f).collect()
    } else {
        Vec::new()
    };
    if frames.is_empty() {
        frames = (0..frame_count).collect();
    }
    let mut scores = Vec::with_capacity(frames.len());
    for f in frames {
        let score = match (pred.rle(f), gt.rle(f)) {
            (None, None) => FrameScore { j: 1.0, f: 1.0 },
            _ => frame_score(&pred.mask(f), &gt.mask(f), config.tolerance_ratio)?,
        };
        scores.push(score);
    }
    Ok(ExpressionScore::from_frames(&scores))
}

fn with_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T, EvalError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| EvalError::Pool(e.to_string()))?;
    Ok(pool.install(job))
}

fn unknown_prediction_warnings(meta: &DatasetMeta, preds: &PredictionSet) -> Vec<String> {
    let index = meta.expression_index();
    let mut warnings: Vec<String> = preds
        .unknown
        .iter()
        .chain(preds.entries.keys().filter(|k| !index.contains_key(k.as_str())))
        .map(|id| format!("prediction for unknown expression {id} ignored"))
        .collect();
    warnings.sort();
    warnings.dedup();
    warnings
}

/// Standard evaluation of every expression in `meta`. Expressions without a
/// prediction are scored as empty tracks.
pub fn evaluate(meta: &DatasetMeta, preds: &PredictionSet, config: &EvalConfig) -> Result<EvalReport, EvalError> {
    let mut jobs: Vec<(&str, Category)> = meta
        .expressions()
        .map(|e| (e.expression.expression_id.as_str(), categorize(e.expression)))
        .collect();
    jobs.sort();

    let scored: Vec<Result<(String, Category, ExpressionScore), EvalError>> = with_pool(config.workers, || {
        jobs.par_iter()
            .map(|&(eid, cat)| {
                let gt = merged_gt_track(meta, eid)?;
                let score = match preds.entries.get(eid) {
                    Some(p) => score_tracks(&p.primary, &gt, config),
                    None => score_tracks(&empty_like(&gt)?, &gt, config),
                }
                .map_err(|source| EvalError::ResolutionMismatch {
                    expression_id: eid.to_string(),
                    source,
                })?;
                Ok((eid.to_string(), cat, score))
            })
            .collect()
    })?;

    let mut per_expression = BTreeMap::new();
    let mut categories = BTreeMap::new();
    for item in scored {
        let (eid, cat, score) = item?;
        categories.insert(eid.clone(), cat);
        per_expression.insert(eid, score);
    }
    let of = |want: Category| {
        CategoryScore::mean(
            per_expression
                .iter()
                .filter(|(id, _)| categories[*id] == want)
                .map(|(_, s)| s),
        )
    };
    Ok(EvalReport {
        mode: EvalMode::Independent,
        tolerance_ratio: config.tolerance_ratio,
        referring: of(Category::Referring),
        actor_target: of(Category::ActorTarget),
        overall: CategoryScore::mean(per_expression.values()),
        per_expression,
        warnings: unknown_prediction_warnings(meta, preds),
    })
}

fn empty_like(track: &MaskTrack) -> Result<MaskTrack, MaskError> {
    let (h, w) = track.resolution();
    MaskTrack::new(track.frame_count(), h, w)
}

/// Actor-target evaluation: for each paired unidirectional expression the
/// primary track is scored against the actors, the target track against the
/// targets, and the two scores are averaged.
pub fn evaluate_dual(meta: &DatasetMeta, preds: &PredictionSet, config: &EvalConfig) -> Result<EvalReport, EvalError> {
    let mut jobs: Vec<&str> = meta
        .expressions()
        .filter(|e| categorize(e.expression) == Category::ActorTarget)
        .map(|e| e.expression.expression_id.as_str())
        .collect();
    jobs.sort();

    let scored: Vec<Result<(String, ExpressionScore), EvalError>> = with_pool(config.workers, || {
        jobs.par_iter()
            .map(|&eid| {
                let (actor_gt, target_gt) = role_tracks(meta, eid)?;
                let mismatch = |source| EvalError::ResolutionMismatch {
                    expression_id: eid.to_string(),
                    source,
                };
                let (actor, target) = match preds.entries.get(eid) {
                    Some(p) => {
                        let target = p
                            .target
                            .as_ref()
                            .ok_or_else(|| EvalError::MissingTargetTrack(eid.to_string()))?;
                        (
                            score_tracks(&p.primary, &actor_gt, config),
                            score_tracks(target, &target_gt, config),
                        )
                    }
                    None => (
                        score_tracks(&empty_like(&actor_gt).map_err(mismatch)?, &actor_gt, config),
                        score_tracks(&empty_like(&target_gt).map_err(mismatch)?, &target_gt, config),
                    ),
                };
                let (a, t) = (actor.map_err(mismatch)?, target.map_err(mismatch)?);
                Ok((
                    eid.to_string(),
                    ExpressionScore::from_means(
                        (a.j_mean + t.j_mean) / 2.0,
                        (a.f_mean + t.f_mean) / 2.0,
                        a.frame_count.max(t.frame_count),
                    ),
                ))
            })
            .collect()
    })?;

    let mut per_expression = BTreeMap::new();
    for item in scored {
        let (eid, score) = item?;
        per_expression.insert(eid, score);
    }
    let at = CategoryScore::mean(per_expression.values());
    Ok(EvalReport {
        mode: EvalMode::Dual,
        tolerance_ratio: config.tolerance_ratio,
        per_expression,
        referring: CategoryScore::ZERO,
        actor_target: at,
        overall: at,
        warnings: unknown_prediction_warnings(meta, preds),
    })
}

/// Ground truth of every expression, packaged as a prediction set. Interaction
/// expressions carry their actor and target tracks as primary and target.
pub fn ground_truth_predictions(meta: &DatasetMeta, dual: bool) -> Result<PredictionSet, EvalError> {
    let mut set = PredictionSet::default();
    for e in meta.expressions() {
        let eid = &e.expression.expression_id;
        let pred = if dual && categorize(e.expression) == Category::ActorTarget {
            let (a, t) = role_tracks(meta, eid)?;
            Prediction {
                primary: a,
                target: Some(t),
            }
        } else {
            Prediction {
                primary: merged_gt_track(meta, eid)?,
                target: None,
            }
        };
        set.entries.insert(eid.clone(), pred);
    }
    Ok(set)
}
