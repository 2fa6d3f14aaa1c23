use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataset::{DatasetMeta, ExpressionType};

#[derive(Debug, Clone, PartialEq)]
pub struct SplitConfig {
    pub train_video_ids: BTreeSet<String>,
    /// Candidate evaluation videos; `None` means every non-training video.
    pub eval_video_ids: Option<BTreeSet<String>>,
    pub interaction_min_fraction: f64,
    /// Fraction of single-object expressions kept per down-sampling round.
    pub single_downsample_rate: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_video_ids: BTreeSet::new(),
            eval_video_ids: None,
            interaction_min_fraction: 0.0,
            single_downsample_rate: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("train and eval video sets overlap: {0:?}")]
    Overlap(Vec<String>),
    #[error("{name} must lie in [0, 1], got {value}")]
    OutOfRange { name: &'static str, value: String },
    #[error("unknown eval video {0}")]
    UnknownVideo(String),
}

fn check_unit(name: &'static str, value: f64) -> Result<(), ConfigError> {
    if !(0.0..=1.0).contains(&value) {
        return Err(ConfigError::OutOfRange {
            name,
            value: value.to_string(),
        });
    }
    Ok(())
}

fn interaction_fraction(meta: &DatasetMeta) -> f64 {
    let total = meta.expression_count();
    if total == 0 {
        return 1.0;
    }
    let inter = meta
        .expressions()
        .filter(|e| e.expression.kind == ExpressionType::Interaction)
        .count();
    inter as f64 / total as f64
}

/// Evaluation subset: drops training videos, then repeatedly keeps a seeded
/// random `single_downsample_rate` share of the single-object expressions
/// until interactions make up at least `interaction_min_fraction` of what
/// remains. A rate of 1 disables down-sampling.
pub fn build_eval_split(meta: &DatasetMeta, config: &SplitConfig) -> Result<DatasetMeta, ConfigError> {
    check_unit("interaction_min_fraction", config.interaction_min_fraction)?;
    check_unit("single_downsample_rate", config.single_downsample_rate)?;

    let eval_ids: BTreeSet<String> = match &config.eval_video_ids {
        Some(ids) => {
            let overlap: Vec<String> = ids.intersection(&config.train_video_ids).cloned().collect();
            if !overlap.is_empty() {
                return Err(ConfigError::Overlap(overlap));
            }
            if let Some(missing) = ids.iter().find(|id| !meta.videos.contains_key(*id)) {
                return Err(ConfigError::UnknownVideo(missing.clone()));
            }
            ids.clone()
        }
        None => meta
            .videos
            .keys()
            .filter(|id| !config.train_video_ids.contains(*id))
            .cloned()
            .collect(),
    };

    let mut out = DatasetMeta::default();
    for id in &eval_ids {
        out.videos.insert(id.clone(), meta.videos[id].clone());
    }

    let mut singles: Vec<(String, String)> = out
        .expressions()
        .filter(|e| e.expression.kind.is_single())
        .map(|e| (e.video_id.to_string(), e.expression.expression_id.clone()))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let rate = config.single_downsample_rate;
    let target = config.interaction_min_fraction;

    while !singles.is_empty() && interaction_fraction(&out) + 1e-12 < target {
        let keep = (singles.len() as f64 * rate).floor() as usize;
        if keep >= singles.len() {
            break;
        }
        singles.shuffle(&mut rng);
        for (vid, eid) in singles.drain(keep..) {
            out.videos.get_mut(&vid).expect("split video").expressions.remove(&eid);
        }
        singles.sort();
    }
    Ok(out)
}
