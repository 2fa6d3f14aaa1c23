use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use regex::Regex;

use super::{PipelineError, Stage1Output, Stage2Output, Stage3Output, Stage4Output, StagedViolation};
use crate::dataset::{
    validate_meta, DatasetMeta, Direction, Expression, ExpressionType, InteractionInfo, InteractionLevel, Video,
};

const LEVELS: [(InteractionLevel, &str); 2] = [
    (InteractionLevel::Class, "class"),
    (InteractionLevel::Appearance, "appearance"),
];

fn interaction_id(video_id: &str, interaction: usize, level: &str, variant: &str) -> String {
    format!("{video_id}-int{interaction}-{level}-{variant}")
}

/// Stage that produced an assembled expression, recovered from its id.
pub fn expression_provenance(expression_id: &str) -> Option<u8> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(
            r"-(?:(obj\d+-(?:appearance|motion|combined)|multi\d+)|(int\d+-(?:class|appearance)-(?:fwd|rev|bi)))$",
        )
        .expect("provenance regex")
    });
    let caps = re.captures(expression_id)?;
    if caps.get(1).is_some() {
        Some(2)
    } else {
        Some(4)
    }
}

/// Builds the annotated video from the four stage outputs and the input
/// tracks, then validates it.
///
/// Expression ids: `<vid>-obj<k>-{appearance,motion,combined}` for single
/// objects, `<vid>-multi<g>` for merge groups and
/// `<vid>-int<i>-{class,appearance}-{fwd,rev,bi}` for interactions.
pub fn assemble_dataset(
    video_id: &str,
    tracks: &Video,
    stage1: &Stage1Output,
    stage2: &Stage2Output,
    stage3: &Stage3Output,
    stage4: &Stage4Output,
) -> Result<DatasetMeta, PipelineError> {
    let by_label: BTreeMap<u32, String> = tracks
        .objects
        .values()
        .map(|o| (o.index_label, o.object_id.clone()))
        .collect();
    let resolve = |stage: u8, label: u32| -> Result<String, PipelineError> {
        by_label.get(&label).cloned().ok_or(PipelineError::UnknownLabel {
            video_id: video_id.into(),
            stage,
            label,
        })
    };
    let resolve_set = |stage: u8, labels: &BTreeSet<u32>| -> Result<BTreeSet<String>, PipelineError> {
        labels.iter().map(|&l| resolve(stage, l)).collect()
    };

    let mut video = tracks.clone();
    video.expressions.clear();
    for (&label, cap) in &stage1.objects {
        let id = resolve(1, label)?;
        let obj = video.objects.get_mut(&id).expect("resolved object");
        if obj.category.is_empty() {
            obj.category = cap.category.clone();
        }
        obj.appearance = cap.appearance.clone();
        obj.motion = cap.motion.clone();
    }

    let mut add = |e: Expression| {
        video.expressions.insert(e.expression_id.clone(), e);
    };
    for (&label, exprs) in &stage2.objects {
        let oid = resolve(2, label)?;
        for (suffix, kind, text) in [
            ("appearance", ExpressionType::SingleAppearance, &exprs.appearance_only),
            ("motion", ExpressionType::SingleMotion, &exprs.motion_only),
            ("combined", ExpressionType::SingleAppearanceMotion, &exprs.combined),
        ] {
            add(Expression {
                expression_id: format!("{video_id}-obj{label}-{suffix}"),
                text: text.clone(),
                kind,
                object_ids: vec![oid.clone()],
                interaction: None,
            });
        }
    }
    for (g, group) in stage2.merge_groups.iter().enumerate() {
        add(Expression {
            expression_id: format!("{video_id}-multi{g}"),
            text: group.expression.clone(),
            kind: ExpressionType::MultiInstance,
            object_ids: resolve_set(2, &group.labels)?.into_iter().collect(),
            interaction: None,
        });
    }

    let present: BTreeSet<(usize, bool)> = stage4.captions.iter().map(|c| (c.interaction, c.reversed)).collect();
    for cap in &stage4.captions {
        let direction = stage3
            .interactions
            .get(cap.interaction)
            .map(|i| i.direction)
            .ok_or_else(|| PipelineError::StageFile {
                path: format!("{video_id}/stage4.json"),
                message: format!("caption refers to missing interaction {}", cap.interaction),
            })?;
        let actor_ids = resolve_set(4, &cap.actor_ids)?;
        let target_ids = resolve_set(4, &cap.target_ids)?;
        let object_ids: Vec<String> = actor_ids.union(&target_ids).cloned().collect();
        for (level, level_name) in LEVELS {
            let (variant, pair_id) = match direction {
                Direction::Bidirectional => ("bi", None),
                Direction::Unidirectional => {
                    let (me, other) = if cap.reversed { ("rev", "fwd") } else { ("fwd", "rev") };
                    let pair = present
                        .contains(&(cap.interaction, !cap.reversed))
                        .then(|| interaction_id(video_id, cap.interaction, level_name, other));
                    (me, pair)
                }
            };
            add(Expression {
                expression_id: interaction_id(video_id, cap.interaction, level_name, variant),
                text: cap.text(level).to_string(),
                kind: ExpressionType::Interaction,
                object_ids: object_ids.clone(),
                interaction: Some(InteractionInfo {
                    direction,
                    actor_ids: actor_ids.clone(),
                    target_ids: target_ids.clone(),
                    pair_id,
                    level,
                }),
            });
        }
    }

    let mut meta = DatasetMeta::default();
    meta.videos.insert(video_id.to_string(), video);
    let violations: Vec<StagedViolation> = validate_meta(&meta)
        .into_iter()
        .map(|violation| {
            let stage = violation
                .item_id
                .as_deref()
                .and_then(expression_provenance)
                .unwrap_or(1);
            StagedViolation { stage, violation }
        })
        .collect();
    if !violations.is_empty() {
        return Err(PipelineError::Assembly {
            video_id: video_id.into(),
            violations,
        });
    }
    Ok(meta)
}
