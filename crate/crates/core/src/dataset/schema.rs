//! On-disk shape of `meta_expressions.json`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    DatasetError, DatasetMeta, Direction, Expression, ExpressionType, InteractionInfo, InteractionLevel,
    ObjectAnnotation, Rule, Video, Violation,
};
use crate::mask::{MaskError, MaskTrack, RleMask};

#[derive(Serialize, Deserialize)]
pub(super) struct RawMeta {
    videos: BTreeMap<String, RawVideo>,
}

#[derive(Serialize, Deserialize)]
struct RawVideo {
    frame_count: usize,
    height: usize,
    width: usize,
    #[serde(default)]
    frames: Vec<String>,
    #[serde(default)]
    objects: BTreeMap<String, RawObject>,
    #[serde(default)]
    expressions: BTreeMap<String, RawExpression>,
}

#[derive(Serialize, Deserialize)]
struct RawObject {
    index_label: u32,
    #[serde(default)]
    category: String,
    #[serde(default)]
    appearance: String,
    #[serde(default)]
    motion: String,
    #[serde(default)]
    track: BTreeMap<String, RleMask>,
}

#[derive(Serialize, Deserialize)]
struct RawExpression {
    exp: String,
    #[serde(rename = "type")]
    kind: ExpressionType,
    obj_ids: Vec<String>,
    #[serde(default)]
    interaction: Option<RawInteraction>,
}

#[derive(Serialize, Deserialize)]
struct RawInteraction {
    direction: Direction,
    actor_ids: Vec<String>,
    #[serde(default)]
    target_ids: Vec<String>,
    #[serde(default)]
    pair_id: Option<String>,
    level: InteractionLevel,
}

/// Serializes `{frame_idx: rle}` for any track.
pub(crate) fn track_to_raw(track: &MaskTrack) -> BTreeMap<String, RleMask> {
    track
        .stored_frames()
        .map(|(f, rle)| (f.to_string(), rle.clone()))
        .collect()
}

/// Rebuilds a track from `{frame_idx: rle}` given the owning video's shape.
pub(crate) fn track_from_raw(
    raw: &BTreeMap<String, RleMask>,
    frame_count: usize,
    height: usize,
    width: usize,
) -> Result<MaskTrack, TrackError> {
    let mut track = MaskTrack::new(frame_count, height, width).map_err(TrackError::Mask)?;
    for (key, rle) in raw {
        let frame: usize = key.parse().map_err(|_| TrackError::FrameKey(key.clone()))?;
        track.insert(frame, rle.clone()).map_err(TrackError::Mask)?;
    }
    Ok(track)
}

#[derive(Debug)]
pub(crate) enum TrackError {
    FrameKey(String),
    Mask(MaskError),
}

impl TrackError {
    fn rule(&self) -> Rule {
        match self {
            TrackError::FrameKey(_) => Rule::TrackFrameIndex,
            TrackError::Mask(MaskError::FrameOutOfRange { .. }) => Rule::TrackFrameIndex,
            TrackError::Mask(MaskError::InvalidDimensions { .. }) => Rule::VideoDimensions,
            TrackError::Mask(_) => Rule::TrackResolution,
        }
    }
}

impl RawMeta {
    pub(super) fn into_meta(self) -> Result<DatasetMeta, DatasetError> {
        let mut meta = DatasetMeta::default();
        let mut violations = Vec::new();
        for (vid, rv) in self.videos {
            if rv.height == 0 || rv.width == 0 {
                violations.push(Violation::new(&vid, None, Rule::VideoDimensions));
                continue;
            }
            let mut video = Video::new(rv.frame_count, rv.height, rv.width);
            video.frames = rv.frames;
            for (oid, ro) in rv.objects {
                let track = match track_from_raw(&ro.track, rv.frame_count, rv.height, rv.width) {
                    Ok(t) => t,
                    Err(e) => {
                        violations.push(Violation::new(&vid, Some(&oid), e.rule()));
                        continue;
                    }
                };
                video.objects.insert(
                    oid.clone(),
                    ObjectAnnotation {
                        object_id: oid,
                        index_label: ro.index_label,
                        category: ro.category,
                        appearance: ro.appearance,
                        motion: ro.motion,
                        track,
                    },
                );
            }
            for (eid, re) in rv.expressions {
                let interaction = re.interaction.map(|ri| InteractionInfo {
                    direction: ri.direction,
                    actor_ids: ri.actor_ids.into_iter().collect(),
                    target_ids: ri.target_ids.into_iter().collect(),
                    pair_id: ri.pair_id,
                    level: ri.level,
                });
                video.expressions.insert(
                    eid.clone(),
                    Expression {
                        expression_id: eid,
                        text: re.exp,
                        kind: re.kind,
                        object_ids: re.obj_ids,
                        interaction,
                    },
                );
            }
            meta.videos.insert(vid, video);
        }
        if !violations.is_empty() {
            return Err(DatasetError::SchemaViolation(violations));
        }
        Ok(meta)
    }

    pub(super) fn from_meta(meta: &DatasetMeta) -> Self {
        let videos = meta
            .videos
            .iter()
            .map(|(vid, v)| {
                let objects = v
                    .objects
                    .iter()
                    .map(|(oid, o)| {
                        (
                            oid.clone(),
                            RawObject {
                                index_label: o.index_label,
                                category: o.category.clone(),
                                appearance: o.appearance.clone(),
                                motion: o.motion.clone(),
                                track: track_to_raw(&o.track),
                            },
                        )
                    })
                    .collect();
                let expressions = v
                    .expressions
                    .iter()
                    .map(|(eid, e)| {
                        (
                            eid.clone(),
                            RawExpression {
                                exp: e.text.clone(),
                                kind: e.kind,
                                obj_ids: e.object_ids.clone(),
                                interaction: e.interaction.as_ref().map(|i| RawInteraction {
                                    direction: i.direction,
                                    actor_ids: i.actor_ids.iter().cloned().collect(),
                                    target_ids: i.target_ids.iter().cloned().collect(),
                                    pair_id: i.pair_id.clone(),
                                    level: i.level,
                                }),
                            },
                        )
                    })
                    .collect();
                (
                    vid.clone(),
                    RawVideo {
                        frame_count: v.frame_count,
                        height: v.height,
                        width: v.width,
                        frames: v.frames.clone(),
                        objects,
                        expressions,
                    },
                )
            })
            .collect();
        RawMeta { videos }
    }
}
