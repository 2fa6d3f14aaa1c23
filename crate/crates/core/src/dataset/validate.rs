use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{DatasetMeta, Direction, Expression, ExpressionType, Video};

/// Schema rules checked by [`validate_meta`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Rule {
    VideoDimensions,
    TrackResolution,
    TrackFrameIndex,
    FrameListLength,
    IndexLabelUnique,
    ExpressionIdUnique,
    InteractionPresence,
    SingleObjectCount,
    MultiInstanceCount,
    ObjectUnresolved,
    InteractionObjects,
    UnidirectionalRoles,
    UnidirectionalDisjoint,
    BidirectionalTargets,
    BidirectionalParticipants,
    BidirectionalPaired,
    PairUnresolved,
    PairRoleSwap,
    PairInvolution,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::VideoDimensions => "video dimensions",
            Rule::TrackResolution => "track resolution",
            Rule::TrackFrameIndex => "track frame index",
            Rule::FrameListLength => "frame list length",
            Rule::IndexLabelUnique => "index_label unique",
            Rule::ExpressionIdUnique => "expression id unique",
            Rule::InteractionPresence => "interaction presence",
            Rule::SingleObjectCount => "single object count",
            Rule::MultiInstanceCount => "multi instance count",
            Rule::ObjectUnresolved => "object unresolved",
            Rule::InteractionObjects => "interaction object ids",
            Rule::UnidirectionalRoles => "unidirectional roles nonempty",
            Rule::UnidirectionalDisjoint => "unidirectional roles disjoint",
            Rule::BidirectionalTargets => "bidirectional targets empty",
            Rule::BidirectionalParticipants => "bidirectional participants",
            Rule::BidirectionalPaired => "bidirectional paired",
            Rule::PairUnresolved => "pair_id unresolved",
            Rule::PairRoleSwap => "pair role swap",
            Rule::PairInvolution => "pair involution",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Violation {
    pub video_id: String,
    /// Offending object or expression id.
    pub item_id: Option<String>,
    pub rule: Rule,
}

impl Violation {
    pub(crate) fn new(video_id: &str, item_id: Option<&str>, rule: Rule) -> Self {
        Self {
            video_id: video_id.to_string(),
            item_id: item_id.map(str::to_string),
            rule,
        }
    }
}

/// Every invariant violation in `meta`, in video then item order. Empty means
/// valid.
pub fn validate_meta(meta: &DatasetMeta) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen_expr: BTreeMap<&str, &str> = BTreeMap::new();
    for (vid, video) in &meta.videos {
        for eid in video.expressions.keys() {
            if let Some(first) = seen_expr.insert(eid, vid) {
                if first != vid {
                    out.push(Violation::new(vid, Some(eid), Rule::ExpressionIdUnique));
                }
            }
        }
        validate_video(vid, video, &mut out);
    }
    out
}

fn validate_video(vid: &str, video: &Video, out: &mut Vec<Violation>) {
    let mut push = |item: Option<&str>, rule| out.push(Violation::new(vid, item, rule));

    if !video.frames.is_empty() && video.frames.len() != video.frame_count {
        push(None, Rule::FrameListLength);
    }

    let mut labels = BTreeSet::new();
    for (oid, obj) in &video.objects {
        if !labels.insert(obj.index_label) {
            push(Some(oid), Rule::IndexLabelUnique);
        }
        if obj.track.resolution() != video.resolution() || obj.track.frame_count() != video.frame_count {
            push(Some(oid), Rule::TrackResolution);
        }
    }

    for (eid, e) in &video.expressions {
        check_expression(video, eid, e, &mut push);
    }
}

fn check_expression(video: &Video, eid: &str, e: &Expression, push: &mut impl FnMut(Option<&str>, Rule)) {
    let item = Some(eid);
    if (e.kind == ExpressionType::Interaction) != e.interaction.is_some() {
        push(item, Rule::InteractionPresence);
    }
    if e.kind.is_single() && e.object_ids.len() != 1 {
        push(item, Rule::SingleObjectCount);
    }
    if e.kind == ExpressionType::MultiInstance && e.object_ids.len() < 2 {
        push(item, Rule::MultiInstanceCount);
    }
    let mut unresolved = e.object_ids.iter().any(|o| !video.objects.contains_key(o));

    let Some(info) = &e.interaction else {
        if unresolved {
            push(item, Rule::ObjectUnresolved);
        }
        return;
    };
    unresolved |= info.participants().iter().any(|o| !video.objects.contains_key(o));
    if unresolved {
        push(item, Rule::ObjectUnresolved);
    }
    let listed: BTreeSet<String> = e.object_ids.iter().cloned().collect();
    if listed != info.participants() {
        push(item, Rule::InteractionObjects);
    }

    match info.direction {
        Direction::Unidirectional => {
            if info.actor_ids.is_empty() || info.target_ids.is_empty() {
                push(item, Rule::UnidirectionalRoles);
            }
            if !info.actor_ids.is_disjoint(&info.target_ids) {
                push(item, Rule::UnidirectionalDisjoint);
            }
        }
        Direction::Bidirectional => {
            if !info.target_ids.is_empty() {
                push(item, Rule::BidirectionalTargets);
            }
            if info.actor_ids.len() < 2 {
                push(item, Rule::BidirectionalParticipants);
            }
            if info.pair_id.is_some() {
                push(item, Rule::BidirectionalPaired);
            }
        }
    }

    let Some(pid) = &info.pair_id else { return };
    if info.direction == Direction::Bidirectional {
        return;
    }
    let Some(partner) = video.expressions.get(pid) else {
        push(item, Rule::PairUnresolved);
        return;
    };
    let Some(pinfo) = &partner.interaction else {
        push(item, Rule::PairRoleSwap);
        return;
    };
    if pinfo.actor_ids != info.target_ids || pinfo.target_ids != info.actor_ids {
        push(item, Rule::PairRoleSwap);
    }
    if pinfo.pair_id.as_deref() != Some(eid) {
        push(item, Rule::PairInvolution);
    }
}
