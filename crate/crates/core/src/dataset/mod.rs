//! Annotation schema: videos, objects with mask tracks, and typed referring
//! expressions, plus the canonical JSON form used on disk.

mod png_import;
pub(crate) mod schema;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mask::{MaskError, MaskTrack};

pub use png_import::{import_palette_pngs, PngImportError};
pub use validate::{validate_meta, Rule, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpressionType {
    SingleAppearanceMotion,
    SingleAppearance,
    SingleMotion,
    MultiInstance,
    Interaction,
}

impl ExpressionType {
    pub fn is_single(self) -> bool {
        matches!(
            self,
            Self::SingleAppearanceMotion | Self::SingleAppearance | Self::SingleMotion
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::SingleAppearanceMotion => "single_appearance_motion",
            Self::SingleAppearance => "single_appearance",
            Self::SingleMotion => "single_motion",
            Self::MultiInstance => "multi_instance",
            Self::Interaction => "interaction",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "uni")]
    Unidirectional,
    #[serde(rename = "bi")]
    Bidirectional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionLevel {
    Class,
    Appearance,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionInfo {
    pub direction: Direction,
    pub actor_ids: BTreeSet<String>,
    pub target_ids: BTreeSet<String>,
    /// Id of the complementary expression with roles reversed.
    pub pair_id: Option<String>,
    pub level: InteractionLevel,
}

impl InteractionInfo {
    pub fn participants(&self) -> BTreeSet<String> {
        self.actor_ids.union(&self.target_ids).cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expression {
    pub expression_id: String,
    pub text: String,
    pub kind: ExpressionType,
    pub object_ids: Vec<String>,
    pub interaction: Option<InteractionInfo>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectAnnotation {
    pub object_id: String,
    /// Small integer shown in overlays and prompts, unique within a video.
    pub index_label: u32,
    pub category: String,
    pub appearance: String,
    pub motion: String,
    pub track: MaskTrack,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Video {
    pub frame_count: usize,
    pub height: usize,
    pub width: usize,
    pub frames: Vec<String>,
    pub objects: BTreeMap<String, ObjectAnnotation>,
    pub expressions: BTreeMap<String, Expression>,
}

impl Video {
    pub fn new(frame_count: usize, height: usize, width: usize) -> Self {
        Self {
            frame_count,
            height,
            width,
            frames: Vec::new(),
            objects: BTreeMap::new(),
            expressions: BTreeMap::new(),
        }
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn empty_track(&self) -> Result<MaskTrack, MaskError> {
        MaskTrack::new(self.frame_count, self.height, self.width)
    }

    /// Object with the given overlay index label.
    pub fn object_by_label(&self, label: u32) -> Option<&ObjectAnnotation> {
        self.objects.values().find(|o| o.index_label == label)
    }

    /// Frame-wise union of the named objects' tracks.
    pub fn union_track<'a>(&self, object_ids: impl IntoIterator<Item = &'a String>) -> Result<MaskTrack, DatasetError> {
        let mut acc = self.empty_track()?;
        for id in object_ids {
            let obj = self
                .objects
                .get(id)
                .ok_or_else(|| DatasetError::UnknownObject(id.clone()))?;
            acc = acc.union(&obj.track)?;
        }
        Ok(acc)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetMeta {
    pub videos: BTreeMap<String, Video>,
}

/// Reference to one expression inside a dataset.
#[derive(Debug, Clone, Copy)]
pub struct ExpressionRef<'a> {
    pub video_id: &'a str,
    pub video: &'a Video,
    pub expression: &'a Expression,
}

impl DatasetMeta {
    /// Every expression, ordered by video id then expression id.
    pub fn expressions(&self) -> impl Iterator<Item = ExpressionRef<'_>> {
        self.videos.iter().flat_map(|(vid, video)| {
            video.expressions.values().map(move |expression| ExpressionRef {
                video_id: vid,
                video,
                expression,
            })
        })
    }

    pub fn expression(&self, expression_id: &str) -> Option<ExpressionRef<'_>> {
        self.videos.iter().find_map(|(vid, video)| {
            video.expressions.get(expression_id).map(|expression| ExpressionRef {
                video_id: vid,
                video,
                expression,
            })
        })
    }

    /// Expression id to video id, for resolving prediction files.
    pub fn expression_index(&self) -> BTreeMap<&str, &str> {
        self.expressions()
            .map(|e| (e.expression.expression_id.as_str(), e.video_id))
            .collect()
    }

    pub fn object_count(&self) -> usize {
        self.videos.values().map(|v| v.objects.len()).sum()
    }

    pub fn expression_count(&self) -> usize {
        self.videos.values().map(|v| v.expressions.len()).sum()
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema violation: {}", first_violation(.0))]
    SchemaViolation(Vec<Violation>),
    #[error("unknown expression {0}")]
    UnknownExpression(String),
    #[error("unknown object {0}")]
    UnknownObject(String),
    #[error(transparent)]
    Mask(#[from] MaskError),
}

fn first_violation(v: &[Violation]) -> String {
    match v {
        [] => "none".to_string(),
        [one] => one.to_string(),
        [first, rest @ ..] => format!("{first} (+{} more)", rest.len()),
    }
}

impl DatasetError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            DatasetError::SchemaViolation(v) => v,
            _ => &[],
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (video {}", self.rule.as_str(), self.video_id)?;
        if let Some(item) = &self.item_id {
            write!(f, ", {item}")?;
        }
        write!(f, ")")
    }
}

/// Parses the JSON document without cross-reference validation. Structural
/// problems in mask tracks are reported as schema violations.
pub fn parse_meta(text: &str) -> Result<DatasetMeta, DatasetError> {
    let raw: schema::RawMeta = serde_json::from_str(text).map_err(|e| DatasetError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    raw.into_meta()
}

/// Parses and validates; any violation is an error.
pub fn parse_and_validate(text: &str) -> Result<DatasetMeta, DatasetError> {
    let meta = parse_meta(text)?;
    let violations = validate_meta(&meta);
    if !violations.is_empty() {
        return Err(DatasetError::SchemaViolation(violations));
    }
    Ok(meta)
}

pub fn load_meta(path: impl AsRef<Path>) -> Result<DatasetMeta, DatasetError> {
    parse_and_validate(&read_text(path.as_ref())?)
}

/// Loads without validating, for tools that report violations themselves.
pub fn load_meta_unchecked(path: impl AsRef<Path>) -> Result<DatasetMeta, DatasetError> {
    parse_meta(&read_text(path.as_ref())?)
}

fn read_text(path: &Path) -> Result<String, DatasetError> {
    std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Canonical serialization: sorted keys, two-space indentation, trailing
/// newline.
pub fn to_canonical_json(meta: &DatasetMeta) -> String {
    canonical_string(&schema::RawMeta::from_meta(meta))
}

pub(crate) fn canonical_string<T: Serialize>(value: &T) -> String {
    // serde_json::Value keeps object keys in a sorted map.
    let value = serde_json::to_value(value).expect("schema types always serialize");
    let mut s = serde_json::to_string_pretty(&value).expect("value always serializes");
    s.push('\n');
    s
}

pub fn save_meta(meta: &DatasetMeta, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let path = path.as_ref();
    crate::io::write_atomic(path, to_canonical_json(meta).as_bytes()).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Ground truth for an expression: the union of every referenced object.
/// Interaction expressions use all participants (actors and targets).
pub fn merged_gt_track(meta: &DatasetMeta, expression_id: &str) -> Result<MaskTrack, DatasetError> {
    let e = meta
        .expression(expression_id)
        .ok_or_else(|| DatasetError::UnknownExpression(expression_id.to_string()))?;
    match &e.expression.interaction {
        Some(info) => e.video.union_track(&info.participants()),
        None => e.video.union_track(&e.expression.object_ids),
    }
}

/// Actor and target ground truth of an interaction expression. Non-interaction
/// expressions get their merged track as actor and an empty target.
pub fn role_tracks(meta: &DatasetMeta, expression_id: &str) -> Result<(MaskTrack, MaskTrack), DatasetError> {
    let e = meta
        .expression(expression_id)
        .ok_or_else(|| DatasetError::UnknownExpression(expression_id.to_string()))?;
    match &e.expression.interaction {
        Some(info) => Ok((
            e.video.union_track(&info.actor_ids)?,
            e.video.union_track(&info.target_ids)?,
        )),
        None => Ok((e.video.union_track(&e.expression.object_ids)?, e.video.empty_track()?)),
    }
}
