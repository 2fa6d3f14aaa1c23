use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::dataset::schema::{track_from_raw, track_to_raw, TrackError};
use crate::dataset::DatasetMeta;
use crate::mask::{MaskError, MaskTrack, RleMask};

/// Predicted tracks for one expression. `target` is present when the model
/// also segments the interaction target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub primary: MaskTrack,
    pub target: Option<MaskTrack>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PredictionSet {
    pub entries: BTreeMap<String, Prediction>,
    /// Ids found in a prediction file that the dataset does not know.
    pub unknown: Vec<String>,
}

type RawTrack = BTreeMap<String, RleMask>;

#[derive(Serialize, Deserialize)]
struct RawPredictionFile {
    predictions: BTreeMap<String, RawPrediction>,
}

#[derive(Serialize, Deserialize)]
struct RawPrediction {
    primary: RawTrack,
    #[serde(default)]
    target: Option<RawTrack>,
}

/// Parses a prediction file, shaping each track after the video its
/// expression belongs to.
pub fn parse_predictions(text: &str, meta: &DatasetMeta) -> Result<PredictionSet, EvalError> {
    let raw: RawPredictionFile = serde_json::from_str(text).map_err(|e| EvalError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let index = meta.expression_index();
    let mut set = PredictionSet::default();
    for (eid, rp) in raw.predictions {
        let Some(vid) = index.get(eid.as_str()) else {
            set.unknown.push(eid);
            continue;
        };
        let video = &meta.videos[*vid];
        let build = |t: &RawTrack| {
            track_from_raw(t, video.frame_count, video.height, video.width).map_err(|e| {
                let source = match e {
                    TrackError::Mask(m) => m,
                    TrackError::FrameKey(k) => {
                        return EvalError::Parse {
                            line: 0,
                            column: 0,
                            message: format!("expression {eid}: bad frame key {k:?}"),
                        }
                    }
                };
                EvalError::ResolutionMismatch {
                    expression_id: eid.clone(),
                    source,
                }
            })
        };
        let primary = build(&rp.primary)?;
        let target = rp.target.as_ref().map(build).transpose()?;
        set.entries.insert(eid, Prediction { primary, target });
    }
    Ok(set)
}

pub fn predictions_to_json(set: &PredictionSet) -> String {
    let raw = RawPredictionFile {
        predictions: set
            .entries
            .iter()
            .map(|(eid, p)| {
                (
                    eid.clone(),
                    RawPrediction {
                        primary: track_to_raw(&p.primary),
                        target: p.target.as_ref().map(track_to_raw),
                    },
                )
            })
            .collect(),
    };
    crate::dataset::canonical_string(&raw)
}

impl PredictionSet {
    pub fn insert(&mut self, expression_id: impl Into<String>, prediction: Prediction) {
        self.entries.insert(expression_id.into(), prediction);
    }

    /// Checks every track against its video's shape.
    pub fn check_against(&self, meta: &DatasetMeta) -> Result<(), EvalError> {
        let index = meta.expression_index();
        for (eid, p) in &self.entries {
            let Some(vid) = index.get(eid.as_str()) else {
                continue;
            };
            let v = &meta.videos[*vid];
            for t in std::iter::once(&p.primary).chain(p.target.as_ref()) {
                if t.resolution() != v.resolution() {
                    return Err(EvalError::ResolutionMismatch {
                        expression_id: eid.clone(),
                        source: MaskError::ResolutionMismatch {
                            left: t.resolution(),
                            right: v.resolution(),
                        },
                    });
                }
            }
        }
        Ok(())
    }
}
