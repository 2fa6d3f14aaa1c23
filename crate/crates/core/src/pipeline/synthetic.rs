use std::collections::{BTreeMap, BTreeSet};

use serde_json::json;

use super::text::substitute_indices;
use crate::llm::{BackendError, LlmRequest};

const COLOR_NAMES: [&str; 12] = [
    "red",
    "spring green",
    "magenta",
    "lime",
    "blue",
    "orange",
    "cyan",
    "rose",
    "green",
    "violet",
    "yellow",
    "azure",
];

fn meta<'a>(req: &'a LlmRequest, key: &str) -> Result<&'a str, BackendError> {
    req.metadata
        .get(key)
        .map(String::as_str)
        .ok_or_else(|| BackendError::Fatal(format!("synthetic responder: request lacks {key}")))
}

fn labels(s: &str) -> Vec<u32> {
    s.split(',').filter_map(|x| x.trim().parse().ok()).collect()
}

/// Offline stand-in for a real model. Replies are a pure function of the
/// request's task and metadata: even labels move, odd labels stay put, and
/// the two lowest labels of a video interact with the lower one as actor.
pub fn synthetic_responder(req: &LlmRequest) -> Result<String, BackendError> {
    let reply = match req.task.as_str() {
        "stage1" => {
            let label: u32 = meta(req, "index")?.parse().unwrap_or(0);
            let category = match meta(req, "category")? {
                "" => "object",
                c => c,
            };
            let color = COLOR_NAMES[label as usize % COLOR_NAMES.len()];
            let motion = if label.is_multiple_of(2) {
                "moving slowly across the scene"
            } else {
                "standing still in place"
            };
            json!({
                "category": category,
                "appearance": format!("the {category} under the {color} highlight"),
                "motion": motion,
            })
        }
        "stage2_single" => {
            let category = meta(req, "category")?;
            let appearance = meta(req, "appearance")?;
            let motion = meta(req, "motion")?;
            json!({
                "appearance_only": appearance,
                "motion_only": format!("the {category} {motion}"),
                "combined": format!("{appearance} {motion}"),
            })
        }
        "stage2_multi" => json!({
            "merge": true,
            "expression": format!("the objects {}", meta(req, "motion")?),
        }),
        "stage3" => {
            let ls = labels(meta(req, "labels")?);
            match ls.as_slice() {
                [a, b, ..] => json!({"interactions": [{
                    "direction": "uni",
                    "actors": [a],
                    "targets": [b],
                    "caption": format!("Object [{a}] is moving toward object [{b}]"),
                }]}),
                _ => json!({"interactions": []}),
            }
        }
        "stage3_reverse" => json!({
            "caption": format!(
                "Object {} is being approached by object {}",
                meta(req, "targets")?,
                meta(req, "actors")?
            ),
        }),
        "stage4_unidirectional" | "stage4_bidirectional" => {
            let descriptions: BTreeMap<u32, String> = serde_json::from_str(meta(req, "descriptions_json")?)
                .map_err(|e| BackendError::Fatal(e.to_string()))?;
            let text = substitute_indices(meta(req, "caption")?, &descriptions)
                .map_err(|e| BackendError::Fatal(e.to_string()))?
                .replace("Object the", "The")
                .replace("object the", "the");
            let actors: BTreeSet<u32> =
                serde_json::from_str(meta(req, "actor_ids")?).map_err(|e| BackendError::Fatal(e.to_string()))?;
            let targets: BTreeSet<u32> =
                serde_json::from_str(meta(req, "target_ids")?).map_err(|e| BackendError::Fatal(e.to_string()))?;
            json!({"expression": text, "actor_ids": actors, "target_ids": targets})
        }
        other => {
            return Err(BackendError::Fatal(format!(
                "synthetic responder has no reply for task {other}"
            )))
        }
    };
    Ok(reply.to_string())
}
