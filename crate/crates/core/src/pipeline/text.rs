//! Caption utilities: bracketed index tokens, role reversal and reply
//! parsing.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use regex::Regex;
use serde_json::Value;

use super::{Interaction, PipelineError};
use crate::dataset::Direction;
use crate::stats::{stopwords, tokenize};

fn index_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[(\d+)\]").expect("index regex"))
}

/// Labels of every `[k]` token, in order of appearance.
pub fn index_tokens(text: &str) -> Vec<u32> {
    index_re()
        .captures_iter(text)
        .filter_map(|c| c[1].parse().ok())
        .collect()
}

pub fn has_index_token(text: &str) -> bool {
    index_re().is_match(text)
}

/// Replaces each `[k]` with its description.
pub fn substitute_indices(template: &str, bindings: &BTreeMap<u32, String>) -> Result<String, PipelineError> {
    for caps in index_re().captures_iter(template) {
        let bound = caps[1].parse::<u32>().ok().filter(|k| bindings.contains_key(k));
        if bound.is_none() {
            return Err(PipelineError::MissingBinding(caps[1].to_string()));
        }
    }
    Ok(index_re()
        .replace_all(template, |c: &regex::Captures| {
            bindings[&c[1].parse::<u32>().expect("checked index")].clone()
        })
        .into_owned())
}

/// Swaps actor and target roles along with the two captions.
pub fn reverse_roles(interaction: &Interaction) -> Result<Interaction, PipelineError> {
    if interaction.direction != Direction::Unidirectional {
        return Err(PipelineError::NotUnidirectional);
    }
    let reversed = interaction
        .reversed_caption
        .clone()
        .ok_or(PipelineError::NotUnidirectional)?;
    Ok(Interaction {
        direction: Direction::Unidirectional,
        actor_indices: interaction.target_indices.clone(),
        target_indices: interaction.actor_indices.clone(),
        forward_caption: reversed,
        reversed_caption: Some(interaction.forward_caption.clone()),
    })
}

/// First JSON object in a model reply, tolerating code fences and prose
/// around it.
pub fn extract_json(reply: &str) -> Result<Value, String> {
    let start = reply.find('{').ok_or("reply contains no JSON object")?;
    let end = reply.rfind('}').ok_or("reply contains no JSON object")?;
    if end < start {
        return Err("reply contains no JSON object".into());
    }
    let value: Value = serde_json::from_str(&reply[start..=end]).map_err(|e| format!("invalid JSON: {e}"))?;
    if !value.is_object() {
        return Err("reply is not a JSON object".into());
    }
    Ok(value)
}

pub fn get_text(v: &Value, field: &str) -> Result<String, String> {
    match v.get(field).and_then(Value::as_str).map(str::trim) {
        Some(s) if !s.is_empty() => Ok(s.to_string()),
        _ => Err(format!("missing or empty field \"{field}\"")),
    }
}

pub fn get_labels(v: &Value, field: &str) -> Result<BTreeSet<u32>, String> {
    let items = v
        .get(field)
        .and_then(Value::as_array)
        .ok_or_else(|| format!("missing list field \"{field}\""))?;
    items
        .iter()
        .map(|x| {
            x.as_u64()
                .and_then(|n| u32::try_from(n).ok())
                .ok_or_else(|| format!("\"{field}\" holds a non-label value {x}"))
        })
        .collect()
}

/// Token Jaccard similarity of two descriptions, stopwords removed.
pub fn text_similarity(a: &str, b: &str) -> f64 {
    let stop = stopwords();
    let ta: BTreeSet<String> = tokenize(a, &stop).collect();
    let tb: BTreeSet<String> = tokenize(b, &stop).collect();
    let union = ta.union(&tb).count();
    if union == 0 {
        return 0.0;
    }
    ta.intersection(&tb).count() as f64 / union as f64
}

pub fn label_list(labels: impl IntoIterator<Item = u32>) -> String {
    labels
        .into_iter()
        .map(|l| format!("[{l}]"))
        .collect::<Vec<_>>()
        .join(", ")
}
