use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;

use super::LlmError;

pub const TEMPLATE_IDS: [&str; 8] = [
    "system",
    "stage1_caption",
    "stage2_single",
    "stage2_multi",
    "stage3_interactions",
    "stage3_reverse",
    "stage4_bidirectional",
    "stage4_unidirectional",
];

const BUILTIN: [(&str, &str); 8] = [
    ("system", include_str!("../../prompts/system.txt")),
    ("stage1_caption", include_str!("../../prompts/stage1_caption.txt")),
    ("stage2_single", include_str!("../../prompts/stage2_single.txt")),
    ("stage2_multi", include_str!("../../prompts/stage2_multi.txt")),
    (
        "stage3_interactions",
        include_str!("../../prompts/stage3_interactions.txt"),
    ),
    ("stage3_reverse", include_str!("../../prompts/stage3_reverse.txt")),
    (
        "stage4_bidirectional",
        include_str!("../../prompts/stage4_bidirectional.txt"),
    ),
    (
        "stage4_unidirectional",
        include_str!("../../prompts/stage4_unidirectional.txt"),
    ),
];

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{\{\s*([A-Za-z0-9_]+)\s*\}\}").expect("placeholder regex"))
}

/// Placeholder names used by `template`.
pub fn placeholders(template: &str) -> BTreeSet<String> {
    placeholder_re()
        .captures_iter(template)
        .map(|c| c[1].to_string())
        .collect()
}

/// Replaces every `{{name}}` with its binding. Bound values are inserted
/// verbatim and never rescanned. Extra bindings are ignored.
pub fn render_template(template: &str, bindings: &BTreeMap<String, String>) -> Result<String, LlmError> {
    if let Some(missing) = placeholders(template).into_iter().find(|p| !bindings.contains_key(p)) {
        return Err(LlmError::MissingBinding(missing));
    }
    Ok(placeholder_re()
        .replace_all(template, |c: &regex::Captures| bindings[&c[1]].clone())
        .into_owned())
}

/// Named prompt templates. The shipped texts are built in; a directory of
/// `<id>.txt` files overrides them one by one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptLibrary {
    templates: BTreeMap<String, String>,
}

impl Default for PromptLibrary {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PromptLibrary {
    pub fn builtin() -> Self {
        Self {
            templates: BUILTIN
                .iter()
                .map(|(id, text)| (id.to_string(), text.trim_end().to_string()))
                .collect(),
        }
    }

    pub fn load_dir(dir: &Path) -> std::io::Result<Self> {
        let mut lib = Self::builtin();
        for id in TEMPLATE_IDS {
            let path = dir.join(format!("{id}.txt"));
            if path.is_file() {
                let text = std::fs::read_to_string(&path)?;
                lib.templates.insert(id.to_string(), text.trim_end().to_string());
            }
        }
        Ok(lib)
    }

    pub fn insert(&mut self, id: &str, text: &str) {
        self.templates.insert(id.into(), text.into());
    }

    pub fn get(&self, id: &str) -> Result<&str, LlmError> {
        self.templates
            .get(id)
            .map(String::as_str)
            .ok_or_else(|| LlmError::UnknownTemplate(id.into()))
    }

    pub fn render(&self, id: &str, bindings: &BTreeMap<String, String>) -> Result<String, LlmError> {
        render_template(self.get(id)?, bindings)
    }
}
