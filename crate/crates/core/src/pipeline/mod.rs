//! Four-stage annotation: object captions, referring expressions,
//! interaction detection, and enriched interaction expressions.

mod assemble;
mod overlay;
mod store;
mod synthetic;
mod text;

use std::collections::{BTreeMap, BTreeSet};

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::clips::{FrameReadError, FrameSource};
use crate::dataset::{DatasetMeta, Direction, InteractionLevel, Video, Violation};
use crate::llm::{DecodeParams, EncodedImage, LlmClient, LlmError, LlmRequest, PromptLibrary, RequestKind};
use crate::mask::MaskTrack;

pub use assemble::{assemble_dataset, expression_provenance};
pub use overlay::{
    encode_png, glyph_size, palette_color, render_overlay, render_overlay_frame, sample_frame_indices, OverlayError,
    OverlayMode, PALETTE,
};
pub use store::StageStore;
pub use synthetic::synthetic_responder;
pub use text::{extract_json, has_index_token, index_tokens, reverse_roles, substitute_indices, text_similarity};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectCaption {
    pub category: String,
    pub appearance: String,
    pub motion: String,
}

/// Per object, keyed by index label.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage1Output {
    pub objects: BTreeMap<u32, ObjectCaption>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SingleExpressions {
    pub appearance_only: String,
    pub motion_only: String,
    pub combined: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeGroup {
    pub labels: BTreeSet<u32>,
    pub expression: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage2Output {
    pub objects: BTreeMap<u32, SingleExpressions>,
    pub merge_groups: Vec<MergeGroup>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interaction {
    pub direction: Direction,
    pub actor_indices: BTreeSet<u32>,
    pub target_indices: BTreeSet<u32>,
    /// Caption with bracketed index labels, actors as subject.
    pub forward_caption: String,
    /// Same event with the targets as subject; unidirectional only.
    pub reversed_caption: Option<String>,
}

impl Interaction {
    pub fn participants(&self) -> BTreeSet<u32> {
        self.actor_indices.union(&self.target_indices).copied().collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage3Output {
    pub interactions: Vec<Interaction>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnrichedCaption {
    /// Position in [`Stage3Output::interactions`].
    pub interaction: usize,
    /// Built from the reversed caption, roles swapped.
    pub reversed: bool,
    pub class_level_text: String,
    pub appearance_level_text: String,
    pub actor_ids: BTreeSet<u32>,
    pub target_ids: BTreeSet<u32>,
    /// Text produced by plain index substitution after the model failed.
    pub class_level_fallback: bool,
    pub appearance_level_fallback: bool,
}

impl EnrichedCaption {
    pub fn text(&self, level: InteractionLevel) -> &str {
        match level {
            InteractionLevel::Class => &self.class_level_text,
            InteractionLevel::Appearance => &self.appearance_level_text,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage4Output {
    pub captions: Vec<EnrichedCaption>,
}

/// A schema violation and the stage that produced the offending item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StagedViolation {
    pub stage: u8,
    pub violation: Violation,
}

fn first_violation(v: &[StagedViolation]) -> String {
    v.first()
        .map(|s| format!("stage {}: {}", s.stage, s.violation))
        .unwrap_or_default()
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("stage {stage} could not parse the reply for {item}: {reason}")]
    ParseFailure {
        stage: u8,
        item: String,
        reason: String,
        raw: String,
    },
    #[error("no binding for index [{0}]")]
    MissingBinding(String),
    #[error("role reversal needs a unidirectional interaction with a reversed caption")]
    NotUnidirectional,
    #[error("video {video_id}: stage {stage} refers to unknown index label {label}")]
    UnknownLabel { video_id: String, stage: u8, label: u32 },
    #[error("video {video_id}: {} schema violation(s), first: {}", .violations.len(), first_violation(.violations))]
    Assembly {
        video_id: String,
        violations: Vec<StagedViolation>,
    },
    #[error("video {video_id}: stage {stage} output is missing")]
    MissingStage { video_id: String, stage: u8 },
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Overlay(#[from] OverlayError),
    #[error(transparent)]
    Frames(#[from] FrameReadError),
    #[error("stage file {path}: {message}")]
    StageFile { path: String, message: String },
    #[error("cancelled")]
    Cancelled,
}

impl PipelineError {
    /// Whether the failure came from the language model service rather than
    /// from the data.
    pub fn is_backend(&self) -> bool {
        matches!(self, PipelineError::Llm(e) if !matches!(e, LlmError::MissingBinding(_) | LlmError::UnknownTemplate(_)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub frames_per_request: usize,
    /// Token Jaccard threshold on motion text for multi-instance candidates.
    pub merge_similarity: f64,
    pub decode: DecodeParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            frames_per_request: 8,
            merge_similarity: 0.5,
            decode: DecodeParams::default(),
        }
    }
}

/// One clip to annotate: its object tracks and a frame reader.
pub struct VideoInput {
    pub video_id: String,
    pub video: Video,
    pub frames: Box<dyn FrameSource<Frame = RgbImage> + Send + Sync>,
}

impl VideoInput {
    pub fn tracks_by_label(&self) -> BTreeMap<u32, MaskTrack> {
        self.video
            .objects
            .values()
            .map(|o| (o.index_label, o.track.clone()))
            .collect()
    }
}

const FORMAT_REMINDER: &str = "Your previous reply could not be used";

pub struct Annotator<'a> {
    pub client: &'a LlmClient,
    /// Serves requests without images when set.
    pub text_client: Option<&'a LlmClient>,
    pub prompts: &'a PromptLibrary,
    pub config: PipelineConfig,
}

type Bindings = BTreeMap<String, String>;

fn bindings(pairs: &[(&str, String)]) -> Bindings {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

impl<'a> Annotator<'a> {
    pub fn new(client: &'a LlmClient, prompts: &'a PromptLibrary) -> Self {
        Self {
            client,
            text_client: None,
            prompts,
            config: PipelineConfig::default(),
        }
    }

    pub fn with_text_client(mut self, client: &'a LlmClient) -> Self {
        self.text_client = Some(client);
        self
    }

    fn client_for(&self, req: &LlmRequest) -> &LlmClient {
        match (req.kind, self.text_client) {
            (RequestKind::TextChat, Some(c)) => c,
            _ => self.client,
        }
    }

    fn request(
        &self,
        task: &str,
        template: &str,
        b: &Bindings,
        images: Vec<EncodedImage>,
    ) -> Result<LlmRequest, LlmError> {
        let system = self.prompts.render("system", &BTreeMap::new())?;
        let user = self.prompts.render(template, b)?;
        let mut req = if images.is_empty() {
            LlmRequest::text(task, &system, &user)
        } else {
            LlmRequest::vision(task, &system, &user, images)
        };
        req.params = self.config.decode.clone();
        req.metadata = b.clone();
        Ok(req)
    }

    /// Sends `req`, parses the reply with `parse`, and on failure retries
    /// once with a format reminder appended.
    fn ask<T>(
        &self,
        stage: u8,
        item: &str,
        mut req: LlmRequest,
        parse: impl Fn(&Value) -> Result<T, String>,
    ) -> Result<T, PipelineError> {
        let mut last = (String::new(), String::new());
        for round in 0..2 {
            if round == 1 {
                req.user_prompt = format!(
                    "{}\n\n{FORMAT_REMINDER} ({}). Reply with a single JSON object in exactly the format requested above.",
                    req.user_prompt, last.0
                );
                req.metadata.insert("reprompt".into(), "1".into());
            }
            let resp = self.client_for(&req).complete(&req)?;
            match extract_json(&resp.text).and_then(|v| parse(&v)) {
                Ok(t) => return Ok(t),
                Err(reason) => last = (reason, resp.text),
            }
        }
        Err(PipelineError::ParseFailure {
            stage,
            item: item.to_string(),
            reason: last.0,
            raw: last.1,
        })
    }

    fn overlay_images(&self, input: &VideoInput, mode: OverlayMode) -> Result<Vec<EncodedImage>, PipelineError> {
        let tracks = input.tracks_by_label();
        sample_frame_indices(input.video.frame_count, self.config.frames_per_request)
            .into_iter()
            .map(|i| {
                let frame = input.frames.read_frame(i)?;
                let img = render_overlay_frame(i, &frame, &tracks, mode)?;
                Ok(EncodedImage::png(encode_png(&img)))
            })
            .collect()
    }

    pub fn run_stage1(&self, input: &VideoInput) -> Result<Stage1Output, PipelineError> {
        let mut out = Stage1Output::default();
        let mut objects: Vec<_> = input.video.objects.values().collect();
        objects.sort_by_key(|o| o.index_label);
        for obj in objects {
            let label = obj.index_label;
            let images = self.overlay_images(input, OverlayMode::SingleObject(label))?;
            let hint = if obj.category.is_empty() {
                String::new()
            } else {
                format!("The highlighted object is a {}.", obj.category)
            };
            let mut b = bindings(&[("index", label.to_string()), ("category_hint", hint)]);
            let req = self.request("stage1", "stage1_caption", &b, images)?;
            b.insert("category".into(), obj.category.clone());
            let req = LlmRequest { metadata: b, ..req };
            let caption = self.ask(1, &format!("{}/{}", input.video_id, obj.object_id), req, |v| {
                Ok(ObjectCaption {
                    category: text::get_text(v, "category")?,
                    appearance: text::get_text(v, "appearance")?,
                    motion: text::get_text(v, "motion")?,
                })
            })?;
            out.objects.insert(label, caption);
        }
        Ok(out)
    }

    pub fn run_stage2(&self, stage1: &Stage1Output) -> Result<Stage2Output, PipelineError> {
        let mut out = Stage2Output::default();
        for (&label, cap) in &stage1.objects {
            let b = bindings(&[
                ("category", cap.category.clone()),
                ("appearance", cap.appearance.clone()),
                ("motion", cap.motion.clone()),
            ]);
            let req = self.request("stage2_single", "stage2_single", &b, vec![])?;
            let exprs = self.ask(2, &format!("object [{label}]"), req, |v| {
                Ok(SingleExpressions {
                    appearance_only: text::get_text(v, "appearance_only")?,
                    motion_only: text::get_text(v, "motion_only")?,
                    combined: text::get_text(v, "combined")?,
                })
            })?;
            out.objects.insert(label, exprs);
        }
        for group in self.merge_candidates(stage1) {
            let listing = group
                .iter()
                .map(|l| {
                    let c = &stage1.objects[l];
                    format!("[{l}] {}: {}", c.category, c.motion)
                })
                .collect::<Vec<_>>()
                .join("\n");
            let mut b = bindings(&[("objects", listing)]);
            let req = self.request("stage2_multi", "stage2_multi", &b, vec![])?;
            b.insert(
                "labels".into(),
                group.iter().map(u32::to_string).collect::<Vec<_>>().join(","),
            );
            b.insert(
                "motion".into(),
                stage1.objects[group.iter().next().expect("group")].motion.clone(),
            );
            let req = LlmRequest { metadata: b, ..req };
            let decision = self.ask(
                2,
                &format!("merge {}", text::label_list(group.iter().copied())),
                req,
                |v| {
                    let merge = v
                        .get("merge")
                        .and_then(Value::as_bool)
                        .ok_or("missing boolean field \"merge\"")?;
                    if merge {
                        Ok(Some(text::get_text(v, "expression")?))
                    } else {
                        Ok(None)
                    }
                },
            )?;
            if let Some(expression) = decision {
                out.merge_groups.push(MergeGroup {
                    labels: group,
                    expression,
                });
            }
        }
        Ok(out)
    }

    /// Connected groups of objects whose motion texts are similar.
    fn merge_candidates(&self, stage1: &Stage1Output) -> Vec<BTreeSet<u32>> {
        let labels: Vec<u32> = stage1.objects.keys().copied().collect();
        let mut parent: Vec<usize> = (0..labels.len()).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for i in 0..labels.len() {
            for j in i + 1..labels.len() {
                let a = &stage1.objects[&labels[i]].motion;
                let b = &stage1.objects[&labels[j]].motion;
                if text_similarity(a, b) >= self.config.merge_similarity {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
        let mut groups: BTreeMap<usize, BTreeSet<u32>> = BTreeMap::new();
        for (i, &label) in labels.iter().enumerate() {
            let r = find(&mut parent, i);
            groups.entry(r).or_default().insert(label);
        }
        groups.into_values().filter(|g| g.len() >= 2).collect()
    }

    pub fn run_stage3(&self, input: &VideoInput) -> Result<Stage3Output, PipelineError> {
        let known: BTreeSet<u32> = input.video.objects.values().map(|o| o.index_label).collect();
        if known.len() < 2 {
            return Ok(Stage3Output::default());
        }
        let images = self.overlay_images(input, OverlayMode::AllObjects)?;
        let mut b = bindings(&[("indices", text::label_list(known.iter().copied()))]);
        let req = self.request("stage3", "stage3_interactions", &b, images)?;
        b.insert(
            "labels".into(),
            known.iter().map(u32::to_string).collect::<Vec<_>>().join(","),
        );
        let req = LlmRequest { metadata: b, ..req };
        let found = self.ask(3, &format!("{} interactions", input.video_id), req, |v| {
            let items = v
                .get("interactions")
                .and_then(Value::as_array)
                .ok_or("missing list field \"interactions\"")?;
            items
                .iter()
                .map(|item| parse_interaction(item, &known))
                .collect::<Result<Vec<_>, _>>()
        })?;

        let mut seen = BTreeSet::new();
        let mut out = Stage3Output::default();
        for mut inter in found {
            if !seen.insert(inter.participants()) {
                tracing::warn!(video = %input.video_id, "more than one interaction between {:?}", inter.participants());
            }
            if inter.direction == Direction::Unidirectional {
                let b = bindings(&[
                    ("caption", inter.forward_caption.clone()),
                    ("actors", text::label_list(inter.actor_indices.iter().copied())),
                    ("targets", text::label_list(inter.target_indices.iter().copied())),
                ]);
                let req = self.request("stage3_reverse", "stage3_reverse", &b, vec![])?;
                let participants = inter.participants();
                let reversed = self.ask(3, &inter.forward_caption, req, |v| {
                    let c = text::get_text(v, "caption")?;
                    check_tokens(&c, &participants)?;
                    Ok(c)
                })?;
                inter.reversed_caption = Some(reversed);
            }
            out.interactions.push(inter);
        }
        Ok(out)
    }

    pub fn run_stage4(
        &self,
        stage1: &Stage1Output,
        stage2: &Stage2Output,
        stage3: &Stage3Output,
    ) -> Result<Stage4Output, PipelineError> {
        let class_desc: BTreeMap<u32, String> = stage1
            .objects
            .iter()
            .map(|(&l, c)| (l, format!("the {}", c.category)))
            .collect();
        let appearance_desc: BTreeMap<u32, String> = stage1
            .objects
            .iter()
            .map(|(&l, c)| {
                let d = stage2
                    .objects
                    .get(&l)
                    .map(|e| e.appearance_only.clone())
                    .unwrap_or_else(|| format!("the {} {}", c.category, c.appearance));
                (l, d)
            })
            .collect();

        let mut out = Stage4Output::default();
        for (i, inter) in stage3.interactions.iter().enumerate() {
            let mut variants = vec![(false, inter.clone())];
            if inter.direction == Direction::Unidirectional {
                variants.push((true, reverse_roles(inter)?));
            }
            for (reversed, v) in variants {
                let (class_text, class_fb) = self.enrich(&v, &class_desc, InteractionLevel::Class)?;
                let (app_text, app_fb) = self.enrich(&v, &appearance_desc, InteractionLevel::Appearance)?;
                out.captions.push(EnrichedCaption {
                    interaction: i,
                    reversed,
                    class_level_text: class_text,
                    appearance_level_text: app_text,
                    actor_ids: v.actor_indices.clone(),
                    target_ids: v.target_indices.clone(),
                    class_level_fallback: class_fb,
                    appearance_level_fallback: app_fb,
                });
            }
        }
        Ok(out)
    }

    /// Fluent rewrite of one caption, or plain substitution when the model's
    /// replies fail validation twice.
    fn enrich(
        &self,
        inter: &Interaction,
        descriptions: &BTreeMap<u32, String>,
        level: InteractionLevel,
    ) -> Result<(String, bool), PipelineError> {
        let caption = &inter.forward_caption;
        let labels: BTreeSet<u32> = index_tokens(caption).into_iter().chain(inter.participants()).collect();
        let mut bound = BTreeMap::new();
        for l in &labels {
            let d = descriptions
                .get(l)
                .ok_or_else(|| PipelineError::MissingBinding(l.to_string()))?;
            bound.insert(*l, d.clone());
        }
        let listing = bound
            .iter()
            .map(|(l, d)| format!("[{l}]: {d}"))
            .collect::<Vec<_>>()
            .join("\n");
        let uni = inter.direction == Direction::Unidirectional;
        let template = if uni {
            "stage4_unidirectional"
        } else {
            "stage4_bidirectional"
        };
        let mut b = bindings(&[("caption", caption.clone()), ("descriptions", listing)]);
        let req = self.request(template, template, &b, vec![])?;
        let level_name = match level {
            InteractionLevel::Class => "class",
            InteractionLevel::Appearance => "appearance",
        };
        b.insert("level".into(), level_name.into());
        b.insert(
            "descriptions_json".into(),
            serde_json::to_string(&bound).expect("string map"),
        );
        b.insert(
            "actor_ids".into(),
            serde_json::to_string(&inter.actor_indices).expect("labels"),
        );
        b.insert(
            "target_ids".into(),
            serde_json::to_string(&inter.target_indices).expect("labels"),
        );
        let req = LlmRequest { metadata: b, ..req };
        let result = self.ask(4, caption, req, |v| {
            let text = text::get_text(v, "expression")?;
            if has_index_token(&text) {
                return Err("expression still contains a bracketed index".into());
            }
            if uni {
                let actors = text::get_labels(v, "actor_ids")?;
                let targets = text::get_labels(v, "target_ids")?;
                if actors != inter.actor_indices || targets != inter.target_indices {
                    return Err(format!(
                        "roles {actors:?} -> {targets:?} disagree with the caption's {:?} -> {:?}",
                        inter.actor_indices, inter.target_indices
                    ));
                }
            }
            Ok(text)
        });
        match result {
            Ok(text) => Ok((text, false)),
            Err(PipelineError::ParseFailure { reason, .. }) => {
                tracing::warn!(caption = %caption, level = level_name, %reason, "using substitution fallback");
                Ok((substitute_indices(caption, &bound)?, true))
            }
            Err(e) => Err(e),
        }
    }
}

fn check_tokens(text: &str, allowed: &BTreeSet<u32>) -> Result<(), String> {
    match index_tokens(text).into_iter().find(|t| !allowed.contains(t)) {
        Some(t) => Err(format!("caption mentions unknown object [{t}]")),
        None => Ok(()),
    }
}

fn parse_interaction(item: &Value, known: &BTreeSet<u32>) -> Result<Interaction, String> {
    let direction = match item.get("direction").and_then(Value::as_str) {
        Some("uni") | Some("unidirectional") => Direction::Unidirectional,
        Some("bi") | Some("bidirectional") => Direction::Bidirectional,
        other => return Err(format!("bad direction {other:?}")),
    };
    let actors = text::get_labels(item, "actors")?;
    let targets = match item.get("targets") {
        None | Some(Value::Null) => BTreeSet::new(),
        Some(_) => text::get_labels(item, "targets")?,
    };
    let caption = text::get_text(item, "caption")?;
    if let Some(l) = actors.iter().chain(&targets).find(|l| !known.contains(l)) {
        return Err(format!("unknown object [{l}]"));
    }
    check_tokens(&caption, known)?;
    match direction {
        Direction::Unidirectional => {
            if actors.is_empty() || targets.is_empty() {
                return Err("unidirectional interaction needs actors and targets".into());
            }
            if !actors.is_disjoint(&targets) {
                return Err("actors and targets overlap".into());
            }
        }
        Direction::Bidirectional => {
            if !targets.is_empty() || actors.len() < 2 {
                return Err("bidirectional interaction needs two or more actors and no targets".into());
            }
        }
    }
    Ok(Interaction {
        direction,
        actor_indices: actors,
        target_indices: targets,
        forward_caption: caption,
        reversed_caption: None,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOptions {
    pub stages: BTreeSet<u8>,
    /// Reuse stage files that already exist instead of recomputing them.
    pub resume: bool,
    pub workers: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            stages: (1..=4).collect(),
            resume: false,
            workers: 1,
        }
    }
}

/// Result of annotating a batch of videos. Videos whose four stages are all
/// available are assembled into `meta`.
#[derive(Debug, Default)]
pub struct AnnotateSummary {
    pub meta: DatasetMeta,
    pub failures: Vec<(String, PipelineError)>,
}

impl Annotator<'_> {
    fn stage<T, F>(
        &self,
        store: &StageStore,
        video_id: &str,
        n: u8,
        opts: &RunOptions,
        compute: F,
    ) -> Result<Option<T>, PipelineError>
    where
        T: Serialize + serde::de::DeserializeOwned,
        F: FnOnce() -> Result<T, PipelineError>,
    {
        if opts.stages.contains(&n) && !(opts.resume && store.exists(video_id, n)) {
            if self.client.is_cancelled() {
                return Err(PipelineError::Cancelled);
            }
            let out = compute()?;
            store.save(video_id, n, &out)?;
            return Ok(Some(out));
        }
        store.load(video_id, n)
    }

    /// Runs the requested stages for one video and assembles it when all
    /// four stage outputs exist.
    pub fn run_video(
        &self,
        input: &VideoInput,
        store: &StageStore,
        opts: &RunOptions,
    ) -> Result<Option<Video>, PipelineError> {
        let vid = input.video_id.as_str();
        let need = |n: u8, present: bool| -> Result<(), PipelineError> {
            if present {
                Ok(())
            } else {
                Err(PipelineError::MissingStage {
                    video_id: vid.into(),
                    stage: n,
                })
            }
        };
        let s1: Option<Stage1Output> = self.stage(store, vid, 1, opts, || self.run_stage1(input))?;
        let s2: Option<Stage2Output> = self.stage(store, vid, 2, opts, || {
            need(1, s1.is_some())?;
            self.run_stage2(s1.as_ref().expect("checked"))
        })?;
        let s3: Option<Stage3Output> = self.stage(store, vid, 3, opts, || self.run_stage3(input))?;
        let s4: Option<Stage4Output> = self.stage(store, vid, 4, opts, || {
            need(1, s1.is_some())?;
            need(2, s2.is_some())?;
            need(3, s3.is_some())?;
            self.run_stage4(
                s1.as_ref().expect("checked"),
                s2.as_ref().expect("checked"),
                s3.as_ref().expect("checked"),
            )
        })?;
        match (s1, s2, s3, s4) {
            (Some(s1), Some(s2), Some(s3), Some(s4)) => {
                let meta = assemble_dataset(vid, &input.video, &s1, &s2, &s3, &s4)?;
                Ok(meta.videos.into_values().next())
            }
            _ => Ok(None),
        }
    }

    /// Annotates videos concurrently on a pool of `opts.workers` threads.
    pub fn annotate(&self, inputs: &[VideoInput], store: &StageStore, opts: &RunOptions) -> AnnotateSummary {
        let run = || -> Vec<(String, Result<Option<Video>, PipelineError>)> {
            inputs
                .par_iter()
                .map(|input| (input.video_id.clone(), self.run_video(input, store, opts)))
                .collect()
        };
        let results = match rayon::ThreadPoolBuilder::new().num_threads(opts.workers.max(1)).build() {
            Ok(pool) => pool.install(run),
            Err(_) => run(),
        };
        let mut summary = AnnotateSummary::default();
        for (vid, r) in results {
            match r {
                Ok(Some(video)) => {
                    summary.meta.videos.insert(vid, video);
                }
                Ok(None) => {}
                Err(e) => summary.failures.push((vid, e)),
            }
        }
        summary.failures.sort_by(|a, b| a.0.cmp(&b.0));
        summary
    }
}
