//! Corpus statistics: counts, per-video histograms and word frequencies.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetMeta, ExpressionType};

pub const DEFAULT_FPS: f64 = 30.0;

const STOPWORDS: &str = include_str!("../data/stopwords.txt");
const TEXT_TOP_WORDS: usize = 20;

/// Fixed-width histogram keyed by bucket start.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: u64,
    pub buckets: BTreeMap<u64, u64>,
}

impl Histogram {
    pub fn new(bin_width: u64) -> Self {
        Self {
            bin_width: bin_width.max(1),
            buckets: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, value: u64) {
        let start = value / self.bin_width * self.bin_width;
        *self.buckets.entry(start).or_insert(0) += 1;
    }

    pub fn total(&self) -> u64 {
        self.buckets.values().sum()
    }

    fn label(&self, start: u64) -> String {
        if self.bin_width == 1 {
            start.to_string()
        } else {
            format!("{}-{}", start, start + self.bin_width - 1)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub video_count: u64,
    pub object_count: u64,
    pub expression_count: u64,
    pub objects_per_video: f64,
    pub interaction_expression_count: u64,
    pub videos_with_interaction_fraction: f64,
    pub fps: f64,
    pub expressions_per_video_hist: Histogram,
    pub objects_per_video_hist: Histogram,
    /// Bucketed by whole seconds; empty when fps is not positive.
    pub duration_hist: Histogram,
    pub frame_count_hist: Histogram,
    pub interactions_per_video_hist: Histogram,
    /// Distinct participants per interaction expression.
    pub objects_per_interaction_hist: Histogram,
    pub word_freq: BTreeMap<String, u64>,
}

pub fn stopwords() -> BTreeSet<&'static str> {
    STOPWORDS.lines().map(str::trim).filter(|w| !w.is_empty()).collect()
}

/// Lowercased alphanumeric runs, stopwords removed.
pub fn tokenize<'a>(text: &'a str, stop: &'a BTreeSet<&'static str>) -> impl Iterator<Item = String> + 'a {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(move |t| !stop.contains(t.as_str()))
}

pub fn compute_stats(meta: &DatasetMeta, fps: Option<f64>) -> DatasetStats {
    let fps = fps.unwrap_or(DEFAULT_FPS);
    let stop = stopwords();
    let mut s = DatasetStats {
        video_count: meta.videos.len() as u64,
        object_count: 0,
        expression_count: 0,
        objects_per_video: 0.0,
        interaction_expression_count: 0,
        videos_with_interaction_fraction: 0.0,
        fps,
        expressions_per_video_hist: Histogram::new(5),
        objects_per_video_hist: Histogram::new(1),
        duration_hist: Histogram::new(5),
        frame_count_hist: Histogram::new(50),
        interactions_per_video_hist: Histogram::new(1),
        objects_per_interaction_hist: Histogram::new(1),
        word_freq: BTreeMap::new(),
    };
    let mut with_interaction = 0u64;
    for video in meta.videos.values() {
        s.object_count += video.objects.len() as u64;
        s.expression_count += video.expressions.len() as u64;
        s.expressions_per_video_hist.add(video.expressions.len() as u64);
        s.objects_per_video_hist.add(video.objects.len() as u64);
        s.frame_count_hist.add(video.frame_count as u64);
        if fps > 0.0 && fps.is_finite() {
            s.duration_hist.add((video.frame_count as f64 / fps).floor() as u64);
        }
        let mut interactions = 0u64;
        for e in video.expressions.values() {
            for tok in tokenize(&e.text, &stop) {
                *s.word_freq.entry(tok).or_insert(0) += 1;
            }
            if e.kind == ExpressionType::Interaction {
                interactions += 1;
                let n = e
                    .interaction
                    .as_ref()
                    .map_or(e.object_ids.len(), |i| i.participants().len());
                s.objects_per_interaction_hist.add(n as u64);
            }
        }
        s.interaction_expression_count += interactions;
        s.interactions_per_video_hist.add(interactions);
        if interactions > 0 {
            with_interaction += 1;
        }
    }
    if s.video_count > 0 {
        s.objects_per_video = s.object_count as f64 / s.video_count as f64;
        s.videos_with_interaction_fraction = with_interaction as f64 / s.video_count as f64;
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StatsFormat {
    #[default]
    Text,
    Json,
    Csv,
}

impl FromStr for StatsFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "text" => Ok(Self::Text),
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(format!("unknown stats format {other:?} (text, json, csv)")),
        }
    }
}

impl DatasetStats {
    fn histograms(&self) -> [(&'static str, &Histogram); 6] {
        [
            ("expressions_per_video", &self.expressions_per_video_hist),
            ("objects_per_video", &self.objects_per_video_hist),
            ("duration_seconds", &self.duration_hist),
            ("frame_count", &self.frame_count_hist),
            ("interactions_per_video", &self.interactions_per_video_hist),
            ("objects_per_interaction", &self.objects_per_interaction_hist),
        ]
    }

    fn scalars(&self) -> [(&'static str, String); 7] {
        [
            ("video_count", self.video_count.to_string()),
            ("object_count", self.object_count.to_string()),
            ("expression_count", self.expression_count.to_string()),
            ("objects_per_video", format!("{:.2}", self.objects_per_video)),
            (
                "interaction_expression_count",
                self.interaction_expression_count.to_string(),
            ),
            (
                "videos_with_interaction_fraction",
                format!("{:.3}", self.videos_with_interaction_fraction),
            ),
            ("fps", self.fps.to_string()),
        ]
    }

    /// Tokens by descending count, ties broken lexicographically.
    pub fn ranked_words(&self) -> Vec<(&str, u64)> {
        let mut words: Vec<(&str, u64)> = self.word_freq.iter().map(|(w, &c)| (w.as_str(), c)).collect();
        words.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        words
    }
}

pub fn render_stats(stats: &DatasetStats, format: StatsFormat) -> String {
    match format {
        StatsFormat::Text => render_text(stats),
        StatsFormat::Json => crate::dataset::canonical_string(stats),
        StatsFormat::Csv => render_csv(stats),
    }
}

fn render_text(stats: &DatasetStats) -> String {
    let mut out = String::new();
    for (name, value) in stats.scalars() {
        let _ = writeln!(out, "{name}: {value}");
    }
    for (name, hist) in stats.histograms() {
        let _ = writeln!(out, "\n{name} (bin {}):", hist.bin_width);
        for (&start, count) in &hist.buckets {
            let _ = writeln!(out, "  {}: {count}", hist.label(start));
        }
    }
    let _ = writeln!(out, "\ntop words:");
    for (word, count) in stats.ranked_words().into_iter().take(TEXT_TOP_WORDS) {
        let _ = writeln!(out, "  {word}: {count}");
    }
    out
}

/// Long-format table `section,key,value`: scalars, then histogram buckets,
/// then every word.
fn render_csv(stats: &DatasetStats) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut rows: Vec<[String; 3]> = Vec::new();
    for (name, value) in stats.scalars() {
        rows.push(["scalar".into(), name.into(), value]);
    }
    for (name, hist) in stats.histograms() {
        for (start, count) in &hist.buckets {
            rows.push([name.into(), start.to_string(), count.to_string()]);
        }
    }
    for (word, count) in stats.ranked_words() {
        rows.push(["word".into(), word.into(), count.to_string()]);
    }
    let write = || -> csv::Result<Vec<u8>> {
        w.write_record(["section", "key", "value"])?;
        for r in &rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| e.into_error().into())
    };
    String::from_utf8(write().expect("in-memory csv")).expect("utf-8 csv")
}
