use std::collections::BTreeSet;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rvos_core::clips::{extract_clips, materialize_clip, ClipConfig, DecodedFrames, FrameList};
use rvos_core::dataset::{self, load_meta, save_meta, validate_meta, DatasetError, DatasetMeta};
use rvos_core::eval::{
    build_eval_split, evaluate, evaluate_dual, parse_predictions, render_report, EvalConfig, ReportOptions,
    RoundingMode, Scale, SplitConfig,
};
use rvos_core::io::write_atomic;
use rvos_core::llm::{HttpBackend, HttpConfig, LlmBackend, LlmClient, MockBackend, PromptLibrary, RetryPolicy};
use rvos_core::pipeline::{synthetic_responder, Annotator, PipelineConfig, RunOptions, StageStore, VideoInput};
use rvos_core::stats::{compute_stats, render_stats, StatsFormat};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_BACKEND: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "rvos",
    version,
    about = "Interaction-aware RVOS dataset construction and evaluation"
)]
struct Cli {
    /// error, warn, info, debug or trace; debug and trace log as JSON lines
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    workers: u64,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory for request/response logs of language model calls
    #[arg(long, global = true)]
    audit: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the four annotation stages over annotated tracks
    Annotate(AnnotateArgs),
    /// Cut a long frame sequence into annotation clips
    ExtractClips(ExtractArgs),
    /// Score a prediction file against a dataset
    Evaluate(EvaluateArgs),
    /// Dataset statistics
    Stats(StatsArgs),
    /// Check a dataset file against the schema invariants
    Validate(ValidateArgs),
    /// Build a one-video dataset from indexed-palette PNG masks
    ImportPng(ImportArgs),
    /// Build an evaluation subset with single-object down-sampling
    Split(SplitArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BackendKind {
    Mock,
    Http,
}

#[derive(Args, Debug)]
struct AnnotateArgs {
    /// Directory holding one frame directory per video id
    #[arg(long)]
    frames: PathBuf,
    /// Dataset file with videos and object tracks
    #[arg(long)]
    tracks: PathBuf,
    #[arg(long, default_value = "1,2,3,4")]
    stages: String,
    #[arg(long, value_enum, default_value = "mock")]
    backend: BackendKind,
    #[arg(long, default_value = "http://localhost:8000/v1")]
    base_url: String,
    #[arg(long, default_value = "gpt-4o")]
    vision_model: String,
    #[arg(long, default_value = "llama-3.1-8b-instruct")]
    text_model: String,
    /// Directory of prompt template overrides
    #[arg(long)]
    prompts: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    resume: bool,
    #[arg(long, default_value_t = 8)]
    frames_per_request: usize,
    #[arg(long, default_value_t = 4)]
    max_in_flight: usize,
    #[arg(long, default_value_t = 4)]
    max_attempts: u32,
}

#[derive(Args, Debug)]
struct ExtractArgs {
    /// Frame directory or a text file listing one frame path per line
    #[arg(long)]
    frames: PathBuf,
    #[arg(long)]
    source_id: String,
    /// Manifest path
    #[arg(long)]
    out: PathBuf,
    #[arg(long = "bin", alias = "bin-size", default_value_t = 1000)]
    bin_size: usize,
    #[arg(long = "clip", alias = "clip-len", default_value_t = 500)]
    clip_len: usize,
    #[arg(long, default_value_t = 100)]
    min_len: usize,
    /// Copy the frames of each clip into a subdirectory of DIR
    #[arg(long, value_name = "DIR")]
    copy: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Rounding {
    HalfEven,
    HalfUp,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScaleArg {
    Percent,
    Unit,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    meta: PathBuf,
    #[arg(long = "preds", alias = "predictions")]
    predictions: PathBuf,
    /// Score actor and target tracks of actor-target expressions
    #[arg(long)]
    dual: bool,
    #[arg(long, default_value_t = rvos_core::metrics::DEFAULT_TOLERANCE_RATIO)]
    tolerance: f64,
    #[arg(long)]
    exclude_empty_gt: bool,
    #[arg(long, default_value_t = 1)]
    precision: usize,
    #[arg(long, value_enum, default_value = "half-even")]
    rounding: Rounding,
    #[arg(long, value_enum, default_value = "percent")]
    scale: ScaleArg,
    /// Text report path; a JSON copy is written next to it
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long)]
    meta: PathBuf,
    #[arg(long, default_value_t = rvos_core::stats::DEFAULT_FPS)]
    fps: f64,
    #[arg(long, default_value = "text")]
    format: StatsFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long)]
    meta: PathBuf,
}

#[derive(Args, Debug)]
struct ImportArgs {
    #[arg(long)]
    dir: PathBuf,
    #[arg(long)]
    video_id: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SplitArgs {
    #[arg(long)]
    meta: PathBuf,
    /// File with one training video id per line
    #[arg(long)]
    train_videos: Option<PathBuf>,
    /// File with one candidate evaluation video id per line
    #[arg(long)]
    eval_videos: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    min_interaction_fraction: f64,
    #[arg(long, default_value_t = 1.0)]
    downsample_rate: f64,
    #[arg(long)]
    out: PathBuf,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn data(e: impl Display) -> Self {
        Self {
            code: EXIT_DATA,
            message: e.to_string(),
        }
    }

    fn usage(e: impl Display) -> Self {
        Self {
            code: EXIT_USAGE,
            message: e.to_string(),
        }
    }
}

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        Failure::data(e)
    }
}

type CmdResult = Result<(), Failure>;

fn init_logging(level: &str) -> Result<(), Failure> {
    let filter = tracing_subscriber::EnvFilter::try_new(level).map_err(Failure::usage)?;
    let json = matches!(level, "debug" | "trace");
    let builder = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr);
    if json {
        builder.json().init();
    } else {
        builder.without_time().init();
    }
    Ok(())
}

fn write_output(path: Option<&Path>, text: &str) -> CmdResult {
    match path {
        Some(p) => write_atomic(p, text.as_bytes()).map_err(|e| Failure::data(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_ids(path: &Path) -> Result<BTreeSet<String>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

fn cmd_validate(a: &ValidateArgs) -> CmdResult {
    let meta = dataset::load_meta_unchecked(&a.meta)?;
    let violations = validate_meta(&meta);
    for v in &violations {
        println!("{v}");
    }
    println!("{} violations", violations.len());
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::data(format!("{} has schema violations", a.meta.display())))
    }
}

fn cmd_stats(a: &StatsArgs) -> CmdResult {
    let meta = load_meta(&a.meta)?;
    let stats = compute_stats(&meta, Some(a.fps));
    write_output(a.out.as_deref(), &render_stats(&stats, a.format))
}

fn cmd_evaluate(a: &EvaluateArgs, workers: usize) -> CmdResult {
    let meta = load_meta(&a.meta)?;
    let text = std::fs::read_to_string(&a.predictions)
        .map_err(|e| Failure::data(format!("{}: {e}", a.predictions.display())))?;
    let preds = parse_predictions(&text, &meta).map_err(Failure::data)?;
    let config = EvalConfig {
        tolerance_ratio: a.tolerance,
        workers,
        exclude_empty_gt_frames: a.exclude_empty_gt,
    };
    let report = if a.dual {
        evaluate_dual(&meta, &preds, &config)
    } else {
        evaluate(&meta, &preds, &config)
    }
    .map_err(Failure::data)?;
    let options = ReportOptions {
        precision: a.precision,
        scale: match a.scale {
            ScaleArg::Percent => Scale::Percent,
            ScaleArg::Unit => Scale::Unit,
        },
        rounding: match a.rounding {
            Rounding::HalfEven => RoundingMode::HalfEven,
            Rounding::HalfUp => RoundingMode::HalfUp,
        },
    };
    write_output(a.out.as_deref(), &render_report(&report, &options))?;
    if let Some(out) = &a.out {
        write_output(Some(&out.with_extension("json")), &report.to_json())?;
    }
    Ok(())
}

fn cmd_import(a: &ImportArgs) -> CmdResult {
    let video = dataset::import_palette_pngs(&a.dir).map_err(Failure::data)?;
    let mut meta = DatasetMeta::default();
    meta.videos.insert(a.video_id.clone(), video);
    save_meta(&meta, &a.out)?;
    Ok(())
}

fn cmd_split(a: &SplitArgs, seed: u64) -> CmdResult {
    let meta = load_meta(&a.meta)?;
    let config = SplitConfig {
        train_video_ids: match &a.train_videos {
            Some(p) => read_ids(p)?,
            None => BTreeSet::new(),
        },
        eval_video_ids: a.eval_videos.as_deref().map(read_ids).transpose()?,
        interaction_min_fraction: a.min_interaction_fraction,
        single_downsample_rate: a.downsample_rate,
        seed,
    };
    let split = build_eval_split(&meta, &config).map_err(Failure::usage)?;
    save_meta(&split, &a.out)?;
    eprintln!(
        "{} videos, {} expressions",
        split.videos.len(),
        split.expression_count()
    );
    Ok(())
}

fn cmd_extract(a: &ExtractArgs) -> CmdResult {
    let list = FrameList::open(&a.frames).map_err(|e| Failure::data(format!("{}: {e}", a.frames.display())))?;
    let config = ClipConfig {
        bin_size: a.bin_size,
        clip_len: a.clip_len,
        min_len: a.min_len,
    };
    let names = list.names();
    let clips = extract_clips(&a.source_id, list.paths.len(), &config);
    let mut records = Vec::new();
    for clip in &clips {
        let dir_name = format!("{}_{:06}", clip.source_id, clip.start_frame);
        if let Some(root) = &a.copy {
            let dir = root.join(&dir_name);
            std::fs::create_dir_all(&dir).map_err(|e| Failure::data(format!("{}: {e}", dir.display())))?;
            for path in materialize_clip(clip, &list).map_err(Failure::data)? {
                let dest = dir.join(path.file_name().unwrap_or_default());
                std::fs::copy(&path, &dest).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
            }
        }
        records.push(serde_json::json!({
            "clip_id": dir_name,
            "start_frame": clip.start_frame,
            "length": clip.length,
            "frames": names[clip.frames()],
        }));
    }
    let manifest = serde_json::json!({
        "source_id": a.source_id,
        "source_frame_count": list.paths.len(),
        "bin_size": a.bin_size,
        "clip_len": a.clip_len,
        "min_len": a.min_len,
        "clips": records,
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest json") + "\n";
    write_output(Some(&a.out), &text)?;
    eprintln!("{} clips", clips.len());
    Ok(())
}

fn parse_stages(s: &str) -> Result<BTreeSet<u8>, Failure> {
    s.split(',')
        .map(|x| match x.trim().parse::<u8>() {
            Ok(n @ 1..=4) => Ok(n),
            _ => Err(Failure::usage(format!("invalid stage {x:?}; expected numbers 1 to 4"))),
        })
        .collect()
}

fn backend(a: &AnnotateArgs, model: &str, vision: bool) -> Result<Arc<dyn LlmBackend>, Failure> {
    Ok(match a.backend {
        BackendKind::Mock => {
            let mock = MockBackend::new("mock").with_responder(synthetic_responder);
            Arc::new(if vision { mock } else { mock.text_only() })
        }
        BackendKind::Http => {
            let mut cfg = HttpConfig::new(&a.base_url, model);
            cfg.vision = vision;
            Arc::new(HttpBackend::new(cfg).map_err(|e| Failure {
                code: EXIT_BACKEND,
                message: e.to_string(),
            })?)
        }
    })
}

fn cmd_annotate(a: &AnnotateArgs, cli: &Cli) -> CmdResult {
    let stages = parse_stages(&a.stages)?;
    let tracks = load_meta(&a.tracks)?;
    let prompts = match &a.prompts {
        Some(dir) => PromptLibrary::load_dir(dir).map_err(|e| Failure::data(format!("{}: {e}", dir.display())))?,
        None => PromptLibrary::builtin(),
    };
    let policy = RetryPolicy {
        max_attempts: a.max_attempts,
        ..RetryPolicy::default()
    };
    let cancel = Arc::new(std::sync::atomic::AtomicBool::new(false));
    let make_client = |model: &str, vision: bool| -> Result<LlmClient, Failure> {
        let mut c = LlmClient::new(backend(a, model, vision)?, policy.clone(), a.max_in_flight)
            .with_seed(cli.seed)
            .with_cancel_flag(cancel.clone());
        if let Some(dir) = &cli.audit {
            c = c.with_audit_dir(dir);
        }
        Ok(c)
    };
    let vision_client = make_client(&a.vision_model, true)?;
    let text_client = make_client(&a.text_model, false)?;
    {
        let flag = cancel.clone();
        let _ = ctrlc::set_handler(move || {
            eprintln!("interrupt: finishing in-flight requests");
            flag.store(true, std::sync::atomic::Ordering::SeqCst);
        });
    }

    let inputs: Vec<VideoInput> = tracks
        .videos
        .iter()
        .map(|(vid, video)| {
            let dir = a.frames.join(vid);
            let list = FrameList::from_dir(&dir).unwrap_or(FrameList { paths: Vec::new() });
            VideoInput {
                video_id: vid.clone(),
                video: video.clone(),
                frames: Box::new(DecodedFrames(list)),
            }
        })
        .collect();

    let mut annotator = Annotator::new(&vision_client, &prompts).with_text_client(&text_client);
    annotator.config = PipelineConfig {
        frames_per_request: a.frames_per_request,
        ..PipelineConfig::default()
    };
    annotator.config.decode.seed = Some(cli.seed);
    let opts = RunOptions {
        stages,
        resume: a.resume,
        workers: cli.workers as usize,
    };
    let store = StageStore::new(&a.out);
    let summary = annotator.annotate(&inputs, &store, &opts);
    for (model, client) in [(&a.vision_model, &vision_client), (&a.text_model, &text_client)] {
        let t = client.telemetry();
        tracing::info!(
            model = model.as_str(),
            requests = t.requests,
            attempts = t.attempts,
            retries = t.retries,
            failures = t.failures,
            "language model usage"
        );
    }
    if !summary.meta.videos.is_empty() {
        save_meta(&summary.meta, a.out.join("meta_expressions.json"))?;
    }
    for (vid, e) in &summary.failures {
        eprintln!("{vid}: {e}");
    }
    if let Some((_, e)) = summary.failures.iter().find(|(_, e)| e.is_backend()) {
        return Err(Failure {
            code: EXIT_BACKEND,
            message: format!("{} video(s) failed; backend: {e}", summary.failures.len()),
        });
    }
    if !summary.failures.is_empty() {
        return Err(Failure::data(format!("{} video(s) failed", summary.failures.len())));
    }
    eprintln!(
        "{} videos, {} expressions",
        summary.meta.videos.len(),
        summary.meta.expression_count()
    );
    Ok(())
}

fn run(cli: &Cli) -> CmdResult {
    init_logging(&cli.log_level)?;
    let workers = cli.workers as usize;
    match &cli.command {
        Command::Annotate(a) => cmd_annotate(a, cli),
        Command::ExtractClips(a) => cmd_extract(a),
        Command::Evaluate(a) => cmd_evaluate(a, workers),
        Command::Stats(a) => cmd_stats(a),
        Command::Validate(a) => cmd_validate(a),
        Command::ImportPng(a) => cmd_import(a),
        Command::Split(a) => cmd_split(a, cli.seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
