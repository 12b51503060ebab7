//! `generate`: occlude every video of a manifest.
//!
//! Output layout under the output directory:
//!
//! ```text
//! <video_id>/frames/00000.png ...
//! <video_id>/plan.json
//! <video_id>/severity.csv
//! manifest.json     occluded dataset, same annotations
//! summary.json
//! errors.json       only when some video failed
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};

use occbench::compositor::{render_plan, severity_csv, FrameImage, RenderOptions};
use occbench::model::parse_manifest;
use occbench::occluder::load_library;
use occbench::planner::{plan_dynamic, plan_static, SeverityTarget};
use occbench::seed::video_seed;
use occbench::{DatasetManifest, OccluderSet, VideoRecord};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Mode, RunConfig};
use crate::error::{error_list_json, CliError, Failure};

/// Frame file name template inside each video's `frames/` directory.
pub const FRAME_TEMPLATE: &str = "%05d.png";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VideoOutcome {
    pub video_id: String,
    pub frames: u32,
    pub seed: u64,
    pub mean_fg_fraction: f64,
    pub mean_bg_fraction: f64,
    pub attempts: [u32; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerateSummary {
    pub dataset_id: String,
    pub mode: String,
    pub motion: String,
    pub split: String,
    pub fg_level: u8,
    pub bg_level: u8,
    pub seed: u64,
    pub videos_processed: usize,
    pub videos_failed: usize,
    /// Mean over processed videos of each video's mean realized fraction.
    pub mean_fg_fraction: f64,
    pub mean_bg_fraction: f64,
    /// Sorted by video id.
    pub videos: Vec<VideoOutcome>,
    pub failures: Vec<Failure>,
}

impl GenerateSummary {
    pub fn success(&self) -> bool {
        self.failures.is_empty()
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn check_video_id(id: &str) -> Result<(), CliError> {
    let ok = !id.is_empty()
        && id != "."
        && id != ".."
        && !id.contains(['/', '\\'])
        && !id.chars().any(char::is_control);
    if ok {
        Ok(())
    } else {
        Err(CliError::Input(format!(
            "video id {id:?} cannot be used as a directory name"
        )))
    }
}

/// Read the source frames of a video. Relative frame paths are resolved
/// against the manifest's directory.
pub fn load_frames(video: &VideoRecord, base: &Path) -> Result<Vec<FrameImage>, CliError> {
    (0..video.frame_count)
        .map(|i| {
            let rel = PathBuf::from(video.frame_path(i));
            let path = if rel.is_absolute() { rel } else { base.join(rel) };
            let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
            let frame = FrameImage::decode(&bytes)?;
            if (frame.width, frame.height) != (video.width, video.height) {
                return Err(CliError::Input(format!(
                    "{} is {}x{}, manifest says {}x{}",
                    path.display(),
                    frame.width,
                    frame.height,
                    video.width,
                    video.height
                )));
            }
            Ok(frame)
        })
        .collect()
}

fn generate_video(
    video: &VideoRecord,
    base: &Path,
    occluders: &OccluderSet,
    cfg: &RunConfig,
) -> Result<VideoOutcome, CliError> {
    check_video_id(&video.video_id)?;
    let seed = video_seed(cfg.seed, &video.video_id);
    let frames = load_frames(video, base)?;
    let plan = match cfg.mode {
        Mode::Static => plan_static(
            video,
            cfg.fg_level,
            cfg.bg_level,
            occluders,
            seed,
            &cfg.planner,
        )?,
        Mode::Dynamic => plan_dynamic(
            video,
            &cfg.motion,
            occluders,
            seed,
            Some(SeverityTarget {
                fg_level: cfg.fg_level,
                bg_level: cfg.bg_level,
            }),
            &cfg.planner,
        )?,
    };
    let rendered = render_plan(
        &frames,
        &plan,
        occluders,
        &RenderOptions {
            feather: cfg.feather,
        },
    )?;

    let dir = cfg.output_dir.join(&video.video_id);
    let frame_dir = dir.join("frames");
    fs::create_dir_all(&frame_dir).map_err(|e| CliError::io(&frame_dir, e))?;
    for (i, frame) in rendered.frames.iter().enumerate() {
        write(&frame_dir.join(format!("{i:05}.png")), frame.to_png_bytes())?;
    }
    write(&dir.join("plan.json"), plan.to_json())?;
    write(&dir.join("severity.csv"), severity_csv(&rendered.realized_severity))?;
    log::info!(
        "{}: fg {:.3} bg {:.3}",
        video.video_id,
        plan.mean_severity.fg_fraction,
        plan.mean_severity.bg_fraction
    );
    Ok(VideoOutcome {
        video_id: video.video_id.clone(),
        frames: video.frame_count,
        seed,
        mean_fg_fraction: plan.mean_severity.fg_fraction,
        mean_bg_fraction: plan.mean_severity.bg_fraction,
        attempts: plan.attempts,
    })
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(parse_manifest(&bytes)?)
}

pub fn load_occluders(dir: &Path, cfg: &RunConfig) -> Result<OccluderSet, CliError> {
    Ok(OccluderSet::new(load_library(dir)?, cfg.category)?)
}

/// Run the batch. Errors that stop the whole run (unreadable manifest or
/// library) are returned as `Err`; per-video failures are collected in the
/// summary. With `strict`, no new video starts after the first failure.
pub fn run_generate(cfg: &RunConfig) -> Result<GenerateSummary, CliError> {
    let manifest = load_manifest(&cfg.manifest_path)?;
    let occluders = load_occluders(&cfg.occluder_dir, cfg)?;
    let base = cfg
        .manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    fs::create_dir_all(&cfg.output_dir).map_err(|e| CliError::io(&cfg.output_dir, e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let abort = AtomicBool::new(false);
    let results: Vec<Option<Result<VideoOutcome, Failure>>> = pool.install(|| {
        manifest
            .videos
            .par_iter()
            .map(|video| {
                if abort.load(Ordering::SeqCst) {
                    return None;
                }
                let result = generate_video(video, &base, &occluders, cfg)
                    .map_err(|e| Failure::new(Some(&video.video_id), &e));
                if result.is_err() && cfg.strict {
                    abort.store(true, Ordering::SeqCst);
                }
                Some(result)
            })
            .collect()
    });

    let mut videos = Vec::new();
    let mut failures = Vec::new();
    for r in results.into_iter().flatten() {
        match r {
            Ok(v) => videos.push(v),
            Err(f) => failures.push(f),
        }
    }
    videos.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    failures.sort_by(|a, b| a.video_id.cmp(&b.video_id));

    let done: Vec<&str> = videos.iter().map(|v| v.video_id.as_str()).collect();
    let mut occluded = manifest.clone();
    occluded.videos.retain(|v| done.contains(&v.video_id.as_str()));
    for v in &mut occluded.videos {
        v.frame_source = format!("{}/frames/{FRAME_TEMPLATE}", v.video_id);
    }
    write(&cfg.output_dir.join("manifest.json"), occluded.to_json())?;

    let n = videos.len().max(1) as f64;
    let summary = GenerateSummary {
        dataset_id: manifest.dataset_id.clone(),
        mode: match cfg.mode {
            Mode::Static => "static".into(),
            Mode::Dynamic => "dynamic".into(),
        },
        motion: cfg.motion.kind.to_string(),
        split: cfg.motion.split.to_string(),
        fg_level: cfg.fg_level,
        bg_level: cfg.bg_level,
        seed: cfg.seed,
        videos_processed: videos.len(),
        videos_failed: failures.len(),
        mean_fg_fraction: videos.iter().map(|v| v.mean_fg_fraction).sum::<f64>() / n,
        mean_bg_fraction: videos.iter().map(|v| v.mean_bg_fraction).sum::<f64>() / n,
        videos,
        failures,
    };
    write(
        &cfg.output_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("summary serialization cannot fail"),
    )?;
    let errors_path = cfg.output_dir.join("errors.json");
    if summary.success() {
        if errors_path.exists() {
            fs::remove_file(&errors_path).map_err(|e| CliError::io(&errors_path, e))?;
        }
    } else {
        write(&errors_path, error_list_json(&summary.failures))?;
    }
    Ok(summary)
}
