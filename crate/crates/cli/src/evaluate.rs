//! `evaluate` and `report`.

use std::fs;
use std::path::{Path, PathBuf};

use occbench::metrics::{ground_truth_set, FrameDetection};
use occbench::model::load_predictions;
use occbench::report::{build_table, evaluate, Condition};
use occbench::{BoundingBox, EvalReport, RobustnessTable};
use serde::Deserialize;

use crate::error::CliError;
use crate::generate::load_manifest;

#[derive(Debug, Clone)]
pub struct EvaluateConfig {
    pub manifest: PathBuf,
    pub predictions: PathBuf,
    /// Optional per-frame detections for f-mAP; prediction tubes are
    /// flattened when absent.
    pub detections: Option<PathBuf>,
    pub thresholds: Vec<f64>,
    pub condition: Condition,
    pub out: Option<PathBuf>,
}

/// One entry of a native detection file.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetection {
    video_id: String,
    frame_index: u32,
    class: String,
    score: f64,
    #[serde(rename = "box")]
    bbox: [f64; 4],
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Parse a JSON array of `{video_id, frame_index, class, score, box}`.
pub fn parse_detections(bytes: &[u8]) -> Result<Vec<FrameDetection>, CliError> {
    let raw: Vec<RawDetection> = serde_json::from_slice(bytes)
        .map_err(|e| CliError::Input(format!("detections: {e}")))?;
    Ok(raw
        .into_iter()
        .map(|d| FrameDetection {
            video_id: d.video_id,
            frame_index: d.frame_index,
            class_label: d.class,
            score: d.score,
            bbox: BoundingBox::from_array(d.bbox),
        })
        .collect())
}

pub fn run_evaluate(cfg: &EvaluateConfig) -> Result<EvalReport, CliError> {
    let manifest = load_manifest(&cfg.manifest)?;
    let preds = load_predictions(&read(&cfg.predictions)?, &manifest)?;
    let detections = match &cfg.detections {
        Some(path) => Some(parse_detections(&read(path)?)?),
        None => None,
    };
    let report = evaluate(
        &manifest.dataset_id,
        &ground_truth_set(&manifest),
        &preds,
        detections.as_deref(),
        &cfg.thresholds,
        cfg.condition.clone(),
    )?;
    if let Some(out) = &cfg.out {
        fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
        write(&out.join("report.json"), &report.to_json())?;
        write(&out.join("report.csv"), &report.to_csv())?;
    }
    Ok(report)
}

pub fn load_report(path: &Path) -> Result<EvalReport, CliError> {
    let text = String::from_utf8(read(path)?)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(EvalReport::from_json(&text)?)
}

pub fn run_report(
    clean: &Path,
    occluded: &[PathBuf],
    out: Option<&Path>,
) -> Result<RobustnessTable, CliError> {
    let clean = load_report(clean)?;
    let occluded = occluded
        .iter()
        .map(|p| load_report(p))
        .collect::<Result<Vec<_>, _>>()?;
    let table = build_table(&clean, &occluded)?;
    if let Some(out) = out {
        fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
        write(&out.join("table.json"), &table.to_json())?;
        write(&out.join("table.csv"), &table.to_csv())?;
    }
    Ok(table)
}
