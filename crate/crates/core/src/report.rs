//! Evaluation reports and robustness tables.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{
    self, FrameDetection, FrameDetectionSource, GroundTruthSet, MapResult, MetricsError,
    RobustnessInput,
};
use crate::model::PredictionSet;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report {label} was evaluated at thresholds {found:?}, expected {expected:?}")]
    MismatchedThresholds {
        label: String,
        expected: Vec<f64>,
        found: Vec<f64>,
    },
    #[error("report {0} has no occlusion condition label")]
    Unlabelled(String),
    #[error("no IoU thresholds requested")]
    NoThresholds,
    #[error("malformed report: {0}")]
    Parse(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl ReportError {
    pub fn kind(&self) -> &'static str {
        match self {
            ReportError::MismatchedThresholds { .. } => "MismatchedThresholds",
            ReportError::Unlabelled(_) => "Unlabelled",
            ReportError::NoThresholds => "NoThresholds",
            ReportError::Parse(_) => "ParseError",
            ReportError::Metrics(e) => e.kind(),
        }
    }
}

/// Which occlusion setting an evaluation was run under.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Condition {
    Clean,
    Severity { fg_level: u8, bg_level: u8 },
    Motion { motion: String },
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Clean => f.write_str("clean"),
            Condition::Severity { fg_level, bg_level } => write!(f, "BG{bg_level}xFG{fg_level}"),
            Condition::Motion { motion } => f.write_str(motion),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub iou_threshold: f64,
    pub video: MapResult,
    pub frame: MapResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset_id: String,
    pub condition: Condition,
    /// Threshold used for the headline numbers.
    pub primary_threshold: f64,
    /// v-mAP (percent) at the primary threshold.
    pub map: f64,
    pub per_class_ap: BTreeMap<String, f64>,
    /// Ascending by threshold.
    pub per_threshold: Vec<ThresholdResult>,
    pub frame_detection_source: FrameDetectionSource,
    /// Present when both 0.2 and 0.5 were evaluated and v-mAP at 0.2 is nonzero.
    pub kappa: Option<f64>,
    /// Present when a clean baseline was supplied.
    pub delta_a: Option<f64>,
    pub delta_r: Option<f64>,
}

const LOOSE: f64 = 0.2;
const STRICT: f64 = 0.5;

fn normalize_thresholds(taus: &[f64]) -> Result<Vec<f64>, ReportError> {
    if taus.is_empty() {
        return Err(ReportError::NoThresholds);
    }
    let mut out = taus.to_vec();
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

/// Evaluate predictions at each threshold. With `detections = None` the
/// frame-level metric uses the prediction tubes flattened per frame.
pub fn evaluate(
    dataset_id: &str,
    gts: &GroundTruthSet,
    preds: &PredictionSet,
    detections: Option<&[FrameDetection]>,
    thresholds: &[f64],
    condition: Condition,
) -> Result<EvalReport, ReportError> {
    let thresholds = normalize_thresholds(thresholds)?;
    let (flattened, source) = match detections {
        Some(d) => (d.to_vec(), FrameDetectionSource::Native),
        None => (metrics::flatten_tubes(preds)?, FrameDetectionSource::FlattenedTubes),
    };
    let per_threshold = thresholds
        .iter()
        .map(|&tau| {
            Ok(ThresholdResult {
                iou_threshold: tau,
                video: metrics::video_map(preds, gts, tau)?,
                frame: metrics::frame_map(&flattened, gts, tau)?,
            })
        })
        .collect::<Result<Vec<_>, MetricsError>>()?;

    let at = |tau: f64| per_threshold.iter().find(|r| r.iou_threshold == tau);
    let primary = at(STRICT).unwrap_or(&per_threshold[0]);
    let kappa = match (at(LOOSE), at(STRICT)) {
        (Some(loose), Some(strict)) => match metrics::kappa(loose.video.map, strict.video.map) {
            Ok(k) => Some(k),
            Err(e) => {
                log::warn!("kappa not reported: {e}");
                None
            }
        },
        _ => None,
    };
    Ok(EvalReport {
        dataset_id: dataset_id.to_string(),
        condition,
        primary_threshold: primary.iou_threshold,
        map: primary.video.map,
        per_class_ap: primary.video.per_class_ap.clone(),
        per_threshold: per_threshold.clone(),
        frame_detection_source: source,
        kappa,
        delta_a: None,
        delta_r: None,
    })
}

impl EvalReport {
    pub fn thresholds(&self) -> Vec<f64> {
        self.per_threshold.iter().map(|r| r.iou_threshold).collect()
    }

    pub fn vmap_at(&self, tau: f64) -> Option<f64> {
        self.per_threshold
            .iter()
            .find(|r| r.iou_threshold == tau)
            .map(|r| r.video.map)
    }

    /// Fill `delta_a`/`delta_r` against a clean v-mAP (percent).
    pub fn with_baseline(mut self, clean_map: f64) -> Result<Self, ReportError> {
        let input = RobustnessInput::new(clean_map, self.map)?;
        self.delta_a = Some(metrics::absolute_robustness(&input));
        self.delta_r = metrics::robustness_deltas(&input).ok().map(|d| d.1);
        Ok(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        serde_json::from_str(text).map_err(|e| ReportError::Parse(e.to_string()))
    }

    /// One row per threshold plus a kappa row when available.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iou_threshold,vmap,fmap\n");
        for r in &self.per_threshold {
            out.push_str(&format!(
                "{},{:.2},{:.2}\n",
                r.iou_threshold, r.video.map, r.frame.map
            ));
        }
        if let Some(k) = self.kappa {
            out.push_str(&format!("kappa,{:.2},\n", metrics::round2(k)));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    /// `BG{b}xFG{f}`, `FG{f}` for BG-averaged rows, or a motion name.
    pub cell: String,
    pub vmap: f64,
    pub delta_a: f64,
    /// Absent when the clean v-mAP is zero.
    pub delta_r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessTable {
    pub iou_threshold: f64,
    pub clean_vmap: f64,
    pub rows: Vec<RobustnessRow>,
    /// `(condition, κ)` for every report that has one, clean first.
    pub kappa: Vec<(String, f64)>,
}

fn row(cell: String, clean: f64, vmap: f64) -> Result<RobustnessRow, ReportError> {
    let input = RobustnessInput::new(clean, vmap)?;
    Ok(RobustnessRow {
        cell,
        vmap,
        delta_a: metrics::absolute_robustness(&input),
        delta_r: metrics::robustness_deltas(&input).ok().map(|d| d.1),
    })
}

/// Combine a clean report with occluded reports into the robustness table:
/// every severity cell present, an `FG{f}` row averaging v-mAP over the BG
/// levels available for that FG level, and one row per motion.
pub fn build_table(
    clean: &EvalReport,
    occluded: &[EvalReport],
) -> Result<RobustnessTable, ReportError> {
    let expected = clean.thresholds();
    for r in occluded {
        if r.thresholds() != expected {
            return Err(ReportError::MismatchedThresholds {
                label: r.condition.to_string(),
                expected,
                found: r.thresholds(),
            });
        }
        if r.condition == Condition::Clean {
            return Err(ReportError::Unlabelled(r.dataset_id.clone()));
        }
    }
    let tau = clean.primary_threshold;
    let v = clean.map;

    let mut cells: BTreeMap<(u8, u8), f64> = BTreeMap::new();
    let mut motions: BTreeMap<String, f64> = BTreeMap::new();
    for r in occluded {
        match &r.condition {
            Condition::Severity { fg_level, bg_level } => {
                cells.insert((*fg_level, *bg_level), r.map);
            }
            Condition::Motion { motion } => {
                motions.insert(motion.clone(), r.map);
            }
            Condition::Clean => unreachable!("rejected above"),
        }
    }

    let mut rows = Vec::new();
    for bg in 1..=3u8 {
        for fg in 1..=3u8 {
            if let Some(&vp) = cells.get(&(fg, bg)) {
                rows.push(row(format!("BG{bg}xFG{fg}"), v, vp)?);
            }
        }
    }
    for fg in 1..=3u8 {
        let values: Vec<f64> = (1..=3u8).filter_map(|bg| cells.get(&(fg, bg)).copied()).collect();
        if !values.is_empty() {
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            rows.push(row(format!("FG{fg}"), v, mean)?);
        }
    }
    for (motion, vp) in &motions {
        rows.push(row(motion.clone(), v, *vp)?);
    }

    let mut kappa = Vec::new();
    if let Some(k) = clean.kappa {
        kappa.push((Condition::Clean.to_string(), k));
    }
    for r in occluded {
        if let Some(k) = r.kappa {
            kappa.push((r.condition.to_string(), k));
        }
    }
    Ok(RobustnessTable {
        iou_threshold: tau,
        clean_vmap: v,
        rows,
        kappa,
    })
}

impl RobustnessTable {
    pub fn row(&self, cell: &str) -> Option<&RobustnessRow> {
        self.rows.iter().find(|r| r.cell == cell)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serialization cannot fail")
    }

    /// `cell,vmap,delta_a,delta_r`; deltas rounded to two decimals, κ rows
    /// carry the score in the `vmap` column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cell,vmap,delta_a,delta_r\n");
        out.push_str(&format!("clean,{:.2},,\n", self.clean_vmap));
        for r in &self.rows {
            let dr = r
                .delta_r
                .map(|d| format!("{:.2}", metrics::round2(d)))
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{:.2},{:.2},{}\n",
                r.cell,
                r.vmap,
                metrics::round2(r.delta_a),
                dr
            ));
        }
        for (label, k) in &self.kappa {
            out.push_str(&format!("kappa:{label},{:.2},,\n", metrics::round2(*k)));
        }
        out
    }
}
