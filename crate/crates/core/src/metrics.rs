//! Localization metrics and robustness summaries.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ActionTube, BoundingBox, DatasetManifest, PredictionSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no ground-truth instances to evaluate against")]
    NoGroundTruth,
    #[error("clean v-mAP is zero, relative robustness is undefined")]
    ZeroCleanBaseline,
    #[error("v-mAP at the looser threshold is zero, kappa is undefined")]
    ZeroDenominator,
    #[error("IoU threshold {0} is not in (0, 1]")]
    InvalidThreshold(f64),
    #[error("invalid metric input: {0}")]
    InvalidInput(String),
}

impl MetricsError {
    pub fn kind(&self) -> &'static str {
        match self {
            MetricsError::NoGroundTruth => "NoGroundTruth",
            MetricsError::ZeroCleanBaseline => "ZeroCleanBaseline",
            MetricsError::ZeroDenominator => "ZeroDenominator",
            MetricsError::InvalidThreshold(_) => "InvalidThreshold",
            MetricsError::InvalidInput(_) => "InvalidInput",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchLevel {
    Frame,
    Video,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub iou_threshold: f64,
    pub level: MatchLevel,
}

impl MatchConfig {
    pub fn new(iou_threshold: f64, level: MatchLevel) -> Result<Self, MetricsError> {
        check_threshold(iou_threshold)?;
        Ok(Self {
            iou_threshold,
            level,
        })
    }
}

fn check_threshold(tau: f64) -> Result<(), MetricsError> {
    if tau > 0.0 && tau <= 1.0 {
        Ok(())
    } else {
        Err(MetricsError::InvalidThreshold(tau))
    }
}

pub fn box_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Temporal IoU of the frame supports times the mean box IoU over the
/// frames both tubes cover.
pub fn st_iou(pred: &ActionTube, gt: &ActionTube) -> f64 {
    let (pf, gf) = (pred.frames(), gt.frames());
    let mut common = 0usize;
    let mut spatial = 0.0;
    for (frame, pbox) in pf {
        if let Some(gbox) = gf.get(frame) {
            common += 1;
            spatial += box_iou(pbox, gbox);
        }
    }
    if common == 0 {
        return 0.0;
    }
    let union = pf.len() + gf.len() - common;
    (common as f64 / union as f64) * (spatial / common as f64)
}

/// All-point average precision: area under the monotone precision envelope.
/// Detections are ranked by descending score; equal scores keep input order.
pub fn average_precision(ranked: &[(f64, bool)], n_gt: usize) -> Result<f64, MetricsError> {
    if n_gt == 0 {
        return Err(MetricsError::NoGroundTruth);
    }
    if ranked.iter().any(|(s, _)| !s.is_finite()) {
        return Err(MetricsError::InvalidInput("non-finite detection score".into()));
    }
    let mut order: Vec<usize> = (0..ranked.len()).collect();
    order.sort_by(|&a, &b| ranked[b].0.total_cmp(&ranked[a].0));

    let mut recall = Vec::with_capacity(order.len());
    let mut precision = Vec::with_capacity(order.len());
    let mut tp = 0usize;
    for (rank, &i) in order.iter().enumerate() {
        if ranked[i].1 {
            tp += 1;
        }
        recall.push(tp as f64 / n_gt as f64);
        precision.push(tp as f64 / (rank + 1) as f64);
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (r, p) in recall.iter().zip(&precision) {
        if *r > prev_recall {
            ap += (r - prev_recall) * p;
            prev_recall = *r;
        }
    }
    Ok(ap)
}

/// Result of a mAP evaluation at one threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapResult {
    /// Percentage in [0, 100].
    pub map: f64,
    /// AP in [0, 1] for each class with at least one ground-truth instance.
    pub per_class_ap: BTreeMap<String, f64>,
    pub gt_counts: BTreeMap<String, usize>,
}

/// Ground-truth tubes keyed by video id.
pub type GroundTruthSet = BTreeMap<String, Vec<ActionTube>>;

pub fn ground_truth_set(manifest: &DatasetManifest) -> GroundTruthSet {
    manifest
        .videos
        .iter()
        .map(|v| (v.video_id.clone(), v.tubes.clone()))
        .collect()
}

/// One candidate in a greedy matching problem: `group` scopes which ground
/// truths it may match (a video, or a video frame).
struct Candidate<'a, K> {
    group: K,
    class: &'a str,
    score: f64,
    shape: Shape<'a>,
}

enum Shape<'a> {
    Tube(&'a ActionTube),
    Box(&'a BoundingBox),
}

/// Ground-truth instances keyed by (class, group), each with its tube id.
type Truths<'a, K> = BTreeMap<(String, K), Vec<(&'a str, Shape<'a>)>>;

fn greedy_map<'a, K: Ord + Clone>(
    candidates: Vec<Candidate<'a, K>>,
    truths: &Truths<'a, K>,
    tau: f64,
) -> Result<MapResult, MetricsError> {
    check_threshold(tau)?;
    let mut gt_counts: BTreeMap<String, usize> = BTreeMap::new();
    for ((class, _), list) in truths {
        *gt_counts.entry(class.clone()).or_default() += list.len();
    }
    gt_counts.retain(|_, n| *n > 0);
    if gt_counts.is_empty() {
        return Err(MetricsError::NoGroundTruth);
    }

    let mut by_class: BTreeMap<&str, Vec<&Candidate<K>>> = BTreeMap::new();
    for c in &candidates {
        by_class.entry(c.class).or_default().push(c);
    }

    let mut per_class_ap = BTreeMap::new();
    for (class, &n_gt) in &gt_counts {
        let mut preds = by_class.remove(class.as_str()).unwrap_or_default();
        preds.sort_by(|a, b| b.score.total_cmp(&a.score));
        let mut matched: BTreeSet<(K, &str)> = BTreeSet::new();
        let mut ranked = Vec::with_capacity(preds.len());
        for c in preds {
            let key = (class.clone(), c.group.clone());
            let mut best: Option<(f64, &str)> = None;
            for (gt_id, truth) in truths.get(&key).map(Vec::as_slice).unwrap_or(&[]) {
                if matched.contains(&(c.group.clone(), *gt_id)) {
                    continue;
                }
                let iou = match (&c.shape, truth) {
                    (Shape::Tube(p), Shape::Tube(gt)) => st_iou(p, gt),
                    (Shape::Box(p), Shape::Box(gt)) => box_iou(p, gt),
                    _ => 0.0,
                };
                if iou < tau {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((b_iou, b_id)) => iou > b_iou || (iou == b_iou && *gt_id < b_id),
                };
                if better {
                    best = Some((iou, gt_id));
                }
            }
            if let Some((_, gt_id)) = best {
                matched.insert((c.group.clone(), gt_id));
            }
            ranked.push((c.score, best.is_some()));
        }
        per_class_ap.insert(class.clone(), average_precision(&ranked, n_gt)?);
    }
    let map = 100.0 * per_class_ap.values().sum::<f64>() / per_class_ap.len() as f64;
    Ok(MapResult {
        map,
        per_class_ap,
        gt_counts,
    })
}

fn prediction_score(tube: &ActionTube) -> Result<f64, MetricsError> {
    tube.score().ok_or_else(|| {
        MetricsError::InvalidInput(format!("tube {:?} has no score", tube.tube_id()))
    })
}

/// Video-level mAP (percentage): greedy matching of prediction tubes to
/// same-class ground-truth tubes of the same video by spatio-temporal IoU.
pub fn video_map(
    preds: &PredictionSet,
    gts: &GroundTruthSet,
    tau: f64,
) -> Result<MapResult, MetricsError> {
    let mut truths: Truths<String> = BTreeMap::new();
    for (video, tubes) in gts {
        for tube in tubes {
            truths
                .entry((tube.class_label().to_string(), video.clone()))
                .or_default()
                .push((tube.tube_id(), Shape::Tube(tube)));
        }
    }
    let mut candidates = Vec::new();
    for (video, tubes) in preds {
        for tube in tubes {
            candidates.push(Candidate {
                group: video.clone(),
                class: tube.class_label(),
                score: prediction_score(tube)?,
                shape: Shape::Tube(tube),
            });
        }
    }
    greedy_map(candidates, &truths, tau)
}

/// A scored single-frame detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDetection {
    pub video_id: String,
    pub frame_index: u32,
    pub class_label: String,
    pub score: f64,
    pub bbox: BoundingBox,
}

/// How frame-level detections were obtained for f-mAP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameDetectionSource {
    /// Every box of every prediction tube, carrying the tube's score.
    FlattenedTubes,
    /// Detections supplied per frame by the detector.
    Native,
}

/// Split prediction tubes into per-frame detections, in video, tube and
/// frame order.
pub fn flatten_tubes(preds: &PredictionSet) -> Result<Vec<FrameDetection>, MetricsError> {
    let mut out = Vec::new();
    for (video, tubes) in preds {
        for tube in tubes {
            let score = prediction_score(tube)?;
            for (frame, bbox) in tube.frames() {
                out.push(FrameDetection {
                    video_id: video.clone(),
                    frame_index: *frame,
                    class_label: tube.class_label().to_string(),
                    score,
                    bbox: *bbox,
                });
            }
        }
    }
    Ok(out)
}

/// Frame-level mAP (percentage): greedy matching per (video, frame, class)
/// by box IoU. Each ground-truth tube contributes one instance per frame.
pub fn frame_map(
    detections: &[FrameDetection],
    gts: &GroundTruthSet,
    tau: f64,
) -> Result<MapResult, MetricsError> {
    let mut truths: Truths<(String, u32)> = BTreeMap::new();
    for (video, tubes) in gts {
        for tube in tubes {
            for (frame, bbox) in tube.frames() {
                truths
                    .entry((tube.class_label().to_string(), (video.clone(), *frame)))
                    .or_default()
                    .push((tube.tube_id(), Shape::Box(bbox)));
            }
        }
    }
    if detections.iter().any(|d| !d.score.is_finite()) {
        return Err(MetricsError::InvalidInput("non-finite detection score".into()));
    }
    let candidates = detections
        .iter()
        .map(|d| Candidate {
            group: (d.video_id.clone(), d.frame_index),
            class: &d.class_label,
            score: d.score,
            shape: Shape::Box(&d.bbox),
        })
        .collect();
    greedy_map(candidates, &truths, tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustnessInput {
    /// Clean v-mAP, percent.
    pub v: f64,
    /// Occluded v-mAP, percent.
    pub v_prime: f64,
}

impl RobustnessInput {
    pub fn new(v: f64, v_prime: f64) -> Result<Self, MetricsError> {
        for (name, x) in [("clean", v), ("occluded", v_prime)] {
            if !(0.0..=100.0).contains(&x) {
                return Err(MetricsError::InvalidInput(format!(
                    "{name} v-mAP {x} is not a percentage"
                )));
            }
        }
        Ok(Self { v, v_prime })
    }
}

/// `(δa, δr)` with `δa = 1 − (V − V′)/100` and `δr = 1 − (V − V′)/V`.
pub fn robustness_deltas(input: &RobustnessInput) -> Result<(f64, f64), MetricsError> {
    let drop = input.v - input.v_prime;
    if input.v == 0.0 {
        return Err(MetricsError::ZeroCleanBaseline);
    }
    Ok((1.0 - drop / 100.0, 1.0 - drop / input.v))
}

/// Absolute robustness alone; defined even for a zero clean baseline.
pub fn absolute_robustness(input: &RobustnessInput) -> f64 {
    1.0 - (input.v - input.v_prime) / 100.0
}

/// Relative drop from the loose to the strict IoU threshold:
/// `κ = 1 − (v₀.₂ − v₀.₅)/v₀.₂`.
pub fn kappa(vmap_loose: f64, vmap_strict: f64) -> Result<f64, MetricsError> {
    if vmap_loose == 0.0 {
        return Err(MetricsError::ZeroDenominator);
    }
    if vmap_strict > vmap_loose {
        log::warn!("v-mAP at the strict threshold ({vmap_strict}) exceeds the loose one ({vmap_loose})");
    }
    Ok(1.0 - (vmap_loose - vmap_strict) / vmap_loose)
}

/// Round half away from zero to two decimals, as reported in tables.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}
