//! Occluder placement and trajectory planning.
//!
//! A plan fixes, for every frame of a video, where each occluder sits, how
//! large it is and which region (actor or background) it belongs to. The
//! planner keeps adding occluders until the union footprint of each region
//! lands in the requested severity band:
//!
//! * static plans hold every occluder still, so the per-frame fraction is
//!   constant;
//! * dynamic plans move occluders along a trajectory and wrap their centres
//!   inside the assigned region's rectangle; the band is enforced on the
//!   temporal mean of the per-frame fractions.
//!
//! Test-split motions (circle, sinusoid) and train-split motions (linear,
//! zoom in/out, random walk) never mix.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    actor_region_of_tubes, occupied_fraction, region_area, CoverageGrid, GeometryError,
    PlacedMask, Rect, RegionKind, RegionSpec, SeverityBand,
};
use crate::model::VideoRecord;
use crate::occluder::{fit_scale_for_budget, OccluderSet, OccluderSprite, ScaledSprite};
use crate::seed;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("video {0:?} has no ground-truth tube to derive an actor region from")]
    NoGroundTruth(String),
    #[error("{0:?} region has zero area")]
    EmptyRegion(RegionKind),
    #[error(
        "could not reach {region:?} severity level {level} after {attempts} attempts (reached {achieved:.3})"
    )]
    SeverityUnreachable {
        region: RegionKind,
        level: u8,
        achieved: f64,
        attempts: u32,
    },
    #[error("{kind} motion is not allowed in the {split} split")]
    MotionSplitViolation { kind: MotionKind, split: Split },
    #[error("dynamic plans need a moving trajectory, got {0}")]
    NotDynamic(MotionKind),
    #[error("plan references sprite {0:?} which is not loaded")]
    MissingSprite(String),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl PlanError {
    pub fn kind(&self) -> &'static str {
        match self {
            PlanError::NoGroundTruth(_) => "NoGroundTruth",
            PlanError::EmptyRegion(_) => "EmptyRegion",
            PlanError::SeverityUnreachable { .. } => "SeverityUnreachable",
            PlanError::MotionSplitViolation { .. } => "MotionSplitViolation",
            PlanError::NotDynamic(_) => "NotDynamic",
            PlanError::MissingSprite(_) => "MissingSprite",
            PlanError::InvalidPlan(_) => "InvalidPlan",
            PlanError::Geometry(_) => "GeometryError",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionKind {
    Static,
    Linear,
    Circle,
    Sinusoid,
    ZoomIn,
    ZoomOut,
    Random,
}

impl MotionKind {
    pub const ALL: [MotionKind; 7] = [
        MotionKind::Static,
        MotionKind::Linear,
        MotionKind::Circle,
        MotionKind::Sinusoid,
        MotionKind::ZoomIn,
        MotionKind::ZoomOut,
        MotionKind::Random,
    ];

    pub const DYNAMIC: [MotionKind; 6] = [
        MotionKind::Linear,
        MotionKind::Circle,
        MotionKind::Sinusoid,
        MotionKind::ZoomIn,
        MotionKind::ZoomOut,
        MotionKind::Random,
    ];

    /// The only split a moving trajectory belongs to; `None` for static.
    pub fn home_split(&self) -> Option<Split> {
        match self {
            MotionKind::Static => None,
            MotionKind::Circle | MotionKind::Sinusoid => Some(Split::Test),
            MotionKind::Linear | MotionKind::ZoomIn | MotionKind::ZoomOut | MotionKind::Random => {
                Some(Split::Train)
            }
        }
    }

    pub fn allowed_in(&self, split: Split) -> bool {
        self.home_split().is_none_or(|home| home == split)
    }
}

impl fmt::Display for MotionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MotionKind::Static => "static",
            MotionKind::Linear => "linear",
            MotionKind::Circle => "circle",
            MotionKind::Sinusoid => "sinusoid",
            MotionKind::ZoomIn => "zoom-in",
            MotionKind::ZoomOut => "zoom-out",
            MotionKind::Random => "random",
        })
    }
}

impl FromStr for MotionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('_', "-").as_str() {
            "static" => Ok(MotionKind::Static),
            "linear" => Ok(MotionKind::Linear),
            "circle" | "circular" => Ok(MotionKind::Circle),
            "sinusoid" | "sinusoidal" => Ok(MotionKind::Sinusoid),
            "zoom-in" => Ok(MotionKind::ZoomIn),
            "zoom-out" => Ok(MotionKind::ZoomOut),
            "random" => Ok(MotionKind::Random),
            other => Err(format!("unknown motion {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

/// Optional overrides of the trajectory defaults. Unset values are derived
/// from the assigned region rectangle and the clip length.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionParams {
    /// linear: px/frame
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
    /// circle: px
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// circle: rad/frame
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angular_speed: Option<f64>,
    /// sinusoid: horizontal px/frame
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<f64>,
    /// sinusoid: px
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    /// sinusoid: frames
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    /// zoom: log-scale change per frame
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_rate: Option<f64>,
    /// random: px/frame
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_sigma: Option<f64>,
    /// random: px/frame
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_speed: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionSpec {
    pub kind: MotionKind,
    pub split: Split,
    #[serde(default)]
    pub params: MotionParams,
}

impl MotionSpec {
    pub fn new(kind: MotionKind, split: Split) -> Self {
        Self {
            kind,
            split,
            params: MotionParams::default(),
        }
    }

    /// Static motion; the split is irrelevant and recorded as test.
    pub fn fixed() -> Self {
        Self::new(MotionKind::Static, Split::Test)
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        if self.kind.allowed_in(self.split) {
            Ok(())
        } else {
            Err(PlanError::MotionSplitViolation {
                kind: self.kind,
                split: self.split,
            })
        }
    }
}

/// Concrete per-occluder trajectory with every parameter resolved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Trajectory {
    Static,
    Linear {
        velocity: [f64; 2],
    },
    Circle {
        center: [f64; 2],
        radius: f64,
        angular_speed: f64,
        phase: f64,
    },
    Sinusoid {
        drift: f64,
        amplitude: f64,
        period: f64,
    },
    ZoomIn {
        scale_rate: f64,
    },
    ZoomOut {
        scale_rate: f64,
    },
    Random {
        step_sigma: f64,
        max_speed: f64,
        seed: u64,
    },
}

/// Position and scale multiplier of a trajectory at time `t` (frames).
///
/// The random walk advances in whole steps, so it uses `floor(t)`.
pub fn trajectory_position(trajectory: &Trajectory, start: (f64, f64), t: f64) -> ((f64, f64), f64) {
    let (x, y) = start;
    match *trajectory {
        Trajectory::Static => (start, 1.0),
        Trajectory::Linear { velocity } => ((x + velocity[0] * t, y + velocity[1] * t), 1.0),
        Trajectory::Circle {
            center,
            radius,
            angular_speed,
            phase,
        } => {
            let angle = phase + angular_speed * t;
            (
                (center[0] + radius * angle.cos(), center[1] + radius * angle.sin()),
                1.0,
            )
        }
        Trajectory::Sinusoid {
            drift,
            amplitude,
            period,
        } => ((x + drift * t, y + amplitude * (TAU * t / period).sin()), 1.0),
        Trajectory::ZoomIn { scale_rate } => (start, (scale_rate * t).exp()),
        Trajectory::ZoomOut { scale_rate } => (start, (-scale_rate * t).exp()),
        Trajectory::Random { .. } => {
            let steps = t.max(0.0).floor() as usize;
            (random_walk(trajectory, start, steps + 1)[steps], 1.0)
        }
    }
}

/// Positions `0..len` of a random-walk trajectory: each step perturbs the
/// velocity with Gaussian noise and clamps its norm to `max_speed`.
fn random_walk(trajectory: &Trajectory, start: (f64, f64), len: usize) -> Vec<(f64, f64)> {
    let Trajectory::Random {
        step_sigma,
        max_speed,
        seed,
    } = *trajectory
    else {
        unreachable!("random_walk called on a non-random trajectory");
    };
    let mut rng = seed::indexed_stream(seed, "random-walk", 0);
    let noise = Normal::new(0.0, step_sigma.max(0.0)).expect("sigma is finite and non-negative");
    let mut pos = start;
    let mut vel = (0.0, 0.0);
    let mut out = Vec::with_capacity(len);
    for step in 0..len {
        if step > 0 {
            vel.0 += noise.sample(&mut rng);
            vel.1 += noise.sample(&mut rng);
            let speed = (vel.0 * vel.0 + vel.1 * vel.1).sqrt();
            if speed > max_speed && speed > 0.0 {
                vel.0 *= max_speed / speed;
                vel.1 *= max_speed / speed;
            }
            pos = (pos.0 + vel.0, pos.1 + vel.1);
        }
        out.push(pos);
    }
    out
}

fn trajectory_path(trajectory: &Trajectory, start: (f64, f64), frames: u32) -> Vec<((f64, f64), f64)> {
    match trajectory {
        Trajectory::Random { .. } => random_walk(trajectory, start, frames as usize)
            .into_iter()
            .map(|p| (p, 1.0))
            .collect(),
        _ => (0..frames)
            .map(|t| trajectory_position(trajectory, start, f64::from(t)))
            .collect(),
    }
}

fn wrap_axis(value: f64, lo: i64, hi: i64) -> f64 {
    let lo = lo as f64;
    let span = hi as f64 - lo;
    let offset = (value - lo).rem_euclid(span);
    // rem_euclid can round up to `span` for tiny negative offsets
    if offset >= span {
        lo
    } else {
        lo + offset
    }
}

/// Toroidal wrap of a sprite centre into `rect`.
pub fn wrap_position(position: (f64, f64), rect: &Rect) -> (f64, f64) {
    (
        wrap_axis(position.0, rect.x_min, rect.x_max),
        wrap_axis(position.1, rect.y_min, rect.y_max),
    )
}

/// Where one occluder is on one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Placement {
    pub sprite_id: String,
    pub region: RegionKind,
    /// sprite centre in pixels
    pub position: [f64; 2],
    pub scale: f64,
}

impl Placement {
    pub fn center(&self) -> (f64, f64) {
        (self.position[0], self.position[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OccluderTrack {
    pub sprite_id: String,
    pub region: RegionKind,
    pub trajectory: Trajectory,
    pub start: [f64; 2],
    pub base_scale: f64,
    pub frames: BTreeMap<u32, Placement>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanMode {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeverityTarget {
    pub fg_level: u8,
    pub bg_level: u8,
}

impl SeverityTarget {
    /// The fixed cell used for every dynamic motion.
    pub const DYNAMIC_DEFAULT: SeverityTarget = SeverityTarget {
        fg_level: 2,
        bg_level: 3,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealizedSeverity {
    pub fg_fraction: f64,
    pub bg_fraction: f64,
}

/// Complete, replayable occlusion plan for one video (the plan sidecar).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OcclusionPlan {
    pub video_id: String,
    pub seed: u64,
    pub mode: PlanMode,
    pub motion: MotionSpec,
    pub frame_width: u32,
    pub frame_height: u32,
    pub frame_count: u32,
    pub fg_rect: Rect,
    /// The actor rect is the envelope of several ground-truth tubes.
    pub fg_from_multiple_tubes: bool,
    pub target: SeverityTarget,
    pub occluders: Vec<OccluderTrack>,
    pub realized_severity: BTreeMap<u32, RealizedSeverity>,
    pub mean_severity: RealizedSeverity,
    /// Candidate occluders drawn per region while meeting the target.
    pub attempts: [u32; 2],
}

impl OcclusionPlan {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, PlanError> {
        let plan: OcclusionPlan =
            serde_json::from_str(text).map_err(|e| PlanError::InvalidPlan(e.to_string()))?;
        plan.check_coverage()?;
        Ok(plan)
    }

    pub fn region(&self, kind: RegionKind) -> Result<RegionSpec, PlanError> {
        Ok(RegionSpec::new(
            kind,
            self.fg_rect,
            self.frame_width,
            self.frame_height,
        )?)
    }

    /// Every track must place its occluder on every frame.
    pub fn check_coverage(&self) -> Result<(), PlanError> {
        for track in &self.occluders {
            let covered = track.frames.len() == self.frame_count as usize
                && track.frames.keys().copied().eq(0..self.frame_count);
            if !covered {
                return Err(PlanError::InvalidPlan(format!(
                    "occluder {} does not cover frames 0..{}",
                    track.sprite_id, self.frame_count
                )));
            }
            if track
                .frames
                .values()
                .any(|p| p.region != track.region || p.sprite_id != track.sprite_id || p.scale <= 0.0)
            {
                return Err(PlanError::InvalidPlan(format!(
                    "occluder {} changes sprite or region, or has a non-positive scale",
                    track.sprite_id
                )));
            }
        }
        Ok(())
    }

    /// Placements of all occluders on `frame`, in compositing order.
    pub fn placements_at(&self, frame: u32) -> Vec<&Placement> {
        self.occluders
            .iter()
            .filter_map(|t| t.frames.get(&frame))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerConfig {
    /// Candidate occluders tried per region before giving up.
    pub max_iterations: u32,
    /// Smallest scale factor a sprite may be rendered at.
    pub min_scale: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            min_scale: 0.25,
        }
    }
}

/// Footprint of a sprite at a placement (pre-feather alpha >= 0.5).
pub fn placement_footprint(sprite: &OccluderSprite, placement: &Placement) -> PlacedMask {
    ScaledSprite::new(sprite, placement.scale, false).placed_footprint(placement.center())
}

/// Recompute per-frame FG/BG fractions from the footprints a plan places.
pub fn measure_severity(
    plan: &OcclusionPlan,
    sprites: &OccluderSet,
) -> Result<BTreeMap<u32, RealizedSeverity>, PlanError> {
    let fg_region = plan.region(RegionKind::Fg)?;
    let bg_region = plan.region(RegionKind::Bg)?;
    let mut cache: BTreeMap<(String, u64), ScaledSprite> = BTreeMap::new();
    let mut out = BTreeMap::new();
    for frame in 0..plan.frame_count {
        let mut fg = Vec::new();
        let mut bg = Vec::new();
        for placement in plan.placements_at(frame) {
            let sprite = sprites
                .get(&placement.sprite_id)
                .ok_or_else(|| PlanError::MissingSprite(placement.sprite_id.clone()))?;
            let scaled = cache
                .entry((placement.sprite_id.clone(), placement.scale.to_bits()))
                .or_insert_with(|| ScaledSprite::new(sprite, placement.scale, false));
            let mask = scaled.placed_footprint(placement.center());
            match placement.region {
                RegionKind::Fg => fg.push(mask),
                RegionKind::Bg => bg.push(mask),
            }
        }
        let fraction = |masks: &[PlacedMask], region: &RegionSpec| {
            if region_area(region) == 0 {
                Ok(0.0)
            } else {
                occupied_fraction(masks, region)
            }
        };
        out.insert(
            frame,
            RealizedSeverity {
                fg_fraction: fraction(&fg, &fg_region)?,
                bg_fraction: fraction(&bg, &bg_region)?,
            },
        );
    }
    Ok(out)
}

fn mean_severity(series: &BTreeMap<u32, RealizedSeverity>) -> RealizedSeverity {
    let n = series.len().max(1) as f64;
    RealizedSeverity {
        fg_fraction: series.values().map(|s| s.fg_fraction).sum::<f64>() / n,
        bg_fraction: series.values().map(|s| s.bg_fraction).sum::<f64>() / n,
    }
}

/// Occlude a video with motionless occluders at the requested severity cell.
pub fn plan_static(
    video: &VideoRecord,
    fg_level: u8,
    bg_level: u8,
    occluders: &OccluderSet,
    seed: u64,
    config: &PlannerConfig,
) -> Result<OcclusionPlan, PlanError> {
    build_plan(
        video,
        MotionSpec::fixed(),
        SeverityTarget { fg_level, bg_level },
        occluders,
        seed,
        config,
    )
}

/// Occlude a video with moving occluders. The target defaults to the fixed
/// dynamic cell (FG2, BG3).
pub fn plan_dynamic(
    video: &VideoRecord,
    motion: &MotionSpec,
    occluders: &OccluderSet,
    seed: u64,
    target: Option<SeverityTarget>,
    config: &PlannerConfig,
) -> Result<OcclusionPlan, PlanError> {
    if motion.kind == MotionKind::Static {
        return Err(PlanError::NotDynamic(motion.kind));
    }
    motion.validate()?;
    build_plan(
        video,
        *motion,
        target.unwrap_or(SeverityTarget::DYNAMIC_DEFAULT),
        occluders,
        seed,
        config,
    )
}

fn build_plan(
    video: &VideoRecord,
    motion: MotionSpec,
    target: SeverityTarget,
    occluders: &OccluderSet,
    seed: u64,
    config: &PlannerConfig,
) -> Result<OcclusionPlan, PlanError> {
    let fg_band = SeverityBand::for_level(target.fg_level)?;
    let bg_band = SeverityBand::for_level(target.bg_level)?;
    if video.tubes.is_empty() {
        return Err(PlanError::NoGroundTruth(video.video_id.clone()));
    }
    let frame = Rect::frame(video.width, video.height);
    let fg_rect = actor_region_of_tubes(&video.tubes)?
        .intersect(&frame)
        .ok_or(PlanError::EmptyRegion(RegionKind::Fg))?;

    let mut tracks = Vec::new();
    let mut attempts = [0u32; 2];
    for (slot, (kind, band)) in [(RegionKind::Fg, fg_band), (RegionKind::Bg, bg_band)]
        .into_iter()
        .enumerate()
    {
        let region = RegionSpec::new(kind, fg_rect, video.width, video.height)?;
        if region_area(&region) == 0 {
            return Err(PlanError::EmptyRegion(kind));
        }
        let filler = RegionFiller {
            region,
            band,
            motion: &motion,
            frame_count: video.frame_count,
            occluders,
            seed,
            config,
        };
        let (region_tracks, used) = filler.fill()?;
        tracks.extend(region_tracks);
        attempts[slot] = used;
    }

    let mut plan = OcclusionPlan {
        video_id: video.video_id.clone(),
        seed,
        mode: if motion.kind == MotionKind::Static {
            PlanMode::Static
        } else {
            PlanMode::Dynamic
        },
        motion,
        frame_width: video.width,
        frame_height: video.height,
        frame_count: video.frame_count,
        fg_rect,
        fg_from_multiple_tubes: video.tubes.len() > 1,
        target,
        occluders: tracks,
        realized_severity: BTreeMap::new(),
        mean_severity: RealizedSeverity {
            fg_fraction: 0.0,
            bg_fraction: 0.0,
        },
        attempts,
    };
    plan.realized_severity = measure_severity(&plan, occluders)?;
    plan.mean_severity = mean_severity(&plan.realized_severity);
    Ok(plan)
}

/// Severity loop for one region.
struct RegionFiller<'a> {
    region: RegionSpec,
    band: SeverityBand,
    motion: &'a MotionSpec,
    frame_count: u32,
    occluders: &'a OccluderSet,
    seed: u64,
    config: &'a PlannerConfig,
}

const MIN_BUDGET: f64 = 1e-3;

impl RegionFiller<'_> {
    fn label(&self) -> &'static str {
        match self.region.kind {
            RegionKind::Fg => "fg",
            RegionKind::Bg => "bg",
        }
    }

    /// Frames whose coverage must be tracked separately.
    fn distinct_frames(&self) -> u32 {
        if self.motion.kind == MotionKind::Static {
            1
        } else {
            self.frame_count
        }
    }

    fn fill(&self) -> Result<(Vec<OccluderTrack>, u32), PlanError> {
        let mut rng = seed::stream(self.seed, self.label());
        let eval_frames = self.distinct_frames();
        let mut grids = vec![CoverageGrid::new(self.region)?; eval_frames as usize];
        let mut tracks: Vec<OccluderTrack> = Vec::new();
        let mean = |grids: &[CoverageGrid]| {
            grids.iter().map(CoverageGrid::fraction).sum::<f64>() / grids.len() as f64
        };
        let sprites = self.occluders.sprites();

        for attempt in 0..self.config.max_iterations {
            let current = mean(&grids);
            if !tracks.is_empty() && self.band.contains(current) {
                return Ok((tracks, attempt));
            }
            let sprite = &sprites[rng.random_range(0..sprites.len())];
            let ordinal = tracks.len() as u64;
            let Some(candidate) = self.propose(sprite, current, ordinal, &mut rng) else {
                continue;
            };
            let masks: Vec<PlacedMask> = candidate
                .frames
                .values()
                .take(eval_frames as usize)
                .map(|p| placement_footprint(sprite, p))
                .collect();
            let after = grids
                .iter()
                .zip(&masks)
                .map(|(g, m)| g.fraction_with(g.count_new(m)))
                .sum::<f64>()
                / grids.len() as f64;
            if after >= self.band.hi || after <= current {
                continue;
            }
            for (grid, mask) in grids.iter_mut().zip(&masks) {
                grid.add(mask);
            }
            tracks.push(candidate);
        }
        let current = mean(&grids);
        if !tracks.is_empty() && self.band.contains(current) {
            return Ok((tracks, self.config.max_iterations));
        }
        Err(PlanError::SeverityUnreachable {
            region: self.region.kind,
            level: self.band.level,
            achieved: current,
            attempts: self.config.max_iterations,
        })
    }

    /// Draw a scale, start position and trajectory for one new occluder.
    fn propose(
        &self,
        sprite: &OccluderSprite,
        current: f64,
        ordinal: u64,
        rng: &mut ChaCha8Rng,
    ) -> Option<OccluderTrack> {
        let wrap_rect = self.region.bounding_rect();
        let growth = self.mean_area_growth();
        let lo = ((self.band.lo - current).max(MIN_BUDGET) / growth).min(1.0);
        let hi = ((self.band.hi - current) / growth).min(1.0);
        if hi < lo {
            return None;
        }
        let scale = fit_scale_for_budget(sprite, &self.region, (lo, hi)).ok()?;
        if scale < self.config.min_scale {
            return None;
        }
        let (w, h) = crate::occluder::scaled_dims(sprite.width(), sprite.height(), scale);
        let start = (
            sample_center(rng, wrap_rect.x_min, wrap_rect.x_max, w),
            sample_center(rng, wrap_rect.y_min, wrap_rect.y_max, h),
        );
        let (trajectory, start) = self.resolve_trajectory(start, &wrap_rect, ordinal, rng);
        let frames = trajectory_path(&trajectory, start, self.frame_count)
            .into_iter()
            .enumerate()
            .map(|(t, (pos, multiplier))| {
                let wrapped = wrap_position(pos, &wrap_rect);
                (
                    t as u32,
                    Placement {
                        sprite_id: sprite.sprite_id.clone(),
                        region: self.region.kind,
                        position: [wrapped.0, wrapped.1],
                        scale: scale * multiplier,
                    },
                )
            })
            .collect();
        Some(OccluderTrack {
            sprite_id: sprite.sprite_id.clone(),
            region: self.region.kind,
            trajectory,
            start: [start.0, start.1],
            base_scale: scale,
            frames,
        })
    }

    /// Mean over the clip of the squared scale multiplier, so zooming
    /// occluders are sized for their average footprint.
    fn mean_area_growth(&self) -> f64 {
        let rate = self.zoom_rate();
        let sign = match self.motion.kind {
            MotionKind::ZoomIn => 1.0,
            MotionKind::ZoomOut => -1.0,
            _ => return 1.0,
        };
        (0..self.frame_count)
            .map(|t| (2.0 * sign * rate * f64::from(t)).exp())
            .sum::<f64>()
            / f64::from(self.frame_count)
    }

    fn zoom_rate(&self) -> f64 {
        self.motion
            .params
            .scale_rate
            .unwrap_or(2f64.ln() / f64::from(self.frame_count.max(1)))
    }

    fn resolve_trajectory(
        &self,
        start: (f64, f64),
        rect: &Rect,
        ordinal: u64,
        rng: &mut ChaCha8Rng,
    ) -> (Trajectory, (f64, f64)) {
        let p = &self.motion.params;
        let clip = f64::from(self.frame_count.max(1));
        let (rw, rh) = (rect.width() as f64, rect.height() as f64);
        let short_side = rw.min(rh);
        match self.motion.kind {
            MotionKind::Static => (Trajectory::Static, start),
            MotionKind::Linear => {
                let speed = p.speed.unwrap_or(0.5 * short_side / clip);
                let heading = rng.random_range(0.0..TAU);
                (
                    Trajectory::Linear {
                        velocity: [speed * heading.cos(), speed * heading.sin()],
                    },
                    start,
                )
            }
            MotionKind::Circle => {
                let radius = p.radius.unwrap_or(0.25 * short_side);
                let angular_speed = p.angular_speed.unwrap_or(TAU / clip);
                let phase = rng.random_range(0.0..TAU);
                let trajectory = Trajectory::Circle {
                    center: [start.0, start.1],
                    radius,
                    angular_speed,
                    phase,
                };
                let (on_circle, _) = trajectory_position(&trajectory, start, 0.0);
                (trajectory, on_circle)
            }
            MotionKind::Sinusoid => {
                let direction = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                (
                    Trajectory::Sinusoid {
                        drift: p.drift.unwrap_or(direction * rw / clip),
                        amplitude: p.amplitude.unwrap_or(rh / 6.0),
                        period: p.period.unwrap_or(clip),
                    },
                    start,
                )
            }
            MotionKind::ZoomIn => (
                Trajectory::ZoomIn {
                    scale_rate: self.zoom_rate(),
                },
                start,
            ),
            MotionKind::ZoomOut => (
                Trajectory::ZoomOut {
                    scale_rate: self.zoom_rate(),
                },
                start,
            ),
            MotionKind::Random => (
                Trajectory::Random {
                    step_sigma: p.step_sigma.unwrap_or((short_side / 50.0).max(0.5)),
                    max_speed: p.max_speed.unwrap_or((short_side / 10.0).max(1.0)),
                    seed: seed::derive_seed(
                        self.seed,
                        &[b"walk", self.label().as_bytes(), &ordinal.to_le_bytes()],
                    ),
                },
                start,
            ),
        }
    }
}

/// Uniform sprite centre keeping a `size`-px sprite inside `[lo, hi)` when
/// it fits, the interval centre otherwise.
fn sample_center(rng: &mut ChaCha8Rng, lo: i64, hi: i64, size: u32) -> f64 {
    let half = f64::from(size) / 2.0;
    let (a, b) = (lo as f64 + half, hi as f64 - half);
    if b > a {
        rng.random_range(a..b)
    } else {
        0.5 * (lo + hi) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ActionTube, BoundingBox};
    use crate::occluder::{CategoryFilter, SpriteMeta};
    use image::{Rgba, RgbaImage};

    fn video(width: u32, height: u32, frames: u32, actor: [f64; 4]) -> VideoRecord {
        let tube = ActionTube::ground_truth(
            "t1",
            "run",
            (0..frames).map(|i| (i, BoundingBox::from_array(actor))),
        )
        .unwrap();
        VideoRecord {
            video_id: "v1".into(),
            width,
            height,
            frame_count: frames,
            frame_source: "v1/%05d.png".into(),
            tubes: vec![tube],
        }
    }

    fn square_set(side: u32) -> OccluderSet {
        let sprite = OccluderSprite::from_rgba(
            RgbaImage::from_pixel(side, side, Rgba([255, 255, 255, 255])),
            &SpriteMeta {
                sprite_id: "sq".into(),
                category: "indoor".into(),
                source_label: "box".into(),
            },
        )
        .unwrap();
        OccluderSet::new([sprite], CategoryFilter::All).unwrap()
    }

    #[test]
    fn circle_examples() {
        let circle = Trajectory::Circle {
            center: [50.0, 50.0],
            radius: 10.0,
            angular_speed: TAU / 8.0,
            phase: 0.0,
        };
        let ((x, y), m) = trajectory_position(&circle, (0.0, 0.0), 0.0);
        assert!((x - 60.0).abs() < 1e-12 && (y - 50.0).abs() < 1e-12 && m == 1.0);
        let ((x, y), _) = trajectory_position(&circle, (0.0, 0.0), 2.0);
        assert!((x - 50.0).abs() < 1e-9 && (y - 60.0).abs() < 1e-9);
    }

    #[test]
    fn linear_and_zoom_examples() {
        let linear = Trajectory::Linear {
            velocity: [2.0, 1.0],
        };
        assert_eq!(trajectory_position(&linear, (0.0, 0.0), 5.0), ((10.0, 5.0), 1.0));
        let zoom = Trajectory::ZoomIn { scale_rate: 0.1 };
        let (pos, m) = trajectory_position(&zoom, (3.0, 4.0), 10.0);
        assert_eq!(pos, (3.0, 4.0));
        assert!((m - 1f64.exp()).abs() < 1e-12);
        let (_, m) = trajectory_position(&Trajectory::ZoomOut { scale_rate: 0.1 }, (3.0, 4.0), 10.0);
        assert!((m - (-1f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn sinusoid_example() {
        let s = Trajectory::Sinusoid {
            drift: 1.5,
            amplitude: 4.0,
            period: 8.0,
        };
        let ((x, y), _) = trajectory_position(&s, (10.0, 20.0), 2.0);
        assert!((x - 13.0).abs() < 1e-12 && (y - 24.0).abs() < 1e-12);
    }

    #[test]
    fn random_walk_is_seeded_and_speed_limited() {
        let walk = Trajectory::Random {
            step_sigma: 3.0,
            max_speed: 2.0,
            seed: 9,
        };
        let path = random_walk(&walk, (0.0, 0.0), 50);
        assert_eq!(path, random_walk(&walk, (0.0, 0.0), 50));
        for pair in path.windows(2) {
            let d = ((pair[1].0 - pair[0].0).powi(2) + (pair[1].1 - pair[0].1).powi(2)).sqrt();
            assert!(d <= 2.0 + 1e-9);
        }
        assert_eq!(trajectory_position(&walk, (0.0, 0.0), 17.0).0, path[17]);
    }

    #[test]
    fn wrap_examples() {
        let r = Rect::new(0, 0, 100, 100).unwrap();
        assert_eq!(wrap_position((105.0, 50.0), &r), (5.0, 50.0));
        assert_eq!(wrap_position((42.5, 7.0), &r), (42.5, 7.0));
        assert_eq!(wrap_position((-10.0, 50.0), &r), (90.0, 50.0));
        let inside = wrap_position((-1e-18, 0.0), &r);
        assert!(r.contains_point(inside.0, inside.1));
    }

    #[test]
    fn split_rules() {
        for kind in [MotionKind::Circle, MotionKind::Sinusoid] {
            assert!(MotionSpec::new(kind, Split::Test).validate().is_ok());
            assert!(matches!(
                MotionSpec::new(kind, Split::Train).validate(),
                Err(PlanError::MotionSplitViolation { .. })
            ));
        }
        for kind in [MotionKind::Linear, MotionKind::ZoomIn, MotionKind::ZoomOut, MotionKind::Random] {
            assert!(MotionSpec::new(kind, Split::Train).validate().is_ok());
            assert!(MotionSpec::new(kind, Split::Test).validate().is_err());
        }
        assert!(MotionSpec::new(MotionKind::Static, Split::Train).validate().is_ok());
        assert!(MotionSpec::new(MotionKind::Static, Split::Test).validate().is_ok());
        assert_eq!("zoom-in".parse::<MotionKind>(), Ok(MotionKind::ZoomIn));
        assert_eq!("zoom_out".parse::<MotionKind>(), Ok(MotionKind::ZoomOut));
    }

    #[test]
    fn static_plan_meets_fg2_band() {
        // 240x320 frame (height x width) with a 100x100 actor rect
        let v = video(320, 240, 4, [100.0, 70.0, 200.0, 170.0]);
        let set = square_set(20);
        let plan = plan_static(&v, 2, 1, &set, 11, &PlannerConfig::default()).unwrap();
        assert_eq!(plan.fg_rect.to_array(), [100, 70, 200, 170]);
        let first = plan.realized_severity[&0];
        for s in plan.realized_severity.values() {
            assert_eq!(*s, first);
            assert!((0.2..0.4).contains(&s.fg_fraction));
            assert!((0.0..0.2).contains(&s.bg_fraction));
        }
        assert!(plan.occluders.iter().any(|t| t.region == RegionKind::Bg));
        plan.check_coverage().unwrap();
    }

    #[test]
    fn static_plan_is_deterministic() {
        let v = video(320, 240, 3, [100.0, 70.0, 200.0, 170.0]);
        let set = square_set(16);
        let a = plan_static(&v, 3, 2, &set, 5, &PlannerConfig::default()).unwrap();
        let b = plan_static(&v, 3, 2, &set, 5, &PlannerConfig::default()).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let c = plan_static(&v, 3, 2, &set, 6, &PlannerConfig::default()).unwrap();
        assert_ne!(a.to_json(), c.to_json());
        assert_eq!(OcclusionPlan::from_json(&a.to_json()).unwrap(), a);
    }

    #[test]
    fn tiny_actor_region_is_unreachable() {
        let v = video(64, 64, 2, [10.0, 10.0, 13.0, 13.0]);
        let set = square_set(10);
        let config = PlannerConfig {
            min_scale: 1.0,
            ..PlannerConfig::default()
        };
        let err = plan_static(&v, 2, 1, &set, 1, &config).unwrap_err();
        assert!(matches!(
            err,
            PlanError::SeverityUnreachable {
                region: RegionKind::Fg,
                ..
            }
        ));
    }

    #[test]
    fn full_frame_actor_has_empty_background() {
        let v = video(32, 32, 2, [0.0, 0.0, 32.0, 32.0]);
        let err = plan_static(&v, 1, 1, &square_set(8), 1, &PlannerConfig::default()).unwrap_err();
        assert!(matches!(err, PlanError::EmptyRegion(RegionKind::Bg)));
    }

    #[test]
    fn dynamic_rejects_wrong_split() {
        let v = video(160, 120, 8, [40.0, 30.0, 100.0, 90.0]);
        let set = square_set(12);
        let err = plan_dynamic(
            &v,
            &MotionSpec::new(MotionKind::Circle, Split::Train),
            &set,
            1,
            None,
            &PlannerConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, PlanError::MotionSplitViolation { .. }));
        assert!(matches!(
            plan_dynamic(&v, &MotionSpec::fixed(), &set, 1, None, &PlannerConfig::default()),
            Err(PlanError::NotDynamic(_))
        ));
    }

    #[test]
    fn dynamic_sinusoid_default_target() {
        let v = video(160, 120, 8, [40.0, 30.0, 100.0, 90.0]);
        let set = square_set(12);
        let motion = MotionSpec::new(MotionKind::Sinusoid, Split::Test);
        let plan = plan_dynamic(&v, &motion, &set, 3, None, &PlannerConfig::default()).unwrap();
        assert_eq!(plan.target, SeverityTarget::DYNAMIC_DEFAULT);
        assert!((0.2..0.4).contains(&plan.mean_severity.fg_fraction));
        assert!((0.4..0.6).contains(&plan.mean_severity.bg_fraction));
        let again = plan_dynamic(&v, &motion, &set, 3, None, &PlannerConfig::default()).unwrap();
        assert_eq!(plan.to_json(), again.to_json());
        for track in &plan.occluders {
            let rect = match track.region {
                RegionKind::Fg => plan.fg_rect,
                RegionKind::Bg => Rect::frame(160, 120),
            };
            for p in track.frames.values() {
                assert!(rect.contains_point(p.position[0], p.position[1]));
            }
        }
    }
}
