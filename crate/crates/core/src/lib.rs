//! occbench: occluded action-detection benchmark toolkit.
//!
//! The crate is organised around the generation and evaluation workflow:
//!
//! * [`model`] parses dataset manifests and prediction files into validated
//!   action tubes.
//! * [`geometry`] derives actor (FG) and background (BG) regions and measures
//!   occlusion severity on the pixel grid.
//! * [`occluder`] imports RGBA occluder sprites and scales them to an area
//!   budget.
//! * [`planner`] places occluders statically or along trajectories so that a
//!   requested severity cell is met.
//! * [`compositor`] renders a plan over video frames and provides patch
//!   blackout.
//! * [`masking`] is the Bernoulli token-masking transform for token sequences.
//! * [`metrics`] computes tube/box IoU, AP, v-mAP, f-mAP and the robustness
//!   summaries.
//! * [`report`] assembles evaluation reports and severity-grid tables.

pub mod compositor;
pub mod geometry;
pub mod masking;
pub mod metrics;
pub mod model;
pub mod occluder;
pub mod planner;
pub mod report;
pub mod seed;

pub use compositor::{FrameImage, RenderError, RenderOptions, RenderResult};
pub use geometry::{GeometryError, Rect, RegionKind, RegionSpec, SeverityBand};
pub use masking::{MaskConfig, MaskError, TokenMask, TokenSequence};
pub use metrics::{MatchConfig, MetricsError, RobustnessInput};
pub use model::{ActionTube, BoundingBox, DatasetManifest, ModelError, VideoRecord};
pub use occluder::{Category, CategoryFilter, OccluderError, OccluderSet, OccluderSprite};
pub use planner::{MotionKind, MotionSpec, OcclusionPlan, PlanError, PlannerConfig, Split};
pub use report::{EvalReport, ReportError, RobustnessTable};
