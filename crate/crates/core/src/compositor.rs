//! Rendering plans onto frames.
//!
//! Each occluder is alpha-blended over the frame, `out = α·sprite + (1−α)·frame`,
//! in plan order. The alpha of an actor-region occluder is forced to zero
//! outside the actor rectangle and the alpha of a background occluder is
//! forced to zero inside it, so the two regions never bleed into each other.

use std::collections::BTreeMap;
use std::io::Cursor;

use image::{ImageFormat, RgbImage};
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{Rect, RegionKind};
use crate::occluder::{OccluderSet, ScaledSprite};
use crate::planner::{measure_severity, OcclusionPlan, PlanError, Placement, RealizedSeverity};
use crate::seed::counter_uniform;

/// Largest tolerated gap between stored and re-measured severity.
pub const SEVERITY_TOLERANCE: f64 = 0.01;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("plan references sprite {0:?} which is not loaded")]
    MissingSprite(String),
    #[error("frame {frame}: stored severity ({stored_fg:.4}, {stored_bg:.4}) differs from rendered ({fg:.4}, {bg:.4})")]
    SeverityDrift {
        frame: u32,
        stored_fg: f64,
        stored_bg: f64,
        fg: f64,
        bg: f64,
    },
    #[error("patch size {patch:?} does not divide clip size {clip:?}")]
    IndivisibleDims { patch: (u32, u32, u32), clip: (u32, u32, u32) },
    #[error("probability {0} is not in [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("image codec error: {0}")]
    Codec(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

impl RenderError {
    pub fn kind(&self) -> &'static str {
        match self {
            RenderError::DimensionMismatch(_) => "DimensionMismatch",
            RenderError::MissingSprite(_) => "MissingSprite",
            RenderError::SeverityDrift { .. } => "SeverityDrift",
            RenderError::IndivisibleDims { .. } => "IndivisibleDims",
            RenderError::ProbabilityOutOfRange(_) => "ProbabilityOutOfRange",
            RenderError::Codec(_) => "CodecError",
            RenderError::Plan(e) => e.kind(),
        }
    }
}

/// 8-bit RGB frame, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameImage {
    pub width: u32,
    pub height: u32,
    pub rgb: Vec<u8>,
}

impl FrameImage {
    pub fn filled(width: u32, height: u32, color: [u8; 3]) -> Self {
        let rgb = color
            .iter()
            .copied()
            .cycle()
            .take(3 * width as usize * height as usize)
            .collect();
        Self { width, height, rgb }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, color: [u8; 3]) {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        self.rgb[i..i + 3].copy_from_slice(&color);
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, RenderError> {
        let img = image::load_from_memory(bytes).map_err(|e| RenderError::Codec(e.to_string()))?;
        Ok(Self::from(img.to_rgb8()))
    }

    /// Lossless PNG encoding.
    pub fn to_png_bytes(&self) -> Vec<u8> {
        let img = RgbImage::from_raw(self.width, self.height, self.rgb.clone())
            .expect("buffer length matches dimensions");
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png)
            .expect("PNG encoding into memory cannot fail");
        out.into_inner()
    }
}

impl From<RgbImage> for FrameImage {
    fn from(img: RgbImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            rgb: img.into_raw(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RenderOptions {
    /// Soften occluder edges with a σ = 1 px Gaussian on the alpha.
    pub feather: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self { feather: true }
    }
}

pub fn blend(alpha: f64, sprite: f64, frame: u8) -> u8 {
    (alpha * sprite + (1.0 - alpha) * f64::from(frame))
        .round()
        .clamp(0.0, 255.0) as u8
}

/// Composite already-resampled sprites over one frame.
pub fn composite_scaled(
    frame: &FrameImage,
    layers: &[(&ScaledSprite, &Placement)],
    fg_rect: &Rect,
) -> Result<FrameImage, RenderError> {
    if !Rect::frame(frame.width, frame.height).contains_rect(fg_rect) {
        return Err(RenderError::DimensionMismatch(format!(
            "actor rect {:?} outside {}x{} frame",
            fg_rect.to_array(),
            frame.width,
            frame.height
        )));
    }
    let mut out = frame.clone();
    let (fw, fh) = (i64::from(frame.width), i64::from(frame.height));
    for (sprite, placement) in layers {
        let (x0, y0) = sprite.top_left(placement.center());
        let (offset, ew, eh) = sprite.render_extent();
        for dy in offset..offset + i64::from(eh) {
            let y = y0 + dy;
            if y < 0 || y >= fh {
                continue;
            }
            for dx in offset..offset + i64::from(ew) {
                let x = x0 + dx;
                if x < 0 || x >= fw {
                    continue;
                }
                let in_actor = fg_rect.contains_pixel(x, y);
                let allowed = match placement.region {
                    RegionKind::Fg => in_actor,
                    RegionKind::Bg => !in_actor,
                };
                if !allowed {
                    continue;
                }
                let alpha = sprite.render_alpha(dx, dy);
                if alpha <= 0.0 {
                    continue;
                }
                let color = sprite.render_color(dx, dy);
                let (px, py) = (x as u32, y as u32);
                let under = out.pixel(px, py);
                out.set_pixel(
                    px,
                    py,
                    [
                        blend(alpha, color[0], under[0]),
                        blend(alpha, color[1], under[1]),
                        blend(alpha, color[2], under[2]),
                    ],
                );
            }
        }
    }
    Ok(out)
}

/// Composite occluders over one frame, in list order.
pub fn composite_frame(
    frame: &FrameImage,
    placements: &[(&crate::occluder::OccluderSprite, &Placement)],
    fg_rect: &Rect,
    options: &RenderOptions,
) -> Result<FrameImage, RenderError> {
    let scaled: Vec<ScaledSprite> = placements
        .iter()
        .map(|(sprite, p)| ScaledSprite::new(sprite, p.scale, options.feather))
        .collect();
    let layers: Vec<(&ScaledSprite, &Placement)> = scaled
        .iter()
        .zip(placements.iter().map(|(_, p)| *p))
        .collect();
    composite_scaled(frame, &layers, fg_rect)
}

#[derive(Debug, Clone)]
pub struct RenderResult {
    pub frames: Vec<FrameImage>,
    pub realized_severity: BTreeMap<u32, RealizedSeverity>,
    pub plan_echo: OcclusionPlan,
}

/// Render every frame of a plan and re-measure its severity.
pub fn render_plan(
    frames: &[FrameImage],
    plan: &OcclusionPlan,
    sprites: &OccluderSet,
    options: &RenderOptions,
) -> Result<RenderResult, RenderError> {
    if frames.len() != plan.frame_count as usize {
        return Err(RenderError::DimensionMismatch(format!(
            "plan covers {} frames, got {}",
            plan.frame_count,
            frames.len()
        )));
    }
    if let Some(f) = frames
        .iter()
        .find(|f| (f.width, f.height) != (plan.frame_width, plan.frame_height))
    {
        return Err(RenderError::DimensionMismatch(format!(
            "frame is {}x{}, plan expects {}x{}",
            f.width, f.height, plan.frame_width, plan.frame_height
        )));
    }
    plan.check_coverage()?;

    let mut cache: BTreeMap<(String, u64), ScaledSprite> = BTreeMap::new();
    for track in &plan.occluders {
        let sprite = sprites
            .get(&track.sprite_id)
            .ok_or_else(|| RenderError::MissingSprite(track.sprite_id.clone()))?;
        for p in track.frames.values() {
            cache
                .entry((p.sprite_id.clone(), p.scale.to_bits()))
                .or_insert_with(|| ScaledSprite::new(sprite, p.scale, options.feather));
        }
    }

    let rendered = frames
        .par_iter()
        .enumerate()
        .map(|(index, frame)| {
            let layers: Vec<(&ScaledSprite, &Placement)> = plan
                .placements_at(index as u32)
                .into_iter()
                .map(|p| (&cache[&(p.sprite_id.clone(), p.scale.to_bits())], p))
                .collect();
            composite_scaled(frame, &layers, &plan.fg_rect)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let realized = measure_severity(plan, sprites)?;
    for (frame, measured) in &realized {
        if let Some(stored) = plan.realized_severity.get(frame) {
            if (stored.fg_fraction - measured.fg_fraction).abs() > SEVERITY_TOLERANCE
                || (stored.bg_fraction - measured.bg_fraction).abs() > SEVERITY_TOLERANCE
            {
                return Err(RenderError::SeverityDrift {
                    frame: *frame,
                    stored_fg: stored.fg_fraction,
                    stored_bg: stored.bg_fraction,
                    fg: measured.fg_fraction,
                    bg: measured.bg_fraction,
                });
            }
        }
    }

    Ok(RenderResult {
        frames: rendered,
        realized_severity: realized,
        plan_echo: plan.clone(),
    })
}

/// `frame_index,fg_fraction,bg_fraction` rows.
pub fn severity_csv(series: &BTreeMap<u32, RealizedSeverity>) -> String {
    let mut out = String::from("frame_index,fg_fraction,bg_fraction\n");
    for (frame, s) in series {
        out.push_str(&format!("{frame},{},{}\n", s.fg_fraction, s.bg_fraction));
    }
    out
}

/// Which spatio-temporal patches `patch_blackout` zeroes, in
/// `(t, y, x)`-major order.
pub fn blackout_selection(
    clip: (u32, u32, u32),
    patch: (u32, u32, u32),
    p: f64,
    seed: u64,
) -> Result<Vec<bool>, RenderError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(RenderError::ProbabilityOutOfRange(p));
    }
    let divides = |n: u32, d: u32| d > 0 && n > 0 && n.is_multiple_of(d);
    if !(divides(clip.0, patch.0) && divides(clip.1, patch.1) && divides(clip.2, patch.2)) {
        return Err(RenderError::IndivisibleDims { patch, clip });
    }
    let count = (clip.0 / patch.0) as u64 * (clip.1 / patch.1) as u64 * (clip.2 / patch.2) as u64;
    Ok((0..count).map(|i| counter_uniform(seed, i) < p).collect())
}

/// Zero whole `(frames, height, width)` patches of a clip independently with
/// probability `p`.
pub fn patch_blackout(
    frames: &[FrameImage],
    patch_dims: (u32, u32, u32),
    p: f64,
    seed: u64,
) -> Result<Vec<FrameImage>, RenderError> {
    let (width, height) = frames
        .first()
        .map(|f| (f.width, f.height))
        .unwrap_or((0, 0));
    if frames.iter().any(|f| (f.width, f.height) != (width, height)) {
        return Err(RenderError::DimensionMismatch(
            "frames of one clip must share dimensions".into(),
        ));
    }
    let clip = (frames.len() as u32, height, width);
    let selected = blackout_selection(clip, patch_dims, p, seed)?;
    let (pt, ph, pw) = patch_dims;
    let (gh, gw) = (height / ph, width / pw);
    let mut out = frames.to_vec();
    for (t, frame) in out.iter_mut().enumerate() {
        let gt = t as u32 / pt;
        for y in 0..height {
            for x in 0..width {
                let index = ((gt * gh + y / ph) * gw + x / pw) as usize;
                if selected[index] {
                    frame.set_pixel(x, y, [0, 0, 0]);
                }
            }
        }
    }
    Ok(out)
}
