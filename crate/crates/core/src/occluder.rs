//! Occluder sprites: import, scaling and the on-disk library.
//!
//! A sprite is an RGBA cut-out trimmed to its non-transparent extent. Its
//! footprint is the set of pixels with alpha >= 0.5; severity is always
//! measured on footprints, never on the soft (feathered) alpha.
//!
//! Library layout on disk:
//!
//! ```text
//! <library>/index.json       {"sprites": [{"sprite_id", "category", "source_label", "image"}]}
//! <library>/<sprite_id>.png  trimmed RGBA sprite
//! <library>/<sprite_id>.json {"sprite_id", "category", "source_label"}
//! ```

use std::fmt;
use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use image::{ImageFormat, RgbaImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{region_area, PixelMask, PlacedMask, RegionSpec};

pub const FOOTPRINT_ALPHA: f64 = 0.5;
const FEATHER_SIGMA: f64 = 1.0;
const FEATHER_RADIUS: usize = 3;

#[derive(Debug, Error)]
pub enum OccluderError {
    #[error("cannot decode sprite image: {0}")]
    Decode(String),
    #[error("sprite {0:?} has no pixel with alpha >= 0.5")]
    EmptySprite(String),
    #[error("unknown occluder category {0:?} (expected indoor or outdoor)")]
    UnknownCategory(String),
    #[error("sprite id {0:?} must be non-empty and use only [A-Za-z0-9_.-]")]
    InvalidSpriteId(String),
    #[error("area budget [{0}, {1}] is not a sub-interval of (0, 1]")]
    InvalidBudget(f64, f64),
    #[error("region has zero area")]
    EmptyRegion,
    #[error("no scale puts sprite {sprite_id:?} inside the area budget while fitting the region")]
    Unfittable { sprite_id: String },
    #[error("no occluders left after filtering by {0}")]
    EmptySet(CategoryFilter),
    #[error("occluder library error at {path}: {message}")]
    Library { path: PathBuf, message: String },
}

impl OccluderError {
    pub fn kind(&self) -> &'static str {
        match self {
            OccluderError::Decode(_) => "DecodeError",
            OccluderError::EmptySprite(_) => "EmptySprite",
            OccluderError::UnknownCategory(_) => "UnknownCategory",
            OccluderError::InvalidSpriteId(_) => "InvalidSpriteId",
            OccluderError::InvalidBudget(..) => "InvalidBudget",
            OccluderError::EmptyRegion => "EmptyRegion",
            OccluderError::Unfittable { .. } => "Unfittable",
            OccluderError::EmptySet(_) => "EmptySet",
            OccluderError::Library { .. } => "LibraryError",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Indoor,
    Outdoor,
}

impl FromStr for Category {
    type Err = OccluderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "indoor" => Ok(Category::Indoor),
            "outdoor" => Ok(Category::Outdoor),
            other => Err(OccluderError::UnknownCategory(other.to_string())),
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::Indoor => "indoor",
            Category::Outdoor => "outdoor",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CategoryFilter {
    Indoor,
    Outdoor,
    #[default]
    All,
}

impl CategoryFilter {
    pub fn admits(&self, category: Category) -> bool {
        match self {
            CategoryFilter::All => true,
            CategoryFilter::Indoor => category == Category::Indoor,
            CategoryFilter::Outdoor => category == Category::Outdoor,
        }
    }
}

impl FromStr for CategoryFilter {
    type Err = OccluderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(CategoryFilter::All),
            other => Ok(match Category::from_str(other)? {
                Category::Indoor => CategoryFilter::Indoor,
                Category::Outdoor => CategoryFilter::Outdoor,
            }),
        }
    }
}

impl fmt::Display for CategoryFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CategoryFilter::Indoor => "indoor",
            CategoryFilter::Outdoor => "outdoor",
            CategoryFilter::All => "all",
        })
    }
}

/// Per-sprite metadata, also the sidecar document format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpriteMeta {
    pub sprite_id: String,
    pub category: String,
    pub source_label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccluderSprite {
    pub sprite_id: String,
    pub category: Category,
    pub rgba: RgbaImage,
    pub footprint_area: u64,
    pub source_label: String,
}

fn alpha_of(a: u8) -> f64 {
    f64::from(a) / 255.0
}

fn valid_sprite_id(id: &str) -> bool {
    !id.is_empty()
        && id != "index"
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
        && !id.starts_with('.')
}

impl OccluderSprite {
    /// Trim `rgba` to its non-transparent extent and measure the footprint.
    pub fn from_rgba(rgba: RgbaImage, meta: &SpriteMeta) -> Result<Self, OccluderError> {
        let category = Category::from_str(&meta.category)?;
        if !valid_sprite_id(&meta.sprite_id) {
            return Err(OccluderError::InvalidSpriteId(meta.sprite_id.clone()));
        }
        let footprint_area = rgba
            .pixels()
            .filter(|p| alpha_of(p.0[3]) >= FOOTPRINT_ALPHA)
            .count() as u64;
        if footprint_area == 0 {
            return Err(OccluderError::EmptySprite(meta.sprite_id.clone()));
        }
        let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
        for (x, y, p) in rgba.enumerate_pixels() {
            if p.0[3] > 0 {
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x + 1);
                y1 = y1.max(y + 1);
            }
        }
        let trimmed = image::imageops::crop_imm(&rgba, x0, y0, x1 - x0, y1 - y0).to_image();
        Ok(Self {
            sprite_id: meta.sprite_id.clone(),
            category,
            rgba: trimmed,
            footprint_area,
            source_label: meta.source_label.clone(),
        })
    }

    pub fn width(&self) -> u32 {
        self.rgba.width()
    }

    pub fn height(&self) -> u32 {
        self.rgba.height()
    }

    pub fn meta(&self) -> SpriteMeta {
        SpriteMeta {
            sprite_id: self.sprite_id.clone(),
            category: self.category.to_string(),
            source_label: self.source_label.clone(),
        }
    }

    pub fn to_png_bytes(&self) -> Vec<u8> {
        let mut out = Cursor::new(Vec::new());
        self.rgba
            .write_to(&mut out, ImageFormat::Png)
            .expect("PNG encoding into memory cannot fail");
        out.into_inner()
    }
}

/// Decode an image and import it as a sprite.
pub fn import_sprite(rgba_image: &[u8], meta: &SpriteMeta) -> Result<OccluderSprite, OccluderError> {
    let decoded =
        image::load_from_memory(rgba_image).map_err(|e| OccluderError::Decode(e.to_string()))?;
    OccluderSprite::from_rgba(decoded.to_rgba8(), meta)
}

/// Scale factor that puts the sprite's footprint inside `budget` (as a
/// fraction of the region area) while the scaled sprite still fits in the
/// region's bounding rectangle.
///
/// Returns the scale hitting the budget midpoint when that fits, otherwise
/// the largest fitting scale if it still reaches the lower budget bound.
pub fn fit_scale_for_budget(
    sprite: &OccluderSprite,
    region: &RegionSpec,
    budget: (f64, f64),
) -> Result<f64, OccluderError> {
    let (lo, hi) = budget;
    if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
        return Err(OccluderError::InvalidBudget(lo, hi));
    }
    let area = region_area(region) as f64;
    if area == 0.0 {
        return Err(OccluderError::EmptyRegion);
    }
    let footprint = sprite.footprint_area as f64;
    let scale_for = |fraction: f64| (fraction * area / footprint).sqrt();
    let bounds = region.bounding_rect();
    let fit = (bounds.width() as f64 / f64::from(sprite.width()))
        .min(bounds.height() as f64 / f64::from(sprite.height()));
    let mid = scale_for(0.5 * (lo + hi));
    if fit >= mid {
        Ok(mid)
    } else if fit >= scale_for(lo) {
        Ok(fit)
    } else {
        Err(OccluderError::Unfittable {
            sprite_id: sprite.sprite_id.clone(),
        })
    }
}

/// Pixel dimensions of a sprite rendered at `scale`.
pub fn scaled_dims(width: u32, height: u32, scale: f64) -> (u32, u32) {
    let dim = |d: u32| ((f64::from(d) * scale).round() as u32).max(1);
    (dim(width), dim(height))
}

/// A sprite resampled to a concrete scale, ready to rasterize.
#[derive(Debug, Clone)]
pub struct ScaledSprite {
    pub width: u32,
    pub height: u32,
    color: Vec<[f64; 3]>,
    alpha: Vec<f64>,
    soft_alpha: Vec<f64>,
    pad: u32,
}

impl ScaledSprite {
    /// Bilinear resample (premultiplied) of `sprite`. With `feather`, the
    /// render alpha is additionally blurred with a σ = 1 px Gaussian; the
    /// footprint always comes from the unblurred alpha.
    pub fn new(sprite: &OccluderSprite, scale: f64, feather: bool) -> Self {
        let (sw, sh) = (sprite.width() as usize, sprite.height() as usize);
        let (tw, th) = scaled_dims(sprite.width(), sprite.height(), scale);
        let (tw_us, th_us) = (tw as usize, th as usize);
        let src = &sprite.rgba;
        let premul = |x: usize, y: usize| {
            let p = src.get_pixel(x as u32, y as u32).0;
            let a = alpha_of(p[3]);
            [
                f64::from(p[0]) * a,
                f64::from(p[1]) * a,
                f64::from(p[2]) * a,
                a,
            ]
        };
        let mut color = Vec::with_capacity(tw_us * th_us);
        let mut alpha = Vec::with_capacity(tw_us * th_us);
        for j in 0..th_us {
            let v = ((j as f64 + 0.5) * sh as f64 / th_us as f64 - 0.5).clamp(0.0, (sh - 1) as f64);
            let y0 = v.floor() as usize;
            let y1 = (y0 + 1).min(sh - 1);
            let fy = v - y0 as f64;
            for i in 0..tw_us {
                let u = ((i as f64 + 0.5) * sw as f64 / tw_us as f64 - 0.5)
                    .clamp(0.0, (sw - 1) as f64);
                let x0 = u.floor() as usize;
                let x1 = (x0 + 1).min(sw - 1);
                let fx = u - x0 as f64;
                let (p00, p10, p01, p11) = (premul(x0, y0), premul(x1, y0), premul(x0, y1), premul(x1, y1));
                let mut acc = [0.0; 4];
                for c in 0..4 {
                    let top = p00[c] + (p10[c] - p00[c]) * fx;
                    let bottom = p01[c] + (p11[c] - p01[c]) * fx;
                    acc[c] = top + (bottom - top) * fy;
                }
                let a = acc[3].clamp(0.0, 1.0);
                if a > 0.0 {
                    color.push([acc[0] / a, acc[1] / a, acc[2] / a]);
                } else {
                    color.push([0.0; 3]);
                }
                alpha.push(a);
            }
        }
        let (soft_alpha, pad) = if feather {
            (gaussian_feather(&alpha, tw_us, th_us), FEATHER_RADIUS as u32)
        } else {
            (alpha.clone(), 0)
        };
        Self {
            width: tw,
            height: th,
            color,
            alpha,
            soft_alpha,
            pad,
        }
    }

    /// Top-left pixel of the sprite when centred at `center`.
    pub fn top_left(&self, center: (f64, f64)) -> (i64, i64) {
        (
            (center.0 - f64::from(self.width) / 2.0 + 0.5).floor() as i64,
            (center.1 - f64::from(self.height) / 2.0 + 0.5).floor() as i64,
        )
    }

    pub fn footprint_mask(&self) -> PixelMask {
        PixelMask::new(
            self.width,
            self.height,
            self.alpha.iter().map(|a| *a >= FOOTPRINT_ALPHA).collect(),
        )
    }

    pub fn placed_footprint(&self, center: (f64, f64)) -> PlacedMask {
        let (x0, y0) = self.top_left(center);
        PlacedMask {
            x0,
            y0,
            mask: self.footprint_mask(),
        }
    }

    /// Extent of the render alpha (including feather padding) relative to
    /// the sprite's top-left pixel: `(offset, width, height)`.
    pub fn render_extent(&self) -> (i64, u32, u32) {
        (
            -i64::from(self.pad),
            self.width + 2 * self.pad,
            self.height + 2 * self.pad,
        )
    }

    /// Render alpha at a pixel relative to the sprite's top-left (may be
    /// negative within the feather padding).
    pub fn render_alpha(&self, dx: i64, dy: i64) -> f64 {
        let pad = i64::from(self.pad);
        let (pw, ph) = (i64::from(self.width) + 2 * pad, i64::from(self.height) + 2 * pad);
        let (px, py) = (dx + pad, dy + pad);
        if px < 0 || py < 0 || px >= pw || py >= ph {
            return 0.0;
        }
        self.soft_alpha[(py * pw + px) as usize]
    }

    /// Sprite colour at a relative pixel, clamped to the nearest sprite pixel.
    pub fn render_color(&self, dx: i64, dy: i64) -> [f64; 3] {
        let x = dx.clamp(0, i64::from(self.width) - 1) as usize;
        let y = dy.clamp(0, i64::from(self.height) - 1) as usize;
        self.color[y * self.width as usize + x]
    }
}

fn gaussian_feather(alpha: &[f64], width: usize, height: usize) -> Vec<f64> {
    let r = FEATHER_RADIUS;
    let kernel: Vec<f64> = (0..=2 * r)
        .map(|k| {
            let d = k as f64 - r as f64;
            (-d * d / (2.0 * FEATHER_SIGMA * FEATHER_SIGMA)).exp()
        })
        .collect();
    let norm: f64 = kernel.iter().sum();
    let (pw, ph) = (width + 2 * r, height + 2 * r);
    let mut padded = vec![0.0; pw * ph];
    for y in 0..height {
        for x in 0..width {
            padded[(y + r) * pw + x + r] = alpha[y * width + x];
        }
    }
    let mut horizontal = vec![0.0; pw * ph];
    for y in 0..ph {
        for x in 0..pw {
            let mut acc = 0.0;
            for (k, w) in kernel.iter().enumerate() {
                let sx = x as i64 + k as i64 - r as i64;
                if sx >= 0 && (sx as usize) < pw {
                    acc += w * padded[y * pw + sx as usize];
                }
            }
            horizontal[y * pw + x] = acc / norm;
        }
    }
    let mut out = vec![0.0; pw * ph];
    for y in 0..ph {
        for x in 0..pw {
            let mut acc = 0.0;
            for (k, w) in kernel.iter().enumerate() {
                let sy = y as i64 + k as i64 - r as i64;
                if sy >= 0 && (sy as usize) < ph {
                    acc += w * horizontal[sy as usize * pw + x];
                }
            }
            out[y * pw + x] = (acc / norm).clamp(0.0, 1.0);
        }
    }
    out
}

/// Sprites admitted by a category filter.
#[derive(Debug, Clone)]
pub struct OccluderSet {
    sprites: Vec<OccluderSprite>,
    filter: CategoryFilter,
}

impl OccluderSet {
    pub fn new(
        sprites: impl IntoIterator<Item = OccluderSprite>,
        filter: CategoryFilter,
    ) -> Result<Self, OccluderError> {
        let sprites: Vec<_> = sprites
            .into_iter()
            .filter(|s| filter.admits(s.category))
            .collect();
        if sprites.is_empty() {
            return Err(OccluderError::EmptySet(filter));
        }
        Ok(Self { sprites, filter })
    }

    pub fn sprites(&self) -> &[OccluderSprite] {
        &self.sprites
    }

    pub fn filter(&self) -> CategoryFilter {
        self.filter
    }

    pub fn get(&self, sprite_id: &str) -> Option<&OccluderSprite> {
        self.sprites.iter().find(|s| s.sprite_id == sprite_id)
    }

    pub fn len(&self) -> usize {
        self.sprites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sprites.is_empty()
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LibraryIndex {
    pub sprites: Vec<IndexEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexEntry {
    pub sprite_id: String,
    pub category: String,
    pub source_label: String,
    pub image: String,
}

fn library_err(path: &Path, message: impl fmt::Display) -> OccluderError {
    OccluderError::Library {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

fn read_index(library: &Path) -> Result<LibraryIndex, OccluderError> {
    let path = library.join("index.json");
    if !path.exists() {
        return Ok(LibraryIndex::default());
    }
    let text = fs::read(&path).map_err(|e| library_err(&path, e))?;
    serde_json::from_slice(&text).map_err(|e| library_err(&path, e))
}

/// Load every sprite listed in `<library>/index.json`.
pub fn load_library(library: &Path) -> Result<Vec<OccluderSprite>, OccluderError> {
    let index_path = library.join("index.json");
    if !index_path.exists() {
        return Err(library_err(&index_path, "missing index.json"));
    }
    let index = read_index(library)?;
    index
        .sprites
        .iter()
        .map(|entry| {
            let path = library.join(&entry.image);
            let bytes = fs::read(&path).map_err(|e| library_err(&path, e))?;
            let meta = SpriteMeta {
                sprite_id: entry.sprite_id.clone(),
                category: entry.category.clone(),
                source_label: entry.source_label.clone(),
            };
            import_sprite(&bytes, &meta)
        })
        .collect()
}

/// Write a sprite (image + sidecar) into a library and update its index.
pub fn add_to_library(library: &Path, sprite: &OccluderSprite) -> Result<(), OccluderError> {
    fs::create_dir_all(library).map_err(|e| library_err(library, e))?;
    let image_name = format!("{}.png", sprite.sprite_id);
    let image_path = library.join(&image_name);
    fs::write(&image_path, sprite.to_png_bytes()).map_err(|e| library_err(&image_path, e))?;
    let meta = sprite.meta();
    let sidecar = library.join(format!("{}.json", sprite.sprite_id));
    let body = serde_json::to_string_pretty(&meta).expect("sidecar serialization cannot fail");
    fs::write(&sidecar, body).map_err(|e| library_err(&sidecar, e))?;

    let mut index = read_index(library)?;
    index.sprites.retain(|e| e.sprite_id != sprite.sprite_id);
    index.sprites.push(IndexEntry {
        sprite_id: meta.sprite_id,
        category: meta.category,
        source_label: meta.source_label,
        image: image_name,
    });
    index.sprites.sort_by(|a, b| a.sprite_id.cmp(&b.sprite_id));
    let index_path = library.join("index.json");
    let body = serde_json::to_string_pretty(&index).expect("index serialization cannot fail");
    fs::write(&index_path, body).map_err(|e| library_err(&index_path, e))
}

#[derive(Debug, Default)]
pub struct ImportSummary {
    pub imported: Vec<String>,
    pub skipped: Vec<(PathBuf, OccluderError)>,
}

/// Import every PNG in `source` as a sprite of `category` into `library`.
///
/// The sprite id and source label default to the file stem; a
/// `<stem>.json` sidecar next to the image may override the label.
pub fn import_directory(
    source: &Path,
    category: Category,
    library: &Path,
) -> Result<ImportSummary, OccluderError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(source)
        .map_err(|e| library_err(source, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("png"))
        })
        .collect();
    paths.sort();

    let mut summary = ImportSummary::default();
    for path in paths {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        let mut meta = SpriteMeta {
            sprite_id: stem.clone(),
            category: category.to_string(),
            source_label: stem.clone(),
        };
        let sidecar = path.with_extension("json");
        if sidecar.exists() {
            let text = fs::read(&sidecar).map_err(|e| library_err(&sidecar, e))?;
            let given: SpriteMeta =
                serde_json::from_slice(&text).map_err(|e| library_err(&sidecar, e))?;
            meta.source_label = given.source_label;
        }
        let result = fs::read(&path)
            .map_err(|e| OccluderError::Decode(e.to_string()))
            .and_then(|bytes| import_sprite(&bytes, &meta));
        match result {
            Ok(sprite) => {
                add_to_library(library, &sprite)?;
                summary.imported.push(sprite.sprite_id);
            }
            Err(err) => summary.skipped.push((path, err)),
        }
    }
    Ok(summary)
}
