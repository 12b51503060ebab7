//! Actor/background regions and occlusion severity.
//!
//! The actor region (FG) of a video is the tightest integer rectangle that
//! encloses every ground-truth box of the actor over time; the background
//! (BG) is the rest of the frame. Severity is the fraction of a region's
//! pixels covered by the union of occluder footprints.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ActionTube;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("no boxes to enclose")]
    EmptyTube,
    #[error("region has zero area")]
    EmptyRegion,
    #[error("degenerate rectangle {0:?}")]
    InvalidRect([i64; 4]),
    #[error("actor rectangle {rect:?} is not inside the {width}x{height} frame")]
    RectOutsideFrame { rect: [i64; 4], width: u32, height: u32 },
    #[error("fraction {0} is not in [0, 1]")]
    InvalidFraction(f64),
    #[error("fraction {0} is at or above the highest calibrated severity (0.6)")]
    OutOfCalibratedRange(f64),
    #[error("severity level {0} does not exist (expected 1, 2 or 3)")]
    InvalidLevel(u8),
}

/// Integer pixel rectangle, half-open on both axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: i64,
    pub y_min: i64,
    pub x_max: i64,
    pub y_max: i64,
}

impl Rect {
    pub fn new(x_min: i64, y_min: i64, x_max: i64, y_max: i64) -> Result<Self, GeometryError> {
        if x_min >= x_max || y_min >= y_max {
            return Err(GeometryError::InvalidRect([x_min, y_min, x_max, y_max]));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn frame(width: u32, height: u32) -> Self {
        Self {
            x_min: 0,
            y_min: 0,
            x_max: i64::from(width),
            y_max: i64::from(height),
        }
    }

    pub fn width(&self) -> i64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> i64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> u64 {
        (self.width().max(0) * self.height().max(0)) as u64
    }

    pub fn contains_pixel(&self, x: i64, y: i64) -> bool {
        x >= self.x_min && x < self.x_max && y >= self.y_min && y < self.y_max
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.x_min as f64 && x < self.x_max as f64 && y >= self.y_min as f64 && y < self.y_max as f64
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x_min >= self.x_min
            && other.y_min >= self.y_min
            && other.x_max <= self.x_max
            && other.y_max <= self.y_max
    }

    /// Overlap of two rectangles, `None` when they do not share a pixel.
    pub fn intersect(&self, other: &Rect) -> Option<Rect> {
        Rect::new(
            self.x_min.max(other.x_min),
            self.y_min.max(other.y_min),
            self.x_max.min(other.x_max),
            self.y_max.min(other.y_max),
        )
        .ok()
    }

    pub fn envelope(&self, other: &Rect) -> Rect {
        Rect {
            x_min: self.x_min.min(other.x_min),
            y_min: self.y_min.min(other.y_min),
            x_max: self.x_max.max(other.x_max),
            y_max: self.y_max.max(other.y_max),
        }
    }

    pub fn to_array(self) -> [i64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionKind {
    #[serde(rename = "FG")]
    Fg,
    #[serde(rename = "BG")]
    Bg,
}

/// A region of the frame: either the actor rectangle or its complement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionSpec {
    pub kind: RegionKind,
    pub fg_rect: Rect,
    pub frame_width: u32,
    pub frame_height: u32,
}

impl RegionSpec {
    pub fn new(
        kind: RegionKind,
        fg_rect: Rect,
        frame_width: u32,
        frame_height: u32,
    ) -> Result<Self, GeometryError> {
        if !Rect::frame(frame_width, frame_height).contains_rect(&fg_rect) {
            return Err(GeometryError::RectOutsideFrame {
                rect: fg_rect.to_array(),
                width: frame_width,
                height: frame_height,
            });
        }
        Ok(Self {
            kind,
            fg_rect,
            frame_width,
            frame_height,
        })
    }

    pub fn frame_rect(&self) -> Rect {
        Rect::frame(self.frame_width, self.frame_height)
    }

    /// Smallest rectangle containing the region: the actor rect for FG, the
    /// whole frame for BG.
    pub fn bounding_rect(&self) -> Rect {
        match self.kind {
            RegionKind::Fg => self.fg_rect,
            RegionKind::Bg => self.frame_rect(),
        }
    }

    pub fn contains_pixel(&self, x: i64, y: i64) -> bool {
        match self.kind {
            RegionKind::Fg => self.fg_rect.contains_pixel(x, y),
            RegionKind::Bg => {
                self.frame_rect().contains_pixel(x, y) && !self.fg_rect.contains_pixel(x, y)
            }
        }
    }
}

/// Actor rectangle of one tube, rounded outward to whole pixels.
pub fn actor_region(tube: &ActionTube) -> Rect {
    let mut boxes = tube.frames().values();
    let first = boxes.next().expect("tubes are non-empty");
    let (mut x0, mut y0, mut x1, mut y1) = (first.x_min, first.y_min, first.x_max, first.y_max);
    for b in boxes {
        x0 = x0.min(b.x_min);
        y0 = y0.min(b.y_min);
        x1 = x1.max(b.x_max);
        y1 = y1.max(b.y_max);
    }
    Rect {
        x_min: x0.floor() as i64,
        y_min: y0.floor() as i64,
        x_max: x1.ceil() as i64,
        y_max: y1.ceil() as i64,
    }
}

/// Envelope of the actor rectangles of several tubes (multi-actor videos).
pub fn actor_region_of_tubes(tubes: &[ActionTube]) -> Result<Rect, GeometryError> {
    tubes
        .iter()
        .map(actor_region)
        .reduce(|a, b| a.envelope(&b))
        .ok_or(GeometryError::EmptyTube)
}

pub fn region_area(region: &RegionSpec) -> u64 {
    match region.kind {
        RegionKind::Fg => region.fg_rect.area(),
        RegionKind::Bg => region.frame_rect().area() - region.fg_rect.area(),
    }
}

/// Binary pixel mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelMask {
    pub width: u32,
    pub height: u32,
    pub bits: Vec<bool>,
}

impl PixelMask {
    pub fn new(width: u32, height: u32, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), (width as usize) * (height as usize));
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn filled(width: u32, height: u32) -> Self {
        Self::new(width, height, vec![true; (width as usize) * (height as usize)])
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[(y as usize) * (self.width as usize) + x as usize]
    }

    pub fn count(&self) -> u64 {
        self.bits.iter().filter(|b| **b).count() as u64
    }
}

/// A mask positioned on the frame with its top-left pixel at `(x0, y0)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlacedMask {
    pub x0: i64,
    pub y0: i64,
    pub mask: PixelMask,
}

impl PlacedMask {
    pub fn rect(x0: i64, y0: i64, width: u32, height: u32) -> Self {
        Self {
            x0,
            y0,
            mask: PixelMask::filled(width, height),
        }
    }

    /// Frame pixels set by this mask.
    pub fn pixels(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        let w = self.mask.width as usize;
        self.mask
            .bits
            .iter()
            .enumerate()
            .filter(|(_, set)| **set)
            .map(move |(i, _)| (self.x0 + (i % w) as i64, self.y0 + (i / w) as i64))
    }
}

/// Incremental union of footprints restricted to one region.
#[derive(Debug, Clone)]
pub struct CoverageGrid {
    region: RegionSpec,
    bounds: Rect,
    covered: Vec<bool>,
    count: u64,
    area: u64,
}

impl CoverageGrid {
    pub fn new(region: RegionSpec) -> Result<Self, GeometryError> {
        let area = region_area(&region);
        if area == 0 {
            return Err(GeometryError::EmptyRegion);
        }
        let bounds = region.bounding_rect();
        Ok(Self {
            region,
            bounds,
            covered: vec![false; bounds.area() as usize],
            count: 0,
            area,
        })
    }

    fn index(&self, x: i64, y: i64) -> Option<usize> {
        if !self.region.contains_pixel(x, y) {
            return None;
        }
        Some(((y - self.bounds.y_min) * self.bounds.width() + (x - self.bounds.x_min)) as usize)
    }

    /// Region pixels `mask` would newly cover.
    pub fn count_new(&self, mask: &PlacedMask) -> u64 {
        mask.pixels()
            .filter_map(|(x, y)| self.index(x, y))
            .filter(|i| !self.covered[*i])
            .count() as u64
    }

    pub fn add(&mut self, mask: &PlacedMask) {
        for (x, y) in mask.pixels() {
            if let Some(i) = self.index(x, y) {
                if !self.covered[i] {
                    self.covered[i] = true;
                    self.count += 1;
                }
            }
        }
    }

    pub fn covered(&self) -> u64 {
        self.count
    }

    pub fn area(&self) -> u64 {
        self.area
    }

    pub fn fraction(&self) -> f64 {
        self.count as f64 / self.area as f64
    }

    pub fn fraction_with(&self, extra_pixels: u64) -> f64 {
        (self.count + extra_pixels) as f64 / self.area as f64
    }
}

/// Fraction of `region` covered by the union of the placed footprints.
pub fn occupied_fraction(
    footprints: &[PlacedMask],
    region: &RegionSpec,
) -> Result<f64, GeometryError> {
    let mut grid = CoverageGrid::new(*region)?;
    for mask in footprints {
        grid.add(mask);
    }
    Ok(grid.fraction())
}

/// Closed-form counterpart of [`occupied_fraction`] for axis-aligned
/// rectangular footprints.
pub fn rect_union_fraction(rects: &[Rect], region: &RegionSpec) -> Result<f64, GeometryError> {
    let area = region_area(region);
    if area == 0 {
        return Err(GeometryError::EmptyRegion);
    }
    let covered = match region.kind {
        RegionKind::Fg => union_area_within(rects, &region.fg_rect),
        RegionKind::Bg => {
            union_area_within(rects, &region.frame_rect())
                - union_area_within(rects, &region.fg_rect)
        }
    };
    Ok(covered as f64 / area as f64)
}

/// Area of `(∪ rects) ∩ clip` by coordinate compression.
fn union_area_within(rects: &[Rect], clip: &Rect) -> u64 {
    let clipped: Vec<Rect> = rects.iter().filter_map(|r| r.intersect(clip)).collect();
    let mut xs: Vec<i64> = clipped.iter().flat_map(|r| [r.x_min, r.x_max]).collect();
    let mut ys: Vec<i64> = clipped.iter().flat_map(|r| [r.y_min, r.y_max]).collect();
    xs.sort_unstable();
    xs.dedup();
    ys.sort_unstable();
    ys.dedup();
    let mut total = 0u64;
    for xw in xs.windows(2) {
        for yw in ys.windows(2) {
            let inside = clipped.iter().any(|r| {
                r.x_min <= xw[0] && r.x_max >= xw[1] && r.y_min <= yw[0] && r.y_max >= yw[1]
            });
            if inside {
                total += ((xw[1] - xw[0]) * (yw[1] - yw[0])) as u64;
            }
        }
    }
    total
}

/// One calibrated severity level with its half-open area-fraction band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeverityBand {
    pub level: u8,
    pub lo: f64,
    pub hi: f64,
}

impl SeverityBand {
    pub const ALL: [SeverityBand; 3] = [
        SeverityBand { level: 1, lo: 0.0, hi: 0.2 },
        SeverityBand { level: 2, lo: 0.2, hi: 0.4 },
        SeverityBand { level: 3, lo: 0.4, hi: 0.6 },
    ];

    pub fn for_level(level: u8) -> Result<Self, GeometryError> {
        Self::ALL
            .iter()
            .copied()
            .find(|b| b.level == level)
            .ok_or(GeometryError::InvalidLevel(level))
    }

    pub fn contains(&self, fraction: f64) -> bool {
        fraction >= self.lo && fraction < self.hi
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

pub fn severity_level(fraction: f64) -> Result<u8, GeometryError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(GeometryError::InvalidFraction(fraction));
    }
    SeverityBand::ALL
        .iter()
        .find(|b| b.contains(fraction))
        .map(|b| b.level)
        .ok_or(GeometryError::OutOfCalibratedRange(fraction))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BoundingBox;

    fn tube(boxes: &[[f64; 4]]) -> ActionTube {
        ActionTube::ground_truth(
            "t",
            "c",
            boxes
                .iter()
                .enumerate()
                .map(|(i, b)| (i as u32, BoundingBox::from_array(*b))),
        )
        .unwrap()
    }

    #[test]
    fn actor_region_examples() {
        let r = actor_region(&tube(&[[10., 10., 20., 20.], [15., 15., 30., 30.]]));
        assert_eq!(r.to_array(), [10, 10, 30, 30]);
        assert_eq!(actor_region(&tube(&[[5., 5., 9., 9.]])).to_array(), [5, 5, 9, 9]);
        let r = actor_region(&tube(&[[0., 0., 4., 4.], [6., 6., 8., 8.]]));
        assert_eq!(r.to_array(), [0, 0, 8, 8]);
        // fractional boxes round outward
        let r = actor_region(&tube(&[[1.5, 2.2, 3.1, 4.9]]));
        assert_eq!(r.to_array(), [1, 2, 4, 5]);
        assert_eq!(actor_region_of_tubes(&[]), Err(GeometryError::EmptyTube));
    }

    #[test]
    fn region_areas() {
        let fg = Rect::new(0, 0, 10, 10).unwrap();
        let fg_region = RegionSpec::new(RegionKind::Fg, fg, 20, 20).unwrap();
        let bg_region = RegionSpec::new(RegionKind::Bg, fg, 20, 20).unwrap();
        assert_eq!(region_area(&fg_region), 100);
        assert_eq!(region_area(&bg_region), 300);
        let full = RegionSpec::new(RegionKind::Bg, Rect::frame(20, 20), 20, 20).unwrap();
        assert_eq!(region_area(&full), 0);
        assert!(RegionSpec::new(RegionKind::Fg, Rect::new(0, 0, 21, 5).unwrap(), 20, 20).is_err());
    }

    #[test]
    fn occupied_fraction_examples() {
        let fg = Rect::new(0, 0, 10, 10).unwrap();
        let region = RegionSpec::new(RegionKind::Fg, fg, 20, 20).unwrap();
        let exact = [PlacedMask::rect(0, 0, 10, 10)];
        assert_eq!(occupied_fraction(&exact, &region).unwrap(), 1.0);
        assert_eq!(occupied_fraction(&[], &region).unwrap(), 0.0);

        // two 30-pixel footprints sharing 10 pixels: rows 0-2 and rows 2-4
        let a = PlacedMask::rect(0, 0, 10, 3);
        let b = PlacedMask::rect(0, 2, 10, 3);
        assert_eq!(occupied_fraction(&[a, b], &region).unwrap(), 0.5);

        let empty = RegionSpec::new(RegionKind::Bg, Rect::frame(20, 20), 20, 20).unwrap();
        assert_eq!(
            occupied_fraction(&[], &empty),
            Err(GeometryError::EmptyRegion)
        );
    }

    #[test]
    fn bg_fraction_excludes_actor_pixels() {
        let fg = Rect::new(0, 0, 10, 10).unwrap();
        let region = RegionSpec::new(RegionKind::Bg, fg, 20, 20).unwrap();
        // 10x20 strip: half of it lies over the actor rect
        let strip = PlacedMask::rect(0, 0, 10, 20);
        assert_eq!(occupied_fraction(&[strip], &region).unwrap(), 100.0 / 300.0);
        // masks hanging off the frame are clipped
        let off = PlacedMask::rect(15, 15, 10, 10);
        assert_eq!(occupied_fraction(&[off], &region).unwrap(), 25.0 / 300.0);
    }

    #[test]
    fn severity_levels() {
        assert_eq!(severity_level(0.10), Ok(1));
        assert_eq!(severity_level(0.30), Ok(2));
        assert_eq!(severity_level(0.0), Ok(1));
        assert_eq!(severity_level(0.2), Ok(2));
        assert_eq!(severity_level(0.4), Ok(3));
        assert_eq!(severity_level(0.59), Ok(3));
        assert_eq!(
            severity_level(0.70),
            Err(GeometryError::OutOfCalibratedRange(0.70))
        );
        assert_eq!(
            severity_level(0.6),
            Err(GeometryError::OutOfCalibratedRange(0.6))
        );
        assert!(matches!(
            severity_level(1.5),
            Err(GeometryError::InvalidFraction(_))
        ));
        assert!(SeverityBand::for_level(4).is_err());
    }
}
