//! Toy dataset and sprite library shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage, Rgba, RgbaImage};
use occbench::occluder::{add_to_library, SpriteMeta};
use occbench::{ActionTube, BoundingBox, DatasetManifest, OccluderSprite, VideoRecord};

pub const WIDTH: u32 = 320;
pub const HEIGHT: u32 = 240;
pub const FRAMES: u32 = 6;

fn sprite(id: &str, category: &str, img: RgbaImage) -> OccluderSprite {
    OccluderSprite::from_rgba(
        img,
        &SpriteMeta {
            sprite_id: id.into(),
            category: category.into(),
            source_label: id.into(),
        },
    )
    .unwrap()
}

pub fn disc(radius: u32, color: [u8; 3]) -> RgbaImage {
    let size = 2 * radius;
    let r = radius as f64;
    RgbaImage::from_fn(size, size, |x, y| {
        let (dx, dy) = (x as f64 + 0.5 - r, y as f64 + 0.5 - r);
        let a = if dx * dx + dy * dy <= r * r { 255 } else { 0 };
        Rgba([color[0], color[1], color[2], a])
    })
}

pub fn block(w: u32, h: u32, color: [u8; 3]) -> RgbaImage {
    RgbaImage::from_pixel(w, h, Rgba([color[0], color[1], color[2], 255]))
}

/// L-shaped cutout with a soft diagonal edge.
pub fn ell(size: u32, color: [u8; 3]) -> RgbaImage {
    RgbaImage::from_fn(size, size, |x, y| {
        let a = if x < size / 2 || y >= size / 2 {
            255
        } else if x + y < size {
            128
        } else {
            0
        };
        Rgba([color[0], color[1], color[2], a])
    })
}

pub fn toy_sprites() -> Vec<OccluderSprite> {
    vec![
        sprite("disc", "outdoor", disc(24, [220, 40, 40])),
        sprite("crate", "indoor", block(40, 30, [40, 200, 60])),
        sprite("plank", "indoor", block(64, 14, [180, 140, 60])),
        sprite("corner", "outdoor", ell(36, [40, 60, 220])),
        sprite("pebble", "outdoor", disc(9, [200, 200, 30])),
    ]
}

/// Write the toy sprite library and return its directory.
pub fn write_library(root: &Path) -> PathBuf {
    let dir = root.join("library");
    for s in toy_sprites() {
        add_to_library(&dir, &s).unwrap();
    }
    dir
}

pub fn frame_image(seed: u32, index: u32) -> RgbImage {
    RgbImage::from_fn(WIDTH, HEIGHT, |x, y| {
        Rgb([
            ((x + index * 3) % 256) as u8,
            ((y + seed * 40) % 256) as u8,
            ((x / 8 + y / 8 + index) * 7 % 256) as u8,
        ])
    })
}

pub fn tube(id: &str, class: &str, rect: [f64; 4], frames: u32) -> ActionTube {
    ActionTube::ground_truth(
        id,
        class,
        (0..frames).map(|f| {
            // a small sway so the actor region is a true envelope
            let dx = (f % 3) as f64 * 4.0;
            (f, BoundingBox::new(rect[0] + dx, rect[1], rect[2] + dx, rect[3]))
        }),
    )
    .unwrap()
}

/// Two-video, two-class toy manifest.
pub fn toy_manifest() -> DatasetManifest {
    let videos = [
        ("clip_a", "wave", [60.0, 50.0, 160.0, 130.0]),
        ("clip_b", "walk", [150.0, 90.0, 240.0, 200.0]),
    ]
    .into_iter()
    .map(|(id, class, rect)| VideoRecord {
        video_id: id.into(),
        width: WIDTH,
        height: HEIGHT,
        frame_count: FRAMES,
        frame_source: format!("frames/{id}/%03d.png"),
        tubes: vec![tube(&format!("{id}_t0"), class, rect, FRAMES)],
    })
    .collect();
    DatasetManifest {
        dataset_id: "toy".into(),
        class_list: vec!["walk".into(), "wave".into()],
        videos,
    }
}

/// Write the frames and manifest under `root`; returns the manifest path.
pub fn write_dataset(root: &Path, manifest: &DatasetManifest) -> PathBuf {
    for (n, video) in manifest.videos.iter().enumerate() {
        for i in 0..video.frame_count {
            let path = root.join(video.frame_path(i));
            fs::create_dir_all(path.parent().unwrap()).unwrap();
            frame_image(n as u32, i).save(&path).unwrap();
        }
    }
    let path = root.join("manifest.json");
    fs::write(&path, manifest.to_json()).unwrap();
    path
}

/// Predictions identical to the ground truth, every tube scored 1.
pub fn perfect_predictions(manifest: &DatasetManifest) -> String {
    let preds: BTreeMap<String, Vec<ActionTube>> = manifest
        .videos
        .iter()
        .map(|v| {
            (
                v.video_id.clone(),
                v.tubes.iter().map(|t| t.with_score(1.0).unwrap()).collect(),
            )
        })
        .collect();
    occbench::model::predictions_to_json(manifest, &preds).unwrap()
}

/// Every file under `dir`, keyed by relative path.
pub fn read_tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(
                    path.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&path).unwrap(),
                );
            }
        }
    }
    out
}

pub fn occbench_bin() -> &'static str {
    env!("CARGO_BIN_EXE_occbench")
}
