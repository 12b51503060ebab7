use image::{Rgba, RgbaImage};
use occbench::geometry::region_area;
use occbench::occluder::{fit_scale_for_budget, import_sprite, ScaledSprite, SpriteMeta};
use occbench::{OccluderError, OccluderSprite, Rect, RegionKind, RegionSpec, SeverityBand};
use proptest::prelude::*;

fn meta(id: &str) -> SpriteMeta {
    SpriteMeta {
        sprite_id: id.into(),
        category: "outdoor".into(),
        source_label: "synthetic".into(),
    }
}

/// Blob sprites: an ellipse plus a rectangle notch, with random colours and a
/// soft alpha ring.
fn sprite_image() -> impl Strategy<Value = RgbaImage> {
    (6u32..60, 6u32..60, any::<[u8; 3]>(), 0.0f64..0.5).prop_map(|(w, h, rgb, notch)| {
        let (cx, cy) = (f64::from(w) / 2.0, f64::from(h) / 2.0);
        RgbaImage::from_fn(w, h, |x, y| {
            let dx = (f64::from(x) + 0.5 - cx) / cx;
            let dy = (f64::from(y) + 0.5 - cy) / cy;
            let d = dx * dx + dy * dy;
            let cut = dx > 1.0 - 2.0 * notch && dy < 0.0;
            let a = if cut || d > 1.0 {
                0
            } else if d > 0.8 {
                100
            } else {
                255
            };
            Rgba([rgb[0], rgb[1], rgb[2], a])
        })
    })
}

fn png(img: &RgbaImage) -> Vec<u8> {
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png).unwrap();
    out.into_inner()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn fitted_scale_rasterizes_inside_budget(
        img in sprite_image(),
        rw in 60i64..240,
        rh in 60i64..200,
        fg in any::<bool>(),
        level in 1u8..=3,
    ) {
        let Ok(sprite) = OccluderSprite::from_rgba(img, &meta("blob")) else {
            return Ok(());
        };
        let kind = if fg { RegionKind::Fg } else { RegionKind::Bg };
        let region = RegionSpec::new(kind, Rect::new(20, 10, 20 + rw, 10 + rh).unwrap(), 320, 240).unwrap();
        let band = SeverityBand::for_level(level).unwrap();
        // level 1 starts at zero, which is not a usable budget
        let budget = (band.lo.max(0.05), band.hi);
        match fit_scale_for_budget(&sprite, &region, budget) {
            Ok(s) => {
                let raster = ScaledSprite::new(&sprite, s, false).footprint_mask().count();
                let fraction = raster as f64 / region_area(&region) as f64;
                prop_assert!(
                    fraction >= budget.0 - 0.02 && fraction <= budget.1 + 0.02,
                    "scale {s} gives {fraction}, budget {budget:?}"
                );
            }
            Err(OccluderError::Unfittable { .. }) => {}
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn import_is_idempotent(img in sprite_image()) {
        let Ok(first) = import_sprite(&png(&img), &meta("blob")) else {
            return Ok(());
        };
        let second = import_sprite(&first.to_png_bytes(), &first.meta()).unwrap();
        prop_assert_eq!(second, first);
    }
}
