//! Synthetic rasters with known geometry: worn markings, guardrail combs,
//! rotated sign poles and a complete one-frame scene. Used by the test
//! suites and by the scene generator example.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::geometry::PixelBox;
use crate::geotag::FrameClock;
use crate::marking::MarkingParams;
use crate::pipeline::{ClassMap, FrameEntry, PipelineParams, SceneManifest};
use crate::raster::{save_class_mask, save_gray, ClassMask, GrayImage};
use crate::report::RoadDamage;
use crate::signs::DetectionBox;
use crate::superpixel::SlicParams;

pub const ROAD: u8 = 40;
pub const PAINT: u8 = 220;

pub const MARKING_CLASS: u8 = 1;
pub const POLE_CLASS: u8 = 2;
pub const BARRIER_CLASS: u8 = 3;
pub const SIGN_CLASS: u8 = 4;

/// Detector class id used for the synthetic sign.
pub const SIGN_DETECTOR_CLASS: u32 = 7;

/// Location of the eroded texture in [`marking_frame`].
pub const MARKING_PATCH: PixelBox = PixelBox::new(56, 26, 61, 31);

/// Paint 2×2-pixel checker cells alternating `a` / `b` inside `area`.
pub fn paint_checker(img: &mut GrayImage, area: PixelBox, a: u8, b: u8) {
    for y in area.y0..=area.y1 {
        for x in area.x0..=area.x1 {
            let cell = (x - area.x0) / 2 + (y - area.y0) / 2;
            img.set(x, y, if cell.is_multiple_of(2) { a } else { b });
        }
    }
}

/// Horizontal marking strip (x 20..=99, y 20..=35) on a 120×60 road frame,
/// optionally with a worn checker patch.
pub fn marking_frame(patch: Option<PixelBox>) -> (GrayImage, ClassMask) {
    let strip = PixelBox::new(20, 20, 99, 35);
    let mut gray = GrayImage::from_fn(120, 60, |x, y| if strip.contains(x, y) { PAINT } else { ROAD });
    let mut mask = ClassMask::filled(120, 60, 0);
    for y in strip.y0..=strip.y1 {
        for x in strip.x0..=strip.x1 {
            mask.set(x, y, MARKING_CLASS);
        }
    }
    if let Some(p) = patch {
        paint_checker(&mut gray, p, ROAD, PAINT);
    }
    (gray, mask)
}

/// Marking parameters the synthetic fixtures are calibrated for.
pub fn marking_params() -> MarkingParams {
    MarkingParams {
        marking_classes: vec![MARKING_CLASS],
        threshold_window: 15,
        threshold_offset: -10,
        density_threshold: 0.3,
        slic: SlicParams {
            k: 0,
            ..SlicParams::default()
        },
        superpixel_area: 25.0,
    }
}

/// Guardrail silhouette: a rail band with posts hanging below it and open
/// gaps between the posts. The first and last posts sit flush with the rail
/// ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CombSpec {
    pub rail: usize,
    pub post_height: usize,
    pub post_width: usize,
    pub gap: usize,
    pub posts: usize,
}

/// Boundary/hull area ratio 0.55.
pub const COMB_OPEN: CombSpec = CombSpec {
    rail: 7,
    post_height: 14,
    post_width: 6,
    gap: 10,
    posts: 6,
};

/// Boundary/hull area ratio 0.70.
pub const COMB_SHALLOW: CombSpec = CombSpec {
    rail: 8,
    post_height: 8,
    post_width: 6,
    gap: 7,
    posts: 6,
};

impl CombSpec {
    pub fn width(&self) -> usize {
        self.posts * self.post_width + (self.posts - 1) * self.gap
    }

    pub fn height(&self) -> usize {
        self.rail + self.post_height
    }

    pub fn covers(&self, x: usize, y: usize) -> bool {
        if x >= self.width() || y >= self.height() {
            return false;
        }
        y < self.rail || x % (self.post_width + self.gap) < self.post_width
    }

    pub fn paint(&self, mask: &mut ClassMask, x0: usize, y0: usize, class: u8) {
        for y in 0..self.height() {
            for x in 0..self.width() {
                if self.covers(x, y) {
                    mask.set(x0 + x, y0 + y, class);
                }
            }
        }
    }
}

/// Fill pixels whose centres fall inside the polygon (crossing-number
/// rule; vertices in pixel units, pixel `(x, y)` centred at `(x, y)`).
pub fn fill_polygon(mask: &mut ClassMask, vertices: &[(f64, f64)], class: u8) {
    let n = vertices.len();
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            let (px, py) = (x as f64, y as f64);
            let mut inside = false;
            for i in 0..n {
                let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                if (a.1 > py) != (b.1 > py) {
                    let t = (py - a.1) / (b.1 - a.1);
                    if px < a.0 + t * (b.0 - a.0) {
                        inside = !inside;
                    }
                }
            }
            if inside {
                mask.set(x, y, class);
            }
        }
    }
}

/// Paint a `thickness × length` bar centred at `center` whose long axis is
/// tilted `lean_deg` from the image vertical.
pub fn paint_pole(
    mask: &mut ClassMask,
    center: (f64, f64),
    length: f64,
    thickness: f64,
    lean_deg: f64,
    class: u8,
) {
    let (s, c) = lean_deg.to_radians().sin_cos();
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            let (dx, dy) = (x as f64 - center.0, y as f64 - center.1);
            let along = dx * s + dy * c;
            let across = dx * c - dy * s;
            if along.abs() < length / 2.0 && across.abs() < thickness / 2.0 {
                mask.set(x, y, class);
            }
        }
    }
}

/// 4×60 pole leaning `lean_deg` in a 120×120 mask, plus a sign centroid on
/// the pole axis 40 px above the pole centre.
pub fn pole_scene(lean_deg: f64) -> (ClassMask, (f64, f64)) {
    let mut mask = ClassMask::filled(120, 120, 0);
    let center = (60.5, 70.5);
    paint_pole(&mut mask, center, 60.0, 4.0, lean_deg, POLE_CLASS);
    let (s, c) = lean_deg.to_radians().sin_cos();
    let sign = (center.0 - 40.0 * s, center.1 - 40.0 * c);
    (mask, sign)
}

/// Textured 24×24 sign face used as both the in-frame sign and its
/// reference crop.
pub fn sign_face() -> GrayImage {
    GrayImage::from_fn(24, 24, |x, y| {
        let (dx, dy) = (x as f64 - 11.5, y as f64 - 11.5);
        let r = (dx * dx + dy * dy).sqrt();
        if r > 11.0 {
            90
        } else if r > 8.0 {
            200
        } else if (x / 4 + y / 4) % 2 == 0 {
            250
        } else {
            30
        }
    })
}

/// Everything a one-frame pipeline run needs.
pub struct Scene {
    pub gray: GrayImage,
    pub mask: ClassMask,
    pub detections: Vec<DetectionBox>,
    pub sign_reference: GrayImage,
}

pub const SCENE_WIDTH: usize = 320;
pub const SCENE_HEIGHT: usize = 240;
pub const SCENE_FRAME_ID: u64 = 50;
/// Left edge of the open comb in the scene; it sits in the right half.
pub const SCENE_COMB_X: usize = 200;
pub const SCENE_POLE_LEAN: f64 = 20.0;

/// One frame holding a worn marking, a sign on a pole leaning 20°, and an
/// open guardrail comb on the right.
pub fn scene() -> Scene {
    let (w, h) = (SCENE_WIDTH, SCENE_HEIGHT);
    let mut gray = GrayImage::filled(w, h, ROAD);
    let mut mask = ClassMask::filled(w, h, 0);

    // marking strip along the bottom with a worn patch
    let strip = PixelBox::new(40, 190, 119, 205);
    for y in strip.y0..=strip.y1 {
        for x in strip.x0..=strip.x1 {
            gray.set(x, y, PAINT);
            mask.set(x, y, MARKING_CLASS);
        }
    }
    paint_checker(&mut gray, PixelBox::new(76, 196, 81, 201), ROAD, PAINT);

    // pole and sign
    let pole_center = (80.5, 110.5);
    paint_pole(&mut mask, pole_center, 60.0, 4.0, SCENE_POLE_LEAN, POLE_CLASS);
    let (s, c) = SCENE_POLE_LEAN.to_radians().sin_cos();
    let pole_gray = 120u8;
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) == POLE_CLASS {
                gray.set(x, y, pole_gray);
            }
        }
    }
    let face = sign_face();
    let sign_center = (pole_center.0 - 44.0 * s, pole_center.1 - 44.0 * c);
    let sx = (sign_center.0 - 12.0).round() as usize;
    let sy = (sign_center.1 - 12.0).round() as usize;
    for y in 0..face.height() {
        for x in 0..face.width() {
            gray.set(sx + x, sy + y, face.get(x, y));
            mask.set(sx + x, sy + y, SIGN_CLASS);
        }
    }
    let detections = vec![DetectionBox {
        frame_id: SCENE_FRAME_ID,
        class_id: SIGN_DETECTOR_CLASS,
        x: sx as f64,
        y: sy as f64,
        w: face.width() as f64,
        h: face.height() as f64,
        score: 0.93,
    }];

    // guardrail: open comb on the right half
    COMB_OPEN.paint(&mut mask, SCENE_COMB_X, 120, BARRIER_CLASS);
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) == BARRIER_CLASS {
                gray.set(x, y, 160);
            }
        }
    }

    Scene {
        gray,
        mask,
        detections,
        sign_reference: face,
    }
}

pub const SCENE_TRACK: &str = "t,lat,lon\n0,52.0,5.0\n10,52.001,5.001\n";
pub const SCENE_FPS: f64 = 10.0;
/// Where the scene's findings land: frame 50 at 10 fps is t = 5 s, halfway
/// between the two fixes.
pub const SCENE_LAT_LON: (f64, f64) = (52.0005, 5.0005);

/// Manifest for [`scene`] with paths relative to the manifest directory.
pub fn scene_manifest() -> SceneManifest {
    let mut road_damage = std::collections::BTreeMap::new();
    for (i, kind) in RoadDamage::ALL.into_iter().enumerate() {
        road_damage.insert(kind, vec![20 + i as u32]);
    }
    SceneManifest {
        frames: vec![FrameEntry {
            frame_id: SCENE_FRAME_ID,
            image_path: PathBuf::from(format!("frame_{SCENE_FRAME_ID}.pgm")),
            mask_path: PathBuf::from(format!("frame_{SCENE_FRAME_ID}_mask.pgm")),
            detections_path: Some(PathBuf::from("detections.jsonl")),
        }],
        class_map: ClassMap {
            marking: vec![MARKING_CLASS],
            pole: Some(POLE_CLASS),
            barrier: vec![BARRIER_CLASS],
            sign: vec![SIGN_DETECTOR_CLASS],
            road_damage,
        },
        track_path: Some(PathBuf::from("track.csv")),
        clock: FrameClock { fps: SCENE_FPS, t0: 0.0 },
        reference_library_path: Some(PathBuf::from("references")),
        params: PipelineParams {
            marking: MarkingParams {
                marking_classes: Vec::new(),
                ..marking_params()
            },
            ..PipelineParams::default()
        },
    }
}

/// Write the scene, its track, reference library and manifest into `dir`;
/// returns the manifest path.
pub fn write_scene(dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let s = scene();
    fs::create_dir_all(dir.join("references").join(SIGN_DETECTOR_CLASS.to_string()))?;
    save_gray(dir.join(format!("frame_{SCENE_FRAME_ID}.pgm")), &s.gray)?;
    save_class_mask(dir.join(format!("frame_{SCENE_FRAME_ID}_mask.pgm")), &s.mask)?;
    save_gray(
        dir.join("references").join(SIGN_DETECTOR_CLASS.to_string()).join("0.pgm"),
        &s.sign_reference,
    )?;
    let mut jsonl = String::new();
    for d in &s.detections {
        jsonl.push_str(&serde_json::to_string(d).expect("detections serialize"));
        jsonl.push('\n');
    }
    fs::write(dir.join("detections.jsonl"), jsonl)?;
    fs::write(dir.join("track.csv"), SCENE_TRACK)?;
    let manifest = dir.join("scene.json");
    let mut text = serde_json::to_string_pretty(&scene_manifest()).expect("manifest serializes");
    text.push('\n');
    fs::write(&manifest, text)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comb_dimensions() {
        assert_eq!(COMB_OPEN.width(), 86);
        assert_eq!(COMB_OPEN.height(), 21);
        assert!(COMB_OPEN.covers(0, 20));
        assert!(!COMB_OPEN.covers(6, 20));
        assert!(COMB_OPEN.covers(85, 20));
    }

    #[test]
    fn vertical_pole_is_four_columns() {
        let (mask, _) = pole_scene(0.0);
        let cols: std::collections::BTreeSet<usize> = (0..120)
            .flat_map(|y| (0..120).map(move |x| (x, y)))
            .filter(|&(x, y)| mask.get(x, y) == POLE_CLASS)
            .map(|(x, _)| x)
            .collect();
        assert_eq!(cols.into_iter().collect::<Vec<_>>(), vec![59, 60, 61, 62]);
    }

    #[test]
    fn scene_regions_do_not_overlap() {
        let s = scene();
        let counts = (1..=4u8)
            .map(|c| s.mask.labels().iter().filter(|&&l| l == c).count())
            .collect::<Vec<_>>();
        assert!(counts.iter().all(|&n| n > 0), "{counts:?}");
    }
}
