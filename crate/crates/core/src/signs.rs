//! Traffic-sign condition: appearance similarity against reference crops
//! and pole lean from the pole's minimum rotated rectangle.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{connected_components, min_area_rect, PixelBox, Point};
use crate::raster::{extract_class_mask, load_image, ClassMask, ClassSet, GrayImage};

pub const CROP_SIZE: usize = 64;
const CROP_PIXELS: usize = CROP_SIZE * CROP_SIZE;
const MIN_STD: f64 = 1e-6;

pub const DEFAULT_SIM_THRESHOLD: f64 = 0.6;
pub const DEFAULT_SKEW_THRESHOLD: f64 = 10.0;

/// One upstream detector box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionBox {
    pub frame_id: u64,
    pub class_id: u32,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub score: f64,
}

impl DetectionBox {
    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    /// Centre in pixel-centre coordinates.
    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0 - 0.5, self.y + self.h / 2.0 - 0.5)
    }

    pub fn iou(&self, other: &DetectionBox) -> f64 {
        let ix = (self.x + self.w).min(other.x + other.w) - self.x.max(other.x);
        let iy = (self.y + self.h).min(other.y + other.h) - self.y.max(other.y);
        if ix <= 0.0 || iy <= 0.0 {
            return 0.0;
        }
        let inter = ix * iy;
        inter / (self.area() + other.area() - inter)
    }

    /// Pixel rectangle covered by the box after clamping to the frame.
    pub fn clamped(&self, width: usize, height: usize) -> Option<PixelBox> {
        let x0 = self.x.floor().max(0.0);
        let y0 = self.y.floor().max(0.0);
        let x1 = (self.x + self.w).ceil().min(width as f64);
        let y1 = (self.y + self.h).ceil().min(height as f64);
        if !(self.w > 0.0 && self.h > 0.0) || x1 <= x0 || y1 <= y0 {
            return None;
        }
        Some(PixelBox::new(
            x0 as usize,
            y0 as usize,
            x1 as usize - 1,
            y1 as usize - 1,
        ))
    }
}

/// Parse JSON-lines detections; blank lines are skipped.
pub fn parse_detections(text: &str) -> Result<Vec<DetectionBox>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let d: DetectionBox = serde_json::from_str(line).map_err(|e| Error::MalformedDetection {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if !(d.w > 0.0 && d.h > 0.0) {
            return Err(Error::MalformedDetection {
                line: i + 1,
                reason: format!("box size {}x{} is not positive", d.w, d.h),
            });
        }
        out.push(d);
    }
    Ok(out)
}

pub fn load_detections(path: impl AsRef<Path>) -> Result<Vec<DetectionBox>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileMissing(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    parse_detections(&text)
}

/// 64×64 crop with zero mean and unit variance.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedCrop {
    values: Vec<f64>,
}

impl NormalizedCrop {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * CROP_SIZE + x]
    }
}

/// Bilinear resample to `out_w × out_h`, mapping pixel centres.
pub fn resample_bilinear(img: &GrayImage, out_w: usize, out_h: usize) -> Vec<f64> {
    let (w, h) = img.dims();
    let sx = w as f64 / out_w as f64;
    let sy = h as f64 / out_h as f64;
    let axis = |d: usize, scale: f64, n: usize| {
        let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n - 1);
        let j = (i + 1).min(n - 1);
        (i, j, s - i as f64)
    };
    let mut out = Vec::with_capacity(out_w * out_h);
    for oy in 0..out_h {
        let (y0, y1, fy) = axis(oy, sy, h);
        for ox in 0..out_w {
            let (x0, x1, fx) = axis(ox, sx, w);
            let p = |x, y| img.get(x, y) as f64;
            let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
            let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

pub fn normalize_crop(img: &GrayImage) -> Result<NormalizedCrop> {
    if img.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let mut values = resample_bilinear(img, CROP_SIZE, CROP_SIZE);
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < MIN_STD {
        return Err(Error::ZeroVariance);
    }
    for v in &mut values {
        *v = (*v - mean) / std;
    }
    Ok(NormalizedCrop { values })
}

/// Normalized cross-correlation of two normalized crops.
pub fn sign_similarity(a: &NormalizedCrop, b: &NormalizedCrop) -> f64 {
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    (dot / CROP_PIXELS as f64).clamp(-1.0, 1.0)
}

/// Normalized reference crops per detector class.
#[derive(Debug, Clone, Default)]
pub struct ReferenceLibrary {
    classes: BTreeMap<u32, Vec<NormalizedCrop>>,
}

impl ReferenceLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, class_id: u32, crop: NormalizedCrop) {
        self.classes.entry(class_id).or_default().push(crop);
    }

    pub fn add_image(&mut self, class_id: u32, img: &GrayImage) -> Result<()> {
        self.insert(class_id, normalize_crop(img)?);
        Ok(())
    }

    pub fn references(&self, class_id: u32) -> Option<&[NormalizedCrop]> {
        self.classes.get(&class_id).map(Vec::as_slice)
    }

    pub fn class_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.classes.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.classes.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Best similarity over the class references.
    pub fn similarity(&self, class_id: u32, crop: &NormalizedCrop) -> Result<f64> {
        let refs = self
            .references(class_id)
            .ok_or(Error::UnknownClass(class_id))?;
        Ok(refs
            .iter()
            .map(|r| sign_similarity(crop, r))
            .fold(f64::NEG_INFINITY, f64::max))
    }

    /// Load `<dir>/<class_id>/<n>.pgm`. Non-numeric subdirectories and
    /// non-`.pgm` files are ignored; files load in name order.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        if !dir.is_dir() {
            return Err(Error::FileMissing(dir.to_path_buf()));
        }
        let mut lib = Self::new();
        let mut class_dirs: Vec<(u32, std::path::PathBuf)> = fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .filter_map(|e| {
                let id = e.file_name().to_str()?.parse::<u32>().ok()?;
                Some((id, e.path()))
            })
            .collect();
        class_dirs.sort();
        for (id, path) in class_dirs {
            let mut files: Vec<_> = fs::read_dir(&path)?
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|x| x == "pgm"))
                .collect();
            files.sort();
            for f in files {
                lib.add_image(id, &load_image(&f)?.into_gray())?;
            }
        }
        Ok(lib)
    }
}

fn centroid(points: &[Point]) -> (f64, f64) {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), p| (a + p.x as f64, b + p.y as f64));
    (sx / n, sy / n)
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

/// Lean of the pole nearest `sign_centroid`, in degrees from the image
/// vertical, within `[0, 90)`.
///
/// The pole is the 8-connected component whose bounding-box centre is
/// nearest the sign; equal distances go to the larger component.
pub fn pole_skew(mask: &ClassMask, pole_class: u8, sign_centroid: (f64, f64)) -> Result<f64> {
    let classes: ClassSet = [pole_class].into_iter().collect();
    let components = connected_components(&extract_class_mask(mask, &classes));
    let pole = components
        .iter()
        .map(|c| {
            let b = PixelBox::of_points(c);
            let center = ((b.x0 + b.x1) as f64 / 2.0, (b.y0 + b.y1) as f64 / 2.0);
            (dist2(center, sign_centroid), c)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(b.1.len().cmp(&a.1.len())))
        .map(|(_, c)| c)
        .ok_or(Error::NoPole)?;

    let rect = min_area_rect(pole)?;
    let mids = rect.edge_midpoints();
    let by_dist = |m: &&(f64, f64)| dist2(**m, sign_centroid);
    let near = mids
        .iter()
        .min_by(|a, b| by_dist(a).total_cmp(&by_dist(b)))
        .expect("four midpoints");
    let far = mids
        .iter()
        .max_by(|a, b| by_dist(a).total_cmp(&by_dist(b)))
        .expect("four midpoints");
    let (dx, dy) = (far.0 - near.0, far.1 - near.1);
    if dx == 0.0 && dy == 0.0 {
        // single-pixel pole: fall back to the pole-to-sign direction
        let c = centroid(pole);
        return Ok(vertical_angle(sign_centroid.0 - c.0, sign_centroid.1 - c.1));
    }
    Ok(vertical_angle(dx, dy))
}

fn vertical_angle(dx: f64, dy: f64) -> f64 {
    dx.abs().atan2(dy.abs()).to_degrees() % 90.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignStatus {
    Ok,
    Damaged,
    Skewed,
    DamagedAndSkewed,
}

impl SignStatus {
    pub fn from_flags(damaged: bool, skewed: bool) -> Self {
        match (damaged, skewed) {
            (false, false) => SignStatus::Ok,
            (true, false) => SignStatus::Damaged,
            (false, true) => SignStatus::Skewed,
            (true, true) => SignStatus::DamagedAndSkewed,
        }
    }

    pub fn is_damaged(self) -> bool {
        matches!(self, SignStatus::Damaged | SignStatus::DamagedAndSkewed)
    }

    pub fn is_skewed(self) -> bool {
        matches!(self, SignStatus::Skewed | SignStatus::DamagedAndSkewed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignCondition {
    pub status: SignStatus,
    /// Absent when the class has no references or the crop is flat.
    pub similarity: Option<f64>,
    /// Absent when no pole was found.
    pub skew_deg: Option<f64>,
    /// Why a test was skipped.
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SignParams {
    pub sim_threshold: f64,
    pub skew_threshold: f64,
}

impl Default for SignParams {
    fn default() -> Self {
        Self {
            sim_threshold: DEFAULT_SIM_THRESHOLD,
            skew_threshold: DEFAULT_SKEW_THRESHOLD,
        }
    }
}

impl SignParams {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(-1.0..=1.0).contains(&self.sim_threshold) {
            out.push(format!(
                "signs.sim_threshold must lie in [-1, 1], got {}",
                self.sim_threshold
            ));
        }
        if !(0.0..90.0).contains(&self.skew_threshold) {
            out.push(format!(
                "signs.skew_threshold must lie in [0, 90), got {}",
                self.skew_threshold
            ));
        }
        out
    }
}

/// Run both sign tests. A class missing from the library or a flat crop
/// skips the similarity test; a missing pole skips the skew test. Each skip
/// leaves a note. A box entirely outside the frame is `EmptyRegion`.
pub fn classify_sign(
    det: &DetectionBox,
    frame: &GrayImage,
    mask: &ClassMask,
    pole_class: u8,
    lib: &ReferenceLibrary,
    p: &SignParams,
) -> Result<SignCondition> {
    let area = det
        .clamped(frame.width(), frame.height())
        .ok_or(Error::EmptyRegion)?;
    let crop = frame
        .crop(
            area.x0 as i64,
            area.y0 as i64,
            area.width() as i64,
            area.height() as i64,
        )
        .ok_or(Error::EmptyRegion)?;
    let mut notes = Vec::new();

    let similarity = match normalize_crop(&crop).and_then(|c| lib.similarity(det.class_id, &c)) {
        Ok(s) => Some(s),
        Err(e @ (Error::UnknownClass(_) | Error::ZeroVariance)) => {
            notes.push(format!("similarity skipped: {e}"));
            None
        }
        Err(e) => return Err(e),
    };
    let skew_deg = match pole_skew(mask, pole_class, det.center()) {
        Ok(t) => Some(t),
        Err(Error::NoPole) => {
            notes.push("skew skipped: no pole pixels".to_owned());
            None
        }
        Err(e) => return Err(e),
    };
    let damaged = similarity.is_some_and(|s| s < p.sim_threshold);
    let skewed = skew_deg.is_some_and(|t| t >= p.skew_threshold);
    Ok(SignCondition {
        status: SignStatus::from_flags(damaged, skewed),
        similarity,
        skew_deg,
        notes,
    })
}
