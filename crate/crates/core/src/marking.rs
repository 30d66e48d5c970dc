//! Road-marking damage: refine the marking segment with an adaptive
//! threshold, score derivative texture inside it, measure the density of
//! strong responses per superpixel and report merged damaged regions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PixelBox;
use crate::raster::{
    adaptive_threshold, ensure_same_dims, extract_class_mask, filter_bank_response, BinaryMask,
    ClassMask, ClassSet, GrayImage,
};
use crate::superpixel::{slic, superpixel_density, SlicParams, SuperpixelLabeling};

/// Padding around the refined region before running SLIC.
pub const ROI_PADDING: usize = 8;

/// Below this share of refined pixels on either side of the Otsu split the
/// response histogram is treated as unimodal.
const OTSU_MIN_MASS: f64 = 0.05;
const FALLBACK_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarkingParams {
    pub marking_classes: Vec<u8>,
    pub threshold_window: usize,
    pub threshold_offset: i32,
    pub density_threshold: f64,
    /// `slic.k == 0` derives the count from `superpixel_area`.
    pub slic: SlicParams,
    /// Target pixels per superpixel when `slic.k` is zero.
    pub superpixel_area: f64,
}

impl Default for MarkingParams {
    fn default() -> Self {
        Self {
            marking_classes: Vec::new(),
            threshold_window: 15,
            threshold_offset: -10,
            density_threshold: 0.3,
            slic: SlicParams {
                k: 0,
                ..SlicParams::default()
            },
            superpixel_area: 400.0,
        }
    }
}

impl MarkingParams {
    /// Range problems, one message each.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.threshold_window == 0 || self.threshold_window.is_multiple_of(2) {
            out.push(format!(
                "marking.threshold_window must be odd and positive, got {}",
                self.threshold_window
            ));
        }
        if !(0.0..=1.0).contains(&self.density_threshold) {
            out.push(format!(
                "marking.density_threshold must lie in [0, 1], got {}",
                self.density_threshold
            ));
        }
        if self.superpixel_area.is_nan() || self.superpixel_area < 1.0 {
            out.push(format!(
                "marking.superpixel_area must be at least 1, got {}",
                self.superpixel_area
            ));
        }
        if self.slic.compactness.is_nan() || self.slic.compactness <= 0.0 {
            out.push(format!(
                "marking.slic.compactness must be positive, got {}",
                self.slic.compactness
            ));
        }
        if self.slic.iterations == 0 {
            out.push("marking.slic.iterations must be at least 1".into());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkingDamageRegion {
    /// Superpixel ids (within the ROI labeling) merged into this region.
    pub superpixels: Vec<u32>,
    /// Pixel count of the merged superpixels.
    pub area: usize,
    pub mean_density: f64,
    pub bbox: PixelBox,
}

pub fn region_extent(r: &MarkingDamageRegion) -> usize {
    r.area
}

/// Intermediate products of one run, kept for debug dumps.
#[derive(Debug, Clone)]
pub struct MarkingTrace {
    pub refined: BinaryMask,
    pub hot: BinaryMask,
    /// Pixels of flagged superpixels, frame-sized.
    pub flagged: BinaryMask,
    pub regions: Vec<MarkingDamageRegion>,
}

pub fn refine_marking_mask(gray: &GrayImage, mask: &ClassMask, p: &MarkingParams) -> Result<BinaryMask> {
    ensure_same_dims(gray.dims(), mask.dims())?;
    let classes: ClassSet = p.marking_classes.iter().collect();
    let selected = extract_class_mask(mask, &classes);
    let bright = adaptive_threshold(gray, p.threshold_window, p.threshold_offset)?;
    selected.and(&bright)
}

pub fn marking_damage(gray: &GrayImage, mask: &ClassMask, p: &MarkingParams) -> Result<Vec<MarkingDamageRegion>> {
    Ok(analyze_marking(gray, mask, p)?.regions)
}

/// Otsu split over `values` scaled into 256 bins of `[0, max]`.
/// Returns the highest bin index of the lower class and the upper class's
/// share of the mass.
fn otsu_split(values: &[f64], max: f64) -> (usize, f64) {
    let bin = |v: f64| ((v / max * 256.0) as usize).min(255);
    let mut hist = [0usize; 256];
    for &v in values {
        hist[bin(v)] += 1;
    }
    let total = values.len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let mut best = (f64::MIN, 0usize, 0.0);
    for (t, &c) in hist.iter().enumerate().take(255) {
        w0 += c as f64;
        sum0 += t as f64 * c as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (m0 - m1).powi(2);
        if between > best.0 {
            best = (between, t, w1 / total);
        }
    }
    (best.1, best.2)
}

/// Texture response at marking-segment pixels whose 3×3 support lies in
/// the segment. Worn paint drops out of the refined mask, so the response
/// is taken over the whole segment interior; the segment's own outline
/// would otherwise dominate.
fn interior_response(gray: &GrayImage, selected: &BinaryMask) -> (Vec<f64>, BinaryMask) {
    let response = filter_bank_response(gray);
    let (w, h) = gray.dims();
    let interior = BinaryMask::from_fn(w, h, |x, y| {
        (-1..=1).all(|dy| (-1..=1).all(|dx| selected.get_clamped(x as isize + dx, y as isize + dy) != 0))
    });
    let out = (0..w * h)
        .map(|i| if interior.bits()[i] != 0 { response.values()[i] } else { 0.0 })
        .collect();
    (out, interior)
}

fn binarize_response(support: &BinaryMask, response: &[f64]) -> BinaryMask {
    let (w, h) = support.dims();
    let values: Vec<f64> = support
        .bits()
        .iter()
        .zip(response)
        .filter(|(&b, _)| b != 0)
        .map(|(_, &v)| v)
        .collect();
    let max = values.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return BinaryMask::zeros(w, h);
    }
    let (split, upper_mass) = otsu_split(&values, max);
    let unimodal = upper_mass.min(1.0 - upper_mass) < OTSU_MIN_MASS;
    BinaryMask::from_fn(w, h, |x, y| {
        let v = response[y * w + x];
        support.is_set(x, y)
            && if unimodal {
                v > FALLBACK_FRACTION * max
            } else {
                ((v / max * 256.0) as usize).min(255) > split
            }
    })
}

/// Superpixels whose hot density exceeds `threshold` and which touch the
/// refined marking.
pub fn flag_superpixels(
    lab: &SuperpixelLabeling,
    densities: &[f64],
    refined_roi: &BinaryMask,
    threshold: f64,
) -> Vec<bool> {
    let mut touches = vec![false; lab.count()];
    for (&l, &b) in lab.labels().iter().zip(refined_roi.bits()) {
        if b != 0 {
            touches[l as usize] = true;
        }
    }
    densities
        .iter()
        .zip(&touches)
        .map(|(&d, &t)| t && d > threshold)
        .collect()
}

fn crop_mask(m: &BinaryMask, x0: usize, y0: usize, w: usize, h: usize) -> BinaryMask {
    BinaryMask::from_fn(w, h, |x, y| m.is_set(x0 + x, y0 + y))
}

pub fn analyze_marking(gray: &GrayImage, mask: &ClassMask, p: &MarkingParams) -> Result<MarkingTrace> {
    ensure_same_dims(gray.dims(), mask.dims())?;
    if !(0.0..=1.0).contains(&p.density_threshold) {
        return Err(Error::BadSlicParams(format!(
            "density threshold {} outside [0, 1]",
            p.density_threshold
        )));
    }
    let (w, h) = gray.dims();
    let classes: ClassSet = p.marking_classes.iter().collect();
    let selected = extract_class_mask(mask, &classes);
    let refined = selected.and(&adaptive_threshold(gray, p.threshold_window, p.threshold_offset)?)?;

    let empty = |refined: BinaryMask, hot: BinaryMask| MarkingTrace {
        refined,
        hot,
        flagged: BinaryMask::zeros(w, h),
        regions: Vec::new(),
    };
    let Some((bx0, by0, bx1, by1)) = refined.bounding_box() else {
        return Ok(empty(refined, BinaryMask::zeros(w, h)));
    };
    let (response, interior) = interior_response(gray, &selected);
    let hot = binarize_response(&interior, &response);
    if hot.count_ones() == 0 {
        return Ok(empty(refined, hot));
    }

    let rx0 = bx0.saturating_sub(ROI_PADDING);
    let ry0 = by0.saturating_sub(ROI_PADDING);
    let rx1 = (bx1 + ROI_PADDING).min(w - 1);
    let ry1 = (by1 + ROI_PADDING).min(h - 1);
    let (rw, rh) = (rx1 - rx0 + 1, ry1 - ry0 + 1);
    let roi = gray
        .crop(rx0 as i64, ry0 as i64, rw as i64, rh as i64)
        .expect("ROI lies inside the frame");
    let mut slic_params = p.slic.clone();
    if slic_params.k == 0 {
        slic_params.k = ((rw * rh) as f64 / p.superpixel_area).round().max(1.0) as usize;
    }
    slic_params.k = slic_params.k.min(rw * rh);
    let lab = slic(&roi, &slic_params)?;

    let hot_roi = crop_mask(&hot, rx0, ry0, rw, rh);
    let refined_roi = crop_mask(&refined, rx0, ry0, rw, rh);
    let densities = superpixel_density(&lab, &hot_roi)?;
    let flags = flag_superpixels(&lab, &densities, &refined_roi, p.density_threshold);

    let regions = merge_flagged(&lab, &flags, &hot_roi, (rx0, ry0));
    let mut flagged = BinaryMask::zeros(w, h);
    for y in 0..rh {
        for x in 0..rw {
            if flags[lab.get(x, y) as usize] {
                flagged.set(rx0 + x, ry0 + y, 1);
            }
        }
    }
    Ok(MarkingTrace {
        refined,
        hot,
        flagged,
        regions,
    })
}

fn merge_flagged(
    lab: &SuperpixelLabeling,
    flags: &[bool],
    hot_roi: &BinaryMask,
    origin: (usize, usize),
) -> Vec<MarkingDamageRegion> {
    let n = lab.count();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for (a, b) in lab.adjacency() {
        let (a, b) = (a as usize, b as usize);
        if flags[a] && flags[b] {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }

    struct Acc {
        ids: Vec<u32>,
        area: usize,
        hot: usize,
        bbox: PixelBox,
    }
    let mut groups: BTreeMap<usize, Acc> = BTreeMap::new();
    for id in (0..n).filter(|&i| flags[i]) {
        let root = find(&mut parent, id);
        groups
            .entry(root)
            .or_insert_with(|| Acc {
                ids: Vec::new(),
                area: 0,
                hot: 0,
                bbox: PixelBox::empty(),
            })
            .ids
            .push(id as u32);
    }
    let root_of: Vec<Option<usize>> = (0..n)
        .map(|i| flags[i].then(|| find(&mut parent, i)))
        .collect();
    let (rw, rh) = lab.dims();
    for y in 0..rh {
        for x in 0..rw {
            if let Some(root) = root_of[lab.get(x, y) as usize] {
                let acc = groups.get_mut(&root).expect("flagged root has a group");
                acc.area += 1;
                acc.hot += usize::from(hot_roi.is_set(x, y));
                acc.bbox.include(origin.0 + x, origin.1 + y);
            }
        }
    }
    let mut regions: Vec<MarkingDamageRegion> = groups
        .into_values()
        .map(|acc| MarkingDamageRegion {
            superpixels: acc.ids,
            area: acc.area,
            mean_density: acc.hot as f64 / acc.area as f64,
            bbox: acc.bbox,
        })
        .collect();
    regions.sort_by_key(|r| (r.bbox.y0, r.bbox.x0));
    regions
}
