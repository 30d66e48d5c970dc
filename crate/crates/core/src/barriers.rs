//! Guardrail safety from mask shape: a barrier whose outline fills too
//! little of its convex hull has open gaps beneath the rail.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::geometry::{contour_area, outer_contours, solidity, PixelBox};
use crate::raster::{extract_class_mask, ClassMask};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BarrierParams {
    pub barrier_classes: Vec<u8>,
    pub right_threshold: f64,
    pub left_threshold: f64,
    /// Contours with a smaller enclosed area are ignored.
    pub min_area: f64,
    /// `true`: safe iff solidity > threshold; `false`: safe iff ≥.
    pub strict: bool,
}

impl Default for BarrierParams {
    fn default() -> Self {
        Self {
            barrier_classes: Vec::new(),
            right_threshold: 0.8,
            left_threshold: 0.6,
            min_area: 400.0,
            strict: true,
        }
    }
}

impl BarrierParams {
    pub fn threshold(&self, side: Side) -> f64 {
        match side {
            Side::Left => self.left_threshold,
            Side::Right => self.right_threshold,
        }
    }

    pub fn is_safe(&self, side: Side, solidity: f64) -> bool {
        let t = self.threshold(side);
        if self.strict {
            solidity > t
        } else {
            solidity >= t
        }
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, t) in [
            ("right_threshold", self.right_threshold),
            ("left_threshold", self.left_threshold),
        ] {
            if !(t > 0.0 && t <= 1.0) {
                out.push(format!("barrier.{name} must lie in (0, 1], got {t}"));
            }
        }
        if self.min_area.is_nan() || self.min_area < 0.0 {
            out.push(format!("barrier.min_area must be non-negative, got {}", self.min_area));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierAssessment {
    pub side: Side,
    pub solidity: f64,
    pub safe: bool,
    pub area: f64,
    pub bbox: PixelBox,
}

/// Assessments in contour scan order, plus the number of contours dropped
/// for a degenerate hull.
pub fn assess_barriers(
    mask: &ClassMask,
    frame_width: usize,
    p: &BarrierParams,
) -> (Vec<BarrierAssessment>, usize) {
    let classes = p.barrier_classes.iter().copied().collect();
    let binary = extract_class_mask(mask, &classes);
    let midline = frame_width as f64 / 2.0;
    let mut out = Vec::new();
    let mut degenerate = 0;
    for contour in outer_contours(&binary) {
        let area = contour_area(&contour);
        if area < p.min_area {
            continue;
        }
        let s = match solidity(&contour) {
            Ok(s) => s,
            Err(Error::DegenerateHull | Error::Degenerate(_)) => {
                degenerate += 1;
                continue;
            }
            Err(e) => unreachable!("solidity only fails on degenerate hulls: {e}"),
        };
        let side = if contour.centroid().0 < midline {
            Side::Left
        } else {
            Side::Right
        };
        out.push(BarrierAssessment {
            side,
            solidity: s,
            safe: p.is_safe(side, s),
            area,
            bbox: PixelBox::of_points(&contour.points),
        });
    }
    (out, degenerate)
}
