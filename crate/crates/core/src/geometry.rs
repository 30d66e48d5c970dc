//! Discrete geometry on pixel grids: border following, convex hulls,
//! polygon areas, minimum-area rotated rectangles and contour solidity.
//!
//! Image coordinates have `y` growing downward. "Counter-clockwise" means a
//! positive signed shoelace area under the flipped frame `(x, -y)`, which
//! is how the ordering looks on screen.

use crate::error::{Error, Result};
use crate::raster::BinaryMask;

/// Width given to the thin side of a rectangle fitted to collinear points.
pub const DEGENERATE_EXTENT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    pub x: i64,
    pub y: i64,
}

impl Point {
    pub const fn new(x: i64, y: i64) -> Self {
        Point { x, y }
    }
}

/// Closed, 8-connected chain of border pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contour {
    pub points: Vec<Point>,
    /// `true` for a hole border, `false` for an outer border.
    pub hole: bool,
}

impl Contour {
    pub fn centroid(&self) -> (f64, f64) {
        let n = self.points.len().max(1) as f64;
        let (sx, sy) = self
            .points
            .iter()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x as f64, sy + p.y as f64));
        (sx / n, sy / n)
    }

    /// Inclusive `(x0, y0, x1, y1)` of the chain.
    pub fn bbox(&self) -> (i64, i64, i64, i64) {
        bbox_of(&self.points)
    }
}

pub(crate) fn bbox_of(points: &[Point]) -> (i64, i64, i64, i64) {
    points.iter().fold(
        (i64::MAX, i64::MAX, i64::MIN, i64::MIN),
        |(x0, y0, x1, y1), p| (x0.min(p.x), y0.min(p.y), x1.max(p.x), y1.max(p.y)),
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polygon {
    pub vertices: Vec<Point>,
}

/// Inclusive integer pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct PixelBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl PixelBox {
    pub const fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        PixelBox { x0, y0, x1, y1 }
    }

    /// A box containing nothing; grows with [`PixelBox::include`].
    pub const fn empty() -> Self {
        PixelBox {
            x0: usize::MAX,
            y0: usize::MAX,
            x1: 0,
            y1: 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.x0 > self.x1 || self.y0 > self.y1
    }

    pub fn include(&mut self, x: usize, y: usize) {
        self.x0 = self.x0.min(x);
        self.y0 = self.y0.min(y);
        self.x1 = self.x1.max(x);
        self.y1 = self.y1.max(y);
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.x0..=self.x1).contains(&x) && (self.y0..=self.y1).contains(&y)
    }

    pub fn contains_box(&self, other: &PixelBox) -> bool {
        self.contains(other.x0, other.y0) && self.contains(other.x1, other.y1)
    }

    pub fn width(&self) -> usize {
        self.x1 + 1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 + 1 - self.y0
    }

    pub fn of_points(points: &[Point]) -> PixelBox {
        let (x0, y0, x1, y1) = bbox_of(points);
        PixelBox::new(x0 as usize, y0 as usize, x1 as usize, y1 as usize)
    }
}

/// Oriented rectangle; `size.0 >= size.1` and `angle` is the direction of
/// the long side, in degrees within `[-90, 90)`, measured from the image
/// x-axis toward +y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotatedRect {
    pub center: (f64, f64),
    pub size: (f64, f64),
    pub angle: f64,
}

impl RotatedRect {
    pub fn area(&self) -> f64 {
        self.size.0 * self.size.1
    }

    /// Corners in order around the rectangle.
    pub fn corners(&self) -> [(f64, f64); 4] {
        let (s, c) = self.angle.to_radians().sin_cos();
        let (hw, hh) = (self.size.0 / 2.0, self.size.1 / 2.0);
        let u = (c * hw, s * hw);
        let v = (-s * hh, c * hh);
        let (cx, cy) = self.center;
        [
            (cx - u.0 - v.0, cy - u.1 - v.1),
            (cx + u.0 - v.0, cy + u.1 - v.1),
            (cx + u.0 + v.0, cy + u.1 + v.1),
            (cx - u.0 + v.0, cy - u.1 + v.1),
        ]
    }

    /// Midpoints of the four sides, in the same cyclic order as `corners`.
    pub fn edge_midpoints(&self) -> [(f64, f64); 4] {
        let c = self.corners();
        std::array::from_fn(|i| {
            let (a, b) = (c[i], c[(i + 1) % 4]);
            ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0)
        })
    }
}

// ---------------------------------------------------------------------------
// border following
// ---------------------------------------------------------------------------

/// Neighbour offsets `(drow, dcol)` in clockwise screen order, starting east.
const RING: [(isize, isize); 8] = [
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
];

fn ring_index(dr: isize, dc: isize) -> usize {
    RING.iter()
        .position(|&d| d == (dr, dc))
        .expect("offset is an 8-neighbour")
}

/// Suzuki–Abe border following with 8-connected foreground.
///
/// Returns every outer border and every hole border (flagged with
/// `hole = true`) in raster-scan order of their starting pixels. The
/// topological hierarchy is not reconstructed.
pub fn trace_contours(mask: &BinaryMask) -> Vec<Contour> {
    let (w, h) = mask.dims();
    // One pixel of zero padding so every border is interior to the buffer.
    let pw = w + 2;
    let ph = h + 2;
    let mut f = vec![0i32; pw * ph];
    for y in 0..h {
        for x in 0..w {
            if mask.is_set(x, y) {
                f[(y + 1) * pw + x + 1] = 1;
            }
        }
    }
    let at = |r: isize, c: isize| (r as usize) * pw + c as usize;

    let mut contours = Vec::new();
    let mut nbd: i32 = 1;
    for i in 1..(ph - 1) as isize {
        for j in 1..(pw - 1) as isize {
            let fij = f[at(i, j)];
            if fij == 0 {
                continue;
            }
            let (start_from, hole) = if fij == 1 && f[at(i, j - 1)] == 0 {
                ((i, j - 1), false)
            } else if fij >= 1 && f[at(i, j + 1)] == 0 {
                ((i, j + 1), true)
            } else {
                continue;
            };
            nbd += 1;

            // Clockwise from start_from, find the first non-zero neighbour.
            let d0 = ring_index(start_from.0 - i, start_from.1 - j);
            let first = (0..8)
                .map(|k| (d0 + k) % 8)
                .map(|d| (i + RING[d].0, j + RING[d].1))
                .find(|&(r, c)| f[at(r, c)] != 0);
            let Some(p1) = first else {
                f[at(i, j)] = -nbd;
                contours.push(Contour {
                    points: vec![Point::new(j as i64 - 1, i as i64 - 1)],
                    hole,
                });
                continue;
            };

            let mut points = Vec::new();
            let mut p2 = p1;
            let mut p3 = (i, j);
            loop {
                points.push(Point::new(p3.1 as i64 - 1, p3.0 as i64 - 1));
                // Counter-clockwise around p3, starting just after p2.
                let d2 = ring_index(p2.0 - p3.0, p2.1 - p3.1);
                let mut east_zero = false;
                let mut p4 = p2;
                for k in 1..=8 {
                    let d = (d2 + 8 - k) % 8;
                    let q = (p3.0 + RING[d].0, p3.1 + RING[d].1);
                    if f[at(q.0, q.1)] != 0 {
                        p4 = q;
                        break;
                    }
                    if d == 0 {
                        east_zero = true;
                    }
                }
                // Mark the pixel; negative when its east side is background.
                let idx = at(p3.0, p3.1);
                if east_zero {
                    f[idx] = -nbd;
                } else if f[idx] == 1 {
                    f[idx] = nbd;
                }
                // Back at the start pixel via the first neighbour: closed.
                if p4 == (i, j) && p3 == p1 {
                    break;
                }
                p2 = p3;
                p3 = p4;
            }
            contours.push(Contour { points, hole });
        }
    }
    contours
}

/// Outer borders only.
pub fn outer_contours(mask: &BinaryMask) -> Vec<Contour> {
    trace_contours(mask).into_iter().filter(|c| !c.hole).collect()
}

/// 8-connected foreground components, each as its pixel list in raster order.
pub fn connected_components(mask: &BinaryMask) -> Vec<Vec<Point>> {
    let (w, h) = mask.dims();
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.is_set(x, y) || seen[y * w + x] {
                continue;
            }
            let mut comp = Vec::new();
            seen[y * w + x] = true;
            stack.push((x, y));
            while let Some((cx, cy)) = stack.pop() {
                comp.push(Point::new(cx as i64, cy as i64));
                for &(dr, dc) in &RING {
                    let nx = cx as isize + dc;
                    let ny = cy as isize + dr;
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let (nx, ny) = (nx as usize, ny as usize);
                    if mask.is_set(nx, ny) && !seen[ny * w + nx] {
                        seen[ny * w + nx] = true;
                        stack.push((nx, ny));
                    }
                }
            }
            comp.sort_by_key(|p| (p.y, p.x));
            out.push(comp);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// hulls and areas
// ---------------------------------------------------------------------------

#[inline]
fn cross(o: Point, a: Point, b: Point) -> i128 {
    let (ax, ay) = (i128::from(a.x - o.x), i128::from(a.y - o.y));
    let (bx, by) = (i128::from(b.x - o.x), i128::from(b.y - o.y));
    ax * by - ay * bx
}

/// Convex hull of a point set, counter-clockwise on screen, starting from
/// the lexicographically smallest `(x, y)` vertex. Collinear boundary
/// points and duplicates are dropped.
///
/// Sort-and-scan (monotone chain); output-equivalent to a scan over the
/// boundary polygon.
pub fn convex_hull(points: &[Point]) -> Result<Polygon> {
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut pts = points.to_vec();
    pts.sort();
    pts.dedup();
    if pts.len() < 3 {
        return Ok(Polygon { vertices: pts });
    }
    // Chain with positive raw cross products; reversed below.
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    // Raw-positive orientation is clockwise on screen; flip it.
    hull.reverse();
    let start = hull
        .iter()
        .enumerate()
        .min_by_key(|(_, p)| **p)
        .map(|(i, _)| i)
        .unwrap_or(0);
    hull.rotate_left(start);
    Ok(Polygon { vertices: hull })
}

/// Twice the signed shoelace area in raw image coordinates.
fn raw_double_area(vertices: &[Point]) -> i128 {
    let n = vertices.len();
    (0..n)
        .map(|i| {
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            i128::from(a.x) * i128::from(b.y) - i128::from(b.x) * i128::from(a.y)
        })
        .sum()
}

/// Signed area under the on-screen convention: positive for
/// counter-clockwise vertex order.
pub fn signed_area(vertices: &[Point]) -> f64 {
    -(raw_double_area(vertices) as f64) / 2.0
}

pub fn polygon_area(poly: &Polygon) -> Result<f64> {
    if poly.vertices.len() < 3 {
        return Err(Error::Degenerate(poly.vertices.len()));
    }
    Ok(signed_area(&poly.vertices).abs())
}

/// Shoelace area of the border chain taken as a polygon through pixel
/// centres. Chains shorter than three points enclose nothing.
pub fn contour_area(c: &Contour) -> f64 {
    if c.points.len() < 3 {
        return 0.0;
    }
    signed_area(&c.points).abs()
}

/// Contour area over convex hull area, clamped to `[0, 1]`.
pub fn solidity(c: &Contour) -> Result<f64> {
    let hull = convex_hull(&c.points)?;
    if hull.vertices.len() < 3 {
        return Err(Error::DegenerateHull);
    }
    let hull_area = polygon_area(&hull)?;
    if hull_area <= 0.0 {
        return Err(Error::DegenerateHull);
    }
    Ok((contour_area(c) / hull_area).clamp(0.0, 1.0))
}

// ---------------------------------------------------------------------------
// rotating calipers
// ---------------------------------------------------------------------------

fn fold_half_turn(deg: f64) -> f64 {
    let mut a = deg % 180.0;
    if a >= 90.0 {
        a -= 180.0;
    } else if a < -90.0 {
        a += 180.0;
    }
    if a >= 90.0 {
        a -= 180.0;
    }
    a
}

/// Minimum-area enclosing rectangle of a point set.
///
/// Every hull edge is tried as a rectangle side; equal areas resolve to
/// the smallest angle. Collinear input gives a rectangle of thickness
/// [`DEGENERATE_EXTENT`] along the segment.
pub fn min_area_rect(points: &[Point]) -> Result<RotatedRect> {
    let hull = convex_hull(points)?.vertices;
    match hull.len() {
        1 => {
            return Ok(RotatedRect {
                center: (hull[0].x as f64, hull[0].y as f64),
                size: (DEGENERATE_EXTENT, DEGENERATE_EXTENT),
                angle: 0.0,
            })
        }
        2 => {
            let (a, b) = (hull[0], hull[1]);
            let (dx, dy) = ((b.x - a.x) as f64, (b.y - a.y) as f64);
            return Ok(RotatedRect {
                center: ((a.x + b.x) as f64 / 2.0, (a.y + b.y) as f64 / 2.0),
                size: (dx.hypot(dy), DEGENERATE_EXTENT),
                angle: fold_half_turn(dy.atan2(dx).to_degrees()),
            });
        }
        _ => {}
    }

    let pts: Vec<(f64, f64)> = hull.iter().map(|p| (p.x as f64, p.y as f64)).collect();
    let n = pts.len();
    let mut best: Option<RotatedRect> = None;
    for i in 0..n {
        let (p, q) = (pts[i], pts[(i + 1) % n]);
        let len = (q.0 - p.0).hypot(q.1 - p.1);
        let u = ((q.0 - p.0) / len, (q.1 - p.1) / len);
        let v = (-u.1, u.0);
        let (mut amin, mut amax, mut bmin, mut bmax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for &(x, y) in &pts {
            let a = x * u.0 + y * u.1;
            let b = x * v.0 + y * v.1;
            amin = amin.min(a);
            amax = amax.max(a);
            bmin = bmin.min(b);
            bmax = bmax.max(b);
        }
        let (du, dv) = (amax - amin, bmax - bmin);
        let (ac, bc) = ((amin + amax) / 2.0, (bmin + bmax) / 2.0);
        let center = (ac * u.0 + bc * v.0, ac * u.1 + bc * v.1);
        let (size, axis) = if du >= dv { ((du, dv), u) } else { ((dv, du), v) };
        let cand = RotatedRect {
            center,
            size,
            angle: fold_half_turn(axis.1.atan2(axis.0).to_degrees()),
        };
        best = Some(match best {
            None => cand,
            Some(b) => {
                let tol = 1e-9 * b.area().max(1.0);
                if cand.area() < b.area() - tol
                    || ((cand.area() - b.area()).abs() <= tol && cand.angle < b.angle)
                {
                    cand
                } else {
                    b
                }
            }
        });
    }
    Ok(best.expect("hull has at least three vertices"))
}
