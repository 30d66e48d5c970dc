//! Grayscale SLIC superpixels and per-superpixel density of a binary mask.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{ensure_same_dims, BinaryMask, GrayImage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlicParams {
    /// Requested number of superpixels.
    pub k: usize,
    /// Spatial weight `m`.
    pub compactness: f64,
    pub iterations: usize,
    /// Fragments smaller than this are merged into a neighbour; `None`
    /// uses `(S/2)²` with `S` the grid step.
    pub min_region: Option<usize>,
}

impl Default for SlicParams {
    fn default() -> Self {
        Self {
            k: 1,
            compactness: 10.0,
            iterations: 10,
            min_region: None,
        }
    }
}

impl SlicParams {
    pub fn with_k(k: usize) -> Self {
        Self {
            k,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::BadSlicParams("k must be at least 1".into()));
        }
        if !self.compactness.is_finite() || self.compactness <= 0.0 {
            return Err(Error::BadSlicParams(format!(
                "compactness must be positive, got {}",
                self.compactness
            )));
        }
        if self.iterations == 0 {
            return Err(Error::BadSlicParams("iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperpixelLabeling {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    count: usize,
}

impl SuperpixelLabeling {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    /// Pixel count per label.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.count];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }

    /// Unordered pairs `(a, b)`, `a < b`, of labels sharing a 4-neighbour edge.
    pub fn adjacency(&self) -> BTreeSet<(u32, u32)> {
        let mut pairs = BTreeSet::new();
        let w = self.width;
        for y in 0..self.height {
            for x in 0..w {
                let l = self.labels[y * w + x];
                if x + 1 < w {
                    let r = self.labels[y * w + x + 1];
                    if r != l {
                        pairs.insert((l.min(r), l.max(r)));
                    }
                }
                if y + 1 < self.height {
                    let d = self.labels[(y + 1) * w + x];
                    if d != l {
                        pairs.insert((l.min(d), l.max(d)));
                    }
                }
            }
        }
        pairs
    }
}

#[derive(Debug, Clone, Copy)]
struct Center {
    x: f64,
    y: f64,
    intensity: f64,
}

fn seed_gradient(img: &GrayImage, x: usize, y: usize) -> i64 {
    let p = i64::from(img.get(x, y));
    let r = i64::from(img.get_clamped(x as isize + 1, y as isize));
    let d = i64::from(img.get_clamped(x as isize, y as isize + 1));
    (r - p).pow(2) + (d - p).pow(2)
}

fn seed_centers(img: &GrayImage, k: usize, step: f64) -> Vec<Center> {
    let (w, h) = img.dims();
    let nx = ((w as f64 / step).round() as usize).clamp(1, k.min(w));
    let ny = ((h as f64 / step).round() as usize).clamp(1, k.div_ceil(nx).min(h));
    let (sx, sy) = (w as f64 / nx as f64, h as f64 / ny as f64);
    let mut centers = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let gx = (((i as f64 + 0.5) * sx) as usize).min(w - 1);
            let gy = (((j as f64 + 0.5) * sy) as usize).min(h - 1);
            // Move to the lowest-gradient pixel of the 3x3 neighbourhood;
            // the grid position wins ties.
            let mut best = (seed_gradient(img, gx, gy), gx, gy);
            for y in gy.saturating_sub(1)..=(gy + 1).min(h - 1) {
                for x in gx.saturating_sub(1)..=(gx + 1).min(w - 1) {
                    let g = seed_gradient(img, x, y);
                    if g < best.0 {
                        best = (g, x, y);
                    }
                }
            }
            centers.push(Center {
                x: best.1 as f64,
                y: best.2 as f64,
                intensity: f64::from(img.get(best.1, best.2)),
            });
        }
    }
    centers
}

/// SLIC over intensity and position.
///
/// Centres start on a regular grid of step `S = sqrt(N / k)`, nudged to the
/// lowest-gradient pixel nearby. Each iteration assigns pixels inside a
/// `2S × 2S` window around each centre by
/// `D² = d_c² + (d_s / S)² · m²` and moves centres to their cluster means.
/// Afterwards every label is split into 4-connected pieces and pieces
/// smaller than `min_region` are absorbed by their largest neighbour.
pub fn slic(img: &GrayImage, params: &SlicParams) -> Result<SuperpixelLabeling> {
    params.validate()?;
    let (w, h) = img.dims();
    let n = w * h;
    if params.k > n {
        return Err(Error::KTooLarge {
            k: params.k,
            pixels: n,
        });
    }
    let step = (n as f64 / params.k as f64).sqrt();
    let mut centers = seed_centers(img, params.k, step);
    let nx = ((w as f64 / step).round() as usize).clamp(1, params.k.min(w));
    let ny = centers.len() / nx;
    let win = step.max(w as f64 / nx as f64).max(h as f64 / ny as f64).ceil() as isize;
    let spatial = (params.compactness / step).powi(2);

    let mut labels = vec![u32::MAX; n];
    let mut dist = vec![f64::INFINITY; n];
    for _ in 0..params.iterations {
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        labels.iter_mut().for_each(|l| *l = u32::MAX);
        for (ci, c) in centers.iter().enumerate() {
            let (cx, cy) = (c.x.round() as isize, c.y.round() as isize);
            let y0 = (cy - win).max(0) as usize;
            let y1 = ((cy + win) as usize).min(h - 1);
            let x0 = (cx - win).max(0) as usize;
            let x1 = ((cx + win) as usize).min(w - 1);
            for y in y0..=y1 {
                let dy = y as f64 - c.y;
                for x in x0..=x1 {
                    let dx = x as f64 - c.x;
                    let dc = f64::from(img.get(x, y)) - c.intensity;
                    let d = dc * dc + (dx * dx + dy * dy) * spatial;
                    let idx = y * w + x;
                    if d < dist[idx] {
                        dist[idx] = d;
                        labels[idx] = ci as u32;
                    }
                }
            }
        }
        // Pixels no window reached fall back to a global search.
        for (idx, label) in labels.iter_mut().enumerate() {
            if *label != u32::MAX {
                continue;
            }
            let (x, y) = ((idx % w) as f64, (idx / w) as f64);
            let v = f64::from(img.data()[idx]);
            let best = centers
                .iter()
                .enumerate()
                .map(|(ci, c)| {
                    let dc = v - c.intensity;
                    let ds = (x - c.x).powi(2) + (y - c.y).powi(2);
                    (dc * dc + ds * spatial, ci)
                })
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .map(|(_, ci)| ci)
                .unwrap_or(0);
            *label = best as u32;
        }

        let mut sums = vec![(0.0f64, 0.0f64, 0.0f64, 0usize); centers.len()];
        for (idx, &l) in labels.iter().enumerate() {
            let s = &mut sums[l as usize];
            s.0 += (idx % w) as f64;
            s.1 += (idx / w) as f64;
            s.2 += f64::from(img.data()[idx]);
            s.3 += 1;
        }
        for (c, s) in centers.iter_mut().zip(&sums) {
            if s.3 > 0 {
                let cnt = s.3 as f64;
                *c = Center {
                    x: s.0 / cnt,
                    y: s.1 / cnt,
                    intensity: s.2 / cnt,
                };
            }
        }
    }

    let min_region = params
        .min_region
        .unwrap_or_else(|| ((step / 2.0).powi(2)).round() as usize);
    Ok(enforce_connectivity(w, h, &labels, min_region))
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Split labels into 4-connected pieces, merge pieces below `min_region`
/// into their largest adjacent piece, and renumber densely in raster order.
fn enforce_connectivity(w: usize, h: usize, raw: &[u32], min_region: usize) -> SuperpixelLabeling {
    let n = w * h;
    let mut comp = vec![usize::MAX; n];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let label = raw[start];
        let mut size = 0;
        comp[start] = id;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            size += 1;
            let (x, y) = (idx % w, idx / w);
            let mut visit = |j: usize| {
                if comp[j] == usize::MAX && raw[j] == label {
                    comp[j] = id;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(idx - 1);
            }
            if x + 1 < w {
                visit(idx + 1);
            }
            if y > 0 {
                visit(idx - w);
            }
            if y + 1 < h {
                visit(idx + w);
            }
        }
        sizes.push(size);
    }

    let ncomp = sizes.len();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); ncomp];
    for y in 0..h {
        for x in 0..w {
            let a = comp[y * w + x];
            if x + 1 < w {
                let b = comp[y * w + x + 1];
                if a != b {
                    adj[a].insert(b);
                    adj[b].insert(a);
                }
            }
            if y + 1 < h {
                let b = comp[(y + 1) * w + x];
                if a != b {
                    adj[a].insert(b);
                    adj[b].insert(a);
                }
            }
        }
    }

    let mut parent: Vec<usize> = (0..ncomp).collect();
    let mut order: Vec<usize> = (0..ncomp).filter(|&c| sizes[c] < min_region).collect();
    order.sort_by_key(|&c| (sizes[c], c));
    for c in order {
        let r = find(&mut parent, c);
        if sizes[r] >= min_region {
            continue;
        }
        let neighbours: BTreeSet<usize> = adj[r]
            .clone()
            .into_iter()
            .map(|b| find(&mut parent, b))
            .filter(|&b| b != r)
            .collect();
        let Some(target) = neighbours
            .iter()
            .copied()
            .max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a)))
        else {
            continue;
        };
        parent[r] = target;
        sizes[target] += sizes[r];
        let moved = std::mem::take(&mut adj[r]);
        adj[target].extend(moved);
    }

    let mut dense = vec![u32::MAX; ncomp];
    let mut next = 0u32;
    let mut labels = Vec::with_capacity(n);
    for &c in &comp {
        let r = find(&mut parent, c);
        if dense[r] == u32::MAX {
            dense[r] = next;
            next += 1;
        }
        labels.push(dense[r]);
    }
    SuperpixelLabeling {
        width: w,
        height: h,
        labels,
        count: next as usize,
    }
}

/// Fraction of each superpixel's pixels that are set in `hot`.
pub fn superpixel_density(lab: &SuperpixelLabeling, hot: &BinaryMask) -> Result<Vec<f64>> {
    ensure_same_dims(lab.dims(), hot.dims())?;
    let mut hits = vec![0usize; lab.count];
    let mut totals = vec![0usize; lab.count];
    for (&l, &b) in lab.labels.iter().zip(hot.bits()) {
        totals[l as usize] += 1;
        hits[l as usize] += usize::from(b);
    }
    Ok(hits
        .iter()
        .zip(&totals)
        .map(|(&h, &t)| if t == 0 { 0.0 } else { h as f64 / t as f64 })
        .collect())
}
