//! Image and mask containers, binary netpbm I/O, and the per-pixel kernels
//! (adaptive thresholding, derivative filter bank) feeding the analyzers.
//!
//! All planes are row-major. Out-of-frame reads replicate the nearest edge
//! pixel, both for convolution and for windowed means.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

macro_rules! plane_accessors {
    ($ty:ident, $field:ident, $elem:ty) => {
        impl $ty {
            pub fn width(&self) -> usize {
                self.width
            }

            pub fn height(&self) -> usize {
                self.height
            }

            pub fn dims(&self) -> (usize, usize) {
                (self.width, self.height)
            }

            pub fn len(&self) -> usize {
                self.$field.len()
            }

            pub fn is_empty(&self) -> bool {
                self.$field.is_empty()
            }

            #[inline]
            pub fn get(&self, x: usize, y: usize) -> $elem {
                self.$field[y * self.width + x]
            }

            #[inline]
            pub fn set(&mut self, x: usize, y: usize, v: $elem) {
                self.$field[y * self.width + x] = v;
            }

            /// Read with edge replication for out-of-range coordinates.
            #[inline]
            pub fn get_clamped(&self, x: isize, y: isize) -> $elem {
                let cx = x.clamp(0, self.width as isize - 1) as usize;
                let cy = y.clamp(0, self.height as isize - 1) as usize;
                self.$field[cy * self.width + cx]
            }
        }
    };
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions { width, height });
    }
    if len != width * height {
        return Err(Error::TruncatedData {
            expected: width * height,
            found: len,
        });
    }
    Ok(())
}

pub(crate) fn ensure_same_dims(left: (usize, usize), right: (usize, usize)) -> Result<()> {
    if left != right {
        return Err(Error::DimensionMismatch { left, right });
    }
    Ok(())
}

/// 8-bit grayscale frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

plane_accessors!(GrayImage, data, u8);

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Self {
        let mut img = Self::filled(width, height, 0);
        for y in 0..height {
            for x in 0..width {
                img.data[y * width + x] = f(x, y);
            }
        }
        img
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    /// Copy out the sub-rectangle `[x, x+w) × [y, y+h)`, clipped to the frame.
    /// Returns `None` when the clipped rectangle is empty.
    pub fn crop(&self, x: i64, y: i64, w: i64, h: i64) -> Option<GrayImage> {
        let x0 = x.clamp(0, self.width as i64) as usize;
        let y0 = y.clamp(0, self.height as i64) as usize;
        let x1 = (x + w).clamp(0, self.width as i64) as usize;
        let y1 = (y + h).clamp(0, self.height as i64) as usize;
        if x1 <= x0 || y1 <= y0 {
            return None;
        }
        let cw = x1 - x0;
        let mut data = Vec::with_capacity(cw * (y1 - y0));
        for row in y0..y1 {
            data.extend_from_slice(&self.data[row * self.width + x0..row * self.width + x1]);
        }
        Some(GrayImage {
            width: cw,
            height: y1 - y0,
            data,
        })
    }
}

/// 8-bit RGB frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<[u8; 3]>,
}

plane_accessors!(RgbImage, data, [u8; 3]);

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<[u8; 3]>) -> Result<Self> {
        check_dims(width, height, data.len())?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn data(&self) -> &[[u8; 3]] {
        &self.data
    }
}

/// A decoded netpbm file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Image {
    Gray(GrayImage),
    Rgb(RgbImage),
}

impl Image {
    pub fn into_gray(self) -> GrayImage {
        match self {
            Image::Gray(g) => g,
            Image::Rgb(rgb) => to_gray(&rgb),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        match self {
            Image::Gray(g) => g.dims(),
            Image::Rgb(c) => c.dims(),
        }
    }
}

/// Per-pixel semantic class ids from an upstream segmentation model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMask {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

plane_accessors!(ClassMask, labels, u8);

impl ClassMask {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        check_dims(width, height, labels.len())?;
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn filled(width: usize, height: usize, label: u8) -> Self {
        assert!(width > 0 && height > 0, "mask dimensions must be positive");
        Self {
            width,
            height,
            labels: vec![label; width * height],
        }
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn flip_horizontal(&self) -> ClassMask {
        let mut out = self.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                out.set(self.width - 1 - x, y, self.get(x, y));
            }
        }
        out
    }
}

impl From<GrayImage> for ClassMask {
    fn from(img: GrayImage) -> Self {
        ClassMask {
            width: img.width,
            height: img.height,
            labels: img.data,
        }
    }
}

/// Binary mask with values strictly in {0, 1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<u8>,
}

plane_accessors!(BinaryMask, bits, u8);

impl BinaryMask {
    pub fn zeros(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "mask dimensions must be positive");
        Self {
            width,
            height,
            bits: vec![0; width * height],
        }
    }

    /// Build from arbitrary bytes; any non-zero value becomes 1.
    pub fn from_values(width: usize, height: usize, values: Vec<u8>) -> Result<Self> {
        check_dims(width, height, values.len())?;
        Ok(Self {
            width,
            height,
            bits: values.into_iter().map(|v| u8::from(v != 0)).collect(),
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut m = Self::zeros(width, height);
        for y in 0..height {
            for x in 0..width {
                m.bits[y * width + x] = u8::from(f(x, y));
            }
        }
        m
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn is_set(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x] != 0
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b != 0).count()
    }

    pub fn and(&self, other: &BinaryMask) -> Result<BinaryMask> {
        ensure_same_dims(self.dims(), other.dims())?;
        Ok(BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| a & b).collect(),
        })
    }

    pub fn or(&self, other: &BinaryMask) -> Result<BinaryMask> {
        ensure_same_dims(self.dims(), other.dims())?;
        Ok(BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| a | b).collect(),
        })
    }

    /// Inclusive bounding box `(x0, y0, x1, y1)` of set bits.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bbox: Option<(usize, usize, usize, usize)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.is_set(x, y) {
                    bbox = Some(match bbox {
                        None => (x, y, x, y),
                        Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
                    });
                }
            }
        }
        bbox
    }

    /// Render as a viewable 0/255 grayscale image.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.bits.iter().map(|&b| if b != 0 { 255 } else { 0 }).collect(),
        }
    }
}

/// Non-negative per-pixel filter response.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

plane_accessors!(ResponseMap, values, f64);

impl ResponseMap {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// A small dense correlation kernel with odd dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    width: usize,
    height: usize,
    weights: Vec<f64>,
}

impl Kernel {
    pub fn new(width: usize, height: usize, weights: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || width.is_multiple_of(2) || height.is_multiple_of(2) {
            return Err(Error::BadKernel { width, height });
        }
        if weights.len() != width * height {
            return Err(Error::BadKernel { width, height });
        }
        Ok(Self {
            width,
            height,
            weights,
        })
    }

    pub fn from_rows<const W: usize, const H: usize>(rows: [[f64; W]; H]) -> Result<Self> {
        Self::new(W, H, rows.iter().flatten().copied().collect())
    }
}

// ---------------------------------------------------------------------------
// netpbm
// ---------------------------------------------------------------------------

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::MalformedHeader(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::MalformedHeader(format!("{what} out of range")))
    }
}

/// Decode a binary netpbm buffer (P5 grayscale or P6 color, maxval 255).
pub fn decode_netpbm(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(Error::MalformedHeader("missing magic".into()));
    }
    let channels = match bytes[1] {
        b'5' => 1,
        b'6' => 3,
        other => {
            return Err(Error::MalformedHeader(format!(
                "unsupported magic P{}",
                other as char
            )))
        }
    };
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader(format!(
            "nonpositive dimensions {width}x{height}"
        )));
    }
    if maxval != 255 {
        return Err(Error::MalformedHeader(format!("maxval {maxval} != 255")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(Error::MalformedHeader("missing raster separator".into())),
    }
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| Error::MalformedHeader("dimensions overflow".into()))?;
    let raster = &bytes[cur.pos..];
    if raster.len() < expected {
        return Err(Error::TruncatedData {
            expected,
            found: raster.len(),
        });
    }
    let raster = &raster[..expected];
    Ok(if channels == 1 {
        Image::Gray(GrayImage {
            width,
            height,
            data: raster.to_vec(),
        })
    } else {
        Image::Rgb(RgbImage {
            width,
            height,
            data: raster.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
        })
    })
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.data.iter().flatten());
    out
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileMissing(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    decode_netpbm(&read_file(path.as_ref())?)
}

/// Load a P5 file whose pixel values are class ids.
pub fn load_class_mask(path: impl AsRef<Path>) -> Result<ClassMask> {
    match load_image(path)? {
        Image::Gray(g) => Ok(g.into()),
        Image::Rgb(_) => Err(Error::MalformedHeader(
            "class masks must be P5 grayscale".into(),
        )),
    }
}

pub fn save_gray(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    write_file(path.as_ref(), &encode_pgm(img))
}

pub fn save_rgb(path: impl AsRef<Path>, img: &RgbImage) -> Result<()> {
    write_file(path.as_ref(), &encode_ppm(img))
}

pub fn save_class_mask(path: impl AsRef<Path>, mask: &ClassMask) -> Result<()> {
    let img = GrayImage {
        width: mask.width,
        height: mask.height,
        data: mask.labels.clone(),
    };
    save_gray(path, &img)
}

// ---------------------------------------------------------------------------
// pixel operations
// ---------------------------------------------------------------------------

/// Luma conversion with the 0.299 / 0.587 / 0.114 weights.
pub fn to_gray(img: &RgbImage) -> GrayImage {
    let data = img
        .data
        .iter()
        .map(|&[r, g, b]| {
            let y = 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b);
            y.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage {
        width: img.width,
        height: img.height,
        data,
    }
}

/// Summed-area table over the image padded by `pad` replicated pixels.
struct PaddedIntegral {
    stride: usize,
    sums: Vec<i64>,
}

impl PaddedIntegral {
    fn new(img: &GrayImage, pad: usize) -> Self {
        let pw = img.width + 2 * pad;
        let ph = img.height + 2 * pad;
        let stride = pw + 1;
        let mut sums = vec![0i64; stride * (ph + 1)];
        for py in 0..ph {
            let mut row = 0i64;
            let sy = py as isize - pad as isize;
            for px in 0..pw {
                row += i64::from(img.get_clamped(px as isize - pad as isize, sy));
                sums[(py + 1) * stride + px + 1] = sums[py * stride + px + 1] + row;
            }
        }
        Self { stride, sums }
    }

    /// Sum over padded rectangle `[x0, x1) × [y0, y1)`.
    fn sum(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> i64 {
        let s = self.stride;
        self.sums[y1 * s + x1] - self.sums[y0 * s + x1] - self.sums[y1 * s + x0]
            + self.sums[y0 * s + x0]
    }
}

/// Local-mean binarization: a pixel is set iff `p - mean(window) > offset`.
///
/// The window is a `window × window` square centred on the pixel with
/// replicated borders; the comparison is done in exact integer arithmetic.
pub fn adaptive_threshold(img: &GrayImage, window: usize, offset: i32) -> Result<BinaryMask> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::BadWindow(window));
    }
    let r = window / 2;
    let n = (window * window) as i64;
    let table = PaddedIntegral::new(img, r);
    let mut out = BinaryMask::zeros(img.width, img.height);
    for y in 0..img.height {
        for x in 0..img.width {
            // padded coords of the window's top-left corner equal (x, y)
            let sum = table.sum(x, y, x + window, y + window);
            let p = i64::from(img.get(x, y));
            if p * n - sum > i64::from(offset) * n {
                out.set(x, y, 1);
            }
        }
    }
    Ok(out)
}

/// Absolute correlation response `|Σ k(i,j) · img(x + j − cx, y + i − cy)|`.
///
/// The kernel is applied as written (no flip), matching the usual
/// `filter2D` convention; borders replicate.
pub fn convolve(img: &GrayImage, kernel: &Kernel) -> ResponseMap {
    let cx = (kernel.width / 2) as isize;
    let cy = (kernel.height / 2) as isize;
    let mut values = Vec::with_capacity(img.len());
    for y in 0..img.height as isize {
        for x in 0..img.width as isize {
            let mut acc = 0.0;
            for ky in 0..kernel.height {
                for kx in 0..kernel.width {
                    let w = kernel.weights[ky * kernel.width + kx];
                    if w != 0.0 {
                        let v = img.get_clamped(x + kx as isize - cx, y + ky as isize - cy);
                        acc += w * f64::from(v);
                    }
                }
            }
            values.push(acc.abs());
        }
    }
    ResponseMap {
        width: img.width,
        height: img.height,
        values,
    }
}

/// Sobel horizontal, Sobel vertical and the two 45° diagonals.
pub const DERIVATIVE_BANK: [[[i32; 3]; 3]; 4] = [
    [[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]],
    [[-1, -2, -1], [0, 0, 0], [1, 2, 1]],
    [[0, 1, 2], [-1, 0, 1], [-2, -1, 0]],
    [[-2, -1, 0], [-1, 0, 1], [0, 1, 2]],
];

/// Per-pixel maximum of the absolute responses of [`DERIVATIVE_BANK`].
pub fn filter_bank_response(img: &GrayImage) -> ResponseMap {
    let mut values = Vec::with_capacity(img.len());
    let mut nb = [[0i32; 3]; 3];
    for y in 0..img.height as isize {
        for x in 0..img.width as isize {
            for (dy, row) in nb.iter_mut().enumerate() {
                for (dx, v) in row.iter_mut().enumerate() {
                    *v = i32::from(img.get_clamped(x + dx as isize - 1, y + dy as isize - 1));
                }
            }
            let best = DERIVATIVE_BANK
                .iter()
                .map(|k| {
                    let mut acc = 0i32;
                    for i in 0..3 {
                        for j in 0..3 {
                            acc += k[i][j] * nb[i][j];
                        }
                    }
                    acc.abs()
                })
                .max()
                .unwrap_or(0);
            values.push(f64::from(best));
        }
    }
    ResponseMap {
        width: img.width,
        height: img.height,
        values,
    }
}

/// Set of 8-bit class ids, stored as a lookup table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassSet([bool; 256]);

impl ClassSet {
    pub fn empty() -> Self {
        ClassSet([false; 256])
    }

    pub fn all() -> Self {
        ClassSet([true; 256])
    }

    #[inline]
    pub fn contains(&self, id: u8) -> bool {
        self.0[id as usize]
    }

    pub fn insert(&mut self, id: u8) {
        self.0[id as usize] = true;
    }

    pub fn union(&self, other: &ClassSet) -> ClassSet {
        let mut out = self.clone();
        for (o, &b) in out.0.iter_mut().zip(other.0.iter()) {
            *o |= b;
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        !self.0.iter().any(|&b| b)
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        (0..=255u8).filter(|&id| self.contains(id))
    }
}

impl Default for ClassSet {
    fn default() -> Self {
        Self::empty()
    }
}

impl FromIterator<u8> for ClassSet {
    fn from_iter<I: IntoIterator<Item = u8>>(iter: I) -> Self {
        let mut set = ClassSet::empty();
        for id in iter {
            set.insert(id);
        }
        set
    }
}

impl<'a> FromIterator<&'a u8> for ClassSet {
    fn from_iter<I: IntoIterator<Item = &'a u8>>(iter: I) -> Self {
        iter.into_iter().copied().collect()
    }
}

pub fn extract_class_mask(mask: &ClassMask, classes: &ClassSet) -> BinaryMask {
    BinaryMask {
        width: mask.width,
        height: mask.height,
        bits: mask
            .labels
            .iter()
            .map(|&l| u8::from(classes.contains(l)))
            .collect(),
    }
}
