//! C ABI over the roadaudit library.
//!
//! Every fallible function returns an [`RaStatus`]; on failure the message
//! is available from [`ra_last_error_message`] on the same thread. Objects
//! created by `*_new` / `*_load` / `*_parse` are opaque and must be released
//! with the matching `*_free`. Array results are written into caller
//! buffers: `out_count` always receives the full result length, and at most
//! `capacity` items are written.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use roadaudit::barriers::{assess_barriers, BarrierParams, Side};
use roadaudit::geometry::{convex_hull, min_area_rect, Point};
use roadaudit::geotag::{parse_track, GpsTrack};
use roadaudit::marking::{marking_damage, MarkingParams};
use roadaudit::pipeline::{self, RunOptions};
use roadaudit::raster::{load_class_mask, load_image, ClassMask, GrayImage};
use roadaudit::signs::{pole_skew, ReferenceLibrary};
use roadaudit::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RaStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Degenerate = 5,
    NoPole = 6,
    Track = 7,
    ManifestInvalid = 8,
    Panic = 9,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RaStatus {
    match e {
        Error::FileMissing(_) | Error::Io(_) => RaStatus::Io,
        Error::MalformedHeader(_) | Error::TruncatedData { .. } | Error::MalformedDetection { .. } => {
            RaStatus::Format
        }
        Error::Degenerate(_) | Error::DegenerateHull | Error::EmptyInput => RaStatus::Degenerate,
        Error::NoPole => RaStatus::NoPole,
        Error::EmptyTrack
        | Error::NonMonotoneTimestamps { .. }
        | Error::OutOfRangeCoordinate { .. }
        | Error::MalformedRow { .. } => RaStatus::Track,
        Error::ManifestInvalid(_) => RaStatus::ManifestInvalid,
        _ => RaStatus::InvalidArgument,
    }
}

/// Run `f`, translating errors and panics into a status plus message.
fn guard(f: impl FnOnce() -> Result<(), RaStatus>) -> RaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RaStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_last_error("internal panic");
            RaStatus::Panic
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, RaStatus>;
}

impl<T> OrStatus<T> for roadaudit::Result<T> {
    fn or_status(self) -> Result<T, RaStatus> {
        self.map_err(|e| {
            set_last_error(&e.to_string());
            status_of(&e)
        })
    }
}

fn null(name: &str) -> RaStatus {
    set_last_error(&format!("{name} is null"));
    RaStatus::NullArgument
}

fn invalid(msg: &str) -> RaStatus {
    set_last_error(msg);
    RaStatus::InvalidArgument
}

/// # Safety
/// `p` must be null or a valid NUL-terminated string.
unsafe fn c_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, RaStatus> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(&format!("{name} is not UTF-8")))
}

/// # Safety
/// `p` must be null or point to `len` readable items.
unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], RaStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `out` must be null (with `capacity == 0`) or point to `capacity` writable
/// items; `out_count` must be valid.
unsafe fn write_out<T: Copy>(items: &[T], out: *mut T, capacity: usize, out_count: *mut usize) -> Result<(), RaStatus> {
    if out_count.is_null() {
        return Err(null("out_count"));
    }
    *out_count = items.len();
    let n = items.len().min(capacity);
    if n > 0 {
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(items.as_ptr(), out, n);
    }
    Ok(())
}

unsafe fn put<T>(out: *mut T, v: T, name: &str) -> Result<(), RaStatus> {
    if out.is_null() {
        return Err(null(name));
    }
    *out = v;
    Ok(())
}

unsafe fn borrow<'a, T>(p: *const T, name: &str) -> Result<&'a T, RaStatus> {
    p.as_ref().ok_or_else(|| null(name))
}

/// Message of the last failed call on this thread, or null. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ra_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ra_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must be null or a string obtained from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn ra_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).expect("JSON text has no NUL").into_raw()
}

// ---------------------------------------------------------------------------
// images and masks
// ---------------------------------------------------------------------------

fn check_len(width: usize, height: usize, len: usize) -> Result<(), RaStatus> {
    match width.checked_mul(height) {
        Some(n) if n == len => Ok(()),
        _ => Err(invalid(&format!("buffer of {len} bytes does not hold {width}x{height} pixels"))),
    }
}

/// Opaque 8-bit grayscale image.
pub struct RaGrayImage(GrayImage);

/// Opaque per-pixel class-id mask.
pub struct RaClassMask(ClassMask);

/// Copy `width * height` row-major bytes into a new image.
///
/// # Safety
/// `data` must point to `len` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_gray_image_new(
    width: usize,
    height: usize,
    data: *const u8,
    len: usize,
    out: *mut *mut RaGrayImage,
) -> RaStatus {
    guard(|| {
        let bytes = slice(data, len, "data")?;
        check_len(width, height, len)?;
        let img = GrayImage::new(width, height, bytes.to_vec()).or_status()?;
        put(out, Box::into_raw(Box::new(RaGrayImage(img))), "out")
    })
}

/// Load a P5 or P6 file; colour is converted to luma.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_gray_image_load(path: *const c_char, out: *mut *mut RaGrayImage) -> RaStatus {
    guard(|| {
        let path = c_str(path, "path")?;
        let img = load_image(path).or_status()?.into_gray();
        put(out, Box::into_raw(Box::new(RaGrayImage(img))), "out")
    })
}

/// # Safety
/// `img` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ra_gray_image_width(img: *const RaGrayImage) -> usize {
    img.as_ref().map_or(0, |i| i.0.width())
}

/// # Safety
/// `img` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ra_gray_image_height(img: *const RaGrayImage) -> usize {
    img.as_ref().map_or(0, |i| i.0.height())
}

/// # Safety
/// `img` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn ra_gray_image_free(img: *mut RaGrayImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

/// # Safety
/// `labels` must point to `len` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_class_mask_new(
    width: usize,
    height: usize,
    labels: *const u8,
    len: usize,
    out: *mut *mut RaClassMask,
) -> RaStatus {
    guard(|| {
        let bytes = slice(labels, len, "labels")?;
        check_len(width, height, len)?;
        let mask = ClassMask::new(width, height, bytes.to_vec()).or_status()?;
        put(out, Box::into_raw(Box::new(RaClassMask(mask))), "out")
    })
}

/// Load a P5 class mask.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_class_mask_load(path: *const c_char, out: *mut *mut RaClassMask) -> RaStatus {
    guard(|| {
        let path = c_str(path, "path")?;
        let mask = load_class_mask(path).or_status()?;
        put(out, Box::into_raw(Box::new(RaClassMask(mask))), "out")
    })
}

/// # Safety
/// `mask` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn ra_class_mask_free(mask: *mut RaClassMask) {
    if !mask.is_null() {
        drop(Box::from_raw(mask));
    }
}

// ---------------------------------------------------------------------------
// geometry
// ---------------------------------------------------------------------------

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RaPoint {
    pub x: i64,
    pub y: i64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaRotatedRect {
    pub center_x: f64,
    pub center_y: f64,
    pub width: f64,
    pub height: f64,
    /// Degrees in [-90, 90), long side from the x-axis toward +y.
    pub angle: f64,
}

fn points(p: &[RaPoint]) -> Vec<Point> {
    p.iter().map(|q| Point::new(q.x, q.y)).collect()
}

/// Convex hull vertices, counter-clockwise on screen.
///
/// # Safety
/// `pts` must hold `n` points; `out` must hold `capacity` points.
#[no_mangle]
pub unsafe extern "C" fn ra_convex_hull(
    pts: *const RaPoint,
    n: usize,
    out: *mut RaPoint,
    capacity: usize,
    out_count: *mut usize,
) -> RaStatus {
    guard(|| {
        let hull = convex_hull(&points(slice(pts, n, "pts")?)).or_status()?;
        let v: Vec<RaPoint> = hull.vertices.iter().map(|p| RaPoint { x: p.x, y: p.y }).collect();
        write_out(&v, out, capacity, out_count)
    })
}

/// # Safety
/// `pts` must hold `n` points; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_min_area_rect(pts: *const RaPoint, n: usize, out: *mut RaRotatedRect) -> RaStatus {
    guard(|| {
        let r = min_area_rect(&points(slice(pts, n, "pts")?)).or_status()?;
        put(
            out,
            RaRotatedRect {
                center_x: r.center.0,
                center_y: r.center.1,
                width: r.size.0,
                height: r.size.1,
                angle: r.angle,
            },
            "out",
        )
    })
}

// ---------------------------------------------------------------------------
// analyzers
// ---------------------------------------------------------------------------

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RaSide {
    Left = 0,
    Right = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaBarrier {
    pub side: RaSide,
    pub solidity: f64,
    pub safe: bool,
    pub area: f64,
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

/// Classify every barrier contour. `out_dropped` (nullable) receives the
/// number of contours skipped for a degenerate hull.
///
/// # Safety
/// `classes` must hold `n_classes` ids; `out` must hold `capacity` items.
#[no_mangle]
pub unsafe extern "C" fn ra_assess_barriers(
    mask: *const RaClassMask,
    frame_width: usize,
    classes: *const u8,
    n_classes: usize,
    right_threshold: f64,
    left_threshold: f64,
    min_area: f64,
    out: *mut RaBarrier,
    capacity: usize,
    out_count: *mut usize,
    out_dropped: *mut usize,
) -> RaStatus {
    guard(|| {
        let mask = borrow(mask, "mask")?;
        let params = BarrierParams {
            barrier_classes: slice(classes, n_classes, "classes")?.to_vec(),
            right_threshold,
            left_threshold,
            min_area,
            strict: true,
        };
        if let Some(p) = params.problems().first() {
            return Err(invalid(p));
        }
        let (found, dropped) = assess_barriers(&mask.0, frame_width, &params);
        let v: Vec<RaBarrier> = found
            .iter()
            .map(|b| RaBarrier {
                side: match b.side {
                    Side::Left => RaSide::Left,
                    Side::Right => RaSide::Right,
                },
                solidity: b.solidity,
                safe: b.safe,
                area: b.area,
                x0: b.bbox.x0,
                y0: b.bbox.y0,
                x1: b.bbox.x1,
                y1: b.bbox.y1,
            })
            .collect();
        if let Some(d) = out_dropped.as_mut() {
            *d = dropped;
        }
        write_out(&v, out, capacity, out_count)
    })
}

/// Pole lean in degrees from vertical, in [0, 90).
///
/// # Safety
/// `mask` must be a live handle; `out_deg` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_pole_skew(
    mask: *const RaClassMask,
    pole_class: u8,
    sign_x: f64,
    sign_y: f64,
    out_deg: *mut f64,
) -> RaStatus {
    guard(|| {
        let mask = borrow(mask, "mask")?;
        let t = pole_skew(&mask.0, pole_class, (sign_x, sign_y)).or_status()?;
        put(out_deg, t, "out_deg")
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaMarkingParams {
    pub threshold_window: usize,
    pub threshold_offset: i32,
    pub density_threshold: f64,
    /// 0 derives the count from `superpixel_area`.
    pub slic_k: usize,
    pub compactness: f64,
    pub iterations: usize,
    pub superpixel_area: f64,
}

impl From<&MarkingParams> for RaMarkingParams {
    fn from(p: &MarkingParams) -> Self {
        Self {
            threshold_window: p.threshold_window,
            threshold_offset: p.threshold_offset,
            density_threshold: p.density_threshold,
            slic_k: p.slic.k,
            compactness: p.slic.compactness,
            iterations: p.slic.iterations,
            superpixel_area: p.superpixel_area,
        }
    }
}

/// Fill `out` with the library defaults.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_marking_params_default(out: *mut RaMarkingParams) -> RaStatus {
    guard(|| put(out, RaMarkingParams::from(&MarkingParams::default()), "out"))
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaMarkingRegion {
    pub area: usize,
    pub mean_density: f64,
    pub superpixels: usize,
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

/// Damaged marking regions.
///
/// # Safety
/// Handles must be live; `classes` must hold `n_classes` ids; `params`
/// must be readable; `out` must hold `capacity` items.
#[no_mangle]
pub unsafe extern "C" fn ra_marking_damage(
    gray: *const RaGrayImage,
    mask: *const RaClassMask,
    classes: *const u8,
    n_classes: usize,
    params: *const RaMarkingParams,
    out: *mut RaMarkingRegion,
    capacity: usize,
    out_count: *mut usize,
) -> RaStatus {
    guard(|| {
        let gray = borrow(gray, "gray")?;
        let mask = borrow(mask, "mask")?;
        let rp = borrow(params, "params")?;
        let mut p = MarkingParams {
            marking_classes: slice(classes, n_classes, "classes")?.to_vec(),
            threshold_window: rp.threshold_window,
            threshold_offset: rp.threshold_offset,
            density_threshold: rp.density_threshold,
            superpixel_area: rp.superpixel_area,
            ..MarkingParams::default()
        };
        p.slic.k = rp.slic_k;
        p.slic.compactness = rp.compactness;
        p.slic.iterations = rp.iterations;
        if let Some(msg) = p.problems().first() {
            return Err(invalid(msg));
        }
        let regions = marking_damage(&gray.0, &mask.0, &p).or_status()?;
        let v: Vec<RaMarkingRegion> = regions
            .iter()
            .map(|r| RaMarkingRegion {
                area: r.area,
                mean_density: r.mean_density,
                superpixels: r.superpixels.len(),
                x0: r.bbox.x0,
                y0: r.bbox.y0,
                x1: r.bbox.x1,
                y1: r.bbox.y1,
            })
            .collect();
        write_out(&v, out, capacity, out_count)
    })
}

// ---------------------------------------------------------------------------
// tracks and reference libraries
// ---------------------------------------------------------------------------

/// Opaque validated GPS track.
pub struct RaTrack(GpsTrack);

/// Parse `t,lat,lon` CSV text.
///
/// # Safety
/// `csv` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_track_parse(csv: *const c_char, out: *mut *mut RaTrack) -> RaStatus {
    guard(|| {
        let track = parse_track(c_str(csv, "csv")?).or_status()?;
        put(out, Box::into_raw(Box::new(RaTrack(track))), "out")
    })
}

/// # Safety
/// `track` must be a live handle; `lat` and `lon` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_track_interpolate(
    track: *const RaTrack,
    t: f64,
    lat: *mut f64,
    lon: *mut f64,
) -> RaStatus {
    guard(|| {
        let (a, b) = borrow(track, "track")?.0.interpolate(t);
        put(lat, a, "lat")?;
        put(lon, b, "lon")
    })
}

/// # Safety
/// `track` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn ra_track_free(track: *mut RaTrack) {
    if !track.is_null() {
        drop(Box::from_raw(track));
    }
}

/// Opaque set of normalized sign reference crops.
pub struct RaReferenceLibrary(ReferenceLibrary);

/// Load `<dir>/<class_id>/<n>.pgm`.
///
/// # Safety
/// `dir` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_reference_library_load(
    dir: *const c_char,
    out: *mut *mut RaReferenceLibrary,
) -> RaStatus {
    guard(|| {
        let lib = ReferenceLibrary::load(c_str(dir, "dir")?).or_status()?;
        put(out, Box::into_raw(Box::new(RaReferenceLibrary(lib))), "out")
    })
}

/// Number of reference crops across all classes.
///
/// # Safety
/// `lib` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ra_reference_library_len(lib: *const RaReferenceLibrary) -> usize {
    lib.as_ref().map_or(0, |l| l.0.len())
}

/// Best similarity of a crop against the references of `class_id`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_sign_similarity(
    lib: *const RaReferenceLibrary,
    class_id: u32,
    crop: *const RaGrayImage,
    out: *mut f64,
) -> RaStatus {
    guard(|| {
        let lib = borrow(lib, "lib")?;
        let crop = borrow(crop, "crop")?;
        let normalized = roadaudit::signs::normalize_crop(&crop.0).or_status()?;
        let s = lib.0.similarity(class_id, &normalized).or_status()?;
        put(out, s, "out")
    })
}

/// # Safety
/// `lib` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn ra_reference_library_free(lib: *mut RaReferenceLibrary) {
    if !lib.is_null() {
        drop(Box::from_raw(lib));
    }
}

// ---------------------------------------------------------------------------
// pipeline
// ---------------------------------------------------------------------------

/// Run a scene manifest and write the GeoJSON report. `debug_dir` may be
/// null; `jobs` 0 uses one worker per core. `out_summary_json` (nullable)
/// receives the run summary; release it with [`ra_string_free`].
///
/// # Safety
/// Strings must be NUL-terminated; `out_summary_json` null or writable.
#[no_mangle]
pub unsafe extern "C" fn ra_run_manifest(
    manifest: *const c_char,
    output: *const c_char,
    debug_dir: *const c_char,
    jobs: usize,
    out_summary_json: *mut *mut c_char,
) -> RaStatus {
    guard(|| {
        let manifest = c_str(manifest, "manifest")?;
        let opts = RunOptions {
            output: PathBuf::from(c_str(output, "output")?),
            debug_dir: if debug_dir.is_null() {
                None
            } else {
                Some(PathBuf::from(c_str(debug_dir, "debug_dir")?))
            },
            jobs,
        };
        let summary = pipeline::run(manifest, &opts).or_status()?;
        if !out_summary_json.is_null() {
            *out_summary_json = into_c_string(serde_json::to_string(&summary).expect("summary serializes"));
        }
        Ok(())
    })
}

/// Problems with a manifest as a JSON array of strings (empty when valid).
///
/// # Safety
/// `manifest` must be NUL-terminated; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ra_validate_manifest(manifest: *const c_char, out_json: *mut *mut c_char) -> RaStatus {
    guard(|| {
        let problems = pipeline::validate(c_str(manifest, "manifest")?);
        let text = serde_json::to_string(&problems).expect("strings serialize");
        put(out_json, into_c_string(text), "out_json")
    })
}
