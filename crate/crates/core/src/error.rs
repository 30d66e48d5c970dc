use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report.
///
/// Variants are grouped by the module that raises them; the C ABI maps each
/// one onto a stable status code, so new variants go at the end of a group.
#[derive(Debug, Error)]
pub enum Error {
    // raster
    #[error("file not found: {0}")]
    FileMissing(PathBuf),
    #[error("malformed netpbm header: {0}")]
    MalformedHeader(String),
    #[error("truncated pixel data: expected {expected} bytes, found {found}")]
    TruncatedData { expected: usize, found: usize },
    #[error("window must be odd and positive, got {0}")]
    BadWindow(usize),
    #[error("kernel dimensions must be odd and non-zero, got {width}x{height}")]
    BadKernel { width: usize, height: usize },
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("invalid image dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },

    // geometry
    #[error("empty point set")]
    EmptyInput,
    #[error("polygon needs at least 3 vertices, got {0}")]
    Degenerate(usize),
    #[error("convex hull has zero area")]
    DegenerateHull,

    // superpixel
    #[error("requested {k} superpixels for an image of {pixels} pixels")]
    KTooLarge { k: usize, pixels: usize },
    #[error("invalid SLIC parameters: {0}")]
    BadSlicParams(String),

    // signs
    #[error("empty crop region")]
    EmptyRegion,
    #[error("crop has zero variance")]
    ZeroVariance,
    #[error("no pole pixels in mask")]
    NoPole,
    #[error("class {0} has no reference crops")]
    UnknownClass(u32),

    // geotag
    #[error("GPS track has no fixes")]
    EmptyTrack,
    #[error("timestamps not strictly increasing at row {row}")]
    NonMonotoneTimestamps { row: usize },
    #[error("coordinate out of range at row {row}: lat {lat}, lon {lon}")]
    OutOfRangeCoordinate { row: usize, lat: f64, lon: f64 },
    #[error("malformed track row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },

    // report
    #[error("no class has any ground truth")]
    NoGroundTruth,
    #[error("no selected class is present in either mask")]
    NoClasses,
    #[error("IoU threshold must lie in (0, 1), got {0}")]
    BadIouThreshold(f64),
    #[error("malformed detection record on line {line}: {reason}")]
    MalformedDetection { line: usize, reason: String },

    // cli
    #[error("invalid manifest: {0}")]
    ManifestInvalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
