use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),

    #[error("{path}: expected single-channel grayscale, found {color}")]
    MultiChannel { path: PathBuf, color: String },

    #[error("{path}: unsupported bit depth {bits} (expected 8 or 16)")]
    UnsupportedBitDepth { path: PathBuf, bits: u8 },

    #[error("{path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("cannot write {path}: {message}")]
    Write { path: PathBuf, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },

    #[error("rib {label}: foreground is disconnected ({components} 4-connected components)")]
    DisconnectedMask { label: u32, components: usize },

    #[error("rib {label}: degenerate mask ({pixels} pixels, {width}x{height} bounding box)")]
    DegenerateMask {
        label: u32,
        pixels: usize,
        width: usize,
        height: usize,
    },

    #[error("rib {label}: contour agrees with bitmap on only {agreement:.4} of pixels")]
    ContourMismatch { label: u32, agreement: f64 },

    #[error("duplicate rib label {0}")]
    DuplicateLabel(u32),

    #[error("shape mismatch: {left_w}x{left_h} vs {right_w}x{right_h}")]
    ShapeMismatch {
        left_w: usize,
        left_h: usize,
        right_w: usize,
        right_h: usize,
    },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid contour: {0}")]
    InvalidContour(String),

    #[error("point ({x}, {y}) is not strictly inside the contour")]
    OutsideContour { x: f64, y: f64 },

    #[error(
        "contour bounding box [{min_x}, {max_x}]x[{min_y}, {max_y}] exceeds image {width}x{height}"
    )]
    ContourOutOfBounds {
        min_x: f64,
        max_x: f64,
        min_y: f64,
        max_y: f64,
        width: usize,
        height: usize,
    },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("rib {label}: {source}")]
    Rib {
        label: u32,
        #[source]
        source: Box<Error>,
    },

    #[error("image {width}x{height} too small for 5-scale MS-SSIM (minimum {min}x{min})")]
    TooSmallForMsSsim {
        width: usize,
        height: usize,
        min: usize,
    },

    #[error("phantom geometry cannot fit {requested} ribs without overlap (achievable max {max})")]
    PhantomOverlap { requested: usize, max: usize },

    #[error("invalid phantom spec: {0}")]
    InvalidPhantom(String),

    #[error("invalid field dump: {0}")]
    InvalidDump(String),

    #[error("every tuning candidate failed: {0}")]
    AllCandidatesFailed(String),
}

impl Error {
    /// Stable kebab-case identifier for machine-readable diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MissingFile(_) => "missing-file",
            Error::MultiChannel { .. } => "multi-channel",
            Error::UnsupportedBitDepth { .. } => "unsupported-bit-depth",
            Error::Decode { .. } => "decode",
            Error::Write { .. } => "write",
            Error::Io { .. } => "io",
            Error::Manifest { .. } => "manifest",
            Error::DisconnectedMask { .. } => "disconnected-mask",
            Error::DegenerateMask { .. } => "degenerate-mask",
            Error::ContourMismatch { .. } => "contour-mismatch",
            Error::DuplicateLabel(_) => "duplicate-label",
            Error::ShapeMismatch { .. } => "shape-mismatch",
            Error::InvalidImage(_) => "invalid-image",
            Error::InvalidContour(_) => "invalid-contour",
            Error::OutsideContour { .. } => "outside-contour",
            Error::ContourOutOfBounds { .. } => "contour-out-of-bounds",
            Error::InvalidParams(_) => "invalid-params",
            Error::Rib { source, .. } => source.kind(),
            Error::TooSmallForMsSsim { .. } => "too-small",
            Error::PhantomOverlap { .. } => "phantom-overlap",
            Error::InvalidPhantom(_) => "invalid-phantom",
            Error::InvalidDump(_) => "invalid-dump",
            Error::AllCandidatesFailed(_) => "all-candidates-failed",
        }
    }

    /// `true` for failures caused by the inputs rather than the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Write { .. } | Error::Io { .. })
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }
}
