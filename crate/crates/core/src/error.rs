use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("gaussian {index}: invalid parameter ({what})")]
    InvalidParameter { index: usize, what: &'static str },

    #[error("index {index} out of range for cloud of {len} gaussians")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unsupported camera model `{0}` (only PINHOLE and SIMPLE_PINHOLE are supported)")]
    UnsupportedCameraModel(String),

    #[error("malformed PFM: {0}")]
    Pfm(String),

    #[error("malformed PLY: {0}")]
    Ply(String),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("png encoding error: {0}")]
    PngEncode(#[from] png::EncodingError),

    #[error("camera list is empty")]
    EmptyCameraList,

    #[error("need at least 2 cameras to derive the outer radius; set r_outer explicitly")]
    TooFewCameras,

    #[error("only {found} usable observations for scale alignment (need {required}); provide a manual scale")]
    InsufficientObservations { found: usize, required: usize },

    #[error("scale alignment was already applied to this scene")]
    ScaleAlreadyApplied,

    #[error("view `{0}` has no depth map")]
    MissingDepth(String),

    #[error("degenerate intrinsics: {0}")]
    DegenerateIntrinsics(String),

    #[error("invalid shell: r_inner={r_inner}, r_outer={r_outer} (need 0 < r_inner < r_outer)")]
    InvalidShell { r_inner: f64, r_outer: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("every pixel is masked out")]
    ZeroPixels,

    #[error("gaussian cloud is empty")]
    EmptyCloud,

    #[error("gaussian {0} sits exactly at the shell center")]
    GaussianAtCenter(usize),

    #[error("loss weight `{0}` must be non-negative")]
    NegativeWeight(&'static str),

    #[error("icosphere level {0} exceeds the maximum of 8")]
    LevelTooLarge(u32),

    #[error("backward pass requested without a cached forward pass")]
    MissingForward,

    #[error("training diverged at iteration {iteration} (non-finite loss)")]
    Diverged { iteration: usize },

    #[error("need at least {required} views, got {found}")]
    TooFewViews { found: usize, required: usize },

    #[error("envmap center lies outside the inner sphere (distance {distance} >= r_inner {r_inner})")]
    CenterOutsideInnerSphere { distance: f64, r_inner: f64 },

    #[error("missing artifact `{name}` at {path}")]
    MissingArtifact { name: &'static str, path: PathBuf },

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
