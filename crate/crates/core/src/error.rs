use std::path::PathBuf;

/// Broad failure category, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input: malformed files, invalid parameters, violated preconditions.
    Validation,
    /// The input was acceptable but a stage could not complete.
    Processing,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("too few points: need at least {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),

    #[error("degenerate duplicate points {a} and {b}")]
    DuplicatePoints { a: usize, b: usize },

    #[error("invalid camera `{name}`: {reason}")]
    InvalidCamera { name: String, reason: String },

    #[error("improper rotation for camera `{name}` (determinant {det:.6})")]
    ImproperRotation { name: String, det: f64 },

    #[error("pixel ({u}, {v}) outside {width}x{height} raster")]
    OutOfBounds { u: f64, v: f64, width: u32, height: u32 },

    #[error("unknown class `{0}`")]
    UnknownClass(String),

    #[error("zero-length vector")]
    ZeroVector,

    #[error("point normals are required")]
    MissingNormals,

    #[error("at least one camera view is required")]
    NoViews,

    #[error("neighbor graph is disconnected into {components} components (sizes {sizes:?})")]
    Disconnected { components: usize, sizes: Vec<usize> },

    #[error("linear solve failed at contraction iteration {iteration}: {reason}")]
    SolverFailure { iteration: usize, reason: String },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("alpha {alpha} too large: no triangle survives, try a smaller alpha")]
    AlphaTooLarge { alpha: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("malformed PLY header: {0}")]
    PlyHeader(String),

    #[error("truncated body: expected {expected} vertices, read {read}")]
    TruncatedBody { expected: usize, read: usize },

    #[error("malformed PLY body: {0}")]
    PlyBody(String),

    #[error("missing required vertex property `{0}`")]
    MissingProperty(&'static str),

    #[error("missing heatmap raster {}", path.display())]
    MissingRaster { path: PathBuf },

    #[error("raster {} is {got_w}x{got_h}, view expects {want_w}x{want_h}", path.display())]
    DimensionMismatch {
        path: PathBuf,
        got_w: u32,
        got_h: u32,
        want_w: u32,
        want_h: u32,
    },

    #[error("schema violation in {}: {reason}", path.display())]
    Schema { path: PathBuf, reason: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Disconnected { .. }
            | Error::SolverFailure { .. }
            | Error::Degenerate(_)
            | Error::AlphaTooLarge { .. } => ErrorKind::Processing,
            Error::Io { source, .. } if source.kind() != std::io::ErrorKind::NotFound => {
                ErrorKind::Processing
            }
            _ => ErrorKind::Validation,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
