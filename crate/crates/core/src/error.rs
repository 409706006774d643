//! Error taxonomy shared by every module.
//!
//! Variants split into two classes that callers (notably the CLI) map to
//! distinct exit statuses: input/usage problems and degenerate computations.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("image is {width}x{height} but both dimensions must be at least {min} for a {levels}-level decomposition")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min: usize,
        levels: usize,
    },

    #[error("plane is {width}x{height} but both dimensions must be multiples of {divisor}")]
    NotTransformSized {
        width: usize,
        height: usize,
        divisor: usize,
    },

    #[error("decomposition must have at least one level")]
    NoLevels,

    #[error("subband is {width}x{height} but 3x3 neighborhoods need at least 3x3")]
    SubbandTooSmall { width: usize, height: usize },

    #[error("inconsistent decomposition: {0}")]
    MalformedDecomposition(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("plane dimensions differ: {a_width}x{a_height} vs {b_width}x{b_height}")]
    PlaneSizeMismatch {
        a_width: usize,
        a_height: usize,
        b_width: usize,
        b_height: usize,
    },

    #[error("matrix is not positive definite ({context})")]
    NotPositiveDefinite { context: &'static str },

    #[error("need at least {needed} samples, got {got} ({context})")]
    InsufficientSamples {
        needed: usize,
        got: usize,
        context: &'static str,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("subband identity mismatch: reference is scale {expected_scale} orientation {expected_orientation}, distorted is scale {got_scale} orientation {got_orientation}")]
    SubbandIdentityMismatch {
        expected_scale: u8,
        expected_orientation: u8,
        got_scale: u8,
        got_orientation: u8,
    },

    #[error("non-finite distance in subband scale {scale} orientation {orientation}")]
    NonFiniteDistance { scale: u8, orientation: u8 },

    #[error("subband scale {scale} orientation {orientation}: {source}")]
    Subband {
        scale: u8,
        orientation: u8,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    ImageDecode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("manifest line {line}: {message}")]
    Manifest { line: u64, message: String },

    #[error("manifest: {0}")]
    ManifestFormat(String),

    #[error("feature file: {0}")]
    FeatureFile(String),

    #[error("feature file format version {got} is not supported (expected {expected})")]
    FeatureFileVersion { expected: u32, got: u32 },
}

impl Error {
    /// True for errors that describe a degenerate or failed computation on
    /// otherwise well-formed input, as opposed to unusable input itself.
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::InsufficientSamples { .. }
                | Error::Degenerate(_)
                | Error::NonConvergence { .. }
                | Error::NonFiniteDistance { .. }
        ) || matches!(self, Error::Subband { source, .. } if source.is_degenerate())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
