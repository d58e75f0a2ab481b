use thiserror::Error;

use crate::tensor::Shape;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("no chunks")]
    NoChunks,
    #[error("shape mismatch: {expected:?} vs {found:?}")]
    ShapeMismatch { expected: Shape, found: Shape },
    #[error("invalid shape: every extent must be at least 1")]
    InvalidShape,
    #[error("data length {found} does not match shape element count {expected}")]
    DataLength { expected: usize, found: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("pixel value {value} at index {index} outside [0, 1]")]
    PixelRange { index: usize, value: f64 },
    #[error("invalid beta range")]
    InvalidBetaRange,
    #[error("step count {steps} outside [1, {max}]")]
    StepsOutOfRange { steps: usize, max: usize },
    #[error("timestep {t} outside [0, {max})")]
    TimestepOutOfRange { t: usize, max: usize },
    #[error("timestep pair ({t}, {t_next}) is not descending")]
    NotDescending { t: usize, t_next: usize },
    #[error("invalid eta for step pair")]
    InvalidEta,
    #[error("degenerate embedding")]
    DegenerateEmbedding,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("empty video")]
    EmptyVideo,
    #[error("video has {found} frames, need at least {need}")]
    TooFewFrames { need: usize, found: usize },
    #[error("empty score list")]
    EmptyScores,
    #[error("guidance scale {0} requires an unconditional predictor")]
    GuidanceUnavailable(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed tensor dump: {0}")]
    Format(String),
}
