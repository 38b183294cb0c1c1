//! Finger-stroke input from a mouse optical-flow sensor looking through a
//! window in a printed object.
//!
//! Streams of `(dx, dy, t)` counts are cut into strokes, each stroke becomes
//! a fixed-length shape descriptor, and a one-hidden-layer perceptron trained
//! per device maps descriptors to gesture names.

pub mod features;
pub mod mlp;
pub mod model;
pub mod sensor;
pub mod stroke;
pub mod synth;

use thiserror::Error;

pub use features::{featurize, featurize_path, FEATURE_DIM, FEATURE_POINTS};
pub use mlp::Mlp;
pub use model::{
    classify, classify_on_device, evaluate, train, Classification, EvalConfig, EvalReport, GestureModel, TrainConfig,
    DEFAULT_EPOCHS, DEFAULT_HIDDEN, DEFAULT_LEARNING_RATE, MODEL_FORMAT,
};
pub use sensor::{check_geometry, SensorGeometry, Violation, WindowDesign};
pub use stroke::{parse_stream, parse_strokes, segment, write_strokes, FlowSample, Stroke, DEFAULT_IDLE_MS};
pub use synth::{builtin_templates, synth_corpus, SynthConfig, Template};

#[derive(Debug, Error)]
pub enum GestureError {
    #[error("invalid stroke: {0}")]
    InvalidStroke(String),
    #[error("stroke has zero path length")]
    ZeroLengthPath,
    #[error("not enough training data: {0}")]
    InsufficientData(String),
    #[error("training diverged: loss is not finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("model expects {expected} inputs, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("model was trained on device {model:?} but the stream comes from {stream:?}")]
    DeviceMismatch { model: String, stream: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported model format {0:?}")]
    UnsupportedFormat(String),
    #[error("model file: {0}")]
    Json(#[from] serde_json::Error),
}

pub type GestureResult<T> = Result<T, GestureError>;
