use alloc::boxed::Box;
use alloc::string::String;

use crate::tensor::Shape;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left} vs {right}")]
    ShapeMismatch {
        op: &'static str,
        left: Shape,
        right: Shape,
    },
    #[error("data length {len} does not match shape {shape}")]
    DataLength { shape: Shape, len: usize },
    #[error("gradient requires a scalar output, got shape {0}")]
    NonScalarOutput(Shape),
    #[error("tensor does not belong to this graph")]
    ForeignTensor,
    #[error("empty input")]
    EmptyInput,
    #[error("regularization must be positive, got {0}")]
    InvalidRegularization(f64),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("k = {k} out of range for {n} features")]
    TopKOutOfRange { k: usize, n: usize },
    #[error("correlation undefined for a constant vector")]
    UndefinedCorrelation,
    #[error("singular linear system")]
    Singular,
    #[error("explainer {0} is not differentiable")]
    NotDifferentiable(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("batch {batch}: {source}")]
    Batch { batch: usize, source: Box<Error> },
    #[error("point {point}: {source}")]
    Point { point: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}

pub type Result<T> = core::result::Result<T, Error>;
