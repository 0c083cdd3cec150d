//! Reverse-mode differentiation over dense matrices, with the optimizer,
//! finite-difference checker and checkpoint format used by every model.

mod checkpoint;
mod gradcheck;
mod optim;
mod params;
mod tape;
mod tensor;

pub use checkpoint::{Checkpoint, CheckpointEntry, CheckpointError};
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport};
pub use optim::{Adam, AdamConfig};
pub use params::{ParamId, ParamStore};
pub use tape::{EdgeIndex, Tape, Var};
pub use tensor::{Shape, Tensor};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("{op}: incompatible shapes {lhs} and {rhs}")]
    Shape {
        op: &'static str,
        lhs: Shape,
        rhs: Shape,
    },
    #[error("backward requires a scalar loss, got {0}")]
    NonScalarLoss(Shape),
    #[error("{op}: {msg}")]
    Invalid { op: &'static str, msg: String },
}
