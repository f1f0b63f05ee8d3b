//! A small dense-tensor engine with reverse-mode differentiation, sized for
//! training the event-based pupil-tracking network in this workspace on a CPU.
//!
//! Operations execute eagerly and record a backward graph when gradients are
//! requested; [`backward`] replays it in reverse topological order. The
//! element type is generic over [`Scalar`] so the same model code runs in
//! `f64` for gradient checking and `f32` for training throughput.

pub mod checkpoint;
pub mod ops;
pub mod optim;
pub mod scalar;
pub mod tensor;

pub use scalar::Scalar;
pub use tensor::{backward, NoGradGuard, Tensor};
