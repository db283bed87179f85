//! Minimal reverse-mode automatic differentiation over dense tensors.
//!
//! The op set is exactly what the policy networks and the Euler rollout
//! need: affine maps, ReLU, concatenation, elementwise arithmetic, scalar
//! reductions and batch normalization. Backward rules are written out by
//! hand in [`tape`].

mod adam;
mod params;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use params::{ParamKey, ParamSet, ParamSetCheckpoint, PARAMSET_FORMAT_VERSION};
pub use tape::{Gradients, NodeId, NormStats, Tape};
pub use tensor::Tensor;
