//! Minimal dense numeric core: tensors, a reverse-mode tape, the tree-GRU and
//! bilinear-attention layer primitives, the Adam optimizer, and checkpoint
//! I/O.
//!
//! Values are computed in f64. In [`Precision::Single`] (the training
//! default) every operation result is rounded through f32, so all stored
//! values are exactly representable in 32 bits; [`Precision::Double`] keeps
//! full precision for gradient checks.

pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod store;
pub mod tape;
pub mod tensor;

pub use store::{AdamConfig, Param, ParamStore};
pub use tape::{Gradients, Tape, Var};
pub use tensor::{Precision, Tensor};
