//! Dense row-major tensors with a define-by-run reverse-mode tape.
//!
//! Ops are generic over [`Real`] so the same graph code runs in `f32` for
//! training and `f64` for finite-difference checks.

mod graph;
pub mod gradcheck;
pub mod ops;
mod optim;
mod params;
mod real;
mod tensor;

pub use graph::{BackwardFn, Gradients, Graph, Var};
pub use ops::conv::ConvGeometry;
pub use ops::elementwise::{sigmoid, softplus};
pub use optim::{Adam, AdamConfig, AdamState};
pub use params::{Binding, GradBuffer, ParamId, ParamStore};
pub use real::{gemm, Real};
pub use tensor::{numel, Tensor};
