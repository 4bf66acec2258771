//! Reverse-mode automatic differentiation over dense `f64` tensors.

mod gradcheck;
mod graph;
mod params;
mod tensor;

pub use gradcheck::{finite_difference_check, GradCheckReport};
pub use graph::{Backward, Graph, NodeId, OpKind};
pub use params::{Gradients, ParamId, ParamStore};
pub use tensor::Tensor;
