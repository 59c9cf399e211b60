//! Dense tensor arithmetic with reverse-mode gradient accumulation.
//!
//! A [`Graph`] records a forward computation eagerly (define-by-run) and
//! replays it in reverse to accumulate gradients; it is built per step and
//! discarded after backward. [`Tensor`]s hold 64-bit values in row-major
//! order. [`OptimizerState`] implements Adam with bias correction, and
//! [`clip_global_norm`] rescales gradients by their global L2 norm.

mod fdcheck;
mod graph;
mod optim;
mod tensor;

pub use fdcheck::{finite_difference_check, FdReport};
pub use graph::{backward_gradients, Graph, NodeId};
pub use optim::{clip_global_norm, Gradients, OptimizerState};
pub use tensor::{ParameterSet, Tensor};
