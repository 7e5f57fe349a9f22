//! Reverse-mode automatic differentiation over real and complex tensors,
//! parameter management, optimizers, and checkpointing.

pub mod checkpoint;
mod kernels;
mod optim;
mod param;
mod tape;

pub use optim::{adam_step, grad_global_norm, sgd_step, AdamConfig};
pub use param::{ParamStore, Parameter, Value};
pub use tape::{BackwardFn, CVar, Grads, Node, NodeId, Part, Tape, Var};
