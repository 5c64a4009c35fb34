//! Reverse-mode differentiable tensor engine.
//!
//! Values live on a [`Tape`]; each op evaluates eagerly and records enough
//! to propagate adjoints. Parameters are owned by a [`ParamSet`] and rebound
//! to a fresh tape for every forward pass.

pub mod gradcheck;
mod kernels;
mod optim;
mod param;
mod tape;
mod tensor;

pub use optim::{Optimizer, OptimizerConfig};
pub use param::{Bound, ParamSet, Parameter};
pub use tape::{Activation, Padding, Tape, Var, NLL_EPS};
pub use tensor::Tensor;
