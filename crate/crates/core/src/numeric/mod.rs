//! Dense tensors, a reverse-mode tape, SGD and a finite-difference checker.

mod gradcheck;
mod optim;
mod tape;
mod tensor;

pub use gradcheck::finite_diff_check;
pub use optim::{sgd_step, SgdConfig};
pub use tape::{forward_primitive, Gradients, NodeId, PoolGeometry, Primitive, Tape, Var};
pub use tensor::{ConvGeometry, Tensor};
