//! Minimal differentiable-network substrate: tensors, a fixed layer
//! vocabulary with hand-written backward passes, ADAM and Nesterov
//! optimizers, and finite-difference gradient checking.

mod gradcheck;
mod layer;
mod net;
pub mod ops;
mod optim;
mod tensor;

pub use gradcheck::{gradient_check, relative_error, squared_loss, GradCheckOptions, GradCheckReport};
pub use layer::{activation, sigmoid, Activation, Layer, LayerKind, Param};
pub use net::Net;
pub use optim::{Optimizer, Rule, Slot};
pub use tensor::Tensor;
