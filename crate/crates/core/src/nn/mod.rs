//! Minimal neural-network core: dense tensors, layers with hand-written
//! forward/backward passes, Glorot init, SGD with momentum, and a
//! finite-difference gradient checker.
//!
//! Training instantiates everything at f32; the gradient checker drives the
//! same generic code at f64 so analytic gradients are validated on the exact
//! code path that training uses.

pub mod gradcheck;
pub mod init;
pub mod layer;
pub mod net;
pub mod optim;
pub mod rng;
pub mod scalar;
pub mod tensor;

pub use gradcheck::{gradcheck_loss, GradCheckReport};
pub use init::xavier_uniform;
pub use layer::{Activation, DenseBlock, Layer, Mode};
pub use net::Network;
pub use optim::SgdMomentum;
pub use rng::{RngState, StreamId};
pub use scalar::Scalar;
pub use tensor::Tensor;
