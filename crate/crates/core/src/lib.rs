//! Online multiplicative stochastic gradient descent (M-SGD) and the
//! processes it is compared against.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`]: path-addressed random streams, gamma sampling, small
//!   dense linear algebra and finite differences;
//! * [`weights`]: the minibatch, Gaussian-structured and Dirichlet weight
//!   laws sharing the minibatch mean and covariance;
//! * [`models`]: loss models with their noise factor `σ(θ)`;
//! * [`dynamics`]: GD, Gaussian SGD, M-SGD, gradient flow and the diffusion;
//! * [`stats`]: CLT samples, normality and Wasserstein estimates, the exact
//!   second-moment gap and contraction rates;
//! * [`exec`]: the replication driver (rayon with the `parallel` feature).

pub mod dynamics;
pub mod error;
pub mod exec;
pub mod models;
pub mod numerics;
pub mod stats;
pub mod weights;

pub use error::{Error, Result};
pub use exec::Execution;
