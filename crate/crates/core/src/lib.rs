//! Core of the `bafdp` federated-learning simulator.
//!
//! Everything in this crate is pure computation over owned buffers: the MLP
//! predictor with analytic gradients, the spectral-norm Lipschitz surrogate,
//! the Gaussian local-DP mechanism and Wasserstein radius, the regularized
//! augmented Lagrangian and its partial gradients, the asynchronous
//! primal-dual protocol driven by a virtual clock, Byzantine attack
//! generators, traffic windowing/normalization, and evaluation metrics.
//!
//! The crate is `#![no_std]` (it needs `alloc`). File formats, configuration
//! and the command line live in the `bafdp` crate.

#![no_std]
#![deny(missing_debug_implementations)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod adversary;
pub mod data;
pub mod error;
pub mod lipschitz;
pub mod metrics;
pub mod mlp;
pub mod objective;
pub mod params;
pub mod privacy;
pub mod protocol;
pub mod rng;
pub mod trace;

pub use error::{Error, Result};
pub use lipschitz::{lipschitz_value_grad, LipschitzEstimate};
pub use mlp::{mlp_forward, mlp_loss_grad, Batch};
pub use params::{project_ball, LayerShape, ParamVector};
