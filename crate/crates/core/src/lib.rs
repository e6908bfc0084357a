//! Safe Bayesian optimization with selected additive Gaussian-process kernels.
//!
//! The crate is organised bottom-up:
//!
//! - [`kernels`]: one-dimensional base kernels and additive kernels of any order.
//! - [`gp`]: exact GP regression with confidence bounds.
//! - [`sampling`]: Latin hypercube designs and candidate generation.
//! - [`kernel_selection`]: Nyström-approximate ranking of additive orders, a
//!   random-forest dimension ranking and reduced-kernel assembly.
//! - [`safe_bo`]: the safe optimization loop and its baselines.
//! - [`quad_env`]: planar quadrotor simulator with a cascaded PID controller,
//!   used as the benchmark objective.
//!
//! All GP computation happens in normalized `[0, 1]^D` coordinates.

pub mod dataset;
pub mod error;
pub mod gp;
pub mod kernel_selection;
pub mod kernels;
pub mod quad_env;
pub mod safe_bo;
pub mod sampling;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use gp::{GpModel, Prediction};
pub use kernels::{AdditiveTerm, BaseKernelParams, KernelSpec};
pub use sampling::RngStream;
