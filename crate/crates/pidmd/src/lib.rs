//! Parametric reduced-order modeling of linear time-steppers.
//!
//! The core idea: augment each snapshot with copies of itself scaled by
//! parameter features, regress one operator family
//! `K(theta) = A + sum_i h_i(theta) B_i` over trajectories collected at a
//! few parameter values, then project onto a shared POD basis to get modes,
//! frequencies and forecasts at parameters never seen in training.
//!
//! Modules:
//! - [`linalg`]: truncated SVD, eigendecomposition, pseudoinverse, modal
//!   evolution (backed by `faer`, single-threaded for reproducibility).
//! - [`dmd`]: snapshot handling and exact DMD on one trajectory.
//! - [`pidmd`]: the parameter-affine operator regression and its reduced
//!   parametric models.
//! - [`baselines`]: stacked-DMD mode interpolation and reduced-operator
//!   interpolation, with divergence detection.
//! - [`datagen`]: seeded synthetic systems (random affine families,
//!   advection-diffusion on a periodic grid).
//! - [`metrics`]: relative-error series, evaluation reports, method
//!   comparison.
//! - [`io`]: binary snapshot container and JSON model files.

pub mod baselines;
pub mod datagen;
pub mod dmd;
pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod pidmd;

pub use error::{Error, Result, Warning};
pub use linalg::{ComplexMat, RealMat};
