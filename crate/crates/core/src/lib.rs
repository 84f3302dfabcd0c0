//! Minimum-volume covering sets (MVCS) over point clouds and regression
//! residuals, with split-conformal calibration.
//!
//! The crate fits norm-ball prediction regions `{y : ||M (y - mu)||_p <= radius}`
//! whose volume is explicitly minimized subject to covering all but `r - 1` of
//! the data, in four flavors:
//!
//! * a difference-of-convex solver for a fixed norm ([`covering::fit_dca`]),
//! * a convex relaxation of the same problem ([`covering::fit_convex_relaxation`]),
//! * a first-order fit that additionally learns the exponent `p`
//!   ([`covering::fit_single_norm`]),
//! * a multi-norm fit with one exponent and diagonal scaling per orthant
//!   ([`covering::fit_multi_norm`]).
//!
//! For supervised data, [`regression`] trains a center network jointly with a
//! covariate-dependent shape matrix under the same volume objective, and
//! [`conformal`] rescales any fitted predictor on a held-out calibration split
//! so the resulting sets carry finite-sample marginal coverage. [`baselines`]
//! implements naive per-axis quantile regression and global/local covariance
//! ellipsoids for comparison, [`datagen`] provides the synthetic generators and
//! preprocessing, and [`harness`] runs config-driven experiment sweeps behind
//! the `mvcs` CLI.

pub mod baselines;
pub mod conformal;
pub mod covering;
pub mod datagen;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod numkernel;
pub mod orderstats;
pub mod regression;

pub use error::{Error, Result};
pub use numkernel::linalg::Matrix;
