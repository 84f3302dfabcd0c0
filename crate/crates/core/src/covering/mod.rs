//! Minimum-volume covering sets over a point cloud.
//!
//! Four fitting routes, all minimizing set volume subject to covering at
//! least `n - r + 1` of the `n` points:
//!
//! * [`fit_dca`] — fixed norm, difference-of-convex iterations with a
//!   projected-subgradient convex subproblem solver,
//! * [`fit_convex_relaxation`] — fixed norm, the convex relaxation obtained
//!   by dropping the concave part of the DC split,
//! * [`fit_single_norm`] — learned exponent `p`, unconstrained first-order
//!   fit over `(A, mu, p)` with `Lambda = A A^T`,
//! * [`fit_multi_norm`] — one exponent and diagonal scaling per orthant of a
//!   learned rotation.
//!
//! [`recover_ball_dc`] / [`recover_ball_single`] / [`recover_region`] turn
//! fitted states into explicit covering sets with radius 1.

mod dc;
mod multi;
mod single;

pub use dc::{
    dc_objective, dca_subgradient, fit_convex_relaxation, fit_dca, point_scores,
    recover_ball_dc, DcState, DcaOptions, RelaxOptions, Subgradient,
};
pub use multi::{
    fit_multi_norm, multi_norm_loss, recover_region, MultiNormGrads, MultiNormState,
};
pub use single::{
    fit_single_norm, recover_ball_single, single_norm_loss, FirstOrderOptions, SingleNormGrads,
    SingleNormState,
};

use crate::error::Result;
use crate::numkernel::linalg::{inv_sqrt_spd, sample_covariance, Matrix};

/// Ridge applied to `Lambda = A A^T` so the log-determinant stays finite when
/// the factor is nearly singular early in training.
pub const LAMBDA_RIDGE: f64 = 1e-8;

/// Shared initialization for every fit: the inverse symmetric square root of
/// the sample covariance (ridge 1e-6) and the matching shift, so solvers
/// start at the empirical-covariance baseline.
pub fn whitening_init(points: &Matrix) -> Result<(Matrix, Vec<f64>, Vec<f64>)> {
    let (mean, cov) = sample_covariance(points, true)?;
    let lambda0 = inv_sqrt_spd(&cov, 1e-6)?;
    let mut eta0 = lambda0.matvec(&mean);
    for v in &mut eta0 {
        *v = -*v;
    }
    Ok((lambda0, eta0, mean))
}
