//! Rank statistics shared by every objective: the r-th largest score, the
//! mean of the top r, the equivalent breakpoint-scan minimization, and the
//! finite-sample conformal quantile.

use crate::error::{Error, Result};

fn check_scores(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::EmptyInput("score vector"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("score vector"));
    }
    Ok(())
}

fn check_rank(r: usize, n: usize) -> Result<()> {
    if r == 0 || r > n {
        return Err(Error::RankOutOfRange { r, n });
    }
    Ok(())
}

/// Indices of the `r` largest values, ordered by decreasing value with ties
/// broken by the smallest original index. The deterministic tie rule keeps
/// subgradient selection in the solvers reproducible.
pub fn top_r_indices(values: &[f64], r: usize) -> Result<Vec<usize>> {
    check_scores(values)?;
    check_rank(r, values.len())?;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_unstable_by(|&i, &j| {
        values[j]
            .partial_cmp(&values[i])
            .unwrap()
            .then(i.cmp(&j))
    });
    order.truncate(r);
    Ok(order)
}

/// The r-th largest value and the index attaining it.
pub fn kth_largest(values: &[f64], r: usize) -> Result<(f64, usize)> {
    let top = top_r_indices(values, r)?;
    let idx = top[r - 1];
    Ok((values[idx], idx))
}

/// Average of the `r` largest values.
pub fn mean_top_r(values: &[f64], r: usize) -> Result<f64> {
    let top = top_r_indices(values, r)?;
    Ok(top.iter().map(|&i| values[i]).sum::<f64>() / r as f64)
}

/// Evaluates `min over nu of (1/r) sum max(v_i - nu, 0) + nu` by scanning the
/// candidate breakpoints `nu in {v_i}`. The minimum equals [`mean_top_r`];
/// the scan serves as an independent route to the same quantity.
pub fn topr_via_minimization(values: &[f64], r: usize) -> Result<f64> {
    check_scores(values)?;
    check_rank(r, values.len())?;
    let mut best = f64::INFINITY;
    for &nu in values {
        let hinge: f64 = values.iter().map(|v| (v - nu).max(0.0)).sum();
        best = best.min(hinge / r as f64 + nu);
    }
    Ok(best)
}

/// Finite-sample conformal quantile: the `ceil((1 - alpha) (n + 1))`-th
/// smallest score. When that rank exceeds `n` (calibration set too small for
/// the requested level) the quantile is `+inf`, which yields the trivially
/// valid all-space prediction set.
pub fn conformal_quantile(scores: &[f64], alpha: f64) -> Result<f64> {
    check_scores(scores)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha = {alpha} must lie in (0, 1)"
        )));
    }
    let n = scores.len();
    let rank = conformal_rank(alpha, n);
    if rank > n {
        log::warn!(
            "conformal_quantile: rank {rank} exceeds {n} calibration scores; returning +inf"
        );
        return Ok(f64::INFINITY);
    }
    let mut sorted = scores.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(sorted[rank - 1])
}

/// `ceil((1 - alpha)(n + 1))` with a guard against floating-point rank
/// arithmetic landing an ulp above an exact integer.
pub fn conformal_rank(alpha: f64, n: usize) -> usize {
    let t = (1.0 - alpha) * (n as f64 + 1.0);
    ((t - 1e-9).ceil().max(1.0)) as usize
}

/// `floor(alpha * b)` with the same ulp guard, clamped to at least 1; the
/// per-batch rank used by the training losses.
pub fn batch_rank(alpha: f64, b: usize) -> usize {
    let t = alpha * b as f64;
    ((t + 1e-9).floor() as usize).max(1)
}
