//! Multi-norm covering sets: a learned global rotation with one exponent and
//! one diagonal scaling per orthant of the rotated space.
//!
//! The unconstrained loss over `(Q_raw, {D_raw_j}, {p_raw_j}, mu)` is
//!
//! ```text
//! k log sigma_r{ d(y_i, mu) } + log( (1/m) sum_j lambda(B_{|p_j|}(1)) / det(|D_j|) )
//! ```
//!
//! where the rotation is extracted from `Q_raw` by QR with the determinant
//! sign fix, and `d` is the orthant-wise pseudo-distance. Orthants that
//! receive no point contribute value but no gradient, so their parameters
//! stay at initialization; they are reported back with the diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    clamp_exponent, multinorm_log_volume, orthant_index, p_norm_dp, p_norm_gradient,
    p_norm_unchecked, unit_pball_log_volume_dp, MultiNormRegion, P_MAX, P_MIN,
};
use crate::numkernel::linalg::{
    qr_rotation_full, sample_covariance, sym_eig, upper_triangular_inverse, Matrix, QrRotation,
};
use crate::numkernel::optim::{cosine_annealing_lr, AdamState};
use crate::orderstats::kth_largest;

use super::single::FirstOrderOptions;

/// Numerical floor for the effective diagonal scalings `|D_raw|`, keeping the
/// log-determinant finite if an entry crosses zero mid-optimization.
const D_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiNormState {
    /// Pre-QR rotation parameters.
    pub q_raw: Matrix,
    /// Per-orthant diagonal parameters, used as `|d_raw|`.
    pub d_raw: Vec<Vec<f64>>,
    /// Per-orthant exponent parameters, used as `|p_raw|` clamped.
    pub p_raw: Vec<f64>,
    pub mu: Vec<f64>,
    pub objective_trace: Vec<f64>,
}

impl MultiNormState {
    pub fn orthants(&self) -> usize {
        self.d_raw.len()
    }

    pub fn effective_exponents(&self) -> Vec<f64> {
        self.p_raw.iter().map(|&p| clamp_exponent(p)).collect()
    }

    pub fn effective_scalings(&self) -> Vec<Vec<f64>> {
        self.d_raw
            .iter()
            .map(|d| d.iter().map(|v| v.abs().max(D_FLOOR)).collect())
            .collect()
    }

    /// Effective region with radius-1 semantics (unnormalized by sigma_r).
    pub fn region(&self) -> Result<MultiNormRegion> {
        let rotation = qr_rotation_full(&self.q_raw)?.rotation;
        let region = MultiNormRegion {
            rotation,
            scalings: self.effective_scalings(),
            exponents: self.effective_exponents(),
            mu: self.mu.clone(),
        };
        region.validate()?;
        Ok(region)
    }
}

#[derive(Debug, Clone)]
pub struct MultiNormGrads {
    pub q_raw: Matrix,
    pub d_raw: Vec<Vec<f64>>,
    pub p_raw: Vec<f64>,
    pub mu: Vec<f64>,
    /// Orthants that received no point in this evaluation (parameters frozen).
    pub empty_orthants: Vec<usize>,
}

fn p_raw_chain(p_raw: f64) -> f64 {
    let a = p_raw.abs();
    if a <= P_MIN || a >= P_MAX {
        0.0
    } else {
        p_raw.signum()
    }
}

/// Reverse-mode pass through the QR rotation extraction: given the loss
/// gradient with respect to the rotation, produce the gradient with respect
/// to the raw square matrix. Uses `A = Q R`, `Q^T dQ` antisymmetric and
/// `dR R^{-1}` upper triangular, which gives
/// `dL/dA = Q tril_-(B - B^T) R^{-T}` with `B = Q^T dL/dQ`.
fn qr_rotation_backward(factors: &QrRotation, d_rotation: &Matrix) -> Result<Matrix> {
    let k = d_rotation.rows();
    // rotation = S q with S = diag(+-1, 1, ..., 1); undo the sign fix.
    let mut d_q = d_rotation.clone();
    if factors.flipped {
        for j in 0..k {
            let v = d_q.get(0, j);
            d_q.set(0, j, -v);
        }
    }
    let b = factors.q.transpose().matmul(&d_q);
    let mut p = Matrix::zeros(k, k);
    for i in 0..k {
        for j in 0..i {
            p.set(i, j, b.get(i, j) - b.get(j, i));
        }
    }
    let r_inv = upper_triangular_inverse(&factors.r)?;
    Ok(factors.q.matmul(&p).matmul(&r_inv.transpose()))
}

/// Loss and analytic gradients of the multi-norm objective.
pub fn multi_norm_loss(
    state: &MultiNormState,
    points: &Matrix,
    r: usize,
) -> Result<(f64, MultiNormGrads)> {
    let k = points.cols();
    let m = state.orthants();
    if m != (1usize << k) || state.p_raw.len() != m || state.mu.len() != k {
        return Err(Error::ShapeMismatch(format!(
            "multi_norm_loss: need 2^{k} = {} orthants, state has {m}",
            1usize << k
        )));
    }
    let factors = qr_rotation_full(&state.q_raw)?;
    let rotation = &factors.rotation;
    let scalings = state.effective_scalings();
    let exponents = state.effective_exponents();

    let n = points.rows();
    let mut distances = Vec::with_capacity(n);
    let mut assigned = Vec::with_capacity(n);
    let mut occupied = vec![false; m];
    for i in 0..n {
        let w: Vec<f64> = points
            .row(i)
            .iter()
            .zip(&state.mu)
            .map(|(y, mu)| y - mu)
            .collect();
        let z = rotation.matvec(&w);
        let j = orthant_index(&z);
        occupied[j] = true;
        let u: Vec<f64> = scalings[j].iter().zip(&w).map(|(d, wi)| d * wi).collect();
        distances.push(p_norm_unchecked(&rotation.matvec(&u), exponents[j]));
        assigned.push(j);
    }
    let (sigma_r, idx) = kth_largest(&distances, r)?;
    if sigma_r <= 0.0 {
        return Err(Error::Degenerate(
            "sigma_r = 0: selected multi-norm distances vanish".into(),
        ));
    }

    let region = MultiNormRegion {
        rotation: rotation.clone(),
        scalings: scalings.clone(),
        exponents: exponents.clone(),
        mu: state.mu.clone(),
    };
    let volume = multinorm_log_volume(&region)?;
    let loss = k as f64 * sigma_r.ln() + volume;
    if !loss.is_finite() {
        return Err(Error::NonFinite("multi_norm_loss"));
    }

    // Volume-term softmax weights over orthants.
    let mut terms = Vec::with_capacity(m);
    for (d, &p) in scalings.iter().zip(&exponents) {
        let log_det_d: f64 = d.iter().map(|v| v.ln()).sum();
        terms.push(crate::geometry::unit_pball_log_volume(p, k)? - log_det_d);
    }
    let max_term = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = terms.iter().map(|t| (t - max_term).exp()).sum();
    let weights: Vec<f64> = terms.iter().map(|t| (t - max_term).exp() / total).collect();

    let mut d_d: Vec<Vec<f64>> = scalings
        .iter()
        .enumerate()
        .map(|(j, d)| d.iter().map(|&v| -weights[j] / v).collect())
        .collect();
    let mut d_p: Vec<f64> = exponents
        .iter()
        .enumerate()
        .map(|(j, &p)| weights[j] * unit_pball_log_volume_dp(p, k).unwrap_or(0.0))
        .collect();

    // sigma_r term through the attaining sample.
    let coef = k as f64 / sigma_r;
    let j_star = assigned[idx];
    let w: Vec<f64> = points
        .row(idx)
        .iter()
        .zip(&state.mu)
        .map(|(y, mu)| y - mu)
        .collect();
    let u: Vec<f64> = scalings[j_star].iter().zip(&w).map(|(d, wi)| d * wi).collect();
    let z = rotation.matvec(&u);
    let g = p_norm_gradient(&z, exponents[j_star])?;
    let rt_g = rotation.matvec_t(&g);

    let d_rotation = Matrix::outer(&g, &u).scale(coef);
    for (l, dd) in d_d[j_star].iter_mut().enumerate() {
        *dd += coef * rt_g[l] * w[l];
    }
    let d_mu: Vec<f64> = scalings[j_star]
        .iter()
        .zip(&rt_g)
        .map(|(d, rg)| -coef * d * rg)
        .collect();
    d_p[j_star] += coef * p_norm_dp(&z, exponents[j_star])?;

    // Chain rules into the raw parameters.
    let d_q_raw = qr_rotation_backward(&factors, &d_rotation)?;
    let mut empty = Vec::new();
    let mut d_d_raw = Vec::with_capacity(m);
    let mut d_p_raw = Vec::with_capacity(m);
    for j in 0..m {
        if occupied[j] {
            let row: Vec<f64> = d_d[j]
                .iter()
                .zip(&state.d_raw[j])
                .map(|(g, raw)| g * raw.signum())
                .collect();
            d_d_raw.push(row);
            d_p_raw.push(d_p[j] * p_raw_chain(state.p_raw[j]));
        } else {
            empty.push(j);
            d_d_raw.push(vec![0.0; k]);
            d_p_raw.push(0.0);
        }
    }

    Ok((
        loss,
        MultiNormGrads {
            q_raw: d_q_raw,
            d_raw: d_d_raw,
            p_raw: d_p_raw,
            mu: d_mu,
            empty_orthants: empty,
        },
    ))
}

/// Fit the multi-norm covering set with Adam and cosine-annealed rates.
/// Initialization rotates to the principal axes of the sample covariance and
/// whitens each axis, identically across orthants.
pub fn fit_multi_norm(
    points: &Matrix,
    r: usize,
    opts: &FirstOrderOptions,
) -> Result<MultiNormState> {
    let n = points.rows();
    let k = points.cols();
    if n == 0 {
        return Err(Error::EmptyInput("points"));
    }
    if r == 0 || r >= n {
        return Err(Error::InvalidArgument(format!(
            "fit_multi_norm needs 1 <= r < n, got r = {r}, n = {n}"
        )));
    }
    if k > 10 {
        return Err(Error::InvalidArgument(format!(
            "fit_multi_norm: 2^{k} orthants is not practical"
        )));
    }
    let m = 1usize << k;

    let (mean, cov) = sample_covariance(points, true)?;
    let (values, vectors) = sym_eig(&cov)?;
    let scales: Vec<f64> = values.iter().map(|&l| 1.0 / l.max(1e-6).sqrt()).collect();
    let mut state = MultiNormState {
        q_raw: vectors.transpose(),
        d_raw: vec![scales; m],
        p_raw: vec![opts.p_init; m],
        mu: mean,
        objective_trace: Vec::new(),
    };

    // Warn once if the start leaves orthants without points.
    {
        let region = state.region()?;
        let mut occupied = vec![false; m];
        for i in 0..n {
            let w: Vec<f64> = points
                .row(i)
                .iter()
                .zip(&region.mu)
                .map(|(y, mu)| y - mu)
                .collect();
            occupied[orthant_index(&region.rotation.matvec(&w))] = true;
        }
        let empty = occupied.iter().filter(|&&o| !o).count();
        if empty > 0 {
            log::warn!("fit_multi_norm: {empty} of {m} orthants start empty; their parameters stay at initialization");
        }
    }

    let mut adam_q = AdamState::new(k * k);
    let mut adam_d = AdamState::new(m * k);
    let mut adam_p = AdamState::new(m);
    let mut adam_mu = AdamState::new(k);

    let (mut best_loss, _) = multi_norm_loss(&state, points, r)?;
    let mut best = state.clone();
    state.objective_trace.push(best_loss);

    for epoch in 0..opts.epochs {
        let (_, grads) = multi_norm_loss(&state, points, r)?;
        let lr_m = cosine_annealing_lr(opts.lr_matrix, epoch, opts.epochs)?;
        let lr_c = cosine_annealing_lr(opts.lr_center, epoch, opts.epochs)?;
        let lr_p = cosine_annealing_lr(opts.lr_p, epoch, opts.epochs)?;

        adam_q.step(state.q_raw.data_mut(), grads.q_raw.data(), lr_m)?;
        let mut d_flat: Vec<f64> = state.d_raw.iter().flatten().cloned().collect();
        let g_flat: Vec<f64> = grads.d_raw.iter().flatten().cloned().collect();
        adam_d.step(&mut d_flat, &g_flat, lr_m)?;
        for (j, chunk) in d_flat.chunks(k).enumerate() {
            state.d_raw[j].copy_from_slice(chunk);
        }
        adam_p.step(&mut state.p_raw, &grads.p_raw, lr_p)?;
        adam_mu.step(&mut state.mu, &grads.mu, lr_c)?;

        let (loss_after, _) = multi_norm_loss(&state, points, r)?;
        state.objective_trace.push(loss_after);
        if loss_after < best_loss {
            best_loss = loss_after;
            best = MultiNormState {
                objective_trace: Vec::new(),
                ..state.clone()
            };
        }
    }
    best.objective_trace = state.objective_trace;
    Ok(best)
}

/// Covering region of a multi-norm fit: scalings divided by the fitted
/// sigma_r so the unit level set contains at least `n - r + 1` points.
pub fn recover_region(
    state: &MultiNormState,
    points: &Matrix,
    r: usize,
) -> Result<MultiNormRegion> {
    let mut region = state.region()?;
    let distances: Vec<f64> = (0..points.rows())
        .map(|i| crate::geometry::multinorm_distance(points.row(i), &region))
        .collect::<Result<_>>()?;
    let (sigma_r, _) = kth_largest(&distances, r)?;
    if sigma_r <= 0.0 {
        return Err(Error::Degenerate("sigma_r = 0 in region recovery".into()));
    }
    for d in &mut region.scalings {
        for v in d {
            *v /= sigma_r;
        }
    }
    Ok(region)
}
