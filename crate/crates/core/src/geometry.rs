//! p-norm geometry: quasi-norm evaluation with analytic gradients, norm-ball
//! and multi-norm region types, exact log-volumes, and a Monte Carlo volume
//! estimator used as an independent oracle in tests.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::linalg::{log_det, Matrix};
use crate::numkernel::special::{digamma, ln_gamma};

/// Exponent bounds applied inside all solvers. They keep the gamma terms and
/// the factored p-norm finite; learned exponents in practice stay well inside
/// (roughly 0.5 to 8).
pub const P_MIN: f64 = 0.05;
pub const P_MAX: f64 = 50.0;

/// Clamp an unconstrained exponent into the supported range, after taking the
/// absolute value used by the unconstrained parameterizations.
pub fn clamp_exponent(p_raw: f64) -> f64 {
    p_raw.abs().clamp(P_MIN, P_MAX)
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("exponent p = {p} must be > 0")));
    }
    Ok(())
}

/// p-(quasi-)norm of a vector for any p > 0, in the overflow-safe factored
/// form `s * (sum (|v_i|/s)^p)^(1/p)` with `s = max |v_i|`.
pub fn p_norm(v: &[f64], p: f64) -> Result<f64> {
    check_p(p)?;
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("p_norm input"));
    }
    Ok(p_norm_unchecked(v, p))
}

#[inline]
pub(crate) fn p_norm_unchecked(v: &[f64], p: f64) -> f64 {
    let s = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if s == 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for x in v {
        let u = x.abs() / s;
        if u > 0.0 {
            acc += u.powf(p);
        }
    }
    s * acc.powf(1.0 / p)
}

/// Gradient of `v -> ||v||_p` where it is differentiable:
/// `g_j = |v_j|^(p-1) sgn(v_j) / ||v||_p^(p-1)`, evaluated in factored form.
/// The zero vector returns the zero subgradient, and for p < 1 coordinates
/// that are exactly zero contribute zero.
pub fn p_norm_gradient(v: &[f64], p: f64) -> Result<Vec<f64>> {
    check_p(p)?;
    let s = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut g = vec![0.0; v.len()];
    if s == 0.0 {
        return Ok(g);
    }
    let mut acc = 0.0;
    for x in v {
        let u = x.abs() / s;
        if u > 0.0 {
            acc += u.powf(p);
        }
    }
    let denom = acc.powf((p - 1.0) / p);
    for (gi, x) in g.iter_mut().zip(v) {
        let u = x.abs() / s;
        if u > 0.0 {
            *gi = u.powf(p - 1.0) * x.signum() / denom;
        }
    }
    Ok(g)
}

/// Analytic derivative of `p -> ||v||_p` at fixed `v`. Zero coordinates drop
/// out of the series; the zero vector has derivative zero.
pub fn p_norm_dp(v: &[f64], p: f64) -> Result<f64> {
    check_p(p)?;
    let s = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if s == 0.0 {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    let mut acc_log = 0.0;
    for x in v {
        let u = x.abs() / s;
        if u > 0.0 {
            let up = u.powf(p);
            acc += up;
            acc_log += up * u.ln();
        }
    }
    let norm = s * acc.powf(1.0 / p);
    // d/dp [ln s + (1/p) ln acc] = -(ln acc)/p^2 + (1/p)(acc_log/acc).
    Ok(norm * (-acc.ln() / (p * p) + acc_log / (p * acc)))
}

/// Log Lebesgue measure of the unit p-norm ball in dimension `k`
/// (Dirichlet's formula): `k ln 2 + k lnGamma(1 + 1/p) - lnGamma(1 + k/p)`.
pub fn unit_pball_log_volume(p: f64, k: usize) -> Result<f64> {
    check_p(p)?;
    if k == 0 {
        return Err(Error::InvalidArgument("dimension k = 0".into()));
    }
    let kf = k as f64;
    let v = kf * 2.0f64.ln() + kf * ln_gamma(1.0 + 1.0 / p) - ln_gamma(1.0 + kf / p);
    if !v.is_finite() {
        return Err(Error::Saturation("unit_pball_log_volume"));
    }
    Ok(v)
}

/// Analytic `d/dp` of [`unit_pball_log_volume`]:
/// `(k/p^2) (psi(1 + k/p) - psi(1 + 1/p))`.
pub fn unit_pball_log_volume_dp(p: f64, k: usize) -> Result<f64> {
    check_p(p)?;
    if k == 0 {
        return Err(Error::InvalidArgument("dimension k = 0".into()));
    }
    let kf = k as f64;
    Ok(kf / (p * p) * (digamma(1.0 + kf / p) - digamma(1.0 + 1.0 / p)))
}

/// Norm ball `{y : ||M (y - mu)||_p <= radius}` with a PSD shape matrix `M`.
/// An unconformalized fit has radius 1; conformal calibration scales it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PNormBall {
    pub p: f64,
    pub m: Matrix,
    pub mu: Vec<f64>,
    pub radius: f64,
}

impl PNormBall {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// `||M (y - mu)||_p`.
    pub fn score(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.mu.len() {
            return Err(Error::ShapeMismatch(format!(
                "ball score: point of length {} vs dimension {}",
                y.len(),
                self.mu.len()
            )));
        }
        let centered: Vec<f64> = y.iter().zip(&self.mu).map(|(a, b)| a - b).collect();
        p_norm(&self.m.matvec(&centered), self.p)
    }

    pub fn contains(&self, y: &[f64]) -> Result<bool> {
        Ok(self.score(y)? <= self.radius)
    }
}

/// Log-volume of a norm ball: unit-ball volume minus `log det M` plus
/// `k log radius`.
pub fn ball_log_volume(ball: &PNormBall) -> Result<f64> {
    if ball.radius <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "ball radius {} must be positive",
            ball.radius
        )));
    }
    let k = ball.dim();
    Ok(unit_pball_log_volume(ball.p, k)? - log_det(&ball.m)? + k as f64 * ball.radius.ln())
}

/// Region with one exponent and one diagonal scaling per orthant of the
/// rotated space: membership is `d(y) <= 1` under [`multinorm_distance`].
/// The orthant count is always `2^k`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiNormRegion {
    /// Global rotation in SO(k).
    pub rotation: Matrix,
    /// Per-orthant diagonal scalings (each of length k, nonnegative).
    pub scalings: Vec<Vec<f64>>,
    /// Per-orthant exponents, all positive.
    pub exponents: Vec<f64>,
    pub mu: Vec<f64>,
}

impl MultiNormRegion {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn orthants(&self) -> usize {
        self.scalings.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.dim();
        let m = 1usize << k;
        if self.rotation.rows() != k || self.rotation.cols() != k {
            return Err(Error::ShapeMismatch("multi-norm rotation shape".into()));
        }
        if self.scalings.len() != m || self.exponents.len() != m {
            return Err(Error::ShapeMismatch(format!(
                "multi-norm region needs 2^k = {m} orthants, got {} scalings / {} exponents",
                self.scalings.len(),
                self.exponents.len()
            )));
        }
        if self.scalings.iter().any(|d| d.len() != k) {
            return Err(Error::ShapeMismatch("multi-norm scaling length".into()));
        }
        Ok(())
    }
}

/// Orthant index of a rotated point: bit `i` is set iff `z_i < 0` (ties at
/// zero fall in the nonnegative half).
#[inline]
pub fn orthant_index(z: &[f64]) -> usize {
    let mut idx = 0usize;
    for (i, &v) in z.iter().enumerate() {
        if v < 0.0 {
            idx |= 1 << i;
        }
    }
    idx
}

/// Pseudo-distance of the multi-norm region: rotate `y - mu`, pick the
/// orthant from the sign pattern, and evaluate
/// `||R D_j (y - mu)||_{p_j}` for that orthant.
pub fn multinorm_distance(y: &[f64], region: &MultiNormRegion) -> Result<f64> {
    region.validate()?;
    if y.len() != region.dim() {
        return Err(Error::ShapeMismatch(format!(
            "multinorm_distance: point length {} vs dimension {}",
            y.len(),
            region.dim()
        )));
    }
    let w: Vec<f64> = y.iter().zip(&region.mu).map(|(a, b)| a - b).collect();
    let z = region.rotation.matvec(&w);
    let j = orthant_index(&z);
    let scaled: Vec<f64> = region.scalings[j]
        .iter()
        .zip(&w)
        .map(|(d, wi)| d * wi)
        .collect();
    p_norm(&region.rotation.matvec(&scaled), region.exponents[j])
}

/// Log-volume of the multi-norm region: the log of the average over orthants
/// of full-ball volumes `lambda(B_{p_j}) / det(D_j)`, via log-sum-exp.
pub fn multinorm_log_volume(region: &MultiNormRegion) -> Result<f64> {
    region.validate()?;
    let k = region.dim();
    let m = region.orthants();
    let mut terms = Vec::with_capacity(m);
    for (d, &p) in region.scalings.iter().zip(&region.exponents) {
        let mut log_det_d = 0.0;
        for &v in d {
            if v <= 0.0 {
                return Err(Error::Singular);
            }
            log_det_d += v.ln();
        }
        terms.push(unit_pball_log_volume(p, k)? - log_det_d);
    }
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    Ok(max + sum.ln() - (m as f64).ln())
}

/// Monte Carlo volume estimate of a membership predicate over an axis-aligned
/// bounding box. Returns the estimate and its binomial standard error.
pub fn mc_volume_estimate<F: FnMut(&[f64]) -> bool>(
    mut membership: F,
    lo: &[f64],
    hi: &[f64],
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if lo.len() != hi.len() || lo.is_empty() {
        return Err(Error::ShapeMismatch("mc_volume_estimate box".into()));
    }
    if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
        return Err(Error::InvalidArgument("degenerate bounding box".into()));
    }
    if samples < 1000 {
        return Err(Error::InvalidArgument(format!(
            "mc_volume_estimate needs at least 1000 samples, got {samples}"
        )));
    }
    let mut box_volume = 1.0;
    for (a, b) in lo.iter().zip(hi) {
        box_volume *= b - a;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut point = vec![0.0; lo.len()];
    let mut hits = 0usize;
    for _ in 0..samples {
        for (pt, (a, b)) in point.iter_mut().zip(lo.iter().zip(hi)) {
            *pt = rng.random_range(*a..*b);
        }
        if membership(&point) {
            hits += 1;
        }
    }
    let f = hits as f64 / samples as f64;
    let se = box_volume * (f * (1.0 - f) / samples as f64).sqrt();
    Ok((box_volume * f, se))
}
