//! Fixed-norm covering sets: the difference-of-convex iteration and the
//! convex relaxation, both solved with projected subgradient descent over the
//! PSD cone.
//!
//! The nonconvex objective `-log det(Lambda) + sigma_r{||Lambda y_i + eta||}`
//! splits as `f - g` with `f = -log det + r * mean_top_r` and
//! `g = (r - 1) * mean_top_{r-1}`, both convex. Each outer iteration
//! linearizes `g` at the current iterate and minimizes
//! `f(Lambda, eta) - <G_Lambda, Lambda> - <G_eta, eta>` over `Lambda >= 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{p_norm_gradient, p_norm_unchecked, PNormBall};
use crate::numkernel::linalg::{log_det, solve, sym_eig, Matrix};
use crate::orderstats::{kth_largest, top_r_indices};

use super::whitening_init;

/// Solver variables for the fixed-norm problem plus the outer objective
/// trace, which is nonincreasing up to the subproblem tolerance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DcState {
    pub lambda: Matrix,
    pub eta: Vec<f64>,
    pub objective_trace: Vec<f64>,
}

/// Subgradient of the linearized concave part.
#[derive(Debug, Clone)]
pub struct Subgradient {
    pub g_lambda: Matrix,
    pub g_eta: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DcaOptions {
    pub max_outer: usize,
    pub outer_tol: f64,
    pub max_inner: usize,
    pub inner_tol: f64,
    /// Base step length of the normalized subgradient schedule `c / sqrt(t)`.
    pub step_scale: f64,
}

impl Default for DcaOptions {
    fn default() -> Self {
        Self {
            max_outer: 100,
            outer_tol: 1e-7,
            max_inner: 5000,
            inner_tol: 1e-6,
            step_scale: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RelaxOptions {
    /// Restart rounds; each round reruns the schedule from the incumbent with
    /// a smaller base step.
    pub rounds: usize,
    pub max_inner: usize,
    pub inner_tol: f64,
    pub step_scale: f64,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        Self {
            rounds: 5,
            max_inner: 6000,
            inner_tol: 1e-9,
            step_scale: 0.1,
        }
    }
}

/// Scores `||Lambda y_i + eta||_p` for every row of `points`.
pub fn point_scores(lambda: &Matrix, eta: &[f64], points: &Matrix, p: f64) -> Vec<f64> {
    let n = points.rows();
    let mut out = Vec::with_capacity(n);
    let mut z = vec![0.0; eta.len()];
    for i in 0..n {
        let row = points.row(i);
        // z = Lambda y + eta
        for (j, zj) in z.iter_mut().enumerate() {
            let lrow = lambda.row(j);
            let mut acc = 0.0;
            for (l, yv) in lrow.iter().zip(row) {
                acc += l * yv;
            }
            *zj = eta[j] + acc;
        }
        out.push(p_norm_unchecked(&z, p));
    }
    out
}

/// `-log det(Lambda) + sigma_r{||Lambda y_i + eta||_p}`; +inf when `Lambda`
/// is singular or indefinite.
pub fn dc_objective(state: &DcState, points: &Matrix, r: usize, p: f64) -> f64 {
    let ld = match log_det(&state.lambda) {
        Ok(v) => v,
        Err(_) => return f64::INFINITY,
    };
    let scores = point_scores(&state.lambda, &state.eta, points, p);
    match kth_largest(&scores, r) {
        Ok((sr, _)) => -ld + sr,
        Err(_) => f64::INFINITY,
    }
}

/// Subgradient of `g = (r - 1) * mean_top_{r-1}{||Lambda y_i + eta||_p}`:
/// sums `g_i y_i^T` (resp. `g_i`) over the `r - 1` points whose scores reach
/// `sigma_{r-1}`, where `g_i` is the p-norm subgradient of the residual
/// (the zero vector at a zero residual).
pub fn dca_subgradient(
    state: &DcState,
    points: &Matrix,
    r: usize,
    p: f64,
) -> Result<Subgradient> {
    if r < 2 {
        return Err(Error::InvalidArgument(
            "dca_subgradient needs r >= 2 (it linearizes mean_top_{r-1})".into(),
        ));
    }
    let scores = point_scores(&state.lambda, &state.eta, points, p);
    let top = top_r_indices(&scores, r - 1)?;
    let k = state.eta.len();
    let mut g_lambda = Matrix::zeros(k, k);
    let mut g_eta = vec![0.0; k];
    for &i in &top {
        let y = points.row(i);
        let mut z = state.lambda.matvec(y);
        for (zj, e) in z.iter_mut().zip(&state.eta) {
            *zj += e;
        }
        let gi = p_norm_gradient(&z, p)?;
        for a in 0..k {
            for b in 0..k {
                g_lambda.add_to(a, b, gi[a] * y[b]);
            }
        }
        for (ge, gv) in g_eta.iter_mut().zip(&gi) {
            *ge += gv;
        }
    }
    Ok(Subgradient { g_lambda, g_eta })
}

/// Project a square matrix onto the symmetric PSD cone by eigenvalue
/// clipping at zero.
fn project_psd(m: &Matrix) -> Result<Matrix> {
    let sym = m.symmetrize();
    let (values, vectors) = sym_eig(&sym)?;
    let k = m.rows();
    let mut out = Matrix::zeros(k, k);
    for (l, &lam) in values.iter().enumerate() {
        let lam = lam.max(0.0);
        if lam == 0.0 {
            continue;
        }
        for i in 0..k {
            let vi = vectors.get(i, l);
            if vi == 0.0 {
                continue;
            }
            for j in i..k {
                out.add_to(i, j, lam * vi * vectors.get(j, l));
            }
        }
    }
    for i in 0..k {
        for j in (i + 1)..k {
            out.set(j, i, out.get(i, j));
        }
    }
    Ok(out)
}

/// Inverse of a symmetric PSD matrix with eigenvalues floored at 1e-12, so
/// the `-log det` subgradient stays usable right at the cone boundary.
fn psd_inverse_floored(m: &Matrix) -> Result<Matrix> {
    let (values, vectors) = sym_eig(m)?;
    let k = m.rows();
    let mut out = Matrix::zeros(k, k);
    for (l, &lam) in values.iter().enumerate() {
        let inv = 1.0 / lam.max(1e-12);
        for i in 0..k {
            let vi = vectors.get(i, l);
            for j in i..k {
                out.add_to(i, j, inv * vi * vectors.get(j, l));
            }
        }
    }
    for i in 0..k {
        for j in (i + 1)..k {
            out.set(j, i, out.get(i, j));
        }
    }
    Ok(out)
}

struct SubproblemResult {
    lambda: Matrix,
    eta: Vec<f64>,
}

/// Minimize `f(Lambda, eta) - <G_Lambda, Lambda> - <G_eta, eta>` over the PSD
/// cone by projected subgradient descent with step length `c / sqrt(t)` along
/// the normalized subgradient, returning the best iterate visited. The warm
/// start is always a candidate, which is what makes the outer DC objective
/// monotone up to this solver's tolerance.
fn solve_dc_subproblem(
    points: &Matrix,
    r: usize,
    p: f64,
    lambda0: &Matrix,
    eta0: &[f64],
    linear: &Subgradient,
    opts: &DcaOptions,
) -> Result<SubproblemResult> {
    let k = eta0.len();
    let objective = |lam: &Matrix, eta: &[f64]| -> f64 {
        let ld = match log_det(lam) {
            Ok(v) => v,
            Err(_) => return f64::INFINITY,
        };
        let scores = point_scores(lam, eta, points, p);
        let top = match top_r_indices(&scores, r) {
            Ok(t) => t,
            Err(_) => return f64::INFINITY,
        };
        let sum_top: f64 = top.iter().map(|&i| scores[i]).sum();
        let mut lin = 0.0;
        for i in 0..k {
            for j in 0..k {
                lin += linear.g_lambda.get(i, j) * lam.get(i, j);
            }
        }
        lin += linear.g_eta.iter().zip(eta).map(|(a, b)| a * b).sum::<f64>();
        -ld + sum_top - lin
    };

    let mut lambda = project_psd(lambda0)?;
    let mut eta = eta0.to_vec();
    let mut best_obj = objective(&lambda, &eta);
    let mut best = (lambda.clone(), eta.clone());
    let scale0 = opts.step_scale * (1.0 + lambda.frob_norm() + {
        let e: f64 = eta.iter().map(|v| v * v).sum::<f64>();
        e.sqrt()
    });

    // Three rounds of the c/sqrt(t) schedule with shrinking base step, each
    // warm-started from the incumbent; the total iteration budget is capped
    // by max_inner.
    const ROUNDS: usize = 3;
    let round_iters = (opts.max_inner / ROUNDS).max(1);
    'rounds: for round in 0..ROUNDS {
        let step_base = scale0 / 5.0f64.powi(round as i32);
        lambda = best.0.clone();
        eta = best.1.clone();
        let mut window_best = best_obj;
        for t in 1..=round_iters {
            // Subgradient of the subproblem objective at the current iterate.
            let inv = psd_inverse_floored(&lambda)?;
            let scores = point_scores(&lambda, &eta, points, p);
            let top = top_r_indices(&scores, r)?;
            let mut g_lam = inv.scale(-1.0);
            let mut g_eta = vec![0.0; k];
            for &i in &top {
                let y = points.row(i);
                let mut z = lambda.matvec(y);
                for (zj, e) in z.iter_mut().zip(&eta) {
                    *zj += e;
                }
                let gi = p_norm_gradient(&z, p)?;
                for a in 0..k {
                    for b in 0..k {
                        g_lam.add_to(a, b, gi[a] * y[b]);
                    }
                }
                for (ge, gv) in g_eta.iter_mut().zip(&gi) {
                    *ge += gv;
                }
            }
            g_lam.axpy(-1.0, &linear.g_lambda);
            for (ge, gv) in g_eta.iter_mut().zip(&linear.g_eta) {
                *ge -= gv;
            }
            let g_lam = g_lam.symmetrize();
            let norm = (g_lam.frob_norm().powi(2)
                + g_eta.iter().map(|v| v * v).sum::<f64>())
            .sqrt();
            if norm == 0.0 {
                break 'rounds;
            }
            let step = step_base / (t as f64).sqrt() / norm;
            lambda = project_psd(&{
                let mut next = lambda.clone();
                next.axpy(-step, &g_lam);
                next
            })?;
            for (e, g) in eta.iter_mut().zip(&g_eta) {
                *e -= step * g;
            }
            let obj = objective(&lambda, &eta);
            if obj < best_obj {
                best_obj = obj;
                best = (lambda.clone(), eta.clone());
            }
            if t % 25 == 0 {
                let improvement = window_best - best_obj;
                if improvement.is_finite()
                    && improvement <= opts.inner_tol * best_obj.abs().max(1.0)
                {
                    break;
                }
                window_best = best_obj;
            }
        }
    }
    Ok(SubproblemResult {
        lambda: best.0,
        eta: best.1,
    })
}

fn check_points(points: &Matrix) -> Result<()> {
    if points.rows() == 0 {
        return Err(Error::EmptyInput("points"));
    }
    if !points.all_finite() {
        return Err(Error::NonFinite("points"));
    }
    Ok(())
}

/// Difference-of-convex fit of the fixed-norm covering set. Starts from the
/// empirical-covariance whitening unless an initial `(Lambda, eta)` is given.
pub fn fit_dca(
    points: &Matrix,
    r: usize,
    p: f64,
    init: Option<(Matrix, Vec<f64>)>,
    opts: &DcaOptions,
) -> Result<DcState> {
    check_points(points)?;
    let n = points.rows();
    if r < 2 || r >= n {
        return Err(Error::InvalidArgument(format!(
            "fit_dca needs 2 <= r < n, got r = {r}, n = {n}"
        )));
    }
    let (lambda0, eta0) = match init {
        Some((l, e)) => (l, e),
        None => {
            let (l, e, _) = whitening_init(points)?;
            (l, e)
        }
    };
    let mut state = DcState {
        lambda: project_psd(&lambda0)?,
        eta: eta0,
        objective_trace: Vec::new(),
    };
    let mut prev = dc_objective(&state, points, r, p);
    state.objective_trace.push(prev);
    for _outer in 0..opts.max_outer {
        let lin = dca_subgradient(&state, points, r, p)?;
        let sub = solve_dc_subproblem(points, r, p, &state.lambda, &state.eta, &lin, opts)?;
        state.lambda = sub.lambda;
        state.eta = sub.eta;
        let obj = dc_objective(&state, points, r, p);
        state.objective_trace.push(obj);
        if obj < -1e12 {
            return Err(Error::Degenerate(
                "DC objective diverged towards -inf".into(),
            ));
        }
        if (prev - obj).abs() <= opts.outer_tol * prev.abs().max(1.0) {
            break;
        }
        prev = obj;
    }
    Ok(state)
}

/// Convex relaxation: minimize
/// `-log det(Lambda) + sum_i max(||Lambda y_i + eta|| - nu, 0) + r nu`
/// over the PSD cone by the same projected scheme, with restart rounds of
/// decreasing base step so two random starts land on matching objectives.
pub fn fit_convex_relaxation(
    points: &Matrix,
    r: usize,
    p: f64,
    init: Option<(Matrix, Vec<f64>)>,
    opts: &RelaxOptions,
) -> Result<DcState> {
    check_points(points)?;
    let n = points.rows();
    if r == 0 || r > n {
        return Err(Error::RankOutOfRange { r, n });
    }
    let k = points.cols();
    let (lambda0, eta0) = match init {
        Some((l, e)) => (l, e),
        None => {
            let (l, e, _) = whitening_init(points)?;
            (l, e)
        }
    };
    let mut lambda = project_psd(&lambda0)?;
    let mut eta = eta0;
    let scores0 = point_scores(&lambda, &eta, points, p);
    let mut nu = kth_largest(&scores0, r)?.0;

    let objective = |lam: &Matrix, eta: &[f64], nu: f64| -> f64 {
        let ld = match log_det(lam) {
            Ok(v) => v,
            Err(_) => return f64::INFINITY,
        };
        let scores = point_scores(lam, eta, points, p);
        let hinge: f64 = scores.iter().map(|s| (s - nu).max(0.0)).sum();
        -ld + hinge + r as f64 * nu
    };

    let mut best_obj = objective(&lambda, &eta, nu);
    let mut trace = vec![best_obj];
    let mut best = (lambda.clone(), eta.clone(), nu);

    for round in 0..opts.rounds {
        let step_base = opts.step_scale / 3.0f64.powi(round as i32)
            * (1.0 + lambda.frob_norm());
        let mut window_best = best_obj;
        for t in 1..=opts.max_inner {
            let inv = psd_inverse_floored(&lambda)?;
            let scores = point_scores(&lambda, &eta, points, p);
            let mut g_lam = inv.scale(-1.0);
            let mut g_eta = vec![0.0; k];
            let mut active = 0usize;
            for (i, &s) in scores.iter().enumerate() {
                if s > nu {
                    active += 1;
                    let y = points.row(i);
                    let mut z = lambda.matvec(y);
                    for (zj, e) in z.iter_mut().zip(&eta) {
                        *zj += e;
                    }
                    let gi = p_norm_gradient(&z, p)?;
                    for a in 0..k {
                        for b in 0..k {
                            g_lam.add_to(a, b, gi[a] * y[b]);
                        }
                    }
                    for (ge, gv) in g_eta.iter_mut().zip(&gi) {
                        *ge += gv;
                    }
                }
            }
            let g_nu = r as f64 - active as f64;
            let g_lam = g_lam.symmetrize();
            let norm = (g_lam.frob_norm().powi(2)
                + g_eta.iter().map(|v| v * v).sum::<f64>()
                + g_nu * g_nu)
                .sqrt();
            if norm == 0.0 {
                break;
            }
            let step = step_base / (t as f64).sqrt() / norm;
            lambda = project_psd(&{
                let mut next = lambda.clone();
                next.axpy(-step, &g_lam);
                next
            })?;
            for (e, g) in eta.iter_mut().zip(&g_eta) {
                *e -= step * g;
            }
            nu -= step * g_nu;
            let obj = objective(&lambda, &eta, nu);
            if obj < best_obj {
                best_obj = obj;
                best = (lambda.clone(), eta.clone(), nu);
            }
            if t % 50 == 0 {
                let improvement = window_best - best_obj;
                if improvement.is_finite()
                    && improvement <= opts.inner_tol * best_obj.abs().max(1.0)
                {
                    break;
                }
                window_best = best_obj;
            }
        }
        lambda = best.0.clone();
        eta = best.1.clone();
        nu = best.2;
        trace.push(best_obj);
    }

    Ok(DcState {
        lambda: best.0,
        eta: best.1,
        objective_trace: trace,
    })
}

/// Recover the explicit covering set from a fixed-norm fit:
/// `M = Lambda / sigma_r{scores}`, `mu = -Lambda^{-1} eta`, radius 1.
/// The set contains at least `n - r + 1` of the fitted points by
/// construction, exactly that many when scores are distinct.
pub fn recover_ball_dc(state: &DcState, points: &Matrix, r: usize, p: f64) -> Result<PNormBall> {
    let scores = point_scores(&state.lambda, &state.eta, points, p);
    let (sigma_r, _) = kth_largest(&scores, r)?;
    if sigma_r <= 0.0 {
        return Err(Error::Degenerate("sigma_r = 0 in ball recovery".into()));
    }
    let m = state.lambda.scale(1.0 / sigma_r);
    let mut mu = solve(&state.lambda, &state.eta)?;
    for v in &mut mu {
        *v = -*v;
    }
    let mut ball = PNormBall {
        p,
        m,
        mu,
        radius: 1.0,
    };
    // The radius re-evaluated under the recovered parameters is 1 up to
    // rounding; pinning it to the r-th largest recovered score makes the
    // containment count exact on the boundary point.
    let recovered: Vec<f64> = (0..points.rows())
        .map(|i| ball.score(points.row(i)))
        .collect::<Result<_>>()?;
    ball.radius = kth_largest(&recovered, r)?.0;
    Ok(ball)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ball_log_volume;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn circle_points(n: usize) -> Matrix {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                vec![t.cos(), t.sin()]
            })
            .collect();
        Matrix::from_rows(&rows).unwrap()
    }

    fn gaussian_cloud(n: usize, cov_chol: &Matrix, rng: &mut ChaCha8Rng) -> Matrix {
        use rand_distr::StandardNormal;
        let k = cov_chol.rows();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let z: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
                cov_chol.matvec(&z)
            })
            .collect();
        Matrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn dc_objective_unit_circle() {
        let points = circle_points(16);
        let state = DcState {
            lambda: Matrix::identity(2),
            eta: vec![0.0, 0.0],
            objective_trace: vec![],
        };
        for r in [1, 4, 16] {
            assert!((dc_objective(&state, &points, r, 2.0) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dc_objective_single_point_at_origin() {
        let points = Matrix::from_rows(&[vec![0.0, 0.0]]).unwrap();
        let state = DcState {
            lambda: Matrix::identity(2),
            eta: vec![0.0, 0.0],
            objective_trace: vec![],
        };
        assert_eq!(dc_objective(&state, &points, 1, 2.0), 0.0);
    }

    #[test]
    fn dc_objective_singular_lambda_is_infinite() {
        let points = circle_points(8);
        let state = DcState {
            lambda: Matrix::zeros(2, 2),
            eta: vec![0.0, 0.0],
            objective_trace: vec![],
        };
        assert!(dc_objective(&state, &points, 2, 2.0).is_infinite());
    }

    #[test]
    fn covering_set_invariant_under_joint_scaling() {
        // The induced set {y : ||Lambda y + eta|| <= sigma_r} does not change
        // under (Lambda, eta) -> (c Lambda, c eta).
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let points = gaussian_cloud(60, &Matrix::identity(2), &mut rng);
        let state = DcState {
            lambda: Matrix::from_rows(&[vec![1.3, 0.2], vec![0.2, 0.9]]).unwrap(),
            eta: vec![0.3, -0.1],
            objective_trace: vec![],
        };
        let scaled = DcState {
            lambda: state.lambda.scale(3.7),
            eta: state.eta.iter().map(|v| 3.7 * v).collect(),
            objective_trace: vec![],
        };
        let r = 6;
        let ball_a = recover_ball_dc(&state, &points, r, 2.0).unwrap();
        let ball_b = recover_ball_dc(&scaled, &points, r, 2.0).unwrap();
        for gx in -4..=4 {
            for gy in -4..=4 {
                let y = [gx as f64 * 0.5, gy as f64 * 0.5];
                assert_eq!(ball_a.contains(&y).unwrap(), ball_b.contains(&y).unwrap());
            }
        }
        assert!(ball_a.m.sub(&ball_b.m).max_abs() < 1e-9);
    }

    #[test]
    fn dca_subgradient_p2_formula() {
        let points = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0], vec![0.3, 0.4]]).unwrap();
        let state = DcState {
            lambda: Matrix::identity(2),
            eta: vec![0.1, -0.2],
            objective_trace: vec![],
        };
        // r = 2: exactly one term, the largest score (point 0).
        let sub = dca_subgradient(&state, &points, 2, 2.0).unwrap();
        let z: [f64; 2] = [2.1, -0.2];
        let nz = (z[0] * z[0] + z[1] * z[1]).sqrt();
        let g = [z[0] / nz, z[1] / nz];
        for a in 0..2 {
            for b in 0..2 {
                let expected = g[a] * points.get(0, b);
                assert!((sub.g_lambda.get(a, b) - expected).abs() < 1e-12);
            }
            assert!((sub.g_eta[a] - g[a]).abs() < 1e-12);
        }
    }

    #[test]
    fn dca_subgradient_zero_residuals() {
        let points = Matrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let state = DcState {
            lambda: Matrix::identity(2),
            eta: vec![0.0, 0.0],
            objective_trace: vec![],
        };
        let sub = dca_subgradient(&state, &points, 3, 2.0).unwrap();
        assert_eq!(sub.g_lambda.max_abs(), 0.0);
        assert!(sub.g_eta.iter().all(|&v| v == 0.0));
        assert!(dca_subgradient(&state, &points, 1, 2.0).is_err());
    }

    #[test]
    fn fit_dca_gaussian_monotone_and_contains() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let points = gaussian_cloud(200, &Matrix::identity(2), &mut rng);
        let r = 20;
        let state = fit_dca(&points, r, 2.0, None, &DcaOptions::default()).unwrap();
        for w in state.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-6, "outer trace must be nonincreasing");
        }
        let ball = recover_ball_dc(&state, &points, r, 2.0).unwrap();
        let inside = (0..points.rows())
            .filter(|&i| ball.contains(points.row(i)).unwrap())
            .count();
        assert!(inside >= points.rows() - r + 1);
    }

    #[test]
    fn fit_dca_equivariant_under_prewhitening() {
        // Fitting whitened data with a correspondingly transformed start
        // reaches the same covering set, compared as membership indicators.
        // For p = 2 the set {||L0 S^{-1} y' + e0|| <= c} has the PSD
        // representative (polar factor) as its transformed start.
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let chol = Matrix::from_rows(&[vec![1.5, 0.0], vec![0.6, 0.4]]).unwrap();
        let points = gaussian_cloud(80, &chol, &mut rng);
        let s = Matrix::from_rows(&[vec![0.5, 0.1], vec![0.0, 2.0]]).unwrap();
        let n = points.rows();
        let transformed_rows: Vec<Vec<f64>> =
            (0..n).map(|i| s.matvec(points.row(i))).collect();
        let transformed = Matrix::from_rows(&transformed_rows).unwrap();

        let r = 8;
        let (l0, e0, _) = whitening_init(&points).unwrap();
        let s_inv = crate::numkernel::linalg::inverse(&s).unwrap();
        let a = l0.matmul(&s_inv);
        let gram = a.transpose().matmul(&a);
        let (vals, vecs) = sym_eig(&gram).unwrap();
        let mut polar = Matrix::zeros(2, 2);
        for l in 0..2 {
            let sq = vals[l].max(0.0).sqrt();
            for i in 0..2 {
                for j in 0..2 {
                    polar.add_to(i, j, sq * vecs.get(i, l) * vecs.get(j, l));
                }
            }
        }
        // unitary factor U = A polar^{-1}; eta transforms by U^T.
        let u = a.matmul(&crate::numkernel::linalg::inverse(&polar).unwrap());
        let e0t = u.matvec_t(&e0);
        let opts = DcaOptions::default();
        let raw = fit_dca(&points, r, 2.0, Some((l0.clone(), e0.clone())), &opts).unwrap();
        let trans = fit_dca(&transformed, r, 2.0, Some((polar, e0t)), &opts).unwrap();

        let ball_raw = recover_ball_dc(&raw, &points, r, 2.0).unwrap();
        let ball_trans = recover_ball_dc(&trans, &transformed, r, 2.0).unwrap();
        let agree = (0..n)
            .filter(|&i| {
                ball_raw.contains(points.row(i)).unwrap()
                    == ball_trans.contains(transformed.row(i)).unwrap()
            })
            .count();
        assert!(agree >= n - 2, "membership indicators disagree on {}", n - agree);
    }

    #[test]
    fn fit_dca_correlated_gaussian_matches_covariance_shape() {
        // Strongly correlated Gaussian: the fitted ellipse's axis ratio stays
        // within 25% of the covariance ellipse's.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        // Cholesky factor of [[1, 0.9], [0.9, 1]].
        let chol =
            Matrix::from_rows(&[vec![1.0, 0.0], vec![0.9, (1.0f64 - 0.81).sqrt()]]).unwrap();
        let points = gaussian_cloud(300, &chol, &mut rng);
        let r = 30; // coverage 0.90
        let state = fit_dca(&points, r, 2.0, None, &DcaOptions::default()).unwrap();
        let ball = recover_ball_dc(&state, &points, r, 2.0).unwrap();
        let (vals, _) = sym_eig(&ball.m.transpose().matmul(&ball.m)).unwrap();
        let fitted_ratio = (vals[1] / vals[0]).sqrt();
        let expected_ratio = (1.9f64 / 0.1).sqrt();
        assert!(
            (fitted_ratio - expected_ratio).abs() / expected_ratio < 0.25,
            "axis ratio {fitted_ratio} vs covariance {expected_ratio}"
        );
    }

    #[test]
    fn relaxation_symmetric_data_centers_at_origin() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let half = gaussian_cloud(60, &Matrix::identity(2), &mut rng);
        let mut rows = Vec::new();
        for i in 0..half.rows() {
            rows.push(half.row(i).to_vec());
            rows.push(half.row(i).iter().map(|v| -v).collect());
        }
        let points = Matrix::from_rows(&rows).unwrap();
        let state = fit_convex_relaxation(
            &points,
            12,
            2.0,
            Some((Matrix::identity(2), vec![0.0, 0.0])),
            &RelaxOptions::default(),
        )
        .unwrap();
        let eta_norm = state.eta.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(eta_norm < 0.05, "eta should stay near zero, got {eta_norm}");
    }

    #[test]
    fn relaxation_two_starts_agree_and_trace_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let points = gaussian_cloud(100, &Matrix::identity(2), &mut rng);
        let opts = RelaxOptions::default();
        let a = fit_convex_relaxation(&points, 10, 2.0, None, &opts).unwrap();
        let init_b = (
            Matrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 0.5]]).unwrap(),
            vec![0.4, -0.6],
        );
        let b = fit_convex_relaxation(&points, 10, 2.0, Some(init_b), &opts).unwrap();
        let fa = *a.objective_trace.last().unwrap();
        let fb = *b.objective_trace.last().unwrap();
        assert!(
            (fa - fb).abs() <= 1e-4 * fa.abs().max(1.0),
            "convexity witness: {fa} vs {fb}"
        );
        for w in a.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
    }

    #[test]
    fn relaxation_volume_dominates_dca_on_exponential_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| {
                let e1: f64 = rng.random::<f64>();
                let e2: f64 = rng.random::<f64>();
                vec![-e1.ln(), -e2.ln()]
            })
            .collect();
        let points = Matrix::from_rows(&rows).unwrap();
        let r = 40; // coverage 0.80
        let p = 10.0;
        let dca = fit_dca(&points, r, p, None, &DcaOptions::default()).unwrap();
        let relax = fit_convex_relaxation(&points, r, p, None, &RelaxOptions::default()).unwrap();
        let vol_dca = ball_log_volume(&recover_ball_dc(&dca, &points, r, p).unwrap()).unwrap();
        let vol_relax =
            ball_log_volume(&recover_ball_dc(&relax, &points, r, p).unwrap()).unwrap();
        assert!(
            vol_relax >= vol_dca - 1e-9,
            "relaxation volume {vol_relax} vs DCA {vol_dca}"
        );
    }

    #[test]
    fn nu_breakpoint_scan_matches_order_statistics() {
        // The inner reformulation of mean_top_r puts its minimizer at
        // sigma_r: the max for r = 1 and the min for r = n.
        let scores: [f64; 5] = [5.0, 1.0, 4.0, 2.5, 3.0];
        let scan = |r: usize| -> f64 {
            let mut best = (f64::INFINITY, f64::NAN);
            for &nu in &scores {
                let obj: f64 =
                    scores.iter().map(|s| (s - nu).max(0.0)).sum::<f64>() / r as f64 + nu;
                if obj < best.0 {
                    best = (obj, nu);
                }
            }
            best.1
        };
        assert_eq!(scan(1), 5.0);
        assert_eq!(scan(scores.len()), 1.0);
    }

    #[test]
    fn recover_ball_scaling_cancels() {
        let points = circle_points(12);
        let state = DcState {
            lambda: Matrix::identity(2).scale(2.0),
            eta: vec![0.0, 0.0],
            objective_trace: vec![],
        };
        let ball = recover_ball_dc(&state, &points, 1, 2.0).unwrap();
        assert!(ball.m.sub(&Matrix::identity(2)).max_abs() < 1e-12);
        assert!(ball.mu.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn recover_ball_exact_containment_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let points = gaussian_cloud(150, &Matrix::identity(2), &mut rng);
        let state = DcState {
            lambda: Matrix::from_rows(&[vec![1.1, 0.1], vec![0.1, 0.8]]).unwrap(),
            eta: vec![0.05, -0.02],
            objective_trace: vec![],
        };
        let r = 15;
        let ball = recover_ball_dc(&state, &points, r, 2.0).unwrap();
        let inside = (0..points.rows())
            .filter(|&i| ball.contains(points.row(i)).unwrap())
            .count();
        assert_eq!(inside, points.rows() - r + 1);
    }
}
