//! Dense real matrices and the factorizations the solvers rely on: Cholesky
//! log-determinants, cyclic-Jacobi symmetric eigendecomposition, Householder
//! QR with a rotation sign fix, and matrix exponential/logarithm for
//! interpolating rotations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
///
/// Serializes as a nested array of rows so fit states and checkpoints stay
/// human-readable JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<f64>>", try_from = "Vec<Vec<f64>>")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        (0..m.rows).map(|i| m.row(i).to_vec()).collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Matrix::from_rows(&rows)
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, &e) in entries.iter().enumerate() {
            m.set(i, i, e);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("matrix rows"));
        }
        let cols = rows[0].len();
        if cols == 0 {
            return Err(Error::EmptyInput("matrix columns"));
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::ShapeMismatch(format!(
                    "ragged rows: expected {cols} columns, got {}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] += v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn scale(&self, c: f64) -> Matrix {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= c;
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        out
    }

    /// `self += c * other`, in place.
    pub fn axpy(&mut self, c: f64, other: &Matrix) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = self.row(i);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            out[i] = acc;
        }
        out
    }

    /// `self^T x` without forming the transpose.
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let row = self.row(i);
            let xi = x[i];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * xi;
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.get(i, l);
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(l);
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Rank-one matrix `u v^T`.
    pub fn outer(u: &[f64], v: &[f64]) -> Matrix {
        let mut m = Matrix::zeros(u.len(), v.len());
        for (i, &ui) in u.iter().enumerate() {
            for (j, &vj) in v.iter().enumerate() {
                m.set(i, j, ui * vj);
            }
        }
        m
    }

    /// Symmetric part `(self + self^T) / 2`.
    pub fn symmetrize(&self) -> Matrix {
        debug_assert!(self.is_square());
        let mut out = self.clone();
        let n = self.rows;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (self.get(i, j) + self.get(j, i));
                out.set(i, j, v);
                out.set(j, i, v);
            }
        }
        out
    }

    pub fn max_asymmetry(&self) -> f64 {
        debug_assert!(self.is_square());
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

fn check_square(m: &Matrix, what: &'static str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::ShapeMismatch(format!(
            "{what} needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.all_finite() {
        return Err(Error::NonFinite(what));
    }
    Ok(())
}

fn check_symmetric(m: &Matrix, tol: f64, what: &'static str) -> Result<()> {
    check_square(m, what)?;
    let asym = m.max_asymmetry();
    if asym > tol * m.max_abs().max(1.0) {
        return Err(Error::NotSymmetric { max_asym: asym });
    }
    Ok(())
}

/// Cholesky factor `L` (lower triangular) of a symmetric positive definite
/// matrix, `M = L L^T`. Fails on matrices that are not positive definite.
pub fn cholesky(m: &Matrix) -> Result<Matrix> {
    check_symmetric(m, 1e-8, "cholesky")?;
    let n = m.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::NotPositiveDefinite);
                }
                l.set(i, i, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    Ok(l)
}

/// Natural log of the determinant of a symmetric positive definite matrix,
/// computed stably as twice the sum of log Cholesky pivots.
pub fn log_det(m: &Matrix) -> Result<f64> {
    let l = cholesky(m)?;
    let mut acc = 0.0;
    for i in 0..m.rows() {
        acc += l.get(i, i).ln();
    }
    Ok(2.0 * acc)
}

/// Symmetric eigendecomposition `M = V diag(lambda) V^T` via cyclic Jacobi
/// sweeps. Eigenvalues are returned in ascending order with eigenvectors as
/// the corresponding columns of `V`. Robustness over speed: every matrix in
/// this crate has `k <= 16`.
pub fn sym_eig(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    check_symmetric(m, 1e-10, "sym_eig")?;
    let n = m.rows();
    let mut a = m.symmetrize();
    let mut v = Matrix::identity(n);
    let scale = a.max_abs().max(1.0);

    for _sweep in 0..64 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(a.get(i, j).abs());
            }
        }
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // Rotate rows/columns p and q of A.
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                // Accumulate the eigenvector rotation.
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let eig: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    order.sort_by(|&i, &j| eig[i].partial_cmp(&eig[j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| eig[i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for row in 0..n {
            vectors.set(row, new_col, v.get(row, old_col));
        }
    }
    Ok((values, vectors))
}

/// Householder QR decomposition `M = Q R` of a square matrix. The boolean is
/// the sign of `det(Q)` encoded as "an odd number of reflections were used".
fn householder_qr(m: &Matrix) -> Result<(Matrix, Matrix, bool)> {
    check_square(m, "qr")?;
    let n = m.rows();
    let mut r = m.clone();
    let mut q = Matrix::identity(n);
    let mut odd_reflections = false;

    for col in 0..n.saturating_sub(1) {
        let mut norm2 = 0.0;
        for i in col..n {
            let x = r.get(i, col);
            norm2 += x * x;
        }
        let norm = norm2.sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = r.get(col, col);
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        // v = x - alpha e1, normalized.
        let mut v = vec![0.0; n - col];
        v[0] = x0 - alpha;
        for i in (col + 1)..n {
            v[i - col] = r.get(i, col);
        }
        let vnorm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for a in &mut v {
            *a /= vnorm;
        }
        odd_reflections = !odd_reflections;
        // Apply H = I - 2 v v^T to R from the left.
        for j in col..n {
            let mut dot = 0.0;
            for i in col..n {
                dot += v[i - col] * r.get(i, j);
            }
            for i in col..n {
                r.add_to(i, j, -2.0 * dot * v[i - col]);
            }
        }
        // Accumulate Q <- Q H.
        for i in 0..n {
            let mut dot = 0.0;
            for j in col..n {
                dot += q.get(i, j) * v[j - col];
            }
            for j in col..n {
                q.add_to(i, j, -2.0 * dot * v[j - col]);
            }
        }
    }
    // Normalize to the unique factorization with a nonnegative R diagonal;
    // this keeps the decomposition a smooth function of the input.
    for i in 0..n {
        if r.get(i, i) < 0.0 {
            for j in 0..n {
                let rv = r.get(i, j);
                r.set(i, j, -rv);
                let qv = q.get(j, i);
                q.set(j, i, -qv);
            }
            odd_reflections = !odd_reflections;
        }
    }
    Ok((q, r, odd_reflections))
}

/// QR decomposition `M = Q R` with `Q` orthogonal and `R` upper triangular.
pub fn qr(m: &Matrix) -> Result<(Matrix, Matrix)> {
    let (q, r, _) = householder_qr(m)?;
    Ok((q, r))
}

/// Everything the QR-based rotation parameterization needs: the proper
/// rotation itself plus the raw factors for reverse-mode differentiation.
pub struct QrRotation {
    /// Sign-fixed rotation in SO(k).
    pub rotation: Matrix,
    /// Orthogonal QR factor before the sign fix.
    pub q: Matrix,
    /// Upper-triangular QR factor.
    pub r: Matrix,
    /// Whether the first row of `q` was negated to reach det +1.
    pub flipped: bool,
}

/// Extract a proper rotation from a nonsingular matrix via QR. If the
/// orthogonal factor `Q` has determinant -1 it is corrected to `I_- Q` where
/// `I_- = diag(-1, 1, ..., 1)`.
pub fn qr_rotation_full(m: &Matrix) -> Result<QrRotation> {
    let (q, r, odd) = householder_qr(m)?;
    let n = m.rows();
    let scale = m.max_abs().max(1.0);
    for i in 0..n {
        if r.get(i, i).abs() <= 1e-12 * scale {
            return Err(Error::RankDeficient);
        }
    }
    // det(Q) = (-1)^{reflections}; an extra sign comes from each negative
    // diagonal of R relative to det(M), but det(Q) itself only depends on the
    // reflections applied.
    let det_q_negative = odd;
    let mut rotation = q.clone();
    if det_q_negative {
        for j in 0..n {
            let v = rotation.get(0, j);
            rotation.set(0, j, -v);
        }
    }
    Ok(QrRotation {
        rotation,
        q,
        r,
        flipped: det_q_negative,
    })
}

/// Proper rotation factor of a nonsingular matrix: `R^T R = I`, `det R = +1`.
pub fn qr_rotation(m: &Matrix) -> Result<Matrix> {
    Ok(qr_rotation_full(m)?.rotation)
}

/// Determinant via LU with partial pivoting. Intended for small matrices and
/// diagnostics; the solvers use Cholesky wherever definiteness is known.
pub fn det(m: &Matrix) -> Result<f64> {
    check_square(m, "det")?;
    let n = m.rows();
    let mut a = m.clone();
    let mut sign = 1.0;
    let mut result = 1.0;
    for col in 0..n {
        let mut piv = col;
        for i in (col + 1)..n {
            if a.get(i, col).abs() > a.get(piv, col).abs() {
                piv = i;
            }
        }
        if a.get(piv, col) == 0.0 {
            return Ok(0.0);
        }
        if piv != col {
            for j in 0..n {
                let t = a.get(col, j);
                a.set(col, j, a.get(piv, j));
                a.set(piv, j, t);
            }
            sign = -sign;
        }
        let p = a.get(col, col);
        result *= p;
        for i in (col + 1)..n {
            let f = a.get(i, col) / p;
            for j in col..n {
                a.add_to(i, j, -f * a.get(col, j));
            }
        }
    }
    Ok(sign * result)
}

/// Solve `M x = b` by Gaussian elimination with partial pivoting.
pub fn solve(m: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    check_square(m, "solve")?;
    let n = m.rows();
    if b.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "solve: rhs length {} vs dimension {n}",
            b.len()
        )));
    }
    let mut a = m.clone();
    let mut x = b.to_vec();
    let scale = a.max_abs().max(1.0);
    for col in 0..n {
        let mut piv = col;
        for i in (col + 1)..n {
            if a.get(i, col).abs() > a.get(piv, col).abs() {
                piv = i;
            }
        }
        if a.get(piv, col).abs() <= 1e-300 * scale {
            return Err(Error::Singular);
        }
        if piv != col {
            for j in 0..n {
                let t = a.get(col, j);
                a.set(col, j, a.get(piv, j));
                a.set(piv, j, t);
            }
            x.swap(col, piv);
        }
        let p = a.get(col, col);
        for i in (col + 1)..n {
            let f = a.get(i, col) / p;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                a.add_to(i, j, -f * a.get(col, j));
            }
            x[i] -= f * x[col];
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in (i + 1)..n {
            s -= a.get(i, j) * x[j];
        }
        x[i] = s / a.get(i, i);
    }
    Ok(x)
}

/// Matrix inverse via column-wise solves.
pub fn inverse(m: &Matrix) -> Result<Matrix> {
    let n = m.rows();
    let mut out = Matrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = solve(m, &e)?;
        e[j] = 0.0;
        for i in 0..n {
            out.set(i, j, col[i]);
        }
    }
    Ok(out)
}

/// Inverse of an upper-triangular matrix by back substitution.
pub fn upper_triangular_inverse(r: &Matrix) -> Result<Matrix> {
    check_square(r, "upper_triangular_inverse")?;
    let n = r.rows();
    let scale = r.max_abs().max(1.0);
    let mut inv = Matrix::zeros(n, n);
    for j in 0..n {
        if r.get(j, j).abs() <= 1e-300 * scale {
            return Err(Error::Singular);
        }
        inv.set(j, j, 1.0 / r.get(j, j));
        for i in (0..j).rev() {
            let mut s = 0.0;
            for k in (i + 1)..=j {
                s += r.get(i, k) * inv.get(k, j);
            }
            inv.set(i, j, -s / r.get(i, i));
        }
    }
    Ok(inv)
}

/// Matrix exponential by scaling and squaring with a Taylor series.
pub fn matrix_exp(m: &Matrix) -> Result<Matrix> {
    check_square(m, "matrix_exp")?;
    let n = m.rows();
    let norm = m.max_abs() * n as f64;
    let s = if norm > 0.25 {
        (norm / 0.25).log2().ceil().max(0.0) as u32
    } else {
        0
    };
    let b = m.scale(0.5f64.powi(s as i32));
    let mut term = Matrix::identity(n);
    let mut sum = Matrix::identity(n);
    for k in 1..=40u32 {
        term = term.matmul(&b).scale(1.0 / k as f64);
        sum = sum.add(&term);
        if k >= 4 && term.max_abs() <= 1e-16 * sum.max_abs().max(1.0) {
            break;
        }
    }
    let mut out = sum;
    for _ in 0..s {
        out = out.matmul(&out);
    }
    Ok(out)
}

/// Square root of a matrix with no nonpositive real eigenvalues, by the
/// Denman-Beavers iteration.
fn sqrtm_denman_beavers(m: &Matrix) -> Result<Matrix> {
    let mut y = m.clone();
    let mut z = Matrix::identity(m.rows());
    for _ in 0..80 {
        let y_next = y.add(&inverse(&z)?).scale(0.5);
        let z_next = z.add(&inverse(&y)?).scale(0.5);
        let delta = y_next.sub(&y).max_abs();
        y = y_next;
        z = z_next;
        if delta <= 1e-14 * y.max_abs().max(1.0) {
            let check = y.matmul(&y).sub(m).max_abs();
            if check <= 1e-9 * m.max_abs().max(1.0) {
                return Ok(y);
            }
        }
    }
    Err(Error::LogNoConvergence)
}

/// Principal logarithm of a rotation matrix, returned as a skew-symmetric
/// matrix. Uses inverse scaling (repeated square roots) followed by the
/// Mercator series, then projects onto the skew part. Rotations with an angle
/// of pi have no principal log and fail.
pub fn rotation_log(r: &Matrix) -> Result<Matrix> {
    check_square(r, "rotation_log")?;
    let n = r.rows();
    let mut y = r.clone();
    let mut scaling = 0u32;
    loop {
        let dist = y.sub(&Matrix::identity(n)).frob_norm();
        if dist <= 0.25 {
            break;
        }
        if scaling >= 40 {
            return Err(Error::LogNoConvergence);
        }
        y = sqrtm_denman_beavers(&y)?;
        scaling += 1;
    }
    let x = y.sub(&Matrix::identity(n));
    let mut term = x.clone();
    let mut log = x.clone();
    for k in 2..=80u32 {
        term = term.matmul(&x);
        let coeff = if k % 2 == 0 { -1.0 } else { 1.0 } / k as f64;
        log.axpy(coeff, &term);
        if term.max_abs() / k as f64 <= 1e-17 {
            break;
        }
    }
    let log = log.scale(2.0f64.powi(scaling as i32));
    // Exact skew projection cleans up accumulated symmetric rounding.
    let skew = log.sub(&log.transpose()).scale(0.5);
    let back = matrix_exp(&skew)?;
    if back.sub(r).max_abs() > 1e-8 * r.max_abs().max(1.0) {
        return Err(Error::LogNoConvergence);
    }
    Ok(skew)
}

/// Inverse symmetric square root of a positive semidefinite matrix, with
/// eigenvalues floored at `ridge` before inversion.
pub fn inv_sqrt_spd(m: &Matrix, ridge: f64) -> Result<Matrix> {
    let (mut values, vectors) = sym_eig(m)?;
    for v in &mut values {
        *v = v.max(ridge);
        if *v <= 0.0 {
            return Err(Error::NotPositiveDefinite);
        }
    }
    let n = m.rows();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for l in 0..n {
                acc += vectors.get(i, l) * vectors.get(j, l) / values[l].sqrt();
            }
            out.set(i, j, acc);
        }
    }
    Ok(out.symmetrize())
}

/// Mean vector and second-moment matrix of the rows of `points`.
/// With `about_mean` the mean is subtracted first (the usual covariance);
/// otherwise the second moment about zero is returned.
pub fn sample_covariance(points: &Matrix, about_mean: bool) -> Result<(Vec<f64>, Matrix)> {
    let n = points.rows();
    let k = points.cols();
    if n == 0 {
        return Err(Error::EmptyInput("covariance points"));
    }
    let mut mean = vec![0.0; k];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(points.row(i)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = Matrix::zeros(k, k);
    let mut centered = vec![0.0; k];
    for i in 0..n {
        for (c, (v, m)) in centered.iter_mut().zip(points.row(i).iter().zip(&mean)) {
            *c = if about_mean { v - m } else { *v };
        }
        for a in 0..k {
            for b in a..k {
                cov.add_to(a, b, centered[a] * centered[b]);
            }
        }
    }
    for a in 0..k {
        for b in a..k {
            let v = cov.get(a, b) / n as f64;
            cov.set(a, b, v);
            cov.set(b, a, v);
        }
    }
    Ok((mean, cov))
}
