//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Number of ×10 escalations tried after the base jitter (1e-8 → 1e-2).
const JITTER_ESCALATIONS: i32 = 6;

/// Lower Cholesky factor of `a + jitter·I`, starting from `base_jitter` and
/// escalating by ×10 until the factorization succeeds.
///
/// Returns the factor and the jitter that was actually added.
pub fn cholesky_with_jitter(a: &DMatrix<f64>, base_jitter: f64) -> Result<(DMatrix<f64>, f64)> {
    let mut jitter = base_jitter;
    for attempt in 0..=JITTER_ESCALATIONS {
        if attempt > 0 {
            jitter *= 10.0;
        }
        let mut m = a.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(l) = cholesky_in_place(m) {
            return Ok((l, jitter));
        }
    }
    Err(Error::Factorization { jitter })
}

/// Plain Cholesky; `None` when a pivot is not strictly positive or not finite.
pub fn cholesky_in_place(mut m: DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = m.nrows();
    let data = m.as_mut_slice();
    // Left-looking, column-major: column j is updated by every earlier column.
    for j in 0..n {
        for k in 0..j {
            let ljk = data[k * n + j];
            if ljk == 0.0 {
                continue;
            }
            let (head, tail) = data.split_at_mut(j * n);
            let col_k = &head[k * n + j..k * n + n];
            let col_j = &mut tail[j..n];
            for (t, s) in col_j.iter_mut().zip(col_k) {
                *t -= ljk * s;
            }
        }
        let d = data[j * n + j];
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        data[j * n + j] = d;
        for v in &mut data[j * n + j + 1..j * n + n] {
            *v /= d;
        }
        for v in &mut data[j * n..j * n + j] {
            *v = 0.0;
        }
    }
    Some(m)
}

/// Factor `L` with `L Lᵀ ≈ a` for a symmetric positive *semi*-definite matrix.
///
/// Pivots below `tol · max(diag)` are treated as exact zeros and their column
/// is dropped, so rank-deficient and all-zero matrices factor cleanly. When
/// rounding pushes a later pivot clearly negative (severely ill-conditioned
/// input) the factor comes from an eigendecomposition with negative
/// eigenvalues clamped to zero instead.
pub fn psd_factor(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::InvalidArgument("covariance must be square".into()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Factorization { jitter: 0.0 });
    }
    match dropped_pivot_cholesky(a) {
        Some(l) => Ok(l),
        None => eigen_factor(a),
    }
}

fn eigen_factor(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let scale = a.diagonal().iter().map(|v| v.abs()).fold(0.0, f64::max);
    let eig = a.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l < -1e-6 * scale.max(1.0)) {
        return Err(Error::Factorization { jitter: 0.0 });
    }
    let mut l = eig.eigenvectors;
    for (j, lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        l.column_mut(j).scale_mut(s);
    }
    Ok(l)
}

fn dropped_pivot_cholesky(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    let tol = 1e-10 * scale.max(f64::MIN_POSITIVE);
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= tol {
            if d < -1e-9 * scale.max(1.0) {
                return None;
            }
            continue;
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / dj;
        }
    }
    Some(l)
}

/// Solves `L x = b` in place for lower-triangular `L`.
pub fn forward_solve(l: &DMatrix<f64>, b: &mut DVector<f64>) {
    forward_solve_slice(l, b.as_mut_slice(), 0);
}

/// Column-oriented forward substitution; entries before `start` are known zeros.
fn forward_solve_slice(l: &DMatrix<f64>, x: &mut [f64], start: usize) {
    let n = l.nrows();
    let ld = l.as_slice();
    for k in start..n {
        let col = &ld[k * n..(k + 1) * n];
        let xk = x[k] / col[k];
        x[k] = xk;
        if xk != 0.0 {
            for (xi, lik) in x[k + 1..].iter_mut().zip(&col[k + 1..]) {
                *xi -= lik * xk;
            }
        }
    }
}

/// Solves `Lᵀ x = b` in place for lower-triangular `L`.
pub fn backward_solve(l: &DMatrix<f64>, b: &mut DVector<f64>) {
    let n = l.nrows();
    let ld = l.as_slice();
    let x = b.as_mut_slice();
    for i in (0..n).rev() {
        let col = &ld[i * n..(i + 1) * n];
        let s: f64 = col[i + 1..].iter().zip(&x[i + 1..]).map(|(a, b)| a * b).sum();
        x[i] = (x[i] - s) / col[i];
    }
}

/// Solves `L X = B` in place, column by column.
pub fn forward_solve_matrix(l: &DMatrix<f64>, b: &mut DMatrix<f64>) {
    let n = l.nrows();
    let m = b.ncols();
    let data = b.as_mut_slice();
    for c in 0..m {
        forward_solve_slice(l, &mut data[c * n..(c + 1) * n], 0);
    }
}

/// `(L Lᵀ)⁻¹ b` for a lower Cholesky factor `L`.
pub fn cholesky_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut x = b.clone();
    forward_solve(l, &mut x);
    backward_solve(l, &mut x);
    x
}

/// `(L Lᵀ)⁻¹` for a lower Cholesky factor `L`.
pub fn cholesky_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut linv = DMatrix::<f64>::identity(n, n);
    {
        let data = linv.as_mut_slice();
        for c in 0..n {
            forward_solve_slice(l, &mut data[c * n..(c + 1) * n], c);
        }
    }
    let mut inv = DMatrix::<f64>::zeros(n, n);
    let ld = linv.as_slice();
    for a in 0..n {
        let ca = &ld[a * n..(a + 1) * n];
        for b in 0..=a {
            let cb = &ld[b * n..(b + 1) * n];
            // Column a of L⁻¹ is zero above row a.
            let s: f64 = ca[a..].iter().zip(&cb[a..]).map(|(x, y)| x * y).sum();
            inv[(a, b)] = s;
            inv[(b, a)] = s;
        }
    }
    inv
}
