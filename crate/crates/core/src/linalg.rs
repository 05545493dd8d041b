//! Dense Cholesky kernels used by the incremental least-squares model.
//!
//! Everything here works on the upper-triangular factor R with RᵀR = A.
//! Keeping the factor (rather than an explicit inverse) lets a new training
//! example be absorbed with a numerically stable rank-one update instead of
//! a Sherman–Morrison correction of A⁻¹.

use ndarray::{Array2, ArrayView2, ArrayViewMut2};

use crate::error::{Error, Result};

/// Cholesky factorization of a symmetric positive definite matrix.
///
/// Returns the upper-triangular `R` with `RᵀR = a`; entries below the
/// diagonal are zero. Only the upper triangle of `a` is read.
pub fn cholesky_upper(a: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::invalid_argument(format!(
            "cholesky needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut r = Array2::<f64>::zeros((n, n));
    for k in 0..n {
        let mut diag = a[(k, k)];
        for i in 0..k {
            diag -= r[(i, k)] * r[(i, k)];
        }
        if !(diag > 0.0) {
            return Err(Error::invalid_data(format!(
                "matrix is not positive definite at pivot {k} (value {diag})"
            )));
        }
        let rkk = diag.sqrt();
        r[(k, k)] = rkk;
        for j in (k + 1)..n {
            let mut s = a[(k, j)];
            for i in 0..k {
                s -= r[(i, k)] * r[(i, j)];
            }
            r[(k, j)] = s / rkk;
        }
    }
    Ok(r)
}

/// Rank-one update of an upper Cholesky factor, in place.
///
/// Given `R` with `RᵀR = A`, rewrites it to the factor of `A + xxᵀ` using a
/// sweep of Givens rotations. O(n²), no allocation beyond a copy of `x`.
pub fn rank_one_update(mut r: ArrayViewMut2<'_, f64>, x: &[f64]) {
    let n = r.nrows();
    debug_assert_eq!(r.ncols(), n);
    debug_assert_eq!(x.len(), n);
    let mut w = x.to_vec();
    for k in 0..n {
        let rkk = r[(k, k)];
        let wk = w[k];
        if wk == 0.0 {
            continue;
        }
        let rad = rkk.hypot(wk);
        let c = rad / rkk;
        let s = wk / rkk;
        r[(k, k)] = rad;
        for j in (k + 1)..n {
            let rkj = (r[(k, j)] + s * w[j]) / c;
            w[j] = c * w[j] - s * rkj;
            r[(k, j)] = rkj;
        }
    }
}

/// Solve `RᵀR · w = b` for one right-hand side, where `R` is upper-triangular.
pub fn solve_normal_column(r: ArrayView2<'_, f64>, b: &[f64], w: &mut [f64]) {
    let n = r.nrows();
    debug_assert_eq!(b.len(), n);
    debug_assert_eq!(w.len(), n);
    // Forward: Rᵀ z = b (Rᵀ is lower-triangular). Reuse `w` for z.
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= r[(k, i)] * w[k];
        }
        w[i] = s / r[(i, i)];
    }
    // Backward: R w = z.
    for i in (0..n).rev() {
        let mut s = w[i];
        for k in (i + 1)..n {
            s -= r[(i, k)] * w[k];
        }
        w[i] = s / r[(i, i)];
    }
}

/// Solve `RᵀR · W = B` column by column for a matrix right-hand side.
pub fn solve_normal_equations(r: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = r.nrows();
    let cols = b.ncols();
    debug_assert_eq!(b.nrows(), n);
    let mut w = Array2::<f64>::zeros((n, cols));
    let mut bcol = vec![0.0; n];
    let mut wcol = vec![0.0; n];
    for j in 0..cols {
        for i in 0..n {
            bcol[i] = b[(i, j)];
        }
        solve_normal_column(r, &bcol, &mut wcol);
        for i in 0..n {
            w[(i, j)] = wcol[i];
        }
    }
    w
}
