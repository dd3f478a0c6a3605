//! Dense helpers shared by the least-squares solvers.

use nalgebra::{DMatrix, DVector};

/// `AᵀA` for a row-major `rows × cols` matrix, returned row-major.
pub(crate) fn gram(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), rows * cols);
    let mut c = vec![0.0; cols * cols];
    if rows == 0 || cols == 0 {
        return c;
    }
    // C (cols×cols) = Aᵀ (cols×rows) · A (rows×cols)
    unsafe {
        matrixmultiply::dgemm(
            cols,
            rows,
            cols,
            1.0,
            a.as_ptr(),
            1,
            cols as isize,
            a.as_ptr(),
            cols as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            cols as isize,
            1,
        );
    }
    c
}

/// `Aᵀb` for a row-major `rows × cols` matrix.
pub(crate) fn at_b(a: &[f64], rows: usize, cols: usize, b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(b.len(), rows);
    let mut out = vec![0.0; cols];
    for (row, &bi) in a.chunks_exact(cols).zip(b) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o += v * bi;
        }
    }
    out
}

/// Solves `M x = rhs` for symmetric positive-definite `M` (row-major).
/// Returns `None` when the Cholesky factorization fails.
pub(crate) fn solve_spd(m: &[f64], n: usize, rhs: &[f64]) -> Option<Vec<f64>> {
    let mat = DMatrix::from_row_slice(n, n, m);
    let chol = mat.cholesky()?;
    let x = chol.solve(&DVector::from_column_slice(rhs));
    if x.iter().all(|v| v.is_finite()) {
        Some(x.iter().copied().collect())
    } else {
        None
    }
}

/// Cholesky factor of a symmetric positive-definite matrix, reused across
/// right-hand sides.
pub(crate) struct SpdSolver {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl SpdSolver {
    pub(crate) fn new(m: &[f64], n: usize) -> Option<Self> {
        let chol = DMatrix::from_row_slice(n, n, m).cholesky()?;
        Some(SpdSolver { chol })
    }

    pub(crate) fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let x = self.chol.solve(&DVector::from_column_slice(rhs));
        x.iter().all(|v| v.is_finite()).then(|| x.iter().copied().collect())
    }
}

/// Cholesky diagonal ratio `min(Lᵢᵢ)² / max(Lᵢᵢ)²`, a cheap conditioning
/// estimate; `None` if the matrix is not positive definite.
pub(crate) fn spd_pivot_ratio(m: &[f64], n: usize) -> Option<f64> {
    let mat = DMatrix::from_row_slice(n, n, m);
    let chol = mat.cholesky()?;
    let l = chol.l_dirty();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..n {
        let d = l[(i, i)] * l[(i, i)];
        lo = lo.min(d);
        hi = hi.max(d);
    }
    Some(if hi > 0.0 { lo / hi } else { 0.0 })
}

/// LU factorization with partial pivoting for a general square system,
/// factored once and reused for many right-hand sides.
pub(crate) struct LuSolver {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl LuSolver {
    pub(crate) fn new(m: &[f64], n: usize) -> Option<Self> {
        let lu = DMatrix::from_row_slice(n, n, m).lu();
        if !lu.is_invertible() {
            return None;
        }
        Some(LuSolver { lu })
    }

    pub(crate) fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let x = self.lu.solve(&DVector::from_column_slice(rhs))?;
        Some(x.iter().copied().collect())
    }
}
