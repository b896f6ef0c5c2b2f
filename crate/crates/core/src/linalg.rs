//! Dense linear algebra used by the design solvers.

use nalgebra::{DMatrix, DVector};

/// Greedy left-to-right column selection. A column is kept when its
/// component orthogonal to the span of the already kept columns has norm
/// above `tol · (1 + ‖column‖)`. Returns kept column indices in order.
pub fn select_basis_columns(mat: &DMatrix<f64>, tol: f64) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut kept = Vec::new();
    for j in 0..mat.ncols() {
        let col = mat.column(j).into_owned();
        let norm = col.norm();
        let mut resid = col;
        // two Gram-Schmidt passes
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&resid);
                resid.axpy(-c, q, 1.0);
            }
        }
        let r = resid.norm();
        if r > tol * (1.0 + norm) {
            basis.push(resid / r);
            kept.push(j);
        }
    }
    kept
}

/// Copies the listed columns into a new matrix.
pub fn take_columns(mat: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(mat.nrows(), cols.len(), |i, j| mat[(i, cols[j])])
}

/// Least-squares solution for a full-column-rank `a` via Householder QR,
/// with one step of iterative refinement.
fn full_rank_least_squares(a: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let qr = a.clone().qr();
    let (q, r) = (qr.q(), qr.r());
    let solve = |b: &DVector<f64>| {
        r.solve_upper_triangular(&(q.transpose() * b))
            .expect("kept columns are independent")
    };
    let mut x = solve(rhs);
    let resid = rhs - a * &x;
    x += solve(&resid);
    x
}

/// Minimum-norm least-squares solution of `mat · x = rhs` and the numerical rank.
///
/// The rank and a column basis come from [`select_basis_columns`]. A basic
/// least-squares solution on the kept columns is then projected onto the row
/// space, using the null-space vectors that express each dropped column in the
/// kept ones.
pub fn min_norm_solve(mat: &DMatrix<f64>, rhs: &DVector<f64>, tol: f64) -> (DVector<f64>, usize) {
    let cols = mat.ncols();
    let kept = select_basis_columns(mat, tol);
    let rank = kept.len();
    if rank == 0 {
        return (DVector::zeros(cols), 0);
    }
    let a0 = take_columns(mat, &kept);
    let y = full_rank_least_squares(&a0, rhs);
    let mut x = DVector::zeros(cols);
    for (i, &c) in kept.iter().enumerate() {
        x[c] = y[i];
    }
    if rank == cols {
        return (x, rank);
    }

    let dropped: Vec<usize> = (0..cols).filter(|c| !kept.contains(c)).collect();
    let mut null = DMatrix::zeros(cols, dropped.len());
    for (k, &c) in dropped.iter().enumerate() {
        let coef = full_rank_least_squares(&a0, &mat.column(c).into_owned());
        null[(c, k)] = 1.0;
        for (i, &kc) in kept.iter().enumerate() {
            null[(kc, k)] = -coef[i];
        }
    }
    let q = null.qr().q();
    for _ in 0..2 {
        let along = &q * (q.transpose() * &x);
        x -= along;
    }
    (x, rank)
}

/// Solves the normal equations `(AᵀA) x = Aᵀ b` for a full-column-rank `A`.
/// Returns `None` when `AᵀA` is not numerically positive definite.
pub fn normal_equations_solve(a: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if a.ncols() == 0 {
        return Some(DVector::zeros(0));
    }
    let gram = a.transpose() * a;
    let atb = a.transpose() * rhs;
    gram.cholesky().map(|c| c.solve(&atb))
}

pub fn sup_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
