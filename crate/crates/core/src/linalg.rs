//! Dense complex linear algebra: SVD, nonsymmetric eigenvalues, linear
//! solves and least squares. Everything else in the crate goes through these
//! four entry points; the factorizations themselves come from `faer`.

use faer::linalg::solvers::{Solve, SolveLstsq};
use faer::{c64, Mat, MatRef};

use crate::error::LinalgError;

type Result<T> = std::result::Result<T, LinalgError>;

/// Singular values in nonincreasing order with `A = U diag(values) V^*`.
#[derive(Clone, Debug)]
pub struct SvdResult {
    pub values: Vec<f64>,
    pub u: Mat<c64>,
    pub v: Mat<c64>,
}

#[derive(Clone, Debug)]
pub struct EigenvalueSet {
    pub values: Vec<c64>,
    /// Right eigenvectors as columns, when requested.
    pub vectors: Option<Mat<c64>>,
}

pub fn all_finite(a: MatRef<'_, c64>) -> bool {
    (0..a.ncols()).all(|j| (0..a.nrows()).all(|i| a[(i, j)].re.is_finite() && a[(i, j)].im.is_finite()))
}

pub fn frobenius_norm(a: MatRef<'_, c64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)].norm_sqr();
        }
    }
    acc.sqrt()
}

pub fn vector_norm(x: &[c64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn check_finite(a: MatRef<'_, c64>, routine: &'static str) -> Result<()> {
    if all_finite(a) {
        Ok(())
    } else {
        Err(LinalgError::NonFinite { routine })
    }
}

/// Full SVD of a `p x q` matrix.
pub fn svd(a: MatRef<'_, c64>) -> Result<SvdResult> {
    check_finite(a, "svd")?;
    let dec = a.svd().map_err(|_| LinalgError::NoConvergence {
        routine: "svd",
        rows: a.nrows(),
        cols: a.ncols(),
    })?;
    let values = dec.S().column_vector().iter().map(|s| s.re).collect();
    Ok(SvdResult {
        values,
        u: dec.U().to_owned(),
        v: dec.V().to_owned(),
    })
}

pub fn singular_values(a: MatRef<'_, c64>) -> Result<Vec<f64>> {
    check_finite(a, "singular_values")?;
    a.singular_values().map_err(|_| LinalgError::NoConvergence {
        routine: "singular_values",
        rows: a.nrows(),
        cols: a.ncols(),
    })
}

pub fn smallest_singular_value(a: MatRef<'_, c64>) -> Result<f64> {
    Ok(singular_values(a)?.last().copied().unwrap_or(0.0))
}

/// Eigenvalues of a square matrix, without eigenvectors.
pub fn eigenvalues(a: MatRef<'_, c64>) -> Result<EigenvalueSet> {
    check_square(a)?;
    check_finite(a, "eigenvalues")?;
    let values = a.eigenvalues().map_err(|_| LinalgError::NoConvergence {
        routine: "eigenvalues",
        rows: a.nrows(),
        cols: a.ncols(),
    })?;
    Ok(EigenvalueSet {
        values,
        vectors: None,
    })
}

/// Eigenvalues together with right eigenvectors.
pub fn eigen(a: MatRef<'_, c64>) -> Result<EigenvalueSet> {
    check_square(a)?;
    check_finite(a, "eigen")?;
    let dec = a.eigen().map_err(|_| LinalgError::NoConvergence {
        routine: "eigen",
        rows: a.nrows(),
        cols: a.ncols(),
    })?;
    Ok(EigenvalueSet {
        values: dec.S().column_vector().iter().copied().collect(),
        vectors: Some(dec.U().to_owned()),
    })
}

fn check_square(a: MatRef<'_, c64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(LinalgError::Dimension(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

/// Solves `A x = b` by LU with partial pivoting.
pub fn solve(a: MatRef<'_, c64>, b: &[c64]) -> Result<Vec<c64>> {
    check_square(a)?;
    let p = a.nrows();
    if b.len() != p {
        return Err(LinalgError::Dimension(format!("rhs has length {}, expected {p}", b.len())));
    }
    check_finite(a, "solve")?;
    let lu = a.partial_piv_lu();
    let u = lu.U();
    let threshold = (p as f64) * f64::EPSILON * frobenius_norm(a);
    let pivot = (0..p).map(|i| u[(i, i)].norm()).fold(f64::INFINITY, f64::min);
    if p > 0 && !(pivot > threshold) {
        return Err(LinalgError::Singular { pivot });
    }
    let rhs = Mat::from_fn(p, 1, |i, _| b[i]);
    let x = lu.solve(&rhs);
    Ok((0..p).map(|i| x[(i, 0)]).collect())
}

/// Least-squares solution of an overdetermined `p x q` system (`p >= q`)
/// through a column-pivoted QR factorization.
pub fn lstsq(a: MatRef<'_, c64>, b: &[c64]) -> Result<Vec<c64>> {
    let (p, q) = (a.nrows(), a.ncols());
    if p < q {
        return Err(LinalgError::Dimension(format!("lstsq needs rows >= cols, got {p}x{q}")));
    }
    if b.len() != p {
        return Err(LinalgError::Dimension(format!("rhs has length {}, expected {p}", b.len())));
    }
    check_finite(a, "lstsq")?;
    let qr = a.col_piv_qr();
    let r = qr.thin_R();
    let lead = if q > 0 { r[(0, 0)].norm() } else { 0.0 };
    let threshold = (p.max(q) as f64) * f64::EPSILON * lead;
    let rank = (0..q).take_while(|&i| r[(i, i)].norm() > threshold).count();
    if rank < q {
        return Err(LinalgError::RankDeficient { rank, cols: q });
    }
    let rhs = Mat::from_fn(p, 1, |i, _| b[i]);
    let x = qr.solve_lstsq(&rhs);
    Ok((0..q).map(|i| x[(i, 0)]).collect())
}

/// Unit right singular vector for the smallest singular value, with that value.
pub fn null_vector(a: MatRef<'_, c64>) -> Result<(Vec<c64>, f64)> {
    let dec = svd(a)?;
    let q = a.ncols();
    let k = q - 1;
    let smin = if k < dec.values.len() { dec.values[k] } else { 0.0 };
    Ok(((0..q).map(|i| dec.v[(i, k)]).collect(), smin))
}

pub fn mat_vec(a: MatRef<'_, c64>, x: &[c64]) -> Vec<c64> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)] * x[j]).sum())
        .collect()
}
