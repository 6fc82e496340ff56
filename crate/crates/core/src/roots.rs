//! Characteristic roots and the spectral abscissa `alpha_0`.
//!
//! Candidates are the eigenvalues of the collocated generator; each one is
//! polished by Newton's method on the bordered system
//! `[F(lambda) v = 0; c^* v = 1]`, which yields the eigenvector as well.

use faer::{c64, Mat};
use rayon::prelude::*;

use crate::discretization::build_generator_n;
use crate::error::{Error, Result};
use crate::linalg;
use crate::system::TimeDelaySystem;

const NEWTON_MAX_ITER: usize = 25;
const MERGE_TOL: f64 = 1e-8;
const ESCALATION_TOL: f64 = 1e-9;
const ESCALATION_CAP: usize = 128;

#[derive(Clone, Debug)]
pub struct Root {
    pub value: c64,
    /// `||F(lambda) v||` for the unit vector `v`.
    pub residual: f64,
    pub vector: Vec<c64>,
}

#[derive(Clone, Debug)]
pub struct RootSet {
    /// Sorted by decreasing real part.
    pub roots: Vec<Root>,
    pub alpha0: f64,
    pub cutoff: f64,
    pub na: usize,
    /// Candidates on which Newton failed.
    pub dropped: usize,
}

impl RootSet {
    pub fn rightmost(&self) -> &Root {
        &self.roots[0]
    }
}

/// Roots with `Re lambda >= cutoff`; without a cutoff the default is the
/// rightmost generator eigenvalue minus one.
pub fn characteristic_roots(sys: &TimeDelaySystem, na: usize, cutoff: Option<f64>) -> Result<RootSet> {
    if na == 0 {
        return Err(Error::InvalidArgument("Na must be at least 1".into()));
    }
    let generator = build_generator_n(sys, na);
    let eig = linalg::eigenvalues(generator.as_ref())?.values;
    let rightmost = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let cutoff = cutoff.unwrap_or(rightmost - 1.0);
    let candidates: Vec<c64> = eig.into_iter().filter(|z| z.re >= cutoff).collect();

    let refined: Vec<Option<Root>> = if sys.m() == 0 {
        candidates
            .par_iter()
            .map(|&lambda| exact_root(sys, lambda))
            .collect::<Result<_>>()?
    } else {
        candidates.par_iter().map(|&lambda| newton_refine(sys, lambda)).collect()
    };
    let dropped = refined.iter().filter(|r| r.is_none()).count();
    let mut roots: Vec<Root> = refined
        .into_iter()
        .flatten()
        .filter(|r| r.value.re >= cutoff)
        .collect();
    roots.sort_by(|a, b| {
        b.value
            .re
            .total_cmp(&a.value.re)
            .then(b.value.im.total_cmp(&a.value.im))
    });
    let mut merged: Vec<Root> = Vec::with_capacity(roots.len());
    for r in roots {
        if !merged.iter().any(|q| (q.value - r.value).norm() <= MERGE_TOL) {
            merged.push(r);
        }
    }
    if merged.is_empty() {
        return Err(Error::NoRoots { cutoff });
    }
    let alpha0 = merged.iter().map(|r| r.value.re).fold(f64::NEG_INFINITY, f64::max);
    Ok(RootSet {
        roots: merged,
        alpha0,
        cutoff,
        na,
        dropped,
    })
}

fn exact_root(sys: &TimeDelaySystem, lambda: c64) -> Result<Option<Root>> {
    let (vector, residual) = linalg::null_vector(sys.eval_f_matrix(lambda).as_ref())?;
    Ok(Some(Root {
        value: lambda,
        residual,
        vector,
    }))
}

/// Newton on `[F(lambda) v; c^* v - 1] = 0` with `c` the initial null vector.
pub fn newton_refine(sys: &TimeDelaySystem, start: c64) -> Option<Root> {
    let n = sys.n();
    let (mut v, _) = linalg::null_vector(sys.eval_f_matrix(start).as_ref()).ok()?;
    let c = v.clone();
    let mut lambda = start;
    let scale = sys.scale();
    for _ in 0..=NEWTON_MAX_ITER {
        let f = sys.eval_f_matrix(lambda);
        let fv = linalg::mat_vec(f.as_ref(), &v);
        let vnorm = linalg::vector_norm(&v);
        let residual = linalg::vector_norm(&fv) / vnorm;
        if !residual.is_finite() || !lambda.re.is_finite() || !lambda.im.is_finite() {
            return None;
        }
        if residual <= 1e-12 * (1.0 + lambda.norm()) * scale {
            return Some(Root {
                value: lambda,
                residual,
                vector: v.iter().map(|z| z / vnorm).collect(),
            });
        }
        let fp = sys.eval_f_derivative(lambda);
        let fpv = linalg::mat_vec(fp.as_ref(), &v);
        let jac = Mat::from_fn(n + 1, n + 1, |i, j| match (i < n, j < n) {
            (true, true) => f[(i, j)],
            (true, false) => fpv[i],
            (false, true) => c[j].conj(),
            (false, false) => c64::new(0.0, 0.0),
        });
        let norm_eq: c64 = c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum::<c64>() - 1.0;
        let rhs: Vec<c64> = fv.iter().copied().chain(std::iter::once(norm_eq)).map(|z| -z).collect();
        let step = linalg::solve(jac.as_ref(), &rhs).ok()?;
        for (vi, di) in v.iter_mut().zip(&step) {
            *vi += di;
        }
        lambda += step[n];
        if step[n].norm() <= 1e-15 * (1.0 + lambda.norm()) && linalg::vector_norm(&step[..n]) <= 1e-15 * vnorm
        {
            // Stagnated at rounding level; accept only if the invariant holds.
            let f = sys.eval_f_matrix(lambda);
            let vnorm = linalg::vector_norm(&v);
            let residual = linalg::vector_norm(&linalg::mat_vec(f.as_ref(), &v)) / vnorm;
            return (residual <= 1e-8 * (1.0 + lambda.norm()) * scale).then(|| Root {
                value: lambda,
                residual,
                vector: v.iter().map(|z| z / vnorm).collect(),
            });
        }
    }
    None
}

/// Spectral abscissa with the default starting resolution `Na = 16`.
pub fn spectral_abscissa(sys: &TimeDelaySystem) -> Result<f64> {
    Ok(escalate(sys, 16)?.alpha0)
}

/// Doubles `Na` from `start_na` until the refined spectral abscissa moves by
/// less than `1e-9` between levels (cap `Na = 128`).
pub fn escalate(sys: &TimeDelaySystem, start_na: usize) -> Result<RootSet> {
    let mut na = start_na.max(1);
    let mut current = characteristic_roots(sys, na, None)?;
    if sys.m() == 0 {
        return Ok(current);
    }
    let mut change = f64::INFINITY;
    while na < ESCALATION_CAP {
        na = (2 * na).min(ESCALATION_CAP);
        let next = characteristic_roots(sys, na, None)?;
        change = (next.alpha0 - current.alpha0).abs();
        current = next;
        if change < ESCALATION_TOL {
            return Ok(current);
        }
    }
    Err(Error::SpectralAbscissaNotConverged { na, change })
}
