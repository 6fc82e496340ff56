use faer::{c64, Mat};

use super::mesh::history_nodes;
use crate::system::{CMat, TimeDelaySystem};

/// Collocation of the infinitesimal generator of the solution semigroup on
/// `Na + 1` Chebyshev extremal points of `[-tau_max, 0]`.
///
/// Block row 0 (node `theta = 0`) applies the right-hand side
/// `sum_i A_i x(-tau_i)` through the interpolant; the remaining block rows
/// differentiate the interpolant. Its rightmost eigenvalues converge
/// spectrally to the rightmost characteristic roots. For a delay-free system
/// the generator is `A_0` itself.
pub fn build_generator_n(sys: &TimeDelaySystem, na: usize) -> CMat {
    if sys.m() == 0 {
        return sys.matrices()[0].clone();
    }
    let na = na.max(1);
    let n = sys.n();
    let nodes = history_nodes(na, sys.tau_max());
    let d = nodes.differentiation_matrix();
    let p = na + 1;
    let mut out = Mat::<c64>::zeros(n * p, n * p);
    for (a, &tau) in sys.matrices().iter().zip(sys.delays()) {
        let card = nodes.cardinal_values(-tau);
        for (k, &l) in card.iter().enumerate() {
            if l == 0.0 {
                continue;
            }
            for c in 0..n {
                for r in 0..n {
                    out[(r, k * n + c)] += a[(r, c)] * l;
                }
            }
        }
    }
    for j in 1..p {
        for k in 0..p {
            let v = c64::new(d[(j, k)], 0.0);
            for r in 0..n {
                out[(j * n + r, k * n + r)] = v;
            }
        }
    }
    out
}
