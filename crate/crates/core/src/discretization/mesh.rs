use std::f64::consts::PI;

use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::linalg;

/// Interpolation nodes with barycentric weights (second-form formula).
#[derive(Clone, Debug)]
pub struct BarycentricNodes {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl BarycentricNodes {
    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Self {
        assert_eq!(points.len(), weights.len());
        Self { points, weights }
    }

    /// Weights from the product formula `1 / prod_{k != j} (x_j - x_k)`.
    pub fn from_points(points: Vec<f64>) -> Self {
        let weights = (0..points.len())
            .map(|j| {
                1.0 / points
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != j)
                    .map(|(_, &x)| points[j] - x)
                    .product::<f64>()
            })
            .collect();
        Self { points, weights }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Values `l_k(t)` of every Lagrange basis polynomial at `t`.
    pub fn cardinal_values(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        if let Some(k) = self.points.iter().position(|&x| x == t) {
            out[k] = 1.0;
            return out;
        }
        let mut total = 0.0;
        for (k, (&x, &w)) in self.points.iter().zip(&self.weights).enumerate() {
            out[k] = w / (t - x);
            total += out[k];
        }
        for v in &mut out {
            *v /= total;
        }
        out
    }

    pub fn interpolate(&self, values: &[c64], t: f64) -> c64 {
        self.cardinal_values(t)
            .iter()
            .zip(values)
            .map(|(&l, &v)| v * l)
            .sum()
    }

    /// `D[i][k] = l_k'(x_i)`; diagonal entries are negative row sums.
    pub fn differentiation_matrix(&self) -> Mat<f64> {
        let p = self.len();
        let mut d = Mat::<f64>::zeros(p, p);
        for i in 0..p {
            let mut row_sum = 0.0;
            for k in 0..p {
                if k != i {
                    let v = (self.weights[k] / self.weights[i]) / (self.points[i] - self.points[k]);
                    d[(i, k)] = v;
                    row_sum += v;
                }
            }
            d[(i, i)] = -row_sum;
        }
        d
    }
}

/// The symmetric mesh of `2N + 1` Chebyshev extremal points on
/// `[-tau_max, tau_max]`, `theta_i = tau_max sin(i pi / (2N))` for `i = -N..=N`.
///
/// Storage index `i + N` holds node `theta_i`, so the centre node `0` sits at
/// index `N`.
#[derive(Clone, Debug)]
pub struct ChebyshevMesh {
    half: usize,
    tau_max: f64,
    nodes: BarycentricNodes,
    diff: Mat<f64>,
}

impl ChebyshevMesh {
    pub fn new(half: usize, tau_max: f64) -> Result<Self> {
        if half == 0 {
            return Err(Error::InvalidArgument("mesh parameter N must be at least 1".into()));
        }
        if !(tau_max.is_finite() && tau_max > 0.0) {
            return Err(Error::InvalidArgument(format!("tau_max = {tau_max} must be positive")));
        }
        let positive: Vec<f64> = (0..=half)
            .map(|i| {
                if i == half {
                    tau_max
                } else {
                    tau_max * (i as f64 * PI / (2 * half) as f64).sin()
                }
            })
            .collect();
        let mut points = Vec::with_capacity(2 * half + 1);
        points.extend(positive.iter().skip(1).rev().map(|x| -x));
        points.extend(positive.iter().copied());
        // Chebyshev extremal weights (-1)^i, halved at the two endpoints.
        let weights = (0..=2 * half)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == 2 * half {
                    0.5 * sign
                } else {
                    sign
                }
            })
            .collect();
        let nodes = BarycentricNodes::new(points, weights);
        let diff = nodes.differentiation_matrix();
        Ok(Self {
            half,
            tau_max,
            nodes,
            diff,
        })
    }

    /// `N`, so the mesh has `2N + 1` points.
    pub fn half(&self) -> usize {
        self.half
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    pub fn len(&self) -> usize {
        2 * self.half + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of the centre node `theta_0 = 0`.
    pub fn centre(&self) -> usize {
        self.half
    }

    pub fn points(&self) -> &[f64] {
        self.nodes.points()
    }

    /// Node `theta_i` for `i` in `-N..=N`.
    pub fn point(&self, i: isize) -> f64 {
        self.nodes.points()[(i + self.half as isize) as usize]
    }

    pub fn nodes(&self) -> &BarycentricNodes {
        &self.nodes
    }

    pub fn differentiation_matrix(&self) -> &Mat<f64> {
        &self.diff
    }

    /// Nodal values of `p_N(.; lambda)`: `p_N(0) = 1` and
    /// `p_N'(theta_i) = lambda p_N(theta_i)` at every other node.
    pub fn exponential_collocant(&self, lambda: c64) -> Result<Vec<c64>> {
        let p = self.len();
        let c = self.centre();
        let sys = Mat::from_fn(p, p, |i, k| {
            if i == c {
                c64::new(if k == c { 1.0 } else { 0.0 }, 0.0)
            } else {
                let mut v = c64::new(self.diff[(i, k)], 0.0);
                if i == k {
                    v -= lambda;
                }
                v
            }
        });
        let mut rhs = vec![c64::new(0.0, 0.0); p];
        rhs[c] = c64::new(1.0, 0.0);
        linalg::solve(sys.as_ref(), &rhs).map_err(|_| Error::CollocationSingular {
            re: lambda.re,
            im: lambda.im,
        })
    }

    /// `p_N(t; lambda)`.
    pub fn eval_pn(&self, lambda: c64, t: f64) -> Result<c64> {
        self.check_in_range(t)?;
        let nodal = self.exponential_collocant(lambda)?;
        Ok(self.nodes.interpolate(&nodal, t))
    }

    pub(crate) fn check_in_range(&self, t: f64) -> Result<()> {
        if !(t.abs() <= self.tau_max) {
            return Err(Error::InvalidArgument(format!(
                "t = {t} outside [-{0}, {0}]",
                self.tau_max
            )));
        }
        Ok(())
    }
}

pub fn build_mesh(half: usize, tau_max: f64) -> Result<ChebyshevMesh> {
    ChebyshevMesh::new(half, tau_max)
}

pub fn differentiation_matrix(mesh: &ChebyshevMesh) -> Mat<f64> {
    mesh.differentiation_matrix().clone()
}

pub fn eval_pn(mesh: &ChebyshevMesh, lambda: c64, t: f64) -> Result<c64> {
    mesh.eval_pn(lambda, t)
}

/// `Na + 1` Chebyshev extremal points on `[-tau_max, 0]`, ordered from `0`
/// down to `-tau_max`.
pub fn history_nodes(na: usize, tau_max: f64) -> BarycentricNodes {
    let points = (0..=na)
        .map(|j| {
            if j == na {
                -tau_max
            } else {
                let s = (j as f64 * PI / (2 * na) as f64).sin();
                -tau_max * s * s
            }
        })
        .collect();
    let weights = (0..=na)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == na {
                0.5 * sign
            } else {
                sign
            }
        })
        .collect();
    BarycentricNodes::new(points, weights)
}
