//! Retarded time-delay systems `x'(t) = sum_i A_i x(t - tau_i)` and the
//! weighted perturbation class that defines their pseudospectra.
//!
//! The characteristic matrix is `F(lambda) = lambda I - sum_i A_i exp(-lambda tau_i)`.
//! The level-set function `f(lambda) = w(lambda) / sigma_min(F(lambda))` has the
//! epsilon-pseudospectrum as its super-level set `{f > 1/epsilon}`.

use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::linalg;

/// Dense complex matrix used throughout the crate.
pub type CMat = Mat<c64>;

/// Builds an `n x n` complex matrix from real row-major entries.
pub fn real_matrix(n: usize, entries: &[f64]) -> CMat {
    assert_eq!(entries.len(), n * n, "expected {} entries", n * n);
    Mat::from_fn(n, n, |i, j| c64::new(entries[i * n + j], 0.0))
}

/// Builds an `n x n` complex matrix from complex row-major entries.
pub fn complex_matrix(n: usize, entries: &[c64]) -> CMat {
    assert_eq!(entries.len(), n * n, "expected {} entries", n * n);
    Mat::from_fn(n, n, |i, j| entries[i * n + j])
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeDelaySystem {
    n: usize,
    matrices: Vec<CMat>,
    delays: Vec<f64>,
}

impl TimeDelaySystem {
    /// `matrices[i]` multiplies `x(t - delays[i])`; `delays[0]` must be `0`
    /// and the delays strictly increasing.
    pub fn new(matrices: Vec<CMat>, delays: Vec<f64>) -> Result<Self> {
        if matrices.is_empty() {
            return Err(Error::InvalidSystem("at least A_0 is required".into()));
        }
        if matrices.len() != delays.len() {
            return Err(Error::InvalidSystem(format!(
                "{} matrices but {} delays",
                matrices.len(),
                delays.len()
            )));
        }
        let n = matrices[0].nrows();
        if n == 0 {
            return Err(Error::InvalidSystem("state dimension must be positive".into()));
        }
        for (i, a) in matrices.iter().enumerate() {
            if a.nrows() != n || a.ncols() != n {
                return Err(Error::InvalidSystem(format!(
                    "matrix {i} is {}x{}, expected {n}x{n}",
                    a.nrows(),
                    a.ncols()
                )));
            }
            if !linalg::all_finite(a.as_ref()) {
                return Err(Error::InvalidSystem(format!("matrix {i} has non-finite entries")));
            }
        }
        if delays[0] != 0.0 {
            return Err(Error::InvalidSystem(format!("delay 0 must be 0, got {}", delays[0])));
        }
        for (i, pair) in delays.windows(2).enumerate() {
            if !pair[1].is_finite() {
                return Err(Error::InvalidSystem(format!("delay {} is not finite", i + 1)));
            }
            if pair[1] == pair[0] {
                return Err(Error::InvalidSystem(format!(
                    "duplicate delay {} at positions {i} and {}",
                    pair[1],
                    i + 1
                )));
            }
            if pair[1] < pair[0] {
                return Err(Error::InvalidSystem(format!(
                    "delays must be strictly increasing (position {})",
                    i + 1
                )));
            }
        }
        Ok(Self { n, matrices, delays })
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of nonzero delays.
    pub fn m(&self) -> usize {
        self.delays.len() - 1
    }

    pub fn matrices(&self) -> &[CMat] {
        &self.matrices
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn tau_max(&self) -> f64 {
        *self.delays.last().unwrap()
    }

    /// True when every matrix entry has zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.matrices
            .iter()
            .all(|a| (0..self.n).all(|i| (0..self.n).all(|j| a[(i, j)].im == 0.0)))
    }

    /// `1 + max_i ||A_i||_F`, the residual scale used by the refinement loops.
    pub fn scale(&self) -> f64 {
        1.0 + self
            .matrices
            .iter()
            .map(|a| linalg::frobenius_norm(a.as_ref()))
            .fold(0.0, f64::max)
    }

    /// Characteristic matrix `F(lambda)`.
    pub fn eval_f_matrix(&self, lambda: c64) -> CMat {
        let mut out = Mat::<c64>::zeros(self.n, self.n);
        for (a, &tau) in self.matrices.iter().zip(&self.delays) {
            let e = (-lambda * tau).exp();
            for j in 0..self.n {
                for i in 0..self.n {
                    out[(i, j)] -= a[(i, j)] * e;
                }
            }
        }
        for i in 0..self.n {
            out[(i, i)] += lambda;
        }
        out
    }

    /// `F'(lambda) = I + sum_i tau_i A_i exp(-lambda tau_i)`.
    pub fn eval_f_derivative(&self, lambda: c64) -> CMat {
        let mut out = Mat::<c64>::identity(self.n, self.n);
        for (a, &tau) in self.matrices.iter().zip(&self.delays).skip(1) {
            let e = (-lambda * tau).exp() * tau;
            for j in 0..self.n {
                for i in 0..self.n {
                    out[(i, j)] += a[(i, j)] * e;
                }
            }
        }
        out
    }

    pub fn shift(&self, sigma: f64) -> ShiftedSystem {
        let mut matrices = Vec::with_capacity(self.matrices.len());
        let mut a0 = self.matrices[0].clone();
        for i in 0..self.n {
            a0[(i, i)] -= c64::new(sigma, 0.0);
        }
        matrices.push(a0);
        for (a, &tau) in self.matrices.iter().zip(&self.delays).skip(1) {
            let e = (-tau * sigma).exp();
            matrices.push(Mat::from_fn(self.n, self.n, |i, j| a[(i, j)] * e));
        }
        ShiftedSystem {
            sigma,
            delays: self.delays.clone(),
            matrices,
        }
    }
}

/// Weights `w_i` and radius `epsilon`: perturbations satisfy
/// `||delta A_i||_2 <= epsilon / w_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationSpec {
    weights: Vec<f64>,
    epsilon: f64,
}

impl PerturbationSpec {
    pub fn new(weights: Vec<f64>, epsilon: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidPerturbation("weights must be nonempty".into()));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::InvalidPerturbation(format!("weight {i} = {w} is not positive")));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::InvalidPerturbation(format!("epsilon = {epsilon} is not positive")));
        }
        Ok(Self { weights, epsilon })
    }

    /// Unit weights for every term of `sys`.
    pub fn unit_weights(sys: &TimeDelaySystem, epsilon: f64) -> Result<Self> {
        Self::new(vec![1.0; sys.m() + 1], epsilon)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.weights.clone(), epsilon)
    }

    pub fn check_compatible(&self, sys: &TimeDelaySystem) -> Result<()> {
        if self.weights.len() != sys.m() + 1 {
            return Err(Error::InvalidPerturbation(format!(
                "{} weights for a system with {} terms",
                self.weights.len(),
                sys.m() + 1
            )));
        }
        Ok(())
    }

    /// `w(sigma + j omega) = sum_i exp(-sigma tau_i) / w_i`, independent of omega.
    pub fn weight_on_line(&self, sys: &TimeDelaySystem, sigma: f64) -> f64 {
        sys.delays()
            .iter()
            .zip(&self.weights)
            .map(|(&tau, &w)| (-sigma * tau).exp() / w)
            .sum()
    }

    /// `dw/dsigma` along the real direction.
    pub fn weight_slope(&self, sys: &TimeDelaySystem, sigma: f64) -> f64 {
        -sys.delays()
            .iter()
            .zip(&self.weights)
            .map(|(&tau, &w)| tau * (-sigma * tau).exp() / w)
            .sum::<f64>()
    }

    /// The Hamiltonian level `s = epsilon w(sigma)`.
    pub fn level(&self, sys: &TimeDelaySystem, sigma: f64) -> f64 {
        self.epsilon * self.weight_on_line(sys, sigma)
    }
}

/// `w(sigma)` on the vertical line `Re lambda = sigma`.
pub fn eval_w_line(spec: &PerturbationSpec, sys: &TimeDelaySystem, sigma: f64) -> f64 {
    spec.weight_on_line(sys, sigma)
}

/// `F(lambda)`.
pub fn eval_f_matrix(sys: &TimeDelaySystem, lambda: c64) -> CMat {
    sys.eval_f_matrix(lambda)
}

/// Level-set function `f(lambda) = w(Re lambda) / sigma_min(F(lambda))`.
///
/// Returns `f64::INFINITY` when `sigma_min` is exactly zero, i.e. at a
/// characteristic root.
pub fn eval_level(sys: &TimeDelaySystem, spec: &PerturbationSpec, lambda: c64) -> Result<f64> {
    let smin = linalg::smallest_singular_value(sys.eval_f_matrix(lambda).as_ref())?;
    let w = spec.weight_on_line(sys, lambda.re);
    Ok(level_from_smin(w, smin))
}

pub(crate) fn level_from_smin(weight: f64, smin: f64) -> f64 {
    if smin == 0.0 {
        f64::INFINITY
    } else {
        weight / smin
    }
}

/// The shifted matrices `A_{s,0} = A_0 - sigma I`, `A_{s,i} = A_i exp(-tau_i sigma)`.
#[derive(Clone, Debug)]
pub struct ShiftedSystem {
    pub sigma: f64,
    pub delays: Vec<f64>,
    pub matrices: Vec<CMat>,
}

impl ShiftedSystem {
    pub fn n(&self) -> usize {
        self.matrices[0].nrows()
    }

    /// `F_sigma(lambda) = lambda I - sum_i A_{sigma,i} exp(-lambda tau_i)`.
    pub fn eval(&self, lambda: c64) -> CMat {
        let n = self.n();
        let mut out = Mat::<c64>::zeros(n, n);
        for (a, &tau) in self.matrices.iter().zip(&self.delays) {
            let e = (-lambda * tau).exp();
            for j in 0..n {
                for i in 0..n {
                    out[(i, j)] -= a[(i, j)] * e;
                }
            }
        }
        for i in 0..n {
            out[(i, i)] += lambda;
        }
        out
    }

    /// Blocks of the Hamiltonian-type operator at level `s = epsilon w(sigma)`:
    ///
    /// ```text
    /// M_0    = [ A_{s,0}   -s^2 I      ]     M_i  = [ A_{s,i}  0 ]     M_-i = [ 0  0          ]
    ///          [ I         -A_{s,0}^*  ]            [ 0        0 ]            [ 0  -A_{s,i}^* ]
    /// ```
    ///
    /// The `+I` in the lower-left block of `M_0` makes `H(j omega)` singular
    /// exactly when `F_sigma(j omega)` has `s` as a singular value.
    pub fn hamiltonian_blocks(&self, level: f64) -> HamiltonianBlocks {
        let n = self.n();
        let a0 = &self.matrices[0];
        let mut m0 = Mat::<c64>::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                m0[(i, j)] = a0[(i, j)];
                m0[(n + i, n + j)] = -a0[(j, i)].conj();
            }
            m0[(i, n + i)] = c64::new(-level * level, 0.0);
            m0[(n + i, i)] = c64::new(1.0, 0.0);
        }
        let mut delayed = Vec::with_capacity(self.matrices.len() - 1);
        let mut advanced = Vec::with_capacity(self.matrices.len() - 1);
        for a in self.matrices.iter().skip(1) {
            let mut plus = Mat::<c64>::zeros(2 * n, 2 * n);
            let mut minus = Mat::<c64>::zeros(2 * n, 2 * n);
            for i in 0..n {
                for j in 0..n {
                    plus[(i, j)] = a[(i, j)];
                    minus[(n + i, n + j)] = -a[(j, i)].conj();
                }
            }
            delayed.push(plus);
            advanced.push(minus);
        }
        HamiltonianBlocks {
            m0,
            delayed,
            advanced,
        }
    }
}

/// `M_0`, `M_i` (multiplying `phi(-tau_i)`) and `M_-i` (multiplying `phi(tau_i)`).
#[derive(Clone, Debug)]
pub struct HamiltonianBlocks {
    pub m0: CMat,
    pub delayed: Vec<CMat>,
    pub advanced: Vec<CMat>,
}

/// Convenience wrapper over [`TimeDelaySystem::shift`].
pub fn shift(sys: &TimeDelaySystem, sigma: f64) -> ShiftedSystem {
    sys.shift(sigma)
}

#[cfg(test)]
pub(crate) fn max_abs_diff(a: faer::MatRef<'_, c64>, b: faer::MatRef<'_, c64>) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            worst = worst.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    worst
}
