//! Gauss-Newton corrector on the Hamiltonian nonlinear eigenproblem.
//!
//! At the pseudospectral abscissa the matrix
//! `H_sigma(j omega) = j omega I - M_0 - sum_i (M_i e^{-j omega tau_i} + M_-i e^{j omega tau_i})`
//! is singular and the imaginary eigenvalue `j omega` is a fold point. The
//! unknowns `(u, v, omega, sigma)` are pinned down by `4n + 3` real equations:
//! `H [u; v] = 0`, the normalisation `c^* [u; v] = 1` and the stationarity
//! condition `Im{v^* (I + sum_i tau_i A_{sigma,i} e^{-j omega tau_i}) u} = 0`.

use faer::{c64, Mat};
use rayon::prelude::*;

use crate::error::{Error, LinalgError, Result};
use crate::linalg;
use crate::predictor::PredictorResult;
use crate::system::{CMat, HamiltonianBlocks, PerturbationSpec, ShiftedSystem, TimeDelaySystem};

pub const MAX_ITER: usize = 50;
pub const MAX_HALVINGS: usize = 8;
const STEP_TOL: f64 = 1e-14;
const RESIDUAL_TOL: f64 = 1e-10;

/// `H_sigma` and its derivatives on one vertical line.
pub struct HamiltonianLine {
    shifted: ShiftedSystem,
    blocks: HamiltonianBlocks,
    level: f64,
    level_slope: f64,
}

impl HamiltonianLine {
    pub fn new(sys: &TimeDelaySystem, spec: &PerturbationSpec, sigma: f64) -> Self {
        let shifted = sys.shift(sigma);
        let level = spec.level(sys, sigma);
        let blocks = shifted.hamiltonian_blocks(level);
        Self {
            shifted,
            blocks,
            level,
            level_slope: spec.epsilon() * spec.weight_slope(sys, sigma),
        }
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn shifted(&self) -> &ShiftedSystem {
        &self.shifted
    }

    fn n(&self) -> usize {
        self.shifted.n()
    }

    fn delays(&self) -> &[f64] {
        &self.shifted.delays[1..]
    }

    pub fn eval(&self, lambda: c64) -> CMat {
        let p = 2 * self.n();
        let mut h = Mat::from_fn(p, p, |i, j| -self.blocks.m0[(i, j)]);
        for k in 0..p {
            h[(k, k)] += lambda;
        }
        for ((tau, plus), minus) in self.delays().iter().zip(&self.blocks.delayed).zip(&self.blocks.advanced) {
            let back = (-lambda * tau).exp();
            let fwd = (lambda * tau).exp();
            for j in 0..p {
                for i in 0..p {
                    h[(i, j)] -= plus[(i, j)] * back + minus[(i, j)] * fwd;
                }
            }
        }
        h
    }

    /// `dH/dlambda`.
    pub fn derivative(&self, lambda: c64) -> CMat {
        let p = 2 * self.n();
        let mut h = Mat::<c64>::identity(p, p);
        for ((tau, plus), minus) in self.delays().iter().zip(&self.blocks.delayed).zip(&self.blocks.advanced) {
            let back = (-lambda * tau).exp() * tau;
            let fwd = (lambda * tau).exp() * tau;
            for j in 0..p {
                for i in 0..p {
                    h[(i, j)] += plus[(i, j)] * back - minus[(i, j)] * fwd;
                }
            }
        }
        h
    }

    /// `(dH/dsigma) x` at fixed `lambda`.
    fn sigma_derivative_times(&self, lambda: c64, x: &[c64]) -> Vec<c64> {
        let n = self.n();
        let ss = 2.0 * self.level * self.level_slope;
        let mut out: Vec<c64> = (0..2 * n)
            .map(|i| if i < n { x[i] + x[n + i] * ss } else { -x[i] })
            .collect();
        for ((tau, plus), minus) in self.delays().iter().zip(&self.blocks.delayed).zip(&self.blocks.advanced) {
            let back = (-lambda * tau).exp() * tau;
            let fwd = (lambda * tau).exp() * tau;
            let a = linalg::mat_vec(plus.as_ref(), x);
            let b = linalg::mat_vec(minus.as_ref(), x);
            for i in 0..2 * n {
                out[i] += a[i] * back + b[i] * fwd;
            }
        }
        out
    }

    /// `G = I + sum_i tau_i A_{sigma,i} e^{-j omega tau_i}` and its
    /// derivatives in `omega` and `sigma`.
    fn stationarity_matrices(&self, omega: f64) -> [CMat; 3] {
        let n = self.n();
        let mut g = Mat::<c64>::identity(n, n);
        let mut g_omega = Mat::<c64>::zeros(n, n);
        let mut g_sigma = Mat::<c64>::zeros(n, n);
        for (tau, a) in self.delays().iter().zip(&self.shifted.matrices[1..]) {
            let e = c64::new(0.0, -omega * tau).exp() * tau;
            let eo = e * c64::new(0.0, -tau);
            let es = e * -tau;
            for j in 0..n {
                for i in 0..n {
                    g[(i, j)] += a[(i, j)] * e;
                    g_omega[(i, j)] += a[(i, j)] * eo;
                    g_sigma[(i, j)] += a[(i, j)] * es;
                }
            }
        }
        [g, g_omega, g_sigma]
    }
}

/// `H_sigma(lambda)` with the level `epsilon w(sigma)` evaluated at `sigma`.
pub fn assemble_h(sys: &TimeDelaySystem, spec: &PerturbationSpec, sigma: f64, lambda: c64) -> CMat {
    HamiltonianLine::new(sys, spec, sigma).eval(lambda)
}

/// Unit right singular vector of the smallest singular value.
pub fn null_vector(h: &CMat) -> Result<(Vec<c64>, f64)> {
    Ok(linalg::null_vector(h.as_ref())?)
}

/// Point in the unknown space: `x = [u; v]`, `omega`, `sigma`.
#[derive(Clone, Debug, PartialEq)]
pub struct Iterate {
    pub x: Vec<c64>,
    pub omega: f64,
    pub sigma: f64,
}

impl Iterate {
    fn n(&self) -> usize {
        self.x.len() / 2
    }

    fn to_real(&self) -> Vec<f64> {
        let n = self.n();
        let (u, v) = self.x.split_at(n);
        u.iter()
            .map(|z| z.re)
            .chain(u.iter().map(|z| z.im))
            .chain(v.iter().map(|z| z.re))
            .chain(v.iter().map(|z| z.im))
            .chain([self.omega, self.sigma])
            .collect()
    }

    fn from_real(n: usize, z: &[f64]) -> Self {
        let x = (0..2 * n)
            .map(|k| {
                let (re, im) = if k < n { (k, n + k) } else { (n + k, 2 * n + k) };
                c64::new(z[re], z[im])
            })
            .collect();
        Self {
            x,
            omega: z[4 * n],
            sigma: z[4 * n + 1],
        }
    }
}

fn re_col(n: usize, k: usize) -> usize {
    if k < n { k } else { n + k }
}

fn im_col(n: usize, k: usize) -> usize {
    re_col(n, k) + n
}

/// The `4n + 3` real equations, in the order `Re(Hx)`, `Im(Hx)`,
/// `Re`/`Im` of `c^* x - 1`, stationarity.
pub fn residual(sys: &TimeDelaySystem, spec: &PerturbationSpec, z: &Iterate, cref: &[c64]) -> Vec<f64> {
    let line = HamiltonianLine::new(sys, spec, z.sigma);
    residual_on(&line, z, cref)
}

fn residual_on(line: &HamiltonianLine, z: &Iterate, cref: &[c64]) -> Vec<f64> {
    let n = z.n();
    let hx = linalg::mat_vec(line.eval(c64::new(0.0, z.omega)).as_ref(), &z.x);
    let norm: c64 = cref.iter().zip(&z.x).map(|(c, x)| c.conj() * x).sum::<c64>() - 1.0;
    let [g, _, _] = line.stationarity_matrices(z.omega);
    let stat = bilinear(&z.x[n..], &g, &z.x[..n]).im;
    hx.iter()
        .map(|c| c.re)
        .chain(hx.iter().map(|c| c.im))
        .chain([norm.re, norm.im, stat])
        .collect()
}

/// `v^* G u`.
fn bilinear(v: &[c64], g: &CMat, u: &[c64]) -> c64 {
    linalg::mat_vec(g.as_ref(), u)
        .iter()
        .zip(v)
        .map(|(a, b)| b.conj() * a)
        .sum()
}

/// Analytic `(4n + 3) x (4n + 2)` Jacobian of [`residual`].
pub fn jacobian(sys: &TimeDelaySystem, spec: &PerturbationSpec, z: &Iterate, cref: &[c64]) -> Mat<f64> {
    let line = HamiltonianLine::new(sys, spec, z.sigma);
    jacobian_on(&line, z, cref)
}

fn jacobian_on(line: &HamiltonianLine, z: &Iterate, cref: &[c64]) -> Mat<f64> {
    let n = z.n();
    let p = 2 * n;
    let lambda = c64::new(0.0, z.omega);
    let h = line.eval(lambda);
    let mut jac = Mat::<f64>::zeros(4 * n + 3, 4 * n + 2);
    let put_complex_col = |jac: &mut Mat<f64>, col: usize, values: &mut dyn Iterator<Item = c64>| {
        for (i, c) in values.enumerate() {
            jac[(i, col)] = c.re;
            jac[(p + i, col)] = c.im;
        }
    };
    let j = c64::new(0.0, 1.0);
    for k in 0..p {
        put_complex_col(&mut jac, re_col(n, k), &mut (0..p).map(|i| h[(i, k)]));
        put_complex_col(&mut jac, im_col(n, k), &mut (0..p).map(|i| j * h[(i, k)]));
    }
    let dh_omega = linalg::mat_vec(line.derivative(lambda).as_ref(), &z.x);
    put_complex_col(&mut jac, 4 * n, &mut dh_omega.iter().map(|c| j * c));
    let dh_sigma = line.sigma_derivative_times(lambda, &z.x);
    put_complex_col(&mut jac, 4 * n + 1, &mut dh_sigma.into_iter());

    for k in 0..p {
        let c = cref[k].conj();
        jac[(2 * p, re_col(n, k))] = c.re;
        jac[(2 * p + 1, re_col(n, k))] = c.im;
        jac[(2 * p, im_col(n, k))] = -c.im;
        jac[(2 * p + 1, im_col(n, k))] = c.re;
    }

    let row = 2 * p + 2;
    let (u, v) = z.x.split_at(n);
    let [g, g_omega, g_sigma] = line.stationarity_matrices(z.omega);
    let g_adj = Mat::from_fn(n, n, |r, c| g[(c, r)].conj());
    let b = linalg::mat_vec(g_adj.as_ref(), v);
    let gu = linalg::mat_vec(g.as_ref(), u);
    for k in 0..n {
        jac[(row, re_col(n, k))] = -b[k].im;
        jac[(row, im_col(n, k))] = b[k].re;
        jac[(row, re_col(n, n + k))] = gu[k].im;
        jac[(row, im_col(n, n + k))] = -gu[k].re;
    }
    jac[(row, 4 * n)] = bilinear(v, &g_omega, u).im;
    jac[(row, 4 * n + 1)] = bilinear(v, &g_sigma, u).im;
    jac
}

fn norm2(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrectionCandidate {
    /// Predictor frequency the candidate was seeded from.
    pub seed_omega: f64,
    pub u: Vec<c64>,
    pub v: Vec<c64>,
    pub omega: f64,
    pub sigma: f64,
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Why the candidate was not converged or not accepted.
    pub note: Option<String>,
    /// Converged and on the right level-set sheet.
    pub accepted: bool,
}

/// Damped Gauss-Newton from `start`, with `cref = start.x` fixed.
pub fn gauss_newton_correct(sys: &TimeDelaySystem, spec: &PerturbationSpec, start: &Iterate) -> CorrectionCandidate {
    let n = sys.n();
    let cref = start.x.clone();
    let tol = RESIDUAL_TOL * sys.scale();
    let mut z = start.clone();
    let mut line = HamiltonianLine::new(sys, spec, z.sigma);
    let mut r = residual_on(&line, &z, &cref);
    let mut rnorm = norm2(&r);
    let mut iterations = 0;
    let mut note = None;
    loop {
        if rnorm <= tol {
            break;
        }
        if !rnorm.is_finite() {
            note = Some("residual became non-finite".to_string());
            break;
        }
        if iterations == MAX_ITER {
            note = Some(format!("no convergence within {MAX_ITER} iterations"));
            break;
        }
        iterations += 1;
        let jac = jacobian_on(&line, &z, &cref);
        let jc = Mat::from_fn(jac.nrows(), jac.ncols(), |i, k| c64::new(jac[(i, k)], 0.0));
        let rhs: Vec<c64> = r.iter().map(|&x| c64::new(-x, 0.0)).collect();
        let step: Vec<f64> = match linalg::lstsq(jc.as_ref(), &rhs) {
            Ok(s) => s.iter().map(|c| c.re).collect(),
            Err(LinalgError::RankDeficient { rank, cols }) => {
                note = Some(format!("Jacobian rank deficient ({rank} of {cols})"));
                break;
            }
            Err(e) => {
                note = Some(e.to_string());
                break;
            }
        };
        let current = z.to_real();
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = current.iter().zip(&step).map(|(a, d)| a + t * d).collect();
            let cand = Iterate::from_real(n, &trial);
            let cand_line = HamiltonianLine::new(sys, spec, cand.sigma);
            let cand_r = residual_on(&cand_line, &cand, &cref);
            let cand_norm = norm2(&cand_r);
            if cand_norm < rnorm {
                accepted = Some((cand, cand_line, cand_r, cand_norm));
                break;
            }
            t *= 0.5;
        }
        let step_norm = norm2(&step);
        let relative_step = step_norm / (1.0 + norm2(&current));
        match accepted {
            Some((cand, cand_line, cand_r, cand_norm)) => {
                z = cand;
                line = cand_line;
                r = cand_r;
                rnorm = cand_norm;
                if t * relative_step <= STEP_TOL {
                    break;
                }
            }
            None => {
                if relative_step > STEP_TOL {
                    note = Some("line search failed to reduce the residual".to_string());
                }
                break;
            }
        }
    }
    let converged = rnorm <= tol;
    if !converged && note.is_none() {
        note = Some(format!("stagnated at residual {rnorm:e}"));
    }
    let (u, v) = z.x.split_at(n);
    CorrectionCandidate {
        seed_omega: start.omega,
        u: u.to_vec(),
        v: v.to_vec(),
        omega: z.omega,
        sigma: z.sigma,
        residual_norm: rnorm,
        converged,
        iterations,
        note: if converged { None } else { note },
        accepted: converged,
    }
}

/// Seed on `(sigma, omega)` from the null vector of `H_sigma(j omega)`.
pub fn seed(sys: &TimeDelaySystem, spec: &PerturbationSpec, sigma: f64, omega: f64) -> Result<Iterate> {
    let (x, _) = null_vector(&assemble_h(sys, spec, sigma, c64::new(0.0, omega)))?;
    Ok(Iterate { x, omega, sigma })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PsaResult {
    pub alpha_epsilon: f64,
    pub omega_epsilon: f64,
    /// Index of the maximising candidate.
    pub best: usize,
    pub candidates: Vec<CorrectionCandidate>,
}

/// Extra seeds tried at `sigma_tilde + k tol / 2` when the primary seed fails.
/// When no bisection test succeeded, `sigma_tilde` is the spectral abscissa
/// itself and the seed can sit on a saddle of the residual norm (the top of a
/// level curve around a real root), where Gauss-Newton cannot make progress.
const RESEED_STEPS: usize = 3;

/// Corrects every predictor frequency and takes the largest converged `sigma`.
pub fn correct_all(sys: &TimeDelaySystem, spec: &PerturbationSpec, pred: &PredictorResult) -> Result<PsaResult> {
    if pred.frequencies.is_empty() {
        return Err(Error::NoCandidates);
    }
    let floor = pred.sigma_tilde - 10.0 * pred.tol;
    let candidates: Vec<CorrectionCandidate> = pred
        .frequencies
        .par_iter()
        .map(|&omega| {
            let mut first = None;
            for k in 0..=RESEED_STEPS {
                let sigma = pred.sigma_tilde + k as f64 * 0.5 * pred.tol;
                let start = seed(sys, spec, sigma, omega)?;
                let mut c = gauss_newton_correct(sys, spec, &start);
                if c.converged && c.sigma < floor {
                    c.accepted = false;
                    c.note = Some(format!("converged to sigma = {} below {floor}", c.sigma));
                } else if c.converged && c.omega < -1e-12 {
                    c.accepted = false;
                    c.note = Some(format!("converged to negative frequency {}", c.omega));
                }
                if c.accepted {
                    if k > 0 {
                        c.note = Some(format!("reseeded at sigma = {sigma}"));
                    }
                    return Ok(c);
                }
                first.get_or_insert(c);
            }
            Ok(first.expect("at least one attempt"))
        })
        .collect::<Result<_>>()?;
    let best = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.accepted)
        .max_by(|a, b| a.1.sigma.total_cmp(&b.1.sigma))
        .map(|(i, _)| i);
    match best {
        Some(best) => Ok(PsaResult {
            alpha_epsilon: candidates[best].sigma,
            omega_epsilon: candidates[best].omega,
            best,
            candidates,
        }),
        None => {
            let reasons: Vec<String> = candidates
                .iter()
                .map(|c| format!("omega {}: {}", c.seed_omega, c.note.as_deref().unwrap_or("rejected")))
                .collect();
            Err(Error::CorrectorFailed(reasons.join("; ")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::mesh_for;
    use crate::predictor::{predict, PredictorSettings};
    use crate::roots::escalate;
    use crate::system::{eval_level, real_matrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const SYS_B_ALPHA: f64 = -0.165_168_205_022_571_85;

    fn scalar_ode() -> TimeDelaySystem {
        TimeDelaySystem::new(vec![real_matrix(1, &[-1.0])], vec![0.0]).unwrap()
    }

    fn scalar_delay() -> TimeDelaySystem {
        TimeDelaySystem::new(vec![real_matrix(1, &[0.0]), real_matrix(1, &[-1.0])], vec![0.0, 1.0])
            .unwrap()
    }

    fn random_system(rng: &mut ChaCha8Rng, n: usize, m: usize) -> TimeDelaySystem {
        let mut delays = vec![0.0];
        for _ in 0..m {
            let last = *delays.last().unwrap();
            delays.push(last + rng.random_range(0.2..1.0));
        }
        let matrices = (0..=m)
            .map(|i| {
                let entries: Vec<f64> = (0..n * n)
                    .map(|_| rng.random_range(-1.0..1.0) / if i == 0 { 1.0 } else { 2.0 })
                    .collect();
                real_matrix(n, &entries)
            })
            .collect();
        TimeDelaySystem::new(matrices, delays).unwrap()
    }

    fn pipeline(sys: &TimeDelaySystem, spec: &PerturbationSpec) -> (f64, PredictorResult, PsaResult) {
        let alpha0 = escalate(sys, 16).unwrap().alpha0;
        let mesh = mesh_for(sys, 6).unwrap();
        let pred = predict(sys, spec, &mesh, alpha0 - 1e-8, &PredictorSettings::default()).unwrap();
        let res = correct_all(sys, spec, &pred).unwrap();
        (alpha0, pred, res)
    }

    #[test]
    fn assemble_scalar_examples() {
        let s = scalar_ode();
        let spec = PerturbationSpec::unit_weights(&s, 0.1).unwrap();
        let h = assemble_h(&s, &spec, -0.9, c64::new(0.0, 0.0));
        let expected = [[0.1, 0.01], [-1.0, -0.1]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((h[(i, j)] - c64::new(expected[i][j], 0.0)).norm() < 1e-15);
            }
        }
        let h = assemble_h(&s, &spec, -0.9, c64::new(0.0, 1.0));
        let expected = [[c64::new(0.1, 1.0), c64::new(0.01, 0.0)], [c64::new(-1.0, 0.0), c64::new(-0.1, 1.0)]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((h[(i, j)] - expected[i][j]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn null_vector_examples() {
        let h = Mat::from_fn(2, 2, |i, j| c64::new([[0.1, 0.01], [-1.0, -0.1]][i][j], 0.0));
        let (x, smin) = null_vector(&h).unwrap();
        assert!(smin < 1e-15);
        let r = x[1] / x[0];
        assert!((r - c64::new(-10.0, 0.0)).norm() < 1e-12);
        assert!((linalg::vector_norm(&x) - 1.0).abs() < 1e-14);
        let (_, smin) = null_vector(&Mat::identity(2, 2)).unwrap();
        assert!((smin - 1.0).abs() < 1e-15);
        let d = Mat::from_fn(2, 2, |i, j| c64::new(if i == j { [0.0, 5.0][i] } else { 0.0 }, 0.0));
        let (x, smin) = null_vector(&d).unwrap();
        assert_eq!(smin, 0.0);
        assert!((x[0].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hamiltonian_singular_iff_singular_value_equals_level() {
        let s = scalar_delay();
        let spec = PerturbationSpec::unit_weights(&s, 0.1).unwrap();
        let line = HamiltonianLine::new(&s, &spec, -0.3);
        for omega in [0.0, 0.7, 1.3, 4.0] {
            let lambda = c64::new(0.0, omega);
            let f = line.shifted().eval(lambda)[(0, 0)];
            let h = line.eval(lambda);
            let det = h[(0, 0)] * h[(1, 1)] - h[(0, 1)] * h[(1, 0)];
            let expected = line.level().powi(2) - f.norm_sqr();
            assert!((det - c64::new(expected, 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn residual_vanishes_at_scalar_solution() {
        let s = scalar_ode();
        let spec = PerturbationSpec::unit_weights(&s, 0.1).unwrap();
        let k = 101f64.sqrt();
        let x = vec![c64::new(1.0 / k, 0.0), c64::new(-10.0 / k, 0.0)];
        let z = Iterate { x: x.clone(), omega: 0.0, sigma: -0.9 };
        let r = residual(&s, &spec, &z, &x);
        assert_eq!(r.len(), 7);
        assert!(norm2(&r) < 1e-15, "{r:?}");

        // A shift in sigma only touches the Hx rows, with slope from dM_0/dsigma.
        let delta = 1e-7;
        let zp = Iterate { sigma: -0.9 + delta, ..z.clone() };
        let rp = residual(&s, &spec, &zp, &x);
        assert!(rp[4..].iter().all(|&v| v.abs() < 1e-18));
        let jac = jacobian(&s, &spec, &z, &x);
        for i in 0..4 {
            assert!((rp[i] - delta * jac[(i, 5)]).abs() < 1e-12);
        }
    }

    #[test]
    fn normalisation_rows_vanish_iff_normalised() {
        let s = scalar_delay();
        let spec = PerturbationSpec::unit_weights(&s, 0.1).unwrap();
        let cref = vec![c64::new(0.6, 0.0), c64::new(0.0, 0.8)];
        let z = Iterate { x: cref.clone(), omega: 1.0, sigma: -0.2 };
        let r = residual(&s, &spec, &z, &cref);
        assert!(r[4].abs() < 1e-15 && r[5].abs() < 1e-15);
        let z2 = Iterate { x: vec![c64::new(1.0, 0.0), c64::new(0.0, 0.0)], ..z };
        let r2 = residual(&s, &spec, &z2, &cref);
        assert!((r2[4] + 0.4).abs() < 1e-15);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..6 {
            let (n, m) = (1 + trial % 3, 1 + trial % 2);
            let sys = random_system(&mut rng, n, m);
            let weights: Vec<f64> = (0..=m).map(|_| rng.random_range(0.5..2.0)).collect();
            let spec = PerturbationSpec::new(weights, 0.2).unwrap();
            let x: Vec<c64> = (0..2 * n)
                .map(|_| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let cref: Vec<c64> = (0..2 * n)
                .map(|_| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let z = Iterate { x, omega: rng.random_range(0.0..3.0), sigma: rng.random_range(-1.0..0.5) };
            let jac = jacobian(&sys, &spec, &z, &cref);
            let base = z.to_real();
            let h = 1e-6;
            for col in 0..base.len() {
                let mut plus = base.clone();
                let mut minus = base.clone();
                plus[col] += h;
                minus[col] -= h;
                let rp = residual(&sys, &spec, &Iterate::from_real(n, &plus), &cref);
                let rm = residual(&sys, &spec, &Iterate::from_real(n, &minus), &cref);
                let fd: Vec<f64> = rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
                let analytic: Vec<f64> = (0..fd.len()).map(|i| jac[(i, col)]).collect();
                let diff: Vec<f64> = fd.iter().zip(&analytic).map(|(a, b)| a - b).collect();
                assert!(
                    norm2(&diff) <= 1e-6 * (1.0 + norm2(&analytic)),
                    "trial {trial} col {col}: {fd:?} vs {analytic:?}"
                );
            }
        }
    }

    #[test]
    fn scalar_closed_forms() {
        let s = scalar_ode();
        let spec = PerturbationSpec::unit_weights(&s, 0.1).unwrap();
        let (_, pred, res) = pipeline(&s, &spec);
        assert!((res.alpha_epsilon + 0.9).abs() < 1e-12, "{}", res.alpha_epsilon);
        assert!(res.omega_epsilon.abs() < 1e-6);
        let c = &res.candidates[res.best];
        assert!(c.iterations <= 10);
        assert!(c.residual_norm <= 1e-12);
        assert!(pred.frequencies.len() == 1);

        let spec = PerturbationSpec::new(vec![2.0], 0.1).unwrap();
        let (_, _, res) = pipeline(&s, &spec);
        assert!((res.alpha_epsilon + 0.95).abs() < 1e-12);
    }

    #[test]
    fn seeding_at_a_solution_takes_no_step() {
        let s = scalar_ode();
        let spec = PerturbationSpec::unit_weights(&s, 0.1).unwrap();
        let k = 101f64.sqrt();
        let start = Iterate {
            x: vec![c64::new(1.0 / k, 0.0), c64::new(-10.0 / k, 0.0)],
            omega: 0.0,
            sigma: -0.9,
        };
        let c = gauss_newton_correct(&s, &spec, &start);
        assert!(c.converged);
        assert!(c.iterations <= 1);
        assert_eq!(c.sigma, -0.9);
    }

    #[test]
    fn scalar_delay_reference_value() {
        let s = scalar_delay();
        let spec = PerturbationSpec::unit_weights(&s, 0.1).unwrap();
        let (alpha0, _, res) = pipeline(&s, &spec);
        assert!((res.alpha_epsilon - SYS_B_ALPHA).abs() < 1e-8, "{}", res.alpha_epsilon);
        assert!(res.alpha_epsilon > alpha0);
        assert!((res.omega_epsilon - 1.330_240_7).abs() < 1e-6);
    }

    #[test]
    fn maximum_over_candidates_is_reported() {
        let s = scalar_delay();
        let spec = PerturbationSpec::unit_weights(&s, 0.1).unwrap();
        let (_, pred, _) = pipeline(&s, &spec);
        // A far-off second seed converges to a lower local maximum of the level set.
        let mut two = pred.clone();
        two.frequencies = vec![7.5, pred.frequencies[0]];
        let res = correct_all(&s, &spec, &two).unwrap();
        assert_eq!(res.candidates.len(), 2);
        assert!((res.alpha_epsilon - SYS_B_ALPHA).abs() < 1e-8);
        let max = res
            .candidates
            .iter()
            .filter(|c| c.accepted)
            .map(|c| c.sigma)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(res.alpha_epsilon, max);
    }

    #[test]
    fn empty_frequency_list_is_an_error() {
        let s = scalar_delay();
        let spec = PerturbationSpec::unit_weights(&s, 0.1).unwrap();
        let (_, mut pred, _) = pipeline(&s, &spec);
        pred.frequencies.clear();
        assert!(matches!(correct_all(&s, &spec, &pred), Err(Error::NoCandidates)));
    }

    fn check_converged_candidate(sys: &TimeDelaySystem, spec: &PerturbationSpec, c: &CorrectionCandidate) {
        assert!(c.converged && c.residual_norm <= 1e-10 * sys.scale());
        let f = |w: f64| eval_level(sys, spec, c64::new(c.sigma, w)).unwrap();
        let target = 1.0 / spec.epsilon();
        assert!((f(c.omega) - target).abs() <= 1e-8 * target, "{} vs {target}", f(c.omega));
        let h = 1e-5;
        let slope = (f(c.omega + h) - f(c.omega - h)) / (2.0 * h);
        assert!(slope.abs() <= 1e-4 * target, "slope {slope}");

        // Left eigenvector [-v^*, u^*] against H'.
        let line = HamiltonianLine::new(sys, spec, c.sigma);
        let x: Vec<c64> = c.u.iter().chain(&c.v).copied().collect();
        let hp = linalg::mat_vec(line.derivative(c64::new(0.0, c.omega)).as_ref(), &x);
        let n = c.u.len();
        let scalar: c64 = (0..n).map(|k| -c.v[k].conj() * hp[k] + c.u[k].conj() * hp[n + k]).sum();
        assert!(scalar.norm() <= 1e-9 * linalg::vector_norm(&x).powi(2));
    }

    #[test]
    fn converged_points_lie_on_the_level_set() {
        let s = scalar_delay();
        let spec = PerturbationSpec::unit_weights(&s, 0.1).unwrap();
        let (_, _, res) = pipeline(&s, &spec);
        check_converged_candidate(&s, &spec, &res.candidates[res.best]);
    }

    #[test]
    fn left_eigenvector_scalar_is_twice_the_stationarity_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let sys = random_system(&mut rng, 2, 2);
            let spec = PerturbationSpec::unit_weights(&sys, 0.1).unwrap();
            let n = 2;
            let x: Vec<c64> = (0..2 * n)
                .map(|_| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let (omega, sigma) = (rng.random_range(0.0..2.0), rng.random_range(-0.5..0.5));
            let line = HamiltonianLine::new(&sys, &spec, sigma);
            let hp = linalg::mat_vec(line.derivative(c64::new(0.0, omega)).as_ref(), &x);
            let scalar: c64 = (0..n).map(|k| -x[n + k].conj() * hp[k] + x[k].conj() * hp[n + k]).sum();
            let g = residual_on(&line, &Iterate { x: x.clone(), omega, sigma }, &x)[4 * n + 2];
            assert!(scalar.re.abs() <= 1e-12 * scalar.norm().max(1.0));
            assert!((scalar - c64::new(0.0, -2.0 * g)).norm() <= 1e-12 * (1.0 + g.abs()));
        }
    }

    #[test]
    fn scalar_determinant_oracle() {
        // n = 1: det H = s^2 - |F_sigma(j omega)|^2 must vanish together with
        // its omega-derivative, and be negative on every line to the right.
        let s = scalar_delay();
        let spec = PerturbationSpec::unit_weights(&s, 0.1).unwrap();
        let (_, _, res) = pipeline(&s, &spec);
        let det = |sigma: f64, omega: f64| {
            let line = HamiltonianLine::new(&s, &spec, sigma);
            line.level().powi(2) - line.shifted().eval(c64::new(0.0, omega))[(0, 0)].norm_sqr()
        };
        let (a, w) = (res.alpha_epsilon, res.omega_epsilon);
        assert!(det(a, w).abs() < 1e-12);
        let h = 1e-5;
        assert!(((det(a, w + h) - det(a, w - h)) / (2.0 * h)).abs() < 1e-8);
        for k in 0..4000 {
            assert!(det(a + 1e-6, k as f64 * 0.005) < 0.0);
        }
    }

    #[test]
    fn random_systems_converge_right_of_the_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..5 {
            let n = 1 + trial % 4;
            let m = 1 + trial % 3;
            let sys = random_system(&mut rng, n, m);
            let spec = PerturbationSpec::unit_weights(&sys, 0.1).unwrap();
            let (alpha0, _, res) = pipeline(&sys, &spec);
            assert!(res.alpha_epsilon > alpha0, "trial {trial}");
            let best = &res.candidates[res.best];
            assert!(best.iterations <= 20, "trial {trial}: {} iterations", best.iterations);
            check_converged_candidate(&sys, &spec, best);
        }
    }
}
