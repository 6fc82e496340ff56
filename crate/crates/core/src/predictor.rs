//! Bisection predictor for the pseudospectral abscissa.
//!
//! A vertical line `Re lambda = sigma` meets the epsilon-pseudospectrum
//! exactly when the discretized operator `L_sigma^N` has an eigenvalue on the
//! imaginary axis. Starting from the spectral abscissa, the step is doubled
//! until the test fails, after which the bracket is bisected down to `2 tol`.

use faer::c64;

use crate::discretization::{discrete_characteristic, ChebyshevMesh, DiscretizedOperator, OperatorBuilder};
use crate::error::{Error, Result};
use crate::linalg;
use crate::system::{level_from_smin, PerturbationSpec, TimeDelaySystem};

pub const DEFAULT_MAX_ITER: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub struct ImagAxisTest {
    pub present: bool,
    /// `|Im mu|` of the qualifying eigenvalues, increasing and deduplicated.
    pub frequencies: Vec<f64>,
}

/// `1e-7 (1 + ||L||_F)`.
pub fn default_tol_im(op: &DiscretizedOperator) -> f64 {
    1e-7 * (1.0 + op.frobenius_norm())
}

/// An eigenvalue `mu` counts as imaginary when `|Re mu| <= tol_im (1 + |mu|)`.
pub fn has_imaginary_eigs(op: &DiscretizedOperator, tol_im: f64) -> Result<ImagAxisTest> {
    if !(tol_im > 0.0) {
        return Err(Error::InvalidArgument(format!("tol_im = {tol_im} must be positive")));
    }
    let ev = linalg::eigenvalues(op.matrix.as_ref())?.values;
    let qualifying: Vec<c64> = ev
        .into_iter()
        .filter(|mu| mu.re.abs() <= tol_im * (1.0 + mu.norm()))
        .collect();
    let present = !qualifying.is_empty();
    let mut omegas: Vec<f64> = qualifying.iter().map(|mu| mu.im.abs()).collect();
    omegas.sort_by(f64::total_cmp);
    let mut frequencies: Vec<f64> = Vec::with_capacity(omegas.len());
    for w in omegas {
        match frequencies.last() {
            Some(&last) if w - last <= 10.0 * tol_im => {}
            _ => frequencies.push(w),
        }
    }
    Ok(ImagAxisTest { present, frequencies })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictorSettings {
    pub tol: f64,
    /// `None` selects [`default_tol_im`] per operator.
    pub tol_im: Option<f64>,
    pub max_iter: usize,
}

impl Default for PredictorSettings {
    fn default() -> Self {
        Self {
            tol: 0.05,
            tol_im: None,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceEntry {
    pub sigma: f64,
    pub outcome: bool,
    pub frequencies: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictorResult {
    pub sigma_tilde: f64,
    pub frequencies: Vec<f64>,
    pub bracket: (f64, f64),
    pub iterations: usize,
    pub trace: Vec<TraceEntry>,
    pub tol: f64,
}

pub fn predict(
    sys: &TimeDelaySystem,
    spec: &PerturbationSpec,
    mesh: &ChebyshevMesh,
    alpha0: f64,
    settings: &PredictorSettings,
) -> Result<PredictorResult> {
    let tol = settings.tol;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidArgument(format!("tol = {tol} must be positive")));
    }
    if !alpha0.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha0 = {alpha0} must be finite")));
    }
    let builder = OperatorBuilder::new(sys, spec, mesh)?;
    let test = |sigma: f64| -> Result<ImagAxisTest> {
        let op = builder.build(sigma);
        let tol_im = settings.tol_im.unwrap_or_else(|| default_tol_im(&op));
        has_imaginary_eigs(&op, tol_im)
    };

    let mut lower = alpha0;
    let mut upper = f64::INFINITY;
    let mut step = tol;
    let mut trace: Vec<TraceEntry> = Vec::new();
    let mut frequencies: Option<Vec<f64>> = None;
    let mut iterations = 0;
    while upper - lower > 2.0 * tol {
        if iterations == settings.max_iter {
            return Err(Error::PredictorCap {
                iterations,
                lower,
                upper,
                trace: trace.iter().map(|t| (t.sigma, t.outcome)).collect(),
            });
        }
        iterations += 1;
        step *= 2.0;
        let mid = if upper == f64::INFINITY {
            lower + step
        } else {
            0.5 * (lower + upper)
        };
        let outcome = test(mid)?;
        if outcome.present {
            lower = mid;
            frequencies = Some(outcome.frequencies.clone());
        } else {
            upper = mid;
        }
        trace.push(TraceEntry {
            sigma: mid,
            outcome: outcome.present,
            frequencies: outcome.frequencies,
        });
    }
    // Every test failed: harvest frequencies on the starting line instead.
    let frequencies = match frequencies {
        Some(f) => f,
        None => {
            let outcome = test(lower)?;
            trace.push(TraceEntry {
                sigma: lower,
                outcome: outcome.present,
                frequencies: outcome.frequencies.clone(),
            });
            outcome.frequencies
        }
    };
    Ok(PredictorResult {
        sigma_tilde: lower,
        frequencies,
        bracket: (lower, upper),
        iterations,
        trace,
        tol,
    })
}

/// Grid supremum of `f_N(sigma + j omega) = w(sigma) / sigma_min(F_{sigma,N}(j omega))`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSupremum {
    pub value: f64,
    pub omega: f64,
    /// Grid points where `p_N` could not be evaluated.
    pub skipped: Vec<f64>,
}

pub fn alpha_f_n(
    sys: &TimeDelaySystem,
    spec: &PerturbationSpec,
    mesh: &ChebyshevMesh,
    sigma: f64,
    omega_grid: &[f64],
) -> Result<GridSupremum> {
    if omega_grid.iter().any(|w| !w.is_finite()) {
        return Err(Error::InvalidArgument("frequency grid must be finite".into()));
    }
    let shifted = sys.shift(sigma);
    let weight = spec.weight_on_line(sys, sigma);
    let mut best = GridSupremum {
        value: f64::NEG_INFINITY,
        omega: f64::NAN,
        skipped: Vec::new(),
    };
    for &w in omega_grid {
        let f = match discrete_characteristic(&shifted, mesh, c64::new(0.0, w)) {
            Ok(f) => f,
            Err(Error::CollocationSingular { .. }) => {
                best.skipped.push(w);
                continue;
            }
            Err(e) => return Err(e),
        };
        let value = level_from_smin(weight, linalg::smallest_singular_value(f.as_ref())?);
        if value > best.value {
            best.value = value;
            best.omega = w;
        }
    }
    Ok(best)
}
