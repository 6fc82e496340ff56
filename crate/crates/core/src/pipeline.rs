//! End-to-end computation: spectral abscissa, bisection predictor, corrector.

use std::fmt;

use crate::corrector::{correct_all, PsaResult};
use crate::discretization::mesh_for;
use crate::error::Error;
use crate::predictor::{predict, PredictorResult, PredictorSettings, DEFAULT_MAX_ITER};
use crate::roots::{characteristic_roots, escalate, RootSet};
use crate::system::{PerturbationSpec, TimeDelaySystem};

/// Subtracted from the refined spectral abscissa before bisecting, so that the
/// first line tested is never right of the spectrum through rounding.
pub const ALPHA0_MARGIN: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AbscissaSettings {
    /// Mesh half-size `N`.
    pub half: usize,
    pub tol: f64,
    pub tol_im: Option<f64>,
    /// Fixed generator resolution; `None` escalates from `max(16, 2N)`.
    pub na: Option<usize>,
}

impl Default for AbscissaSettings {
    fn default() -> Self {
        Self {
            half: 6,
            tol: 0.05,
            tol_im: None,
            na: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Input,
    Roots,
    Predictor,
    Corrector,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Input => "input",
            Stage::Roots => "spectral abscissa",
            Stage::Predictor => "predictor",
            Stage::Corrector => "corrector",
        })
    }
}

#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub error: Error,
}

impl StageError {
    pub fn new(stage: Stage, error: Error) -> Self {
        Self { stage, error }
    }

    /// 3 for corrector failures, 2 for everything before.
    pub fn exit_code(&self) -> i32 {
        match self.stage {
            Stage::Corrector => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} failed: {}", self.stage, self.error)
    }
}

impl std::error::Error for StageError {}

#[derive(Clone, Debug)]
pub struct AbscissaRun {
    pub roots: RootSet,
    pub predictor: PredictorResult,
    pub psa: PsaResult,
    pub settings: AbscissaSettings,
}

/// Characteristic roots at a fixed `Na`, or escalated from `max(16, 2 half)`.
pub fn root_set(sys: &TimeDelaySystem, na: Option<usize>, half: usize) -> crate::error::Result<RootSet> {
    match na {
        Some(na) => characteristic_roots(sys, na, None),
        None => escalate(sys, 16.max(2 * half)),
    }
}

pub fn run_abscissa(
    sys: &TimeDelaySystem,
    spec: &PerturbationSpec,
    settings: AbscissaSettings,
) -> Result<AbscissaRun, StageError> {
    spec.check_compatible(sys).map_err(|e| StageError::new(Stage::Input, e))?;
    let mesh = mesh_for(sys, settings.half).map_err(|e| StageError::new(Stage::Input, e))?;
    let roots = root_set(sys, settings.na, settings.half).map_err(|e| StageError::new(Stage::Roots, e))?;
    let predictor_settings = PredictorSettings {
        tol: settings.tol,
        tol_im: settings.tol_im,
        max_iter: DEFAULT_MAX_ITER,
    };
    let predictor = predict(sys, spec, &mesh, roots.alpha0 - ALPHA0_MARGIN, &predictor_settings)
        .map_err(|e| StageError::new(Stage::Predictor, e))?;
    let psa = correct_all(sys, spec, &predictor).map_err(|e| match e {
        Error::NoCandidates => StageError::new(Stage::Predictor, e),
        e => StageError::new(Stage::Corrector, e),
    })?;
    Ok(AbscissaRun {
        roots,
        predictor,
        psa,
        settings,
    })
}
