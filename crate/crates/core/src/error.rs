use thiserror::Error;

/// Failures of the dense linear-algebra layer.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum LinalgError {
    #[error("{routine}: iterative reduction did not converge on a {rows}x{cols} matrix")]
    NoConvergence {
        routine: &'static str,
        rows: usize,
        cols: usize,
    },
    #[error("{routine}: matrix contains non-finite entries")]
    NonFinite { routine: &'static str },
    #[error("matrix is singular to working precision (pivot magnitude {pivot:e})")]
    Singular { pivot: f64 },
    #[error("least-squares matrix is rank deficient (estimated rank {rank} of {cols} columns)")]
    RankDeficient { rank: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("invalid perturbation spec: {0}")]
    InvalidPerturbation(String),
    #[error("invalid document: {0}")]
    InvalidDocument(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("mesh half-width {mesh} does not match the largest system delay {system}")]
    MeshMismatch { mesh: f64, system: f64 },
    #[error("collocation system for p_N is singular at lambda = {re} + {im}j")]
    CollocationSingular { re: f64, im: f64 },
    #[error("spectral abscissa did not settle up to Na = {na} (last change {change:e}); set Na manually")]
    SpectralAbscissaNotConverged { na: usize, change: f64 },
    #[error("no characteristic roots found right of the cutoff {cutoff}")]
    NoRoots { cutoff: f64 },
    #[error("bisection exceeded {iterations} iterations (bracket [{lower}, {upper}])")]
    PredictorCap {
        iterations: usize,
        lower: f64,
        upper: f64,
        /// `(sigma_M, outcome)` for every test performed.
        trace: Vec<(f64, bool)>,
    },
    #[error("predictor produced no candidate frequencies")]
    NoCandidates,
    #[error("no correction candidate converged: {0}")]
    CorrectorFailed(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
