use serde::{Deserialize, Serialize};

use super::float::{real, real_vec};
use crate::error::{Error, Result};
use crate::pipeline::AbscissaRun;
use crate::roots::RootSet;
use crate::system::PerturbationSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceDoc {
    #[serde(with = "real")]
    pub sigma: f64,
    pub outcome: bool,
    #[serde(with = "real_vec")]
    pub frequencies: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictorDoc {
    #[serde(with = "real")]
    pub sigma_tilde: f64,
    #[serde(with = "real_vec")]
    pub bracket: Vec<f64>,
    pub iterations: usize,
    #[serde(with = "real_vec")]
    pub frequencies: Vec<f64>,
    pub trace: Vec<TraceDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateDoc {
    #[serde(with = "real")]
    pub seed_omega: f64,
    #[serde(with = "real")]
    pub sigma: f64,
    #[serde(with = "real")]
    pub omega: f64,
    #[serde(with = "real")]
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub accepted: bool,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectorDoc {
    pub best: usize,
    pub candidates: Vec<CandidateDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingsDoc {
    #[serde(rename = "N")]
    pub half: usize,
    #[serde(rename = "Na")]
    pub na: usize,
    #[serde(with = "real")]
    pub tol: f64,
    /// `null` when the per-operator default was used.
    pub tol_im: Option<f64>,
    #[serde(with = "real")]
    pub epsilon: f64,
    #[serde(with = "real_vec")]
    pub weights: Vec<f64>,
    /// The computation is deterministic; kept for format stability.
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultDocument {
    #[serde(with = "real")]
    pub alpha0: f64,
    #[serde(with = "real")]
    pub alpha_epsilon: f64,
    #[serde(with = "real")]
    pub omega_epsilon: f64,
    pub predictor: PredictorDoc,
    pub corrector: CorrectorDoc,
    pub settings: SettingsDoc,
}

impl ResultDocument {
    pub fn new(run: &AbscissaRun, spec: &PerturbationSpec) -> Self {
        let p = &run.predictor;
        Self {
            alpha0: run.roots.alpha0,
            alpha_epsilon: run.psa.alpha_epsilon,
            omega_epsilon: run.psa.omega_epsilon,
            predictor: PredictorDoc {
                sigma_tilde: p.sigma_tilde,
                bracket: vec![p.bracket.0, p.bracket.1],
                iterations: p.iterations,
                frequencies: p.frequencies.clone(),
                trace: p
                    .trace
                    .iter()
                    .map(|t| TraceDoc {
                        sigma: t.sigma,
                        outcome: t.outcome,
                        frequencies: t.frequencies.clone(),
                    })
                    .collect(),
            },
            corrector: CorrectorDoc {
                best: run.psa.best,
                candidates: run
                    .psa
                    .candidates
                    .iter()
                    .map(|c| CandidateDoc {
                        seed_omega: c.seed_omega,
                        sigma: c.sigma,
                        omega: c.omega,
                        residual: c.residual_norm,
                        iterations: c.iterations,
                        converged: c.converged,
                        accepted: c.accepted,
                        note: c.note.clone(),
                    })
                    .collect(),
            },
            settings: SettingsDoc {
                half: run.settings.half,
                na: run.roots.na,
                tol: run.settings.tol,
                tol_im: run.settings.tol_im,
                epsilon: spec.epsilon(),
                weights: spec.weights().to_vec(),
                seed: None,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RootDoc {
    #[serde(with = "real")]
    pub re: f64,
    #[serde(with = "real")]
    pub im: f64,
    #[serde(with = "real")]
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RootsDocument {
    #[serde(with = "real")]
    pub alpha0: f64,
    #[serde(rename = "Na")]
    pub na: usize,
    #[serde(with = "real")]
    pub cutoff: f64,
    pub roots: Vec<RootDoc>,
}

impl RootsDocument {
    pub fn new(set: &RootSet) -> Self {
        Self {
            alpha0: set.alpha0,
            na: set.na,
            cutoff: set.cutoff,
            roots: set
                .roots
                .iter()
                .map(|r| RootDoc {
                    re: r.value.re,
                    im: r.value.im,
                    residual: r.residual,
                })
                .collect(),
        }
    }
}

/// Parses any of the output documents, reporting the failing path.
pub fn parse_document<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::InvalidDocument(format!("at `{}`: {}", e.path(), e.inner())))
}
