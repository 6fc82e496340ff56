use faer::c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::{complex_matrix, PerturbationSpec, TimeDelaySystem};

/// A matrix entry: `1.5` or `[re, im]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    pub fn value(self) -> c64 {
        match self {
            Entry::Real(x) => c64::new(x, 0.0),
            Entry::Complex([re, im]) => c64::new(re, im),
        }
    }
}

/// Input format: `matrices[i]` is `A_i` as a list of rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDocument {
    pub n: usize,
    pub delays: Vec<f64>,
    pub matrices: Vec<Vec<Vec<Entry>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

impl SystemDocument {
    /// Parses and validates; errors carry the JSON path and line.
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let inner = e.inner();
            Error::InvalidDocument(format!(
                "at `{}` (line {}, column {}): {}",
                e.path(),
                inner.line(),
                inner.column(),
                inner
            ))
        })?;
        doc.system()?;
        doc.perturbation(Some(1.0))?;
        if let Some(eps) = doc.epsilon {
            if !(eps.is_finite() && eps > 0.0) {
                return Err(Error::InvalidDocument(format!("at `epsilon`: {eps} is not positive")));
            }
        }
        Ok(doc)
    }

    pub fn from_system(sys: &TimeDelaySystem, weights: Option<Vec<f64>>, epsilon: Option<f64>) -> Self {
        let n = sys.n();
        let matrices = sys
            .matrices()
            .iter()
            .map(|a| {
                (0..n)
                    .map(|i| {
                        (0..n)
                            .map(|j| {
                                let z = a[(i, j)];
                                if z.im == 0.0 { Entry::Real(z.re) } else { Entry::Complex([z.re, z.im]) }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            n,
            delays: sys.delays().to_vec(),
            matrices,
            weights,
            epsilon,
        }
    }

    pub fn system(&self) -> Result<TimeDelaySystem> {
        let n = self.n;
        if n == 0 {
            return Err(Error::InvalidDocument("at `n`: dimension must be positive".into()));
        }
        if self.matrices.len() != self.delays.len() {
            return Err(Error::InvalidDocument(format!(
                "{} matrices for {} delays",
                self.matrices.len(),
                self.delays.len()
            )));
        }
        let mut mats = Vec::with_capacity(self.matrices.len());
        for (i, rows) in self.matrices.iter().enumerate() {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::InvalidDocument(format!("at `matrices[{i}]`: expected {n} rows of {n} entries")));
            }
            let entries: Vec<c64> = rows.iter().flatten().map(|e| e.value()).collect();
            mats.push(complex_matrix(n, &entries));
        }
        TimeDelaySystem::new(mats, self.delays.clone())
    }

    /// Weights from the document (default 1) with `epsilon` overriding the
    /// document value.
    pub fn perturbation(&self, epsilon: Option<f64>) -> Result<PerturbationSpec> {
        let eps = epsilon
            .or(self.epsilon)
            .ok_or_else(|| Error::InvalidArgument("epsilon is neither in the document nor given as a flag".into()))?;
        let weights = self.weights.clone().unwrap_or_else(|| vec![1.0; self.delays.len()]);
        if weights.len() != self.delays.len() {
            return Err(Error::InvalidDocument(format!(
                "{} weights for {} delays",
                weights.len(),
                self.delays.len()
            )));
        }
        PerturbationSpec::new(weights, eps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_real_and_complex_entries() {
        let doc = SystemDocument::parse(
            r#"{"n": 2, "delays": [0, 0.5],
                "matrices": [[[1, [0, 2]], [-1, 0]], [[0.5, 0], [0, [1.5, -1]]]],
                "epsilon": 0.1}"#,
        )
        .unwrap();
        let sys = doc.system().unwrap();
        assert_eq!(sys.matrices()[0][(0, 1)], c64::new(0.0, 2.0));
        assert_eq!(sys.matrices()[1][(1, 1)], c64::new(1.5, -1.0));
        let spec = doc.perturbation(None).unwrap();
        assert_eq!(spec.weights(), &[1.0, 1.0]);
        assert_eq!(spec.epsilon(), 0.1);
        assert_eq!(doc.perturbation(Some(0.5)).unwrap().epsilon(), 0.5);
    }

    #[test]
    fn round_trips_through_json() {
        let text = r#"{"n": 1, "delays": [0, 1], "matrices": [[[0]], [[[-1, 0.25]]]], "weights": [1, 2]}"#;
        let doc = SystemDocument::parse(text).unwrap();
        let again = SystemDocument::from_system(&doc.system().unwrap(), doc.weights.clone(), None);
        let back = SystemDocument::parse(&serde_json::to_string(&again).unwrap()).unwrap();
        assert_eq!(back.system().unwrap(), doc.system().unwrap());
    }

    #[test]
    fn diagnostics_name_the_path() {
        let err = SystemDocument::parse(r#"{"n": 1, "delays": [0], "matrices": [[["x"]]]}"#).unwrap_err();
        assert!(err.to_string().contains("matrices[0][0][0]"), "{err}");
        let err = SystemDocument::parse(r#"{"n": 1, "delays": [0], "matrices": [[[1]]], "extra": 1}"#).unwrap_err();
        assert!(err.to_string().contains("extra"), "{err}");
        let err = SystemDocument::parse("{\"n\": 1,\n \"delays\": [0,]}").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn semantic_errors() {
        for text in [
            r#"{"n": 2, "delays": [0], "matrices": [[[1]]]}"#,
            r#"{"n": 1, "delays": [0, 1], "matrices": [[[1]]]}"#,
            r#"{"n": 1, "delays": [0.5], "matrices": [[[1]]]}"#,
            r#"{"n": 1, "delays": [0, 1, 1], "matrices": [[[1]], [[1]], [[1]]]}"#,
            r#"{"n": 1, "delays": [0], "matrices": [[[1]]], "weights": [0]}"#,
            r#"{"n": 1, "delays": [0], "matrices": [[[1]]], "weights": [1, 1]}"#,
            r#"{"n": 1, "delays": [0], "matrices": [[[1]]], "epsilon": -1}"#,
            r#"{"n": 0, "delays": [0], "matrices": [[]]}"#,
        ] {
            assert!(SystemDocument::parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn missing_epsilon_is_reported() {
        let doc = SystemDocument::parse(r#"{"n": 1, "delays": [0], "matrices": [[[1]]]}"#).unwrap();
        assert!(doc.perturbation(None).is_err());
    }
}
