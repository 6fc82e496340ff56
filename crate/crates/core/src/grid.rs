//! Rectangular samples of `log10 f` for plotting pseudospectra.

use faer::c64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::float::{self, format_f64};
use crate::system::{eval_level, PerturbationSpec, TimeDelaySystem};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridMetadata {
    pub epsilon: Option<f64>,
    #[serde(with = "float::real_vec")]
    pub weights: Vec<f64>,
    /// SHA-256 of the delays and matrix entries.
    pub system_hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSample {
    #[serde(with = "float::real_vec")]
    pub re_axis: Vec<f64>,
    #[serde(with = "float::real_vec")]
    pub im_axis: Vec<f64>,
    /// `values[j][i] = log10 f(re_axis[i] + j im_axis[j])`; `+inf` on roots.
    #[serde(with = "float::real_matrix")]
    pub values: Vec<Vec<f64>>,
    pub metadata: GridMetadata,
}

pub fn system_hash(sys: &TimeDelaySystem) -> String {
    let mut h = Sha256::new();
    h.update((sys.n() as u64).to_le_bytes());
    for (tau, a) in sys.delays().iter().zip(sys.matrices()) {
        h.update(tau.to_bits().to_le_bytes());
        for i in 0..sys.n() {
            for j in 0..sys.n() {
                h.update(a[(i, j)].re.to_bits().to_le_bytes());
                h.update(a[(i, j)].im.to_bits().to_le_bytes());
            }
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn axis(range: (f64, f64), count: usize, name: &str) -> Result<Vec<f64>> {
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidArgument(format!("{name} range [{lo}, {hi}] is empty or not finite")));
    }
    if count < 2 {
        return Err(Error::InvalidArgument(format!("{name} needs at least 2 points, got {count}")));
    }
    let last = (count - 1) as f64;
    Ok((0..count)
        .map(|k| if k + 1 == count { hi } else { lo + (hi - lo) * (k as f64 / last) })
        .collect())
}

pub fn sample_grid(
    sys: &TimeDelaySystem,
    spec: &PerturbationSpec,
    re_range: (f64, f64),
    im_range: (f64, f64),
    nx: usize,
    ny: usize,
) -> Result<GridSample> {
    spec.check_compatible(sys)?;
    let re_axis = axis(re_range, nx, "real")?;
    let im_axis = axis(im_range, ny, "imaginary")?;
    let values = im_axis
        .par_iter()
        .map(|&im| {
            re_axis
                .iter()
                .map(|&re| Ok(eval_level(sys, spec, c64::new(re, im))?.log10()))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GridSample {
        re_axis,
        im_axis,
        values,
        metadata: GridMetadata {
            epsilon: Some(spec.epsilon()),
            weights: spec.weights().to_vec(),
            system_hash: system_hash(sys),
        },
    })
}

impl GridSample {
    /// `re,im,log10f` rows, imaginary axis outermost.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("re,im,log10f\n");
        for (row, &im) in self.values.iter().zip(&self.im_axis) {
            for (&v, &re) in row.iter().zip(&self.re_axis) {
                out.push_str(&format!("{},{},{}\n", format_f64(re), format_f64(im), format_f64(v)));
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        float::to_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let grid: Self = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::InvalidArgument(format!("grid document at {}: {}", e.path(), e.inner())))?;
        grid.validate()?;
        Ok(grid)
    }

    fn validate(&self) -> Result<()> {
        let increasing = |a: &[f64]| a.windows(2).all(|w| w[0] < w[1]);
        if !increasing(&self.re_axis) || !increasing(&self.im_axis) {
            return Err(Error::InvalidArgument("grid axes must be strictly increasing".into()));
        }
        if self.values.len() != self.im_axis.len() || self.values.iter().any(|r| r.len() != self.re_axis.len()) {
            return Err(Error::InvalidArgument("grid values do not match the axes".into()));
        }
        Ok(())
    }

    /// Cells strictly inside the epsilon-pseudospectrum.
    pub fn mask(&self, epsilon: f64) -> Vec<Vec<bool>> {
        let level = (1.0 / epsilon).log10();
        self.values.iter().map(|r| r.iter().map(|&v| v > level).collect()).collect()
    }
}
