use faer::{c64, Mat};

use super::mesh::ChebyshevMesh;
use crate::error::{Error, Result};
use crate::linalg;
use crate::system::{CMat, PerturbationSpec, ShiftedSystem, TimeDelaySystem};

/// The collocation matrix `L_sigma^N` of dimension `2n (2N + 1)`.
#[derive(Clone, Debug)]
pub struct DiscretizedOperator {
    pub matrix: CMat,
    pub sigma: f64,
    pub half: usize,
    pub n: usize,
    /// `s = epsilon w(sigma)`.
    pub level: f64,
}

impl DiscretizedOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn frobenius_norm(&self) -> f64 {
        linalg::frobenius_norm(self.matrix.as_ref())
    }

    /// Block `(i, k)` of size `2n x 2n`, with `i, k` in `-N..=N`.
    pub fn block(&self, i: isize, k: isize) -> CMat {
        let b = 2 * self.n;
        let r0 = (i + self.half as isize) as usize * b;
        let c0 = (k + self.half as isize) as usize * b;
        Mat::from_fn(b, b, |r, c| self.matrix[(r0 + r, c0 + c)])
    }
}

/// Precomputes everything in `L_sigma^N` that does not depend on `sigma`:
/// the differentiation block rows and the cardinal values `l_k(+-tau_i)`.
/// Only the centre block row is rebuilt per `sigma`.
#[derive(Clone, Debug)]
pub struct OperatorBuilder<'a> {
    sys: &'a TimeDelaySystem,
    spec: &'a PerturbationSpec,
    mesh: &'a ChebyshevMesh,
    template: CMat,
    delayed_cardinals: Vec<Vec<f64>>,
    advanced_cardinals: Vec<Vec<f64>>,
}

impl<'a> OperatorBuilder<'a> {
    pub fn new(
        sys: &'a TimeDelaySystem,
        spec: &'a PerturbationSpec,
        mesh: &'a ChebyshevMesh,
    ) -> Result<Self> {
        spec.check_compatible(sys)?;
        check_mesh(sys, mesh)?;
        let b = 2 * sys.n();
        let p = mesh.len();
        let d = mesh.differentiation_matrix();
        let mut template = Mat::<c64>::zeros(b * p, b * p);
        for i in (0..p).filter(|&i| i != mesh.centre()) {
            for k in 0..p {
                let v = c64::new(d[(i, k)], 0.0);
                for r in 0..b {
                    template[(i * b + r, k * b + r)] = v;
                }
            }
        }
        let delays = &sys.delays()[1..];
        Ok(Self {
            sys,
            spec,
            mesh,
            template,
            delayed_cardinals: delays.iter().map(|&t| mesh.nodes().cardinal_values(-t)).collect(),
            advanced_cardinals: delays.iter().map(|&t| mesh.nodes().cardinal_values(t)).collect(),
        })
    }

    pub fn mesh(&self) -> &ChebyshevMesh {
        self.mesh
    }

    pub fn build(&self, sigma: f64) -> DiscretizedOperator {
        let n = self.sys.n();
        let b = 2 * n;
        let level = self.spec.level(self.sys, sigma);
        let blocks = self.sys.shift(sigma).hamiltonian_blocks(level);
        let mut matrix = self.template.clone();
        let row0 = self.mesh.centre() * b;
        for k in 0..self.mesh.len() {
            let col0 = k * b;
            for c in 0..b {
                for r in 0..b {
                    let mut v = if k == self.mesh.centre() {
                        blocks.m0[(r, c)]
                    } else {
                        c64::new(0.0, 0.0)
                    };
                    for (i, (plus, minus)) in blocks.delayed.iter().zip(&blocks.advanced).enumerate() {
                        v += plus[(r, c)] * self.delayed_cardinals[i][k]
                            + minus[(r, c)] * self.advanced_cardinals[i][k];
                    }
                    matrix[(row0 + r, col0 + c)] = v;
                }
            }
        }
        DiscretizedOperator {
            matrix,
            sigma,
            half: self.mesh.half(),
            n,
            level,
        }
    }
}

fn check_mesh(sys: &TimeDelaySystem, mesh: &ChebyshevMesh) -> Result<()> {
    if sys.m() > 0 {
        let tau = sys.tau_max();
        if (mesh.tau_max() - tau).abs() > 1e-12 * tau {
            return Err(Error::MeshMismatch {
                mesh: mesh.tau_max(),
                system: tau,
            });
        }
    }
    Ok(())
}

/// Builds `L_sigma^N` in one shot.
pub fn build_l_sigma_n(
    sys: &TimeDelaySystem,
    spec: &PerturbationSpec,
    mesh: &ChebyshevMesh,
    sigma: f64,
) -> Result<DiscretizedOperator> {
    Ok(OperatorBuilder::new(sys, spec, mesh)?.build(sigma))
}

/// Mesh for a system: half-width `tau_max`, or `1` for delay-free systems
/// where the half-width is irrelevant.
pub fn mesh_for(sys: &TimeDelaySystem, half: usize) -> Result<ChebyshevMesh> {
    let tau = if sys.m() == 0 { 1.0 } else { sys.tau_max() };
    ChebyshevMesh::new(half, tau)
}

/// `F_{sigma,N}(lambda) = lambda I - A_{sigma,0} - sum_i A_{sigma,i} p_N(-tau_i; lambda)`,
/// the discretized counterpart of `F_sigma(lambda)`.
pub fn discrete_characteristic(
    shifted: &ShiftedSystem,
    mesh: &ChebyshevMesh,
    lambda: c64,
) -> Result<CMat> {
    let n = shifted.n();
    let nodal = if shifted.matrices.len() > 1 {
        mesh.exponential_collocant(lambda)?
    } else {
        Vec::new()
    };
    let mut out = Mat::<c64>::zeros(n, n);
    for (i, a) in shifted.matrices.iter().enumerate() {
        let factor = if i == 0 {
            c64::new(1.0, 0.0)
        } else {
            let tau = shifted.delays[i];
            mesh.check_in_range(-tau)?;
            mesh.nodes().interpolate(&nodal, -tau)
        };
        for c in 0..n {
            for r in 0..n {
                out[(r, c)] -= a[(r, c)] * factor;
            }
        }
    }
    for r in 0..n {
        out[(r, r)] += lambda;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::mesh::build_mesh;
    use crate::system::{complex_matrix, real_matrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_ode() -> TimeDelaySystem {
        TimeDelaySystem::new(vec![real_matrix(1, &[-1.0])], vec![0.0]).unwrap()
    }

    fn scalar_delay() -> TimeDelaySystem {
        TimeDelaySystem::new(vec![real_matrix(1, &[0.0]), real_matrix(1, &[-1.0])], vec![0.0, 1.0])
            .unwrap()
    }

    fn random_system(rng: &mut ChaCha8Rng) -> (TimeDelaySystem, PerturbationSpec) {
        let n = rng.random_range(1..=3);
        let m = rng.random_range(1..=2);
        let scale = 1.0 / (2.0 * n as f64).sqrt();
        let mats = (0..=m)
            .map(|_| {
                let e: Vec<c64> = (0..n * n)
                    .map(|_| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale)
                    .collect();
                complex_matrix(n, &e)
            })
            .collect();
        let mut delays: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.5)).collect();
        delays.sort_by(|a, b| a.partial_cmp(b).unwrap());
        delays.insert(0, 0.0);
        let weights = (0..=m).map(|_| rng.random_range(0.5..2.0)).collect();
        let sys = TimeDelaySystem::new(mats, delays).unwrap();
        (sys, PerturbationSpec::new(weights, 0.1).unwrap())
    }

    #[test]
    fn delay_free_middle_row() {
        let spec = PerturbationSpec::new(vec![1.0], 0.1).unwrap();
        let sys = scalar_ode();
        let mesh = build_mesh(3, 1.0).unwrap();
        let op = build_l_sigma_n(&sys, &spec, &mesh, -0.9).unwrap();
        assert_eq!(op.dim(), 2 * 7);
        let m0 = real_matrix(2, &[-0.1, -0.01, 1.0, 0.1]);
        for k in -3..=3 {
            let blk = op.block(0, k);
            if k == 0 {
                assert!(crate::system::max_abs_diff(blk.as_ref(), m0.as_ref()) < 1e-15);
            } else {
                assert_eq!(linalg::frobenius_norm(blk.as_ref()), 0.0);
            }
        }
    }

    #[test]
    fn off_centre_rows_are_scaled_identities() {
        let spec = PerturbationSpec::new(vec![1.0, 1.0], 0.1).unwrap();
        let sys = scalar_delay();
        let mesh = build_mesh(3, 1.0).unwrap();
        let op = build_l_sigma_n(&sys, &spec, &mesh, 0.2).unwrap();
        let d = mesh.differentiation_matrix();
        for i in [-3isize, -1, 2] {
            for k in -3isize..=3 {
                let blk = op.block(i, k);
                let dik = d[((i + 3) as usize, (k + 3) as usize)];
                assert_eq!(blk[(0, 0)], c64::new(dik, 0.0));
                assert_eq!(blk[(1, 1)], c64::new(dik, 0.0));
                assert_eq!(blk[(0, 1)], c64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn endpoint_delay_touches_only_endpoint_columns() {
        let spec = PerturbationSpec::new(vec![1.0, 1.0], 0.1).unwrap();
        let sys = scalar_delay();
        let mesh = build_mesh(2, 1.0).unwrap();
        let op = build_l_sigma_n(&sys, &spec, &mesh, 0.0).unwrap();
        let shifted = sys.shift(0.0);
        let blocks = shifted.hamiltonian_blocks(spec.level(&sys, 0.0));
        for k in -2isize..=2 {
            let blk = op.block(0, k);
            let want = match k {
                -2 => blocks.delayed[0].clone(),
                2 => blocks.advanced[0].clone(),
                0 => blocks.m0.clone(),
                _ => Mat::<c64>::zeros(2, 2),
            };
            assert!(crate::system::max_abs_diff(blk.as_ref(), want.as_ref()) < 1e-15, "k={k}");
        }
    }

    #[test]
    fn mesh_mismatch_is_rejected() {
        let spec = PerturbationSpec::new(vec![1.0, 1.0], 0.1).unwrap();
        let mesh = build_mesh(2, 2.0).unwrap();
        assert!(matches!(
            build_l_sigma_n(&scalar_delay(), &spec, &mesh, 0.0),
            Err(Error::MeshMismatch { .. })
        ));
    }

    #[test]
    fn rebuilding_changes_only_the_centre_row() {
        let spec = PerturbationSpec::new(vec![1.0, 1.0], 0.3).unwrap();
        let sys = scalar_delay();
        let mesh = build_mesh(4, 1.0).unwrap();
        let builder = OperatorBuilder::new(&sys, &spec, &mesh).unwrap();
        let a = builder.build(-0.2);
        let b = builder.build(0.4);
        for i in (-4isize..=4).filter(|&i| i != 0) {
            for k in -4isize..=4 {
                assert_eq!(crate::system::max_abs_diff(a.block(i, k).as_ref(), b.block(i, k).as_ref()), 0.0);
            }
        }
    }

    #[test]
    fn spectrum_is_symmetric_about_the_imaginary_axis() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..10 {
            let (sys, spec) = random_system(&mut rng);
            let mesh = mesh_for(&sys, 5).unwrap();
            let sigma = rng.random_range(-1.0..1.0);
            let op = build_l_sigma_n(&sys, &spec, &mesh, sigma).unwrap();
            let ev = linalg::eigenvalues(op.matrix.as_ref()).unwrap().values;
            let tol = 1e-8 * op.frobenius_norm();
            for mu in &ev {
                let d = ev.iter().map(|nu| (nu + mu.conj()).norm()).fold(f64::INFINITY, f64::min);
                assert!(d <= tol, "partner of {mu} missing ({d:e})");
            }
        }
    }

    #[test]
    fn delay_free_eigenvalues_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for n in 1..=3 {
            let e: Vec<c64> = (0..n * n)
                .map(|_| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let sys = TimeDelaySystem::new(vec![complex_matrix(n, &e)], vec![0.0]).unwrap();
            let spec = PerturbationSpec::new(vec![1.5], 0.2).unwrap();
            let mesh = build_mesh(4, 1.0).unwrap();
            let op = build_l_sigma_n(&sys, &spec, &mesh, 0.1).unwrap();
            let m0 = sys.shift(0.1).hamiltonian_blocks(spec.level(&sys, 0.1)).m0;
            let scale = linalg::frobenius_norm(m0.as_ref());
            let big = linalg::eigenvalues(op.matrix.as_ref()).unwrap().values;
            for mu in linalg::eigenvalues(m0.as_ref()).unwrap().values {
                let d = big.iter().map(|nu| (nu - mu).norm()).fold(f64::INFINITY, f64::min);
                assert!(d <= 1e-10 * scale, "{mu}: {d:e}");
            }
        }
    }

    #[test]
    fn imaginary_eigenvalues_match_discrete_singular_values() {
        // At an imaginary eigenvalue j w of L_sigma^N, F_{sigma,N}(j w) has the
        // singular value s; away from the spectrum it does not.
        let spec = PerturbationSpec::new(vec![1.0, 1.0], 0.1).unwrap();
        let sys = scalar_delay();
        let mesh = build_mesh(6, 1.0).unwrap();
        let sigma = -0.25;
        let op = build_l_sigma_n(&sys, &spec, &mesh, sigma).unwrap();
        let shifted = sys.shift(sigma);
        let ev = linalg::eigenvalues(op.matrix.as_ref()).unwrap().values;
        let tol = 1e-7 * (1.0 + op.frobenius_norm());
        let imag: Vec<f64> = ev.iter().filter(|m| m.re.abs() <= tol * (1.0 + m.norm())).map(|m| m.im).collect();
        assert!(!imag.is_empty());
        let distance_to_level = |w: f64| {
            let f = discrete_characteristic(&shifted, &mesh, c64::new(0.0, w)).unwrap();
            let sv = linalg::singular_values(f.as_ref()).unwrap();
            sv.iter().map(|s| (s - op.level).abs()).fold(f64::INFINITY, f64::min)
        };
        for &w in &imag {
            assert!(distance_to_level(w) < 1e-8, "w={w}");
        }
        for k in 0..200 {
            let w = -5.0 + 0.05 * k as f64;
            let gap = imag.iter().map(|x| (x - w).abs()).fold(f64::INFINITY, f64::min);
            if gap > 0.05 {
                assert!(distance_to_level(w) > 1e-6, "w={w}");
            }
        }
    }
}
