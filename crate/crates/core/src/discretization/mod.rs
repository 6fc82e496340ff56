//! Spectral collocation: the symmetric Chebyshev mesh, the discretized
//! level-set operator `L_sigma^N`, the polynomial `p_N`, and the generator
//! used for characteristic roots.

mod generator;
mod mesh;
mod operator;

pub use generator::build_generator_n;
pub use mesh::{build_mesh, differentiation_matrix, eval_pn, history_nodes, BarycentricNodes, ChebyshevMesh};
pub use operator::{
    build_l_sigma_n, discrete_characteristic, mesh_for, DiscretizedOperator, OperatorBuilder,
};
