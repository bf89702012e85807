//! Grids, discrete operators with the models' boundary conditions, and the
//! discrete L² / H¹ geometry.

mod eigen;
mod grid;
mod operator;
mod stencil;

pub use eigen::{smallest_eigenvalue, sorted_symmetric_eigen};
pub use grid::{build_grid_1d, inner_product, l2_norm, BoundaryKind, Edge, Grid, Grid1D, Grid2D};
pub(crate) use grid::dot;
pub use operator::{BandCholesky, LinearOperator};
pub use stencil::{dirichlet_laplacian_1d, h1_riesz_map, heat_operator, ks_operator, laplacian, RieszMap};
