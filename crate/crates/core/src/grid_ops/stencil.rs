//! Finite-difference discretizations of the two linear operators.

use super::grid::{BoundaryKind, Edge, Grid, Grid1D, Grid2D};
use super::operator::{BandCholesky, LinearOperator};
use crate::error::Result;

/// Discrete `A w = -w'''' - λ w''` on the clamped interval.
///
/// The clamped conditions `w = w' = 0` are imposed by dropping the boundary
/// node and mirroring the ghost node (`w_{-1} = w_1`), which adds one to the
/// first and last diagonal entries of the fourth difference.
pub fn ks_operator(grid: &Grid1D, lambda: f64) -> Result<LinearOperator> {
    let n = grid.n();
    let h = grid.h();
    let h2 = h * h;
    let h4 = h2 * h2;
    let mut a = LinearOperator::zeros(n, 2);
    for i in 0..n {
        let mut d4 = 6.0;
        if i == 0 || i == n - 1 {
            d4 += 1.0;
        }
        a.set(i, i, -d4 / h4 + 2.0 * lambda / h2);
        if i + 1 < n {
            let v = 4.0 / h4 - lambda / h2;
            a.set(i, i + 1, v);
            a.set(i + 1, i, v);
        }
        if i + 2 < n {
            a.set(i, i + 2, -1.0 / h4);
            a.set(i + 2, i, -1.0 / h4);
        }
    }
    a.mark_symmetric()
}

/// Second difference with homogeneous Dirichlet end values.
pub fn dirichlet_laplacian_1d(grid: &Grid1D) -> Result<LinearOperator> {
    let n = grid.n();
    let h2 = grid.h() * grid.h();
    let mut a = LinearOperator::zeros(n, 1);
    for i in 0..n {
        a.set(i, i, -2.0 / h2);
        if i + 1 < n {
            a.set(i, i + 1, 1.0 / h2);
            a.set(i + 1, i, 1.0 / h2);
        }
    }
    a.mark_symmetric()
}

/// Five-point Laplacian on the cell-centred grid.
///
/// A ghost cell across a Dirichlet edge takes the value `-w` (zero on the
/// face) and across a Neumann edge the value `w` (zero flux).
pub fn heat_operator(grid: &Grid2D) -> Result<LinearOperator> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let ihx2 = 1.0 / (grid.hx() * grid.hx());
    let ihy2 = 1.0 / (grid.hy() * grid.hy());
    let ghost = |edge: Edge| match grid.boundary(edge) {
        BoundaryKind::Dirichlet => -2.0,
        BoundaryKind::Neumann => 0.0,
    };
    let mut a = LinearOperator::zeros(nx * ny, nx);
    for j in 0..ny {
        for i in 0..nx {
            let k = grid.index(i, j);
            let mut diag = 0.0;
            if i > 0 {
                a.set(k, k - 1, ihx2);
                diag -= ihx2;
            } else {
                diag += ghost(Edge::Left) * ihx2;
            }
            if i + 1 < nx {
                a.set(k, k + 1, ihx2);
                diag -= ihx2;
            } else {
                diag += ghost(Edge::Right) * ihx2;
            }
            if j > 0 {
                a.set(k, k - nx, ihy2);
                diag -= ihy2;
            } else {
                diag += ghost(Edge::Bottom) * ihy2;
            }
            if j + 1 < ny {
                a.set(k, k + nx, ihy2);
                diag -= ihy2;
            } else {
                diag += ghost(Edge::Top) * ihy2;
            }
            a.set(k, k, diag);
        }
    }
    a.mark_symmetric()
}

/// Discrete Laplacian carrying the Dirichlet structure of the grid: the
/// plain second difference in 1-D, the mixed-condition five-point stencil
/// in 2-D.
pub fn laplacian(grid: &Grid) -> Result<LinearOperator> {
    match grid {
        Grid::OneD(g) => dirichlet_laplacian_1d(g),
        Grid::TwoD(g) => heat_operator(g),
    }
}

/// Riesz map of the discrete H¹ inner product `<f, g>_V = <(-Δ_h + I) f, g>`.
#[derive(Debug, Clone)]
pub struct RieszMap {
    gram: LinearOperator,
    factor: BandCholesky,
    weight: f64,
}

impl RieszMap {
    pub fn new(grid: &Grid) -> Result<Self> {
        let gram = laplacian(grid)?.shifted(1.0, -1.0);
        let factor = gram.cholesky()?;
        Ok(Self {
            gram,
            factor,
            weight: grid.weight(),
        })
    }

    /// The matrix `-Δ_h + I`.
    pub fn gram(&self) -> &LinearOperator {
        &self.gram
    }

    /// Solve `(-Δ_h + I) g = v`: the H¹ representer of the functional
    /// whose L² representer is `v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.factor.solve(v)
    }

    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weight * super::grid::dot(&self.gram.apply(f), g)
    }

    pub fn norm(&self, f: &[f64]) -> f64 {
        self.inner(f, f).max(0.0).sqrt()
    }
}

pub fn h1_riesz_map(v: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    grid.check_len(v)?;
    Ok(RieszMap::new(grid)?.apply(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_ops::grid::inner_product;
    use std::f64::consts::PI;

    #[test]
    fn ks_operator_zero_in_zero_out() {
        let g = Grid1D::new(16).unwrap();
        for lambda in [0.0, 13.0, 50.0] {
            let a = ks_operator(&g, lambda).unwrap();
            assert!(a.apply(&vec![0.0; 16]).iter().all(|&v| v == 0.0));
            assert!(a.is_symmetric());
        }
    }

    #[test]
    fn ks_operator_matches_hand_stencil() {
        // n = 5, h = 1/6, λ = 0: first row is (7, -4, 1) / h⁴ with sign flip.
        let g = Grid1D::new(5).unwrap();
        let a = ks_operator(&g, 0.0).unwrap();
        let h4 = (1.0f64 / 6.0).powi(4);
        assert!((a.get(0, 0) + 7.0 / h4).abs() < 1e-9);
        assert!((a.get(0, 1) - 4.0 / h4).abs() < 1e-9);
        assert!((a.get(0, 2) + 1.0 / h4).abs() < 1e-9);
        assert!((a.get(2, 2) + 6.0 / h4).abs() < 1e-9);
    }

    #[test]
    fn heat_operator_constant_vector_mixed_boundary() {
        // Dirichlet on the left edge only: a constant field is annihilated
        // everywhere except in the column of cells touching that edge.
        use BoundaryKind::*;
        let g = Grid2D::new(4, 4, 1.0, 1.0, [Dirichlet, Neumann, Neumann, Neumann]).unwrap();
        let a = heat_operator(&g).unwrap();
        let out = a.apply(&vec![1.0; 16]);
        let ihx2 = 16.0;
        for j in 0..4 {
            for i in 0..4 {
                let v = out[g.index(i, j)];
                // stencil oracle: only the ghost term survives, -2 / hx²
                let expected = if i == 0 { -2.0 * ihx2 } else { 0.0 };
                assert!((v - expected).abs() < 1e-12, "cell ({i},{j}): {v}");
            }
        }
    }

    #[test]
    fn heat_operator_zero_in_zero_out() {
        let g = Grid2D::unit_square_dirichlet(8).unwrap();
        let a = heat_operator(&g).unwrap();
        assert!(a.apply(&vec![0.0; 64]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn riesz_zero_and_round_trip() {
        let g1 = Grid1D::new(63).unwrap();
        let s = g1.sample(|x| (PI * x).sin());
        let grid = Grid::from(g1);
        let riesz = RieszMap::new(&grid).unwrap();
        assert!(riesz.apply(&vec![0.0; 63]).iter().all(|&v| v == 0.0));
        let v = riesz.gram().apply(&s);
        let back = riesz.apply(&v);
        for (a, b) in back.iter().zip(&s) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn riesz_is_self_adjoint_positive() {
        let grid = Grid::from(Grid2D::new(5, 4, 1.0, 1.0, [BoundaryKind::Dirichlet, BoundaryKind::Neumann, BoundaryKind::Neumann, BoundaryKind::Dirichlet]).unwrap());
        let riesz = RieszMap::new(&grid).unwrap();
        let f: Vec<f64> = (0..20).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect();
        let g: Vec<f64> = (0..20).map(|i| ((i * 3 % 7) as f64 - 3.0) / 2.0).collect();
        let lhs = inner_product(&riesz.apply(&f), &g, &grid).unwrap();
        let rhs = inner_product(&f, &riesz.apply(&g), &grid).unwrap();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
        assert!(inner_product(&riesz.apply(&f), &f, &grid).unwrap() > 0.0);
    }
}
