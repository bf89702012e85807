use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform vertex grid on the unit interval. Only interior nodes carry
/// unknowns; the two end points are boundary nodes with `w = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    n: usize,
    h: f64,
    nodes: Vec<f64>,
    quad_weights: Vec<f64>,
}

impl Grid1D {
    pub const MIN_NODES: usize = 4;

    pub fn new(n: usize) -> Result<Self> {
        if n < Self::MIN_NODES {
            return Err(Error::InvalidGrid(format!(
                "need at least {} interior nodes, got {n}",
                Self::MIN_NODES
            )));
        }
        let h = 1.0 / (n + 1) as f64;
        let nodes = (1..=n).map(|i| i as f64 * h).collect();
        Ok(Self {
            n,
            h,
            nodes,
            quad_weights: vec![h; n],
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }
}

/// Boundary condition attached to one edge of the rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Left,
    Right,
    Bottom,
    Top,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::Left, Edge::Right, Edge::Bottom, Edge::Top];

    fn index(self) -> usize {
        match self {
            Edge::Left => 0,
            Edge::Right => 1,
            Edge::Bottom => 2,
            Edge::Top => 3,
        }
    }
}

/// Cell-centred grid on `[0, lx] x [0, ly]`. Unknowns live at cell centres
/// and are ordered with `x` varying fastest. Each edge is either part of
/// the Dirichlet portion or the Neumann portion of the boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    boundary: [BoundaryKind; 4],
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, boundary: [BoundaryKind; 4]) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidGrid(format!("need nx, ny >= 2, got {nx}x{ny}")));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::InvalidGrid(format!("bad extents {lx} x {ly}")));
        }
        if !boundary.contains(&BoundaryKind::Dirichlet) {
            return Err(Error::InvalidBoundary("Dirichlet portion of the boundary is empty".into()));
        }
        Ok(Self { nx, ny, lx, ly, boundary })
    }

    /// Unit square with homogeneous Dirichlet data on every edge.
    pub fn unit_square_dirichlet(n: usize) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0, [BoundaryKind::Dirichlet; 4])
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn boundary(&self, edge: Edge) -> BoundaryKind {
        self.boundary[edge.index()]
    }

    pub fn boundary_kinds(&self) -> [BoundaryKind; 4] {
        self.boundary
    }

    pub fn dirichlet_mask(&self) -> [bool; 4] {
        self.boundary.map(|b| b == BoundaryKind::Dirichlet)
    }

    pub fn neumann_mask(&self) -> [bool; 4] {
        self.boundary.map(|b| b == BoundaryKind::Neumann)
    }

    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.nx * j
    }

    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx(), (j as f64 + 0.5) * self.hy())
    }

    pub fn quad_weights(&self) -> Vec<f64> {
        vec![self.cell_area(); self.len()]
    }

    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for j in 0..self.ny {
            for i in 0..self.nx {
                let (x, y) = self.center(i, j);
                out.push(f(x, y));
            }
        }
        out
    }
}

/// Spatial grid of either example model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Grid {
    OneD(Grid1D),
    TwoD(Grid2D),
}

impl Grid {
    /// Number of unknowns.
    pub fn len(&self) -> usize {
        match self {
            Grid::OneD(g) => g.n(),
            Grid::TwoD(g) => g.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadrature weight of every node. Both grids are uniform, so the mass
    /// matrix is a multiple of the identity.
    pub fn weight(&self) -> f64 {
        match self {
            Grid::OneD(g) => g.h(),
            Grid::TwoD(g) => g.cell_area(),
        }
    }

    pub fn quad_weights(&self) -> Vec<f64> {
        vec![self.weight(); self.len()]
    }

    pub fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: v.len(),
            });
        }
        Ok(())
    }
}

impl From<Grid1D> for Grid {
    fn from(g: Grid1D) -> Self {
        Grid::OneD(g)
    }
}

impl From<Grid2D> for Grid {
    fn from(g: Grid2D) -> Self {
        Grid::TwoD(g)
    }
}

pub fn build_grid_1d(n: usize) -> Result<Grid1D> {
    Grid1D::new(n)
}

/// Discrete L² inner product `sum_i w_i f_i g_i`.
pub fn inner_product(f: &[f64], g: &[f64], grid: &Grid) -> Result<f64> {
    grid.check_len(f)?;
    grid.check_len(g)?;
    Ok(grid.weight() * dot(f, g))
}

pub fn l2_norm(f: &[f64], grid: &Grid) -> f64 {
    (grid.weight() * dot(f, f)).sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
