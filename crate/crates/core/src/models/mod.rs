//! The two semilinear models behind a single [`ModelSpec`].

mod actuator;
mod nonlinearity;

pub use actuator::{
    actuator_design_derivative_adjoint, actuator_evaluate, c1_grid_norm, design_jacobian, ActuatorDesign,
    ActuatorFamily, CosineBasis,
};
pub use nonlinearity::{
    heat_jacobian_adjoint_apply, heat_jacobian_apply, heat_nonlinearity, ks_jacobian_adjoint_apply,
    ks_jacobian_apply, ks_nonlinearity, ScalarNonlinearity,
};

use crate::error::{Error, Result};
use crate::grid_ops::{heat_operator, ks_operator, Grid, Grid1D, Grid2D, LinearOperator, RieszMap};

/// Nonlinear part `F` of the evolution equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Nonlinearity {
    None,
    /// `F(w) = -w w_ξ`
    KsAdvection,
    Pointwise(ScalarNonlinearity),
}

/// A discretized semilinear model `x' = A x + F(x) + b(r) u`.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    grid: Grid,
    linear_op: LinearOperator,
    nonlinearity: Nonlinearity,
    actuator: ActuatorFamily,
    riesz: RieszMap,
    lambda: Option<f64>,
}

impl ModelSpec {
    pub fn kuramoto_sivashinsky(grid: Grid1D, lambda: f64, actuator: ActuatorFamily) -> Result<Self> {
        if !matches!(actuator, ActuatorFamily::KsGaussian { .. }) {
            return Err(Error::InvalidParameter("KS model needs a Gaussian actuator".into()));
        }
        let linear_op = ks_operator(&grid, lambda)?;
        let grid = Grid::from(grid);
        Ok(Self {
            riesz: RieszMap::new(&grid)?,
            grid,
            linear_op,
            nonlinearity: Nonlinearity::KsAdvection,
            actuator,
            lambda: Some(lambda),
        })
    }

    pub fn nonlinear_heat(grid: Grid2D, f: Option<ScalarNonlinearity>, basis_size: usize) -> Result<Self> {
        let actuator = ActuatorFamily::heat_shape(basis_size, &grid)?;
        let linear_op = heat_operator(&grid)?;
        let grid = Grid::from(grid);
        Ok(Self {
            riesz: RieszMap::new(&grid)?,
            grid,
            linear_op,
            nonlinearity: f.map_or(Nonlinearity::None, Nonlinearity::Pointwise),
            actuator,
            lambda: None,
        })
    }

    /// The same model with `F` dropped.
    pub fn linearized(&self) -> Self {
        Self {
            nonlinearity: Nonlinearity::None,
            ..self.clone()
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn linear_op(&self) -> &LinearOperator {
        &self.linear_op
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        self.nonlinearity
    }

    pub fn actuator(&self) -> &ActuatorFamily {
        &self.actuator
    }

    pub fn riesz(&self) -> &RieszMap {
        &self.riesz
    }

    /// KS destabilization parameter, `None` for the heat model.
    pub fn lambda(&self) -> Option<f64> {
        self.lambda
    }

    pub fn state_dim(&self) -> usize {
        self.grid.len()
    }

    pub fn is_linear(&self) -> bool {
        self.nonlinearity == Nonlinearity::None
    }

    fn grid_1d(&self) -> &Grid1D {
        match &self.grid {
            Grid::OneD(g) => g,
            Grid::TwoD(_) => unreachable!("KS advection on a 2-D grid"),
        }
    }

    pub fn apply_nonlinearity(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.grid.check_len(w)?;
        match self.nonlinearity {
            Nonlinearity::None => Ok(vec![0.0; w.len()]),
            Nonlinearity::KsAdvection => {
                let out = ks_nonlinearity(w, self.grid_1d());
                if out.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NumericalOverflow);
                }
                Ok(out)
            }
            Nonlinearity::Pointwise(f) => heat_nonlinearity(w, f),
        }
    }

    pub fn jacobian_apply(&self, w: &[f64], f: &[f64]) -> Vec<f64> {
        match self.nonlinearity {
            Nonlinearity::None => vec![0.0; w.len()],
            Nonlinearity::KsAdvection => ks_jacobian_apply(w, f, self.grid_1d()),
            Nonlinearity::Pointwise(s) => heat_jacobian_apply(w, f, s),
        }
    }

    pub fn jacobian_adjoint_apply(&self, w: &[f64], g: &[f64]) -> Vec<f64> {
        match self.nonlinearity {
            Nonlinearity::None => vec![0.0; w.len()],
            Nonlinearity::KsAdvection => ks_jacobian_adjoint_apply(w, g, self.grid_1d()),
            Nonlinearity::Pointwise(s) => heat_jacobian_adjoint_apply(w, g, s),
        }
    }

    pub fn actuator_profile(&self, design: &ActuatorDesign) -> Result<Vec<f64>> {
        actuator_evaluate(&self.actuator, design, &self.grid)
    }
}
