//! Shared problem setups for the benchmarks.

use std::f64::consts::PI;

use actuopt::forward::{ControlSignal, TimeGrid};
use actuopt::grid_ops::{Grid1D, Grid2D};
use actuopt::models::{ActuatorDesign, ActuatorFamily, ModelSpec, ScalarNonlinearity};

pub struct Setup {
    pub model: ModelSpec,
    pub x0: Vec<f64>,
    pub u: ControlSignal,
    pub design: ActuatorDesign,
    pub tg: TimeGrid,
}

/// KS at `λ = 30` with a skewed initial state and a sine input.
pub fn ks(n: usize, nt: usize) -> Setup {
    let g = Grid1D::new(n).unwrap();
    let model = ModelSpec::kuramoto_sivashinsky(g.clone(), 30.0, ActuatorFamily::ks_gaussian(0.05, 0.1, 0.9).unwrap()).unwrap();
    let tg = TimeGrid::new(1.0, nt).unwrap();
    Setup {
        x0: g.sample(|s| (PI * s).sin().powi(2) * (1.0 + 2.0 * s)),
        u: ControlSignal::from_fn(tg, |t| (2.0 * PI * t).sin()),
        design: ActuatorDesign::location(0.3),
        model,
        tg,
    }
}

/// Heat on the unit square with `F = -z³`, or linear if `nonlinear` is false.
pub fn heat(n: usize, nt: usize, nonlinear: bool) -> Setup {
    let g = Grid2D::unit_square_dirichlet(n).unwrap();
    let f = nonlinear.then_some(ScalarNonlinearity::NegCubic);
    let model = ModelSpec::nonlinear_heat(g.clone(), f, 9).unwrap();
    let tg = TimeGrid::new(0.25, nt).unwrap();
    let bound = model.actuator().upper_bounds()[0];
    Setup {
        x0: g.sample(|x, y| (PI * x).sin() * (PI * y).sin()),
        u: ControlSignal::from_fn(tg, |t| 1.0 - t),
        design: ActuatorDesign::new(vec![0.5 * bound; 9]),
        model,
        tg,
    }
}
