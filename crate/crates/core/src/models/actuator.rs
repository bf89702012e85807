use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_ops::{Grid, Grid2D};

/// Tolerance used when deciding whether a design lies in the admissible set.
const FEASIBILITY_TOL: f64 = 1e-12;

/// Tensor-product cosine basis `cos(iπx/lx) cos(jπy/ly)`, `0 <= i, j < k`,
/// with each element divided by an upper bound on its C¹ norm so that
/// `Σ|c_m| <= 1` implies `sup|r| + sup|∇r| <= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosineBasis {
    modes_per_axis: usize,
    lx: f64,
    ly: f64,
}

impl CosineBasis {
    pub fn new(size: usize, lx: f64, ly: f64) -> Result<Self> {
        let k = (size as f64).sqrt().round() as usize;
        if k == 0 || k * k != size {
            return Err(Error::InvalidParameter(format!("basis size {size} is not a nonzero perfect square")));
        }
        Ok(Self { modes_per_axis: k, lx, ly })
    }

    pub fn len(&self) -> usize {
        self.modes_per_axis * self.modes_per_axis
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn modes(&self, m: usize) -> (f64, f64) {
        let i = m % self.modes_per_axis;
        let j = m / self.modes_per_axis;
        (i as f64 * PI / self.lx, j as f64 * PI / self.ly)
    }

    fn norm_bound(&self, m: usize) -> f64 {
        let (kx, ky) = self.modes(m);
        1.0 + (kx * kx + ky * ky).sqrt()
    }

    /// Value of the normalized basis element `m`.
    pub fn value(&self, m: usize, x: f64, y: f64) -> f64 {
        let (kx, ky) = self.modes(m);
        (kx * x).cos() * (ky * y).cos() / self.norm_bound(m)
    }

    pub fn gradient(&self, m: usize, x: f64, y: f64) -> (f64, f64) {
        let (kx, ky) = self.modes(m);
        let c = self.norm_bound(m);
        (
            -kx * (kx * x).sin() * (ky * y).cos() / c,
            -ky * (kx * x).cos() * (ky * y).sin() / c,
        )
    }

    /// Per-coefficient bound of the box kept inside the ℓ¹ unit ball.
    pub fn coefficient_bound(&self) -> f64 {
        1.0 / self.len() as f64
    }
}

/// Parametrized family of actuator profiles together with its admissible set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ActuatorFamily {
    /// `b(ξ; r) = exp(-(ξ - r)² / (2ω²))`, `r ∈ [lower, upper]`.
    KsGaussian { width: f64, lower: f64, upper: f64 },
    /// `r(ξ) = Σ c_m φ_m(ξ)` with `|c_m| <= 1/m`.
    HeatShape { basis: CosineBasis },
}

impl ActuatorFamily {
    pub fn ks_gaussian(width: f64, lower: f64, upper: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::InvalidParameter(format!("actuator width must be positive, got {width}")));
        }
        if !(0.0 < lower && lower <= upper && upper < 1.0) {
            return Err(Error::InvalidParameter(format!("need 0 < a <= b < 1, got [{lower}, {upper}]")));
        }
        Ok(Self::KsGaussian { width, lower, upper })
    }

    pub fn heat_shape(size: usize, grid: &Grid2D) -> Result<Self> {
        Ok(Self::HeatShape {
            basis: CosineBasis::new(size, grid.lx(), grid.ly())?,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::KsGaussian { .. } => 1,
            Self::HeatShape { basis } => basis.len(),
        }
    }

    pub fn lower_bounds(&self) -> Vec<f64> {
        match self {
            Self::KsGaussian { lower, .. } => vec![*lower],
            Self::HeatShape { basis } => vec![-basis.coefficient_bound(); basis.len()],
        }
    }

    pub fn upper_bounds(&self) -> Vec<f64> {
        match self {
            Self::KsGaussian { upper, .. } => vec![*upper],
            Self::HeatShape { basis } => vec![basis.coefficient_bound(); basis.len()],
        }
    }

    pub fn midpoint(&self) -> ActuatorDesign {
        let lo = self.lower_bounds();
        let hi = self.upper_bounds();
        ActuatorDesign::new(lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect())
    }

    pub fn contains(&self, design: &ActuatorDesign) -> bool {
        design.params.len() == self.dim()
            && design
                .params
                .iter()
                .zip(self.lower_bounds().iter().zip(self.upper_bounds()))
                .all(|(&p, (&lo, hi))| p >= lo - FEASIBILITY_TOL && p <= hi + FEASIBILITY_TOL)
    }

    /// Componentwise clamp onto the admissible box.
    pub fn project(&self, design: &ActuatorDesign) -> ActuatorDesign {
        ActuatorDesign::new(
            design
                .params
                .iter()
                .zip(self.lower_bounds().iter().zip(self.upper_bounds()))
                .map(|(&p, (&lo, hi))| p.clamp(lo, hi))
                .collect(),
        )
    }

    fn check(&self, design: &ActuatorDesign) -> Result<()> {
        if !self.contains(design) {
            return Err(Error::ConstraintViolation(format!("{:?} not in admissible set", design.params)));
        }
        Ok(())
    }
}

/// Actuator design parameters: the location for the KS family, the shape
/// coefficients for the heat family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActuatorDesign {
    pub params: Vec<f64>,
}

impl ActuatorDesign {
    pub fn new(params: Vec<f64>) -> Self {
        Self { params }
    }

    pub fn location(r: f64) -> Self {
        Self { params: vec![r] }
    }
}

fn gaussian(x: f64, r: f64, width: f64) -> f64 {
    (-(x - r).powi(2) / (2.0 * width * width)).exp()
}

/// Sample the actuator profile on the grid.
pub fn actuator_evaluate(family: &ActuatorFamily, design: &ActuatorDesign, grid: &Grid) -> Result<Vec<f64>> {
    family.check(design)?;
    Ok(profile(family, design, grid))
}

pub(crate) fn profile(family: &ActuatorFamily, design: &ActuatorDesign, grid: &Grid) -> Vec<f64> {
    match (family, grid) {
        (ActuatorFamily::KsGaussian { width, .. }, Grid::OneD(g)) => {
            let r = design.params[0];
            g.sample(|x| gaussian(x, r, *width))
        }
        (ActuatorFamily::HeatShape { basis }, Grid::TwoD(g)) => g.sample(|x, y| {
            design
                .params
                .iter()
                .enumerate()
                .map(|(m, c)| c * basis.value(m, x, y))
                .sum()
        }),
        _ => panic!("actuator family does not match grid dimension"),
    }
}

/// Sampled partial derivatives `∂b/∂param_m`, one vector per parameter.
pub fn design_jacobian(family: &ActuatorFamily, design: &ActuatorDesign, grid: &Grid) -> Vec<Vec<f64>> {
    match (family, grid) {
        (ActuatorFamily::KsGaussian { width, .. }, Grid::OneD(g)) => {
            let r = design.params[0];
            let w2 = width * width;
            vec![g.sample(|x| gaussian(x, r, *width) * (x - r) / w2)]
        }
        (ActuatorFamily::HeatShape { basis }, Grid::TwoD(g)) => {
            (0..basis.len()).map(|m| g.sample(|x, y| basis.value(m, x, y))).collect()
        }
        _ => panic!("actuator family does not match grid dimension"),
    }
}

/// `(B'_r u)^* p`: for each design parameter, `u <∂b/∂param, p>`.
pub fn actuator_design_derivative_adjoint(
    family: &ActuatorFamily,
    design: &ActuatorDesign,
    u_t: f64,
    p_t: &[f64],
    grid: &Grid,
) -> Result<Vec<f64>> {
    family.check(design)?;
    grid.check_len(p_t)?;
    Ok(design_jacobian(family, design, grid)
        .iter()
        .map(|col| u_t * grid.weight() * crate::grid_ops::dot(col, p_t))
        .collect())
}

/// Grid maximum of `|r| + |∇r|` for a heat shape, using the analytic gradient.
pub fn c1_grid_norm(basis: &CosineBasis, design: &ActuatorDesign, grid: &Grid2D) -> f64 {
    let mut max_v = 0.0f64;
    let mut max_g = 0.0f64;
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let (x, y) = grid.center(i, j);
            let mut v = 0.0;
            let (mut gx, mut gy) = (0.0, 0.0);
            for (m, c) in design.params.iter().enumerate() {
                v += c * basis.value(m, x, y);
                let (a, b) = basis.gradient(m, x, y);
                gx += c * a;
                gy += c * b;
            }
            max_v = max_v.max(v.abs());
            max_g = max_g.max((gx * gx + gy * gy).sqrt());
        }
    }
    max_v + max_g
}
