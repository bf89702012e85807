//! IMEX time stepping of the semilinear evolution equation and the energy
//! estimates that can be checked along a computed trajectory.
//!
//! One step from `t_k` to `t_{k+1}` reads
//!
//! ```text
//! (I - dt/2 A) x_{k+1} = (I + dt/2 A) x_k + dt N_k + dt/2 b (u_k + u_{k+1})
//! N_0 = F(x_0),   N_k = 3/2 F(x_k) - 1/2 F(x_{k-1})
//! ```
//!
//! i.e. Crank–Nicolson on the linear part, second-order Adams–Bashforth on
//! the nonlinearity and the trapezoid rule on the (known) input term.

mod io;

pub use io::{read_checkpoint, write_checkpoint, write_trajectory_csv};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_ops::{inner_product, laplacian, smallest_eigenvalue, BandCholesky, LinearOperator};
use crate::models::{ActuatorDesign, ModelSpec, Nonlinearity};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    tau: f64,
    nt: usize,
}

impl TimeGrid {
    pub fn new(tau: f64, nt: usize) -> Result<Self> {
        if nt < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 time steps, got {nt}")));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {tau}")));
        }
        Ok(Self { tau, nt })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn dt(&self) -> f64 {
        self.tau / self.nt as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.nt).map(|k| self.time(k)).collect()
    }

    /// Trapezoid weights on the `nt + 1` sample times.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let dt = self.dt();
        let mut w = vec![dt; self.nt + 1];
        w[0] = 0.5 * dt;
        w[self.nt] = 0.5 * dt;
        w
    }
}

/// Scalar input sampled on the time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSignal {
    pub time_grid: TimeGrid,
    pub values: Vec<f64>,
}

impl ControlSignal {
    pub fn new(time_grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != time_grid.nt() + 1 {
            return Err(Error::DimensionMismatch {
                expected: time_grid.nt() + 1,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("control has non-finite samples".into()));
        }
        Ok(Self { time_grid, values })
    }

    pub fn zero(time_grid: TimeGrid) -> Self {
        Self {
            time_grid,
            values: vec![0.0; time_grid.nt() + 1],
        }
    }

    pub fn from_fn(time_grid: TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: time_grid.times().into_iter().map(f).collect(),
            time_grid,
        }
    }

    /// Trapezoid L²(0, τ) inner product.
    pub fn inner(&self, other: &[f64]) -> f64 {
        self.time_grid
            .trapezoid_weights()
            .iter()
            .zip(self.values.iter().zip(other))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(&self.values).sqrt()
    }
}

/// Time-indexed states; also used for adjoint trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub time_grid: TimeGrid,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn state_dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least one state")
    }
}

/// Factored Crank–Nicolson matrices for one time step size.
#[derive(Debug, Clone)]
pub(crate) struct CnStepper {
    implicit: BandCholesky,
    explicit: LinearOperator,
    dt: f64,
}

impl CnStepper {
    pub(crate) fn new(a: &LinearOperator, dt: f64) -> Result<Self> {
        Ok(Self {
            implicit: a.shifted(1.0, -0.5 * dt).cholesky()?,
            explicit: a.shifted(1.0, 0.5 * dt),
            dt,
        })
    }

    pub(crate) fn dt(&self) -> f64 {
        self.dt
    }

    /// `(I + dt/2 A) x`
    pub(crate) fn explicit(&self, x: &[f64]) -> Vec<f64> {
        self.explicit.apply(x)
    }

    /// `(I - dt/2 A)⁻¹ v`, the matrix being symmetric.
    pub(crate) fn solve(&self, v: &mut [f64]) {
        self.implicit.solve_in_place(v)
    }
}

pub fn solve_forward(
    model: &ModelSpec,
    u: &ControlSignal,
    design: &ActuatorDesign,
    x0: &[f64],
    tg: &TimeGrid,
) -> Result<Trajectory> {
    model.grid().check_len(x0)?;
    if u.time_grid != *tg {
        return Err(Error::TimeGridMismatch("control sampled on a different time grid".into()));
    }
    let b = model.actuator_profile(design)?;
    let stepper = CnStepper::new(model.linear_op(), tg.dt())?;
    let dt = tg.dt();
    let linear = model.nonlinearity() == Nonlinearity::None;

    let mut states = Vec::with_capacity(tg.nt() + 1);
    states.push(x0.to_vec());
    let mut f_prev: Option<Vec<f64>> = None;
    for k in 0..tg.nt() {
        let xk = &states[k];
        let mut rhs = stepper.explicit(xk);
        let forcing = 0.5 * dt * (u.values[k] + u.values[k + 1]);
        for (r, bi) in rhs.iter_mut().zip(&b) {
            *r += forcing * bi;
        }
        if !linear {
            let fk = model
                .apply_nonlinearity(xk)
                .map_err(|_| Error::BlowUp { step: k })?;
            match &f_prev {
                None => rhs.iter_mut().zip(&fk).for_each(|(r, f)| *r += dt * f),
                Some(fp) => rhs
                    .iter_mut()
                    .zip(fk.iter().zip(fp))
                    .for_each(|(r, (f, g))| *r += dt * (1.5 * f - 0.5 * g)),
            }
            f_prev = Some(fk);
        }
        stepper.solve(&mut rhs);
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { step: k + 1 });
        }
        states.push(rhs);
    }
    Ok(Trajectory { time_grid: *tg, states })
}

/// `E(t_k) = <x_k, x_k>` along the trajectory.
pub fn energy_trace(traj: &Trajectory, grid: &crate::grid_ops::Grid) -> Result<Vec<f64>> {
    traj.states.iter().map(|x| inner_product(x, x, grid)).collect()
}

/// The eigenvalue entering the energy estimate of the model: `σ(λ)`, the
/// smallest eigenvalue of the discrete `-A`, for KS (only for `λ < 4π²`);
/// `c_Ω`, the smallest eigenvalue of the discrete `-Δ`, for heat models whose
/// nonlinearity satisfies `z F(z) <= 0`.
pub fn energy_bound_constant(model: &ModelSpec) -> Result<f64> {
    if let Some(lambda) = model.lambda() {
        if lambda >= 4.0 * PI * PI {
            return Err(Error::NotApplicable(format!("λ = {lambda} >= 4π²")));
        }
        return smallest_eigenvalue(&model.linear_op().shifted(0.0, -1.0));
    }
    match model.nonlinearity() {
        Nonlinearity::None => {}
        Nonlinearity::Pointwise(f) if f.satisfies_sign_condition() => {}
        Nonlinearity::Pointwise(_) => {
            return Err(Error::NotApplicable("nonlinearity violates zF(z) <= 0".into()))
        }
        Nonlinearity::KsAdvection => {
            return Err(Error::NotApplicable("not a heat model".into()))
        }
    }
    smallest_eigenvalue(&laplacian(model.grid())?.shifted(0.0, -1.0))
}

/// Margin of the model's energy estimate given its constant from
/// [`energy_bound_constant`]:
///
/// ```text
/// KS:   |w0|² + |u|²_{L²} max b² / σ(λ)      - |w(τ)|²
/// heat: |w0|² + 4 |u|²_{L²} |r|²_{L²} / c_Ω  - |w(τ)|²
/// ```
pub fn energy_margin_with_constant(
    model: &ModelSpec,
    traj: &Trajectory,
    u: &ControlSignal,
    design: &ActuatorDesign,
    constant: f64,
) -> Result<f64> {
    let grid = model.grid();
    let b = model.actuator_profile(design)?;
    let gain = if model.lambda().is_some() {
        b.iter().fold(0.0f64, |m, v| m.max(v * v))
    } else {
        4.0 * inner_product(&b, &b, grid)?
    };
    let e0 = inner_product(&traj.states[0], &traj.states[0], grid)?;
    let e1 = inner_product(traj.final_state(), traj.final_state(), grid)?;
    Ok(e0 + u.l2_norm().powi(2) * gain / constant - e1)
}

/// Margin of `|w(τ)|² <= |w0|² + |u|²_{L²} max b² / σ(λ)`.
pub fn verify_ks_bound(
    model: &ModelSpec,
    traj: &Trajectory,
    u: &ControlSignal,
    design: &ActuatorDesign,
) -> Result<f64> {
    if model.lambda().is_none() {
        return Err(Error::NotApplicable("not a Kuramoto–Sivashinsky model".into()));
    }
    let sigma = energy_bound_constant(model)?;
    energy_margin_with_constant(model, traj, u, design, sigma)
}

/// Margin of `|w(τ)|² <= |w0|² + 4 |u|²_{L²} |r|²_{L²} / c_Ω`.
pub fn verify_heat_iss_bound(
    model: &ModelSpec,
    traj: &Trajectory,
    u: &ControlSignal,
    design: &ActuatorDesign,
) -> Result<f64> {
    if model.lambda().is_some() {
        return Err(Error::NotApplicable("not a heat model".into()));
    }
    let c_omega = energy_bound_constant(model)?;
    energy_margin_with_constant(model, traj, u, design, c_omega)
}

/// Margin of whichever energy estimate applies to the model, if any.
pub fn energy_margin(model: &ModelSpec, traj: &Trajectory, u: &ControlSignal, design: &ActuatorDesign) -> Option<f64> {
    let c = energy_bound_constant(model).ok()?;
    energy_margin_with_constant(model, traj, u, design, c).ok()
}
