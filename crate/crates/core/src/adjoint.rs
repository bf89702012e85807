//! Discrete adjoint of the IMEX stepper and the gradients of the quadratic
//! cost with respect to the input, the actuator design and the initial
//! state.
//!
//! The cost is
//!
//! ```text
//! J = Σ_k w_k ( q <x_k, x_k> + ρ u_k² )        (w_k trapezoid weights)
//! ```
//!
//! The backward sweep is the algebraic transpose of the tangent-linear
//! stepper, so every gradient is exact for the discrete cost. The adjoint
//! state `p_k` reported at the sample times is scaled so that the input
//! gradient takes the form `2 (ρ u_k + <b, p_k>)` and the stationarity
//! condition reads `u = -ρ⁻¹ B* p`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{solve_forward, CnStepper, ControlSignal, TimeGrid, Trajectory};
use crate::grid_ops::{dot, inner_product, Grid};
use crate::models::{design_jacobian, ActuatorDesign, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub q_scale: f64,
    pub r_scale: f64,
}

impl CostWeights {
    pub fn new(q_scale: f64, r_scale: f64) -> Result<Self> {
        if !(q_scale >= 0.0 && q_scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("q_scale must be >= 0, got {q_scale}")));
        }
        if !(r_scale > 0.0 && r_scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("r_scale must be > 0, got {r_scale}")));
        }
        Ok(Self { q_scale, r_scale })
    }
}

impl Default for CostWeights {
    fn default() -> Self {
        Self { q_scale: 1.0, r_scale: 1.0 }
    }
}

pub fn evaluate_cost(traj: &Trajectory, u: &ControlSignal, weights: &CostWeights, grid: &Grid) -> Result<f64> {
    if traj.time_grid != u.time_grid {
        return Err(Error::TimeGridMismatch("trajectory and control differ".into()));
    }
    let w = traj.time_grid.trapezoid_weights();
    let mut j = 0.0;
    for (k, x) in traj.states.iter().enumerate() {
        j += w[k] * (weights.q_scale * inner_product(x, x, grid)? + weights.r_scale * u.values[k] * u.values[k]);
    }
    Ok(j)
}

/// Linearization of the stepper around a computed trajectory.
struct Linearization<'a> {
    model: &'a ModelSpec,
    traj: &'a Trajectory,
    stepper: CnStepper,
    linear: bool,
}

impl<'a> Linearization<'a> {
    fn new(model: &'a ModelSpec, traj: &'a Trajectory) -> Result<Self> {
        model.grid().check_len(&traj.states[0])?;
        Ok(Self {
            model,
            traj,
            stepper: CnStepper::new(model.linear_op(), traj.time_grid.dt())?,
            linear: model.is_linear(),
        })
    }

    fn nt(&self) -> usize {
        self.traj.time_grid.nt()
    }

    fn check_sources(&self, sources: &[Vec<f64>]) -> Result<()> {
        if sources.len() != self.nt() + 1 {
            return Err(Error::TimeGridMismatch(format!(
                "expected {} source vectors, got {}",
                self.nt() + 1,
                sources.len()
            )));
        }
        for s in sources {
            self.model.grid().check_len(s)?;
        }
        Ok(())
    }

    fn jac(&self, k: usize, v: &[f64]) -> Vec<f64> {
        self.model.jacobian_apply(&self.traj.states[k], v)
    }

    fn jac_t(&self, k: usize, v: &[f64]) -> Vec<f64> {
        self.model.jacobian_adjoint_apply(&self.traj.states[k], v)
    }

    fn forward(&self, sources: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let dt = self.stepper.dt();
        let mut dx: Vec<Vec<f64>> = Vec::with_capacity(self.nt() + 1);
        dx.push(sources[0].clone());
        for k in 0..self.nt() {
            let mut rhs = self.stepper.explicit(&dx[k]);
            if !self.linear {
                let jk = self.jac(k, &dx[k]);
                if k == 0 {
                    axpy(&mut rhs, dt, &jk);
                } else {
                    let jp = self.jac(k - 1, &dx[k - 1]);
                    axpy(&mut rhs, 1.5 * dt, &jk);
                    axpy(&mut rhs, -0.5 * dt, &jp);
                }
            }
            axpy(&mut rhs, 1.0, &sources[k + 1]);
            self.stepper.solve(&mut rhs);
            dx.push(rhs);
        }
        dx
    }

    /// Returns `λ_0..λ_nt` with `Σ y_k·δx_k = Σ λ_k·s_k` for every source
    /// sequence `s` fed to [`Self::forward`]. `λ_1..λ_nt` are the step
    /// multipliers, `λ_0` the sensitivity to the initial state.
    fn backward(&self, y: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let nt = self.nt();
        let n = y[0].len();
        let dt = self.stepper.dt();
        let zero = vec![0.0; n];
        let mut lam = vec![zero.clone(); nt + 1];
        for j in (1..=nt).rev() {
            let mut rhs = y[j].clone();
            if j < nt {
                axpy(&mut rhs, 1.0, &self.stepper.explicit(&lam[j + 1]));
                if !self.linear {
                    let next = &lam[j + 1];
                    let after = if j + 2 <= nt { &lam[j + 2] } else { &zero };
                    let comb: Vec<f64> = next.iter().zip(after).map(|(a, b)| 1.5 * a - 0.5 * b).collect();
                    axpy(&mut rhs, dt, &self.jac_t(j, &comb));
                }
            }
            self.stepper.solve(&mut rhs);
            lam[j] = rhs;
        }
        let mut l0 = y[0].clone();
        axpy(&mut l0, 1.0, &self.stepper.explicit(&lam[1]));
        if !self.linear {
            let comb: Vec<f64> = lam[1].iter().zip(&lam[2]).map(|(a, b)| a - 0.5 * b).collect();
            axpy(&mut l0, dt, &self.jac_t(0, &comb));
        }
        lam[0] = l0;
        lam
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Tangent-linear stepper around `traj`: `δx_0 = s_0` and `s_{k+1}` is added
/// to the right-hand side of step `k`.
pub fn tangent_linear(model: &ModelSpec, traj: &Trajectory, sources: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let lin = Linearization::new(model, traj)?;
    lin.check_sources(sources)?;
    Ok(lin.forward(sources))
}

/// Transpose of [`tangent_linear`] in the Euclidean space-time pairing.
pub fn adjoint_sweep(model: &ModelSpec, traj: &Trajectory, sources: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let lin = Linearization::new(model, traj)?;
    lin.check_sources(sources)?;
    Ok(lin.backward(sources))
}

/// Adjoint state at the sample times plus the initial-state sensitivity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjointTrajectory {
    pub p: Trajectory,
    /// L² representer `p(0)` of half the derivative of `J` with respect to `x_0`.
    pub initial: Vec<f64>,
}

pub fn solve_adjoint(model: &ModelSpec, traj: &Trajectory, weights: &CostWeights, tg: &TimeGrid) -> Result<AdjointTrajectory> {
    if traj.time_grid != *tg {
        return Err(Error::TimeGridMismatch("trajectory was computed on a different time grid".into()));
    }
    let lin = Linearization::new(model, traj)?;
    let wq = model.grid().weight();
    let tw = tg.trapezoid_weights();
    let y: Vec<Vec<f64>> = traj
        .states
        .iter()
        .zip(&tw)
        .map(|(x, w)| x.iter().map(|v| 2.0 * weights.q_scale * w * wq * v).collect())
        .collect();
    let lam = lin.backward(&y);
    let nt = tg.nt();
    let dt = tg.dt();
    let n = model.state_dim();
    let mut states = Vec::with_capacity(nt + 1);
    for k in 0..=nt {
        let scale = dt / (4.0 * tw[k] * wq);
        let mut p = vec![0.0; n];
        if k >= 1 {
            axpy(&mut p, scale, &lam[k]);
        }
        if k < nt {
            axpy(&mut p, scale, &lam[k + 1]);
        }
        states.push(p);
    }
    let initial = lam[0].iter().map(|v| v / (2.0 * wq)).collect();
    Ok(AdjointTrajectory {
        p: Trajectory { time_grid: *tg, states },
        initial,
    })
}

/// Gradients of `J` in the natural geometry of each variable: L²(0,τ) for
/// the input, Euclidean for the design, H¹ for the initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBundle {
    pub cost: f64,
    pub grad_u: Vec<f64>,
    pub grad_r: Vec<f64>,
    pub grad_x0: Vec<f64>,
}

impl GradientBundle {
    /// JSON with the cost, component norms and the full arrays.
    pub fn to_json(&self, tg: &TimeGrid, model: &ModelSpec) -> serde_json::Value {
        let u = ControlSignal {
            time_grid: *tg,
            values: self.grad_u.clone(),
        };
        serde_json::json!({
            "cost": self.cost,
            "norms": {
                "grad_u": u.l2_norm(),
                "grad_r": dot(&self.grad_r, &self.grad_r).sqrt(),
                "grad_x0": model.riesz().norm(&self.grad_x0),
            },
            "grad_u": self.grad_u,
            "grad_r": self.grad_r,
            "grad_x0": self.grad_x0,
        })
    }
}

pub fn assemble_gradients(
    model: &ModelSpec,
    traj: &Trajectory,
    adj: &AdjointTrajectory,
    u: &ControlSignal,
    design: &ActuatorDesign,
    weights: &CostWeights,
) -> Result<GradientBundle> {
    let grid = model.grid();
    let b = model.actuator_profile(design)?;
    let db = design_jacobian(model.actuator(), design, grid);
    let tw = u.time_grid.trapezoid_weights();
    let wq = grid.weight();
    let mut grad_u = Vec::with_capacity(u.values.len());
    let mut grad_r = vec![0.0; db.len()];
    for (k, p) in adj.p.states.iter().enumerate() {
        grad_u.push(2.0 * (weights.r_scale * u.values[k] + wq * dot(&b, p)));
        for (g, col) in grad_r.iter_mut().zip(&db) {
            *g += 2.0 * tw[k] * u.values[k] * wq * dot(col, p);
        }
    }
    let two_p0: Vec<f64> = adj.initial.iter().map(|v| 2.0 * v).collect();
    Ok(GradientBundle {
        cost: evaluate_cost(traj, u, weights, grid)?,
        grad_u,
        grad_r,
        grad_x0: model.riesz().apply(&two_p0),
    })
}

/// Forward solve, adjoint solve and gradient assembly at one point.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub traj: Trajectory,
    pub adjoint: AdjointTrajectory,
    pub gradients: GradientBundle,
}

pub fn evaluate(
    model: &ModelSpec,
    u: &ControlSignal,
    design: &ActuatorDesign,
    x0: &[f64],
    weights: &CostWeights,
    tg: &TimeGrid,
) -> Result<Evaluation> {
    let traj = solve_forward(model, u, design, x0, tg)?;
    let adjoint = solve_adjoint(model, &traj, weights, tg)?;
    let gradients = assemble_gradients(model, &traj, &adjoint, u, design, weights)?;
    Ok(Evaluation { traj, adjoint, gradients })
}

pub fn reduced_cost(
    model: &ModelSpec,
    u: &ControlSignal,
    design: &ActuatorDesign,
    x0: &[f64],
    weights: &CostWeights,
    tg: &TimeGrid,
) -> Result<f64> {
    let traj = solve_forward(model, u, design, x0, tg)?;
    evaluate_cost(&traj, u, weights, model.grid())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientCheckRow {
    pub component: String,
    pub epsilon: f64,
    pub adjoint: f64,
    pub finite_difference: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientCheckReport {
    pub rows: Vec<GradientCheckRow>,
    pub tolerance: f64,
    /// Worst component of the best-over-ε relative error.
    pub max_rel_error: f64,
    pub passed: bool,
}

pub const GRADIENT_CHECK_TOLERANCE: f64 = 1e-4;

fn rel_error(a: f64, b: f64) -> f64 {
    let d = a.abs().max(b.abs());
    if d < 1e-300 {
        0.0
    } else {
        (a - b).abs() / d
    }
}

/// Compare directional derivatives from the adjoint gradients with central
/// differences of the reduced cost, along seeded random directions in `u`
/// and `x0` and along each design coordinate.
#[allow(clippy::too_many_arguments)]
pub fn gradient_check(
    model: &ModelSpec,
    u: &ControlSignal,
    design: &ActuatorDesign,
    x0: &[f64],
    weights: &CostWeights,
    tg: &TimeGrid,
    epsilons: &[f64],
    seed: u64,
) -> Result<GradientCheckReport> {
    let eval = evaluate(model, u, design, x0, weights, tg)?;
    let g = &eval.gradients;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let du: Vec<f64> = (0..u.values.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let dx: Vec<f64> = (0..x0.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let cost = |uu: &ControlSignal, d: &ActuatorDesign, x: &[f64]| reduced_cost(model, uu, d, x, weights, tg);
    let shifted = |base: &[f64], dir: &[f64], s: f64| -> Vec<f64> { base.iter().zip(dir).map(|(a, b)| a + s * b).collect() };

    let mut rows = Vec::new();
    let mut push = |component: String, epsilon: f64, adjoint: f64, fd: f64| {
        rows.push(GradientCheckRow {
            component,
            epsilon,
            adjoint,
            finite_difference: fd,
            rel_error: rel_error(adjoint, fd),
        });
    };
    let adj_u = u.time_grid.trapezoid_weights().iter().zip(g.grad_u.iter().zip(&du)).map(|(w, (a, b))| w * a * b).sum::<f64>();
    let adj_x = model.riesz().inner(&g.grad_x0, &dx);
    for &eps in epsilons {
        let up = ControlSignal { time_grid: *tg, values: shifted(&u.values, &du, eps) };
        let um = ControlSignal { time_grid: *tg, values: shifted(&u.values, &du, -eps) };
        let fd = (cost(&up, design, x0)? - cost(&um, design, x0)?) / (2.0 * eps);
        push("u".into(), eps, adj_u, fd);

        for (m, &gr) in g.grad_r.iter().enumerate() {
            let mut dp = design.clone();
            dp.params[m] += eps;
            let mut dm = design.clone();
            dm.params[m] -= eps;
            let fd = (cost(u, &dp, x0)? - cost(u, &dm, x0)?) / (2.0 * eps);
            let name = if g.grad_r.len() == 1 { "r".to_string() } else { format!("r[{m}]") };
            push(name, eps, gr, fd);
        }

        let fd = (cost(u, design, &shifted(x0, &dx, eps))? - cost(u, design, &shifted(x0, &dx, -eps))?) / (2.0 * eps);
        push("x0".into(), eps, adj_x, fd);
    }

    let mut best: Vec<(String, f64)> = Vec::new();
    for row in &rows {
        match best.iter_mut().find(|(c, _)| *c == row.component) {
            Some((_, e)) => *e = e.min(row.rel_error),
            None => best.push((row.component.clone(), row.rel_error)),
        }
    }
    let max_rel_error = best.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    Ok(GradientCheckReport {
        rows,
        tolerance: GRADIENT_CHECK_TOLERANCE,
        max_rel_error,
        passed: max_rel_error <= GRADIENT_CHECK_TOLERANCE,
    })
}
