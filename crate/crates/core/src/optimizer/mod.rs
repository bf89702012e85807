//! Projected-gradient optimization of the input and the actuator design,
//! worst-initial-condition ascent and first-order optimality residuals.
//!
//! Descent steps use a spectral (Barzilai–Borwein) scaling per block and a
//! monotone Armijo backtracking search along the projected direction
//!
//! ```text
//! d = (P_U(u - α_u g_u) - u,  P_K(r - α_r g_r) - r),   z ← z + s d
//! ```
//!
//! which keeps every iterate feasible. The first input scaling is
//! `α_u = 1 / (2ρ)`, so a unit step from any point lands on `-B*p / ρ`.

mod projection;
mod worst_ic;

pub use projection::{project_k, project_u, project_v_ball, AdmissibleSets};
pub use worst_ic::{worst_initial_condition, AscentRecord, StartSummary, WorstIcResult};

use std::io::Write;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::adjoint::{assemble_gradients, evaluate_cost, solve_adjoint, AdjointTrajectory, CostWeights, Evaluation, GradientBundle};
use crate::error::{Error, Result};
use crate::forward::{energy_bound_constant, energy_margin_with_constant, solve_forward, ControlSignal, TimeGrid, Trajectory};
use crate::grid_ops::dot;
use crate::models::{ActuatorDesign, ModelSpec};

const ACTIVE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateMode {
    /// One shared step on `(u, r)`.
    #[default]
    Joint,
    /// A `u` step followed by an `r` step, each with its own line search.
    Alternating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    pub c1: f64,
    pub backtrack: f64,
    pub initial_step: f64,
    pub max_backtracks: usize,
    /// Stopping tolerance on the optimality residuals.
    pub tolerance: f64,
    pub seed: u64,
    pub mode: UpdateMode,
    /// Number of random starts for the worst-initial-condition ascent.
    pub starts: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            c1: 1e-4,
            backtrack: 0.5,
            initial_step: 1.0,
            max_backtracks: 40,
            tolerance: 1e-6,
            seed: 0,
            mode: UpdateMode::Joint,
            starts: 5,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if !(self.c1 > 0.0 && self.c1 < 1.0) {
            return bad("c1 must lie in (0, 1)");
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad("backtrack factor must lie in (0, 1)");
        }
        if !(self.initial_step > 0.0 && self.initial_step <= 1.0) {
            return bad("initial step must lie in (0, 1]");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be > 0");
        }
        if self.starts == 0 {
            return bad("at least one start is required");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub cost: f64,
    pub grad_u_norm: f64,
    pub grad_r_norm: f64,
    /// Accepted step along the projected direction, 0 for the starting point.
    pub step: f64,
    pub res_u: f64,
    pub res_r: f64,
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    MaxIterations,
    LineSearchStalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub iterations: Vec<IterationRecord>,
    pub initial_u_norm: f64,
    pub initial_design: Vec<f64>,
    pub termination: Termination,
    /// Forward solves spent, including rejected trial points.
    pub forward_solves: usize,
}

impl CostReport {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    pub fn last(&self) -> &IterationRecord {
        self.iterations.last().expect("report has the starting point")
    }

    /// Whether the recorded costs never increase.
    pub fn is_monotone(&self) -> bool {
        self.iterations.windows(2).all(|w| w[1].cost <= w[0].cost)
    }

    /// CSV with columns `iter,cost,res_u,res_r,step,margin`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iter,cost,res_u,res_r,step,margin")?;
        for r in &self.iterations {
            let margin = r.margin.map_or(String::from("nan"), |m| format!("{m:.16e}"));
            writeln!(out, "{},{:.16e},{:.16e},{:.16e},{:.16e},{}", r.iter, r.cost, r.res_u, r.res_r, r.step, margin)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub u: ControlSignal,
    pub design: ActuatorDesign,
    pub report: CostReport,
    /// State, adjoint and gradients at the returned point.
    pub evaluation: Evaluation,
}

fn near(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= ACTIVE_TOL * scale.max(1.0)
}

/// Tangent-cone residuals computed from already assembled gradients.
pub fn residuals_from_gradients(g: &GradientBundle, u: &ControlSignal, design: &ActuatorDesign, sets: &AdmissibleSets) -> (f64, f64) {
    // -(ρ u + B*p), projected onto the tangent cone of U_ad at u
    let mut v: Vec<f64> = g.grad_u.iter().map(|x| -0.5 * x).collect();
    if let Some(b) = sets.u_box {
        for (vk, &uk) in v.iter_mut().zip(&u.values) {
            if (near(uk, b, b) && *vk > 0.0) || (near(uk, -b, b) && *vk < 0.0) {
                *vk = 0.0;
            }
        }
    }
    let un = u.l2_norm();
    if un > 0.0 && near(un, sets.r1, sets.r1) {
        let c = u.inner(&v);
        if c > 0.0 {
            let s = c / (un * un);
            for (vk, uk) in v.iter_mut().zip(&u.values) {
                *vk -= s * uk;
            }
        }
    }
    let res_u = l2_inner(&u.time_grid, &v, &v).sqrt();

    let mut res_r2 = 0.0;
    for (m, gr) in g.grad_r.iter().enumerate() {
        let vm = -0.5 * gr;
        let (lo, hi) = (sets.design_lower[m], sets.design_upper[m]);
        let width = hi - lo;
        let p = design.params[m];
        let blocked = (near(p, hi, width) && vm > 0.0) || (near(p, lo, width) && vm < 0.0);
        if !blocked {
            res_r2 += vm * vm;
        }
    }
    (res_u, res_r2.sqrt())
}

/// `(res_u, res_r)`: the norms of `-(ρ u + B*p)` and of `-∫ (B'_r u)* p dt`
/// projected onto the tangent cones of `U_ad` at `u` and `K_ad` at `r`.
pub fn optimality_residuals(
    model: &ModelSpec,
    traj: &Trajectory,
    p: &AdjointTrajectory,
    u: &ControlSignal,
    design: &ActuatorDesign,
    weights: &CostWeights,
    sets: &AdmissibleSets,
) -> Result<(f64, f64)> {
    let g = assemble_gradients(model, traj, p, u, design, weights)?;
    Ok(residuals_from_gradients(&g, u, design, sets))
}

fn is_blow_up(e: &Error) -> bool {
    matches!(e, Error::BlowUp { .. } | Error::NumericalOverflow)
}

struct Problem<'a> {
    model: &'a ModelSpec,
    sets: &'a AdmissibleSets,
    weights: &'a CostWeights,
    x0: &'a [f64],
    tg: &'a TimeGrid,
    config: &'a OptimizerConfig,
    bound_constant: Option<f64>,
    forward_solves: usize,
}

#[derive(Clone)]
struct Point {
    u: ControlSignal,
    design: ActuatorDesign,
    eval: Evaluation,
}

impl Problem<'_> {
    fn trial_cost(&mut self, u: &ControlSignal, design: &ActuatorDesign) -> Result<(Trajectory, f64)> {
        self.forward_solves += 1;
        let traj = solve_forward(self.model, u, design, self.x0, self.tg)?;
        let cost = evaluate_cost(&traj, u, self.weights, self.model.grid())?;
        if !cost.is_finite() {
            return Err(Error::NumericalOverflow);
        }
        Ok((traj, cost))
    }

    fn complete(&self, u: ControlSignal, design: ActuatorDesign, traj: Trajectory) -> Result<Point> {
        let adjoint = solve_adjoint(self.model, &traj, self.weights, self.tg)?;
        let gradients = assemble_gradients(self.model, &traj, &adjoint, &u, &design, self.weights)?;
        Ok(Point {
            u,
            design,
            eval: Evaluation { traj, adjoint, gradients },
        })
    }

    fn record(&self, iter: usize, pt: &Point, step: f64) -> IterationRecord {
        let g = &pt.eval.gradients;
        let (res_u, res_r) = residuals_from_gradients(g, &pt.u, &pt.design, self.sets);
        let margin = self
            .bound_constant
            .and_then(|c| energy_margin_with_constant(self.model, &pt.eval.traj, &pt.u, &pt.design, c).ok());
        IterationRecord {
            iter,
            cost: g.cost,
            grad_u_norm: l2_inner(self.tg, &g.grad_u, &g.grad_u).sqrt(),
            grad_r_norm: dot(&g.grad_r, &g.grad_r).sqrt(),
            step,
            res_u,
            res_r,
            margin,
        }
    }

    /// Monotone Armijo search along `d`. `Ok(None)` when every trial was
    /// rejected by the sufficient-decrease test.
    fn line_search(&mut self, pt: &Point, du: &[f64], dr: &[f64]) -> Result<Option<(Point, f64)>> {
        let g = &pt.eval.gradients;
        let slope = l2_inner(&pt.u.time_grid, &g.grad_u, du) + dot(&g.grad_r, dr);
        if !(slope < 0.0) {
            return Ok(None);
        }
        let mut s = self.config.initial_step;
        let mut blow_ups = 0;
        for _ in 0..self.config.max_backtracks {
            let u = ControlSignal {
                time_grid: pt.u.time_grid,
                values: pt.u.values.iter().zip(du).map(|(a, b)| a + s * b).collect(),
            };
            let design = ActuatorDesign::new(pt.design.params.iter().zip(dr).map(|(a, b)| a + s * b).collect());
            match self.trial_cost(&u, &design) {
                Ok((traj, cost)) if cost <= g.cost + self.config.c1 * s * slope => {
                    return Ok(Some((self.complete(u, design, traj)?, s)));
                }
                Ok(_) => {}
                Err(e) if is_blow_up(&e) => {
                    debug!("trial step {s:e} blew up: {e}");
                    blow_ups += 1;
                }
                Err(e) => return Err(e),
            }
            s *= self.config.backtrack;
        }
        if blow_ups == self.config.max_backtracks {
            return Err(Error::OptimizerAborted(format!(
                "every trial point blew up ({blow_ups} backtracks, smallest step {s:e})"
            )));
        }
        Ok(None)
    }
}

/// Trapezoid L²(0, τ) inner product of two sampled signals.
fn l2_inner(tg: &TimeGrid, a: &[f64], b: &[f64]) -> f64 {
    tg.trapezoid_weights().iter().zip(a.iter().zip(b)).map(|(w, (x, y))| w * x * y).sum()
}

/// Spectral step scalings for the two blocks.
struct Scales {
    u: f64,
    r: Option<f64>,
}

impl Scales {
    fn r_or_init(&mut self, g_r: &[f64], sets: &AdmissibleSets) -> f64 {
        if let Some(a) = self.r {
            return a;
        }
        let gn = dot(g_r, g_r).sqrt();
        let width = sets
            .design_lower
            .iter()
            .zip(&sets.design_upper)
            .map(|(a, b)| b - a)
            .filter(|w| *w > 0.0)
            .fold(f64::INFINITY, f64::min);
        if gn > 0.0 && width.is_finite() {
            let a = 0.1 * width / gn;
            self.r = Some(a);
            a
        } else {
            0.0
        }
    }

    fn update(&mut self, old: &Point, new: &Point) {
        let (go, gn) = (&old.eval.gradients, &new.eval.gradients);
        let su: Vec<f64> = new.u.values.iter().zip(&old.u.values).map(|(a, b)| a - b).collect();
        let yu: Vec<f64> = gn.grad_u.iter().zip(&go.grad_u).map(|(a, b)| a - b).collect();
        let ss = l2_inner(&old.u.time_grid, &su, &su);
        let sy = l2_inner(&old.u.time_grid, &su, &yu);
        if ss > 0.0 && sy > 0.0 {
            self.u = (ss / sy).clamp(1e-12, 1e12);
        }
        let sr: Vec<f64> = new.design.params.iter().zip(&old.design.params).map(|(a, b)| a - b).collect();
        let yr: Vec<f64> = gn.grad_r.iter().zip(&go.grad_r).map(|(a, b)| a - b).collect();
        let ss = dot(&sr, &sr);
        let sy = dot(&sr, &yr);
        if ss > 0.0 && sy > 0.0 {
            self.r = Some((ss / sy).clamp(1e-12, 1e12));
        }
    }
}

fn direction_u(pt: &Point, alpha: f64, sets: &AdmissibleSets) -> Vec<f64> {
    let trial = ControlSignal {
        time_grid: pt.u.time_grid,
        values: pt.u.values.iter().zip(&pt.eval.gradients.grad_u).map(|(a, g)| a - alpha * g).collect(),
    };
    project_u(&trial, sets).values.iter().zip(&pt.u.values).map(|(a, b)| a - b).collect()
}

fn direction_r(pt: &Point, alpha: f64, sets: &AdmissibleSets) -> Vec<f64> {
    let trial = ActuatorDesign::new(pt.design.params.iter().zip(&pt.eval.gradients.grad_r).map(|(a, g)| a - alpha * g).collect());
    project_k(&trial, sets).params.iter().zip(&pt.design.params).map(|(a, b)| a - b).collect()
}

/// Minimize the cost over `U_ad × K_ad` from `u = 0` and the midpoint of
/// the design box.
pub fn minimize_joint(
    model: &ModelSpec,
    sets: &AdmissibleSets,
    weights: &CostWeights,
    x0: &[f64],
    tg: &TimeGrid,
    config: &OptimizerConfig,
) -> Result<OptimizationResult> {
    let mid = ActuatorDesign::new(sets.design_lower.iter().zip(&sets.design_upper).map(|(a, b)| 0.5 * (a + b)).collect());
    minimize_from(model, sets, weights, x0, tg, config, &ControlSignal::zero(*tg), &mid)
}

#[allow(clippy::too_many_arguments)]
pub fn minimize_from(
    model: &ModelSpec,
    sets: &AdmissibleSets,
    weights: &CostWeights,
    x0: &[f64],
    tg: &TimeGrid,
    config: &OptimizerConfig,
    u_start: &ControlSignal,
    design_start: &ActuatorDesign,
) -> Result<OptimizationResult> {
    config.validate()?;
    sets.validate()?;
    if sets.design_lower.len() != model.actuator().dim() {
        return Err(Error::DimensionMismatch {
            expected: model.actuator().dim(),
            got: sets.design_lower.len(),
        });
    }
    if u_start.time_grid != *tg {
        return Err(Error::TimeGridMismatch("starting input is on a different time grid".into()));
    }
    let u0 = project_u(u_start, sets);
    let d0 = project_k(design_start, sets);
    let mut prob = Problem {
        model,
        sets,
        weights,
        x0,
        tg,
        config,
        bound_constant: energy_bound_constant(model).ok(),
        forward_solves: 0,
    };
    let (traj, _) = prob.trial_cost(&u0, &d0)?;
    let mut pt = prob.complete(u0.clone(), d0.clone(), traj)?;
    let mut records = vec![prob.record(0, &pt, 0.0)];
    let mut scales = Scales {
        u: 0.5 / weights.r_scale,
        r: None,
    };
    let n_u = pt.u.values.len();
    let n_r = pt.design.params.len();
    let mut termination = Termination::MaxIterations;

    for iter in 1..=config.max_iters {
        let last = records.last().expect("non-empty");
        if last.res_u.max(last.res_r) <= config.tolerance {
            termination = Termination::Converged;
            break;
        }
        let alpha_r = scales.r_or_init(&pt.eval.gradients.grad_r, sets);
        let accepted = match config.mode {
            UpdateMode::Joint => {
                let du = direction_u(&pt, scales.u, sets);
                let dr = direction_r(&pt, alpha_r, sets);
                prob.line_search(&pt, &du, &dr)?
            }
            UpdateMode::Alternating => {
                let du = direction_u(&pt, scales.u, sets);
                let first = prob.line_search(&pt, &du, &vec![0.0; n_r])?;
                let mid = first.as_ref().map_or(&pt, |(p, _)| p);
                let alpha_r = scales.r_or_init(&mid.eval.gradients.grad_r, sets);
                let dr = direction_r(mid, alpha_r, sets);
                match prob.line_search(mid, &vec![0.0; n_u], &dr)? {
                    Some((p, s)) => Some((p, first.map_or(s, |(_, s0)| s0.max(s)))),
                    None => first,
                }
            }
        };
        let Some((next, step)) = accepted else {
            termination = Termination::LineSearchStalled;
            break;
        };
        debug_assert!(next.eval.gradients.cost <= pt.eval.gradients.cost);
        scales.update(&pt, &next);
        pt = next;
        let rec = prob.record(iter, &pt, step);
        debug!("iter {iter}: cost {:.6e} res_u {:.3e} res_r {:.3e} step {step:.3e}", rec.cost, rec.res_u, rec.res_r);
        records.push(rec);
    }
    if termination == Termination::MaxIterations {
        let last = records.last().expect("non-empty");
        if last.res_u.max(last.res_r) <= config.tolerance {
            termination = Termination::Converged;
        }
    }
    info!(
        "optimizer stopped after {} iterations ({termination:?}), cost {:.6e}",
        records.len() - 1,
        pt.eval.gradients.cost
    );
    Ok(OptimizationResult {
        report: CostReport {
            iterations: records,
            initial_u_norm: u0.l2_norm(),
            initial_design: d0.params,
            termination,
            forward_solves: prob.forward_solves,
        },
        u: pt.u,
        design: pt.design,
        evaluation: pt.eval,
    })
}

/// Golden-section search over a scalar design with the input re-optimized
/// at each trial point. Returns the best design and its optimized cost.
#[allow(clippy::too_many_arguments)]
pub fn golden_section_design(
    model: &ModelSpec,
    sets: &AdmissibleSets,
    weights: &CostWeights,
    x0: &[f64],
    tg: &TimeGrid,
    config: &OptimizerConfig,
    tol: f64,
) -> Result<(ActuatorDesign, f64)> {
    if sets.design_lower.len() != 1 {
        return Err(Error::InvalidParameter("golden-section search needs a scalar design".into()));
    }
    let inner = |r: f64| -> Result<f64> {
        let d = ActuatorDesign::location(r);
        Ok(minimize_joint(model, &sets.with_fixed_design(&d), weights, x0, tg, config)?
            .evaluation
            .gradients
            .cost)
    };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (sets.design_lower[0], sets.design_upper[0]);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (inner(c)?, inner(d)?);
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = inner(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = inner(d)?;
        }
    }
    let r = 0.5 * (a + b);
    Ok((ActuatorDesign::location(r), inner(r)?))
}
