//! Finite-horizon differential Riccati equation for the linearized model,
//!
//! ```text
//! dΠ/dt = -Π A - A Π - q I + Π S Π,   Π(τ) = 0,   S = c b bᵀ / ρ
//! ```
//!
//! (`c` the uniform quadrature weight), together with the two consistency
//! checks it supports: the feedback identity `p = Π x` and the alignment of
//! the worst initial condition with the top eigenvector of `Π(0)`.
//!
//! The equation is integrated backward with the implicit trapezoid rule in
//! the eigenbasis of `A`. There the Lyapunov part is diagonal and, because
//! `S = β βᵀ` has rank one, the quadratic term only couples through the
//! vector `z = X β`, which is found by Newton's method.

use std::io::Write;

use log::debug;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::adjoint::CostWeights;
use crate::error::{Error, Result};
use crate::forward::{CnStepper, ControlSignal, TimeGrid};
use crate::grid_ops::{dot, laplacian, sorted_symmetric_eigen, Grid, LinearOperator};
use crate::models::{ActuatorDesign, ModelSpec};
use crate::optimizer::{minimize_from, AdmissibleSets, OptimizerConfig};

const MAX_HALVINGS: usize = 6;
const NEWTON_MAX: usize = 50;

#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    time_grid: TimeGrid,
    /// Orthonormal eigenvectors of `A`.
    basis: DMatrix<f64>,
    /// `Vᵀ Π(t_k) V` for k = 0..=nt.
    modal: Vec<DMatrix<f64>>,
}

impl RiccatiSolution {
    pub fn time_grid(&self) -> &TimeGrid {
        &self.time_grid
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    /// `Π(t_k)` in the nodal basis.
    pub fn pi(&self, k: usize) -> DMatrix<f64> {
        &self.basis * &self.modal[k] * self.basis.transpose()
    }

    /// `Π(t_k) x`.
    pub fn apply(&self, k: usize, x: &[f64]) -> Vec<f64> {
        let y = self.basis.tr_mul(&DVector::from_column_slice(x));
        let y = &self.modal[k] * y;
        (&self.basis * y).iter().copied().collect()
    }

    /// `Π(t_k)` as CSV, one matrix row per line.
    pub fn write_csv<W: Write>(&self, k: usize, mut out: W) -> Result<()> {
        let pi = self.pi(k);
        for i in 0..pi.nrows() {
            let row: Vec<String> = (0..pi.ncols()).map(|j| format!("{:.16e}", pi[(i, j)])).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

struct Stepper {
    lambda: Vec<f64>,
    beta: Vec<f64>,
    q: f64,
}

impl Stepper {
    /// Right-hand side of the reversed-time equation, `X Λ + Λ X + q I - z zᵀ`.
    fn rhs(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.lambda.len();
        let z = self.z_of(x);
        DMatrix::from_fn(n, n, |i, j| {
            x[(i, j)] * (self.lambda[i] + self.lambda[j]) + if i == j { self.q } else { 0.0 } - z[i] * z[j]
        })
    }

    fn z_of(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (x * DVector::from_column_slice(&self.beta)).iter().copied().collect()
    }

    /// One implicit trapezoid step of length `h` in reversed time.
    fn step(&self, x: &DMatrix<f64>, h: f64) -> Option<DMatrix<f64>> {
        let n = self.lambda.len();
        let f = self.rhs(x);
        let mut c = x + f * (0.5 * h);
        for i in 0..n {
            c[(i, i)] += 0.5 * h * self.q;
        }
        let d = DMatrix::from_fn(n, n, |i, j| 1.0 - 0.5 * h * (self.lambda[i] + self.lambda[j]));
        if d.iter().any(|v| *v <= 0.0) {
            return None;
        }
        let mut out = c.component_div(&d);
        if self.beta.iter().any(|b| *b != 0.0) {
            let z = self.solve_z(&c, &d, h, self.z_of(x))?;
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] -= 0.5 * h * z[i] * z[j] / d[(i, j)];
                }
            }
        }
        let out = (&out + out.transpose()) * 0.5;
        psd(&out).then_some(out)
    }

    /// Newton iteration for `z = X β` where `X ∘ D + h/2 z zᵀ = C`.
    fn solve_z(&self, c: &DMatrix<f64>, d: &DMatrix<f64>, h: f64, mut z: Vec<f64>) -> Option<Vec<f64>> {
        let n = self.lambda.len();
        let m = DMatrix::from_fn(n, n, |i, j| self.beta[j] / d[(i, j)]);
        let a: Vec<f64> = (0..n).map(|i| (0..n).map(|j| c[(i, j)] * m[(i, j)]).sum()).collect();
        let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
        for _ in 0..NEWTON_MAX {
            let mz = &m * DVector::from_column_slice(&z);
            let res: Vec<f64> = (0..n).map(|i| z[i] * (1.0 + 0.5 * h * mz[i]) - a[i]).collect();
            let rn = res.iter().fold(0.0f64, |s, v| s.max(v.abs()));
            if !rn.is_finite() {
                return None;
            }
            if rn <= 1e-14 * scale {
                return Some(z);
            }
            let jac = DMatrix::from_fn(n, n, |i, k| {
                0.5 * h * z[i] * m[(i, k)] + if i == k { 1.0 + 0.5 * h * mz[i] } else { 0.0 }
            });
            let delta = jac.lu().solve(&DVector::from_vec(res))?;
            for (zi, di) in z.iter_mut().zip(delta.iter()) {
                *zi -= di;
            }
        }
        None
    }

    /// Advance by `h`, halving the step on failure.
    fn advance(&self, x: &DMatrix<f64>, h: f64, depth: usize) -> Option<DMatrix<f64>> {
        if let Some(next) = self.step(x, h) {
            return Some(next);
        }
        if depth >= MAX_HALVINGS {
            return None;
        }
        debug!("Riccati step {h:e} rejected, halving");
        let mid = self.advance(x, 0.5 * h, depth + 1)?;
        self.advance(&mid, 0.5 * h, depth + 1)
    }
}

/// Positive semidefinite up to `1e-8 ‖X‖`.
fn psd(x: &DMatrix<f64>) -> bool {
    let norm = x.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    if !norm.is_finite() {
        return false;
    }
    let tol = 1e-8 * norm.max(f64::MIN_POSITIVE) * x.nrows() as f64;
    let shifted = x + DMatrix::identity(x.nrows(), x.ncols()) * tol;
    shifted.cholesky().is_some()
}

/// Integrate the Riccati equation backward from `Π(τ) = 0`. `mass` is the
/// uniform quadrature weight of the state space; `b` the sampled actuator.
pub fn solve_differential_riccati(
    a: &LinearOperator,
    b: &[f64],
    weights: &CostWeights,
    mass: f64,
    tg: &TimeGrid,
) -> Result<RiccatiSolution> {
    if !a.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    if b.len() != a.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.len() });
    }
    let (lambda, basis) = sorted_symmetric_eigen(a.to_dense());
    let s = (mass / weights.r_scale).sqrt();
    let beta: Vec<f64> = basis.tr_mul(&DVector::from_column_slice(b)).iter().map(|v| v * s).collect();
    let stepper = Stepper {
        lambda,
        beta,
        q: weights.q_scale,
    };
    let n = a.dim();
    let nt = tg.nt();
    let mut modal = vec![DMatrix::zeros(n, n); nt + 1];
    for k in (0..nt).rev() {
        modal[k] = stepper.advance(&modal[k + 1], tg.dt(), 0).ok_or_else(|| Error::Riccati {
            step: k,
            reason: "step rejected after repeated halving (indefinite or Newton failure)".into(),
        })?;
    }
    Ok(RiccatiSolution {
        time_grid: *tg,
        basis,
        modal,
    })
}

/// Riccati solution for the linear part of `model` with the actuator at `design`.
pub fn model_riccati(model: &ModelSpec, design: &ActuatorDesign, weights: &CostWeights, tg: &TimeGrid) -> Result<RiccatiSolution> {
    let b = model.actuator_profile(design)?;
    solve_differential_riccati(model.linear_op(), &b, weights, model.grid().weight(), tg)
}

/// The uncontrolled (Lyapunov) case, `b = 0`.
pub fn model_lyapunov(model: &ModelSpec, weights: &CostWeights, tg: &TimeGrid) -> Result<RiccatiSolution> {
    solve_differential_riccati(model.linear_op(), &vec![0.0; model.state_dim()], weights, model.grid().weight(), tg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackCheck {
    /// `‖u° - u_fb‖ / ‖u_fb‖` in L²(0, τ).
    pub input_discrepancy: f64,
    /// `‖p° - Π x_fb‖ / ‖Π x_fb‖` in L²(0, τ; L²).
    pub adjoint_discrepancy: f64,
    pub max_discrepancy: f64,
    /// Set when the comparison is not meaningful: the input constraint is
    /// active at the optimum or the optimizer did not converge.
    pub inconclusive: bool,
    pub optimizer_iterations: usize,
}

fn rel(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

/// Optimize the input of the linear model with the design held fixed and
/// compare the result with the Riccati feedback loop `u = -ρ⁻¹ B* Π x`.
#[allow(clippy::too_many_arguments)]
pub fn verify_feedback_consistency(
    model: &ModelSpec,
    ric: &RiccatiSolution,
    design: &ActuatorDesign,
    sets: &AdmissibleSets,
    weights: &CostWeights,
    x0: &[f64],
    tg: &TimeGrid,
    config: &OptimizerConfig,
) -> Result<FeedbackCheck> {
    if !model.is_linear() {
        return Err(Error::InvalidParameter("feedback check needs the linear model".into()));
    }
    if ric.time_grid != *tg {
        return Err(Error::TimeGridMismatch("Riccati solution is on a different time grid".into()));
    }
    let fixed = sets.with_fixed_design(design);
    let opt = minimize_from(model, &fixed, weights, x0, tg, config, &ControlSignal::zero(*tg), design)?;
    let inconclusive = !opt.report.converged() || opt.u.l2_norm() >= sets.r1 * (1.0 - 1e-8);

    // closed loop with the same Crank–Nicolson step; the feedback term is a
    // rank-one update of the implicit matrix
    let b = model.actuator_profile(design)?;
    let c = model.grid().weight();
    let dt = tg.dt();
    let stepper = CnStepper::new(model.linear_op(), dt)?;
    let gain = |k: usize| -> Vec<f64> { ric.apply(k, &b).iter().map(|v| c * v / weights.r_scale).collect() };
    let mut mb = b.iter().map(|v| 0.5 * dt * v).collect::<Vec<_>>();
    stepper.solve(&mut mb);
    let mut xs = vec![x0.to_vec()];
    let mut k_now = gain(0);
    for k in 0..tg.nt() {
        let x = &xs[k];
        let uk = -dot(&k_now, x);
        let mut rhs = stepper.explicit(x);
        for (r, bi) in rhs.iter_mut().zip(&b) {
            *r += 0.5 * dt * bi * uk;
        }
        stepper.solve(&mut rhs);
        let k_next = gain(k + 1);
        let s = dot(&k_next, &rhs) / (1.0 + dot(&k_next, &mb));
        let next: Vec<f64> = rhs.iter().zip(&mb).map(|(r, m)| r - s * m).collect();
        xs.push(next);
        k_now = k_next;
    }

    let tw = tg.trapezoid_weights();
    let (mut du, mut nu, mut dp, mut np) = (0.0, 0.0, 0.0, 0.0);
    for (k, x) in xs.iter().enumerate() {
        let px = ric.apply(k, x);
        let u_fb = -c * dot(&b, &px) / weights.r_scale;
        du += tw[k] * (opt.u.values[k] - u_fb).powi(2);
        nu += tw[k] * u_fb * u_fb;
        let p_opt = &opt.evaluation.adjoint.p.states[k];
        dp += tw[k] * p_opt.iter().zip(&px).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        np += tw[k] * dot(&px, &px);
    }
    let input_discrepancy = rel(du.sqrt(), nu.sqrt());
    let adjoint_discrepancy = rel(dp.sqrt(), np.sqrt());
    Ok(FeedbackCheck {
        input_discrepancy,
        adjoint_discrepancy,
        max_discrepancy: input_discrepancy.max(adjoint_discrepancy),
        inconclusive,
        optimizer_iterations: opt.report.iterations.len() - 1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenCheck {
    /// `|cos|` of the angle between `x0*` and the top eigenvector in H¹.
    pub cosine: f64,
    /// `<x0*, Π(0) x0*> / ‖x0*‖²_H¹`.
    pub rayleigh: f64,
    /// Largest eigenvalue of the whitened `Π(0)`.
    pub top_eigenvalue: f64,
}

/// Alignment of `x` with the top eigenvector of `Π` in the geometry of the
/// SPD Gram matrix `gram`, through the whitened matrix `L⁻¹ Π L⁻ᵀ`, `gram = L Lᵀ`.
pub fn whitened_alignment(pi: &DMatrix<f64>, gram: &DMatrix<f64>, x: &[f64]) -> Result<EigenCheck> {
    let n = pi.nrows();
    if gram.nrows() != n || x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    let l = gram
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite { pivot: 0, value: f64::NAN })?
        .l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or(Error::NotPositiveDefinite { pivot: 0, value: 0.0 })?;
    let w = &l_inv * pi * l_inv.transpose();
    let w = (&w + w.transpose()) * 0.5;
    let (values, vectors) = sorted_symmetric_eigen(w.clone());
    let top = vectors.column(n - 1);
    let y = l.transpose() * DVector::from_column_slice(x);
    let yn = y.norm();
    if yn == 0.0 {
        return Err(Error::InvalidParameter("zero vector has no direction".into()));
    }
    Ok(EigenCheck {
        cosine: (y.dot(&top) / (yn * top.norm())).abs(),
        rayleigh: y.dot(&(&w * &y)) / (yn * yn),
        top_eigenvalue: values[n - 1],
    })
}

/// [`whitened_alignment`] of `x0_star` against `Π(0)` in the H¹ geometry of `grid`.
pub fn worst_ic_eigen_check(ric: &RiccatiSolution, x0_star: &[f64], grid: &Grid) -> Result<EigenCheck> {
    let gram = laplacian(grid)?.shifted(1.0, -1.0).to_dense();
    whitened_alignment(&ric.pi(0), &gram, x0_star)
}
