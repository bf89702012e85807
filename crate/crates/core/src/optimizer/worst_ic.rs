use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{is_blow_up, project_v_ball, AdmissibleSets, OptimizerConfig};
use crate::adjoint::{evaluate, reduced_cost, CostWeights};
use crate::error::{Error, Result};
use crate::forward::{ControlSignal, TimeGrid};
use crate::models::{ActuatorDesign, ModelSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AscentRecord {
    pub iter: usize,
    pub cost: f64,
    pub step: f64,
    pub mu: f64,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSummary {
    pub seed: u64,
    pub cost: f64,
    pub mu: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstIcResult {
    pub x0: Vec<f64>,
    pub mu: f64,
    pub kkt_residual: f64,
    pub cost: f64,
    /// Whether `‖x0‖_H¹ = R2`.
    pub active: bool,
    pub converged: bool,
    pub best_start: usize,
    /// Ascent history of the best start.
    pub history: Vec<AscentRecord>,
    pub starts: Vec<StartSummary>,
}

struct Kkt {
    mu: f64,
    residual: f64,
    active: bool,
}

/// Multiplier and residual of `p(0) + μ x0 = 0` written for the
/// minimization of `-G`, whose adjoint is `-p`.
fn kkt(model: &ModelSpec, x0: &[f64], grad: &[f64], r2: f64) -> Kkt {
    let riesz = model.riesz();
    let half: Vec<f64> = grad.iter().map(|g| 0.5 * g).collect();
    let active = riesz.norm(x0) >= r2 * (1.0 - 1e-10);
    let mu = if active { riesz.norm(&half) / r2 } else { 0.0 };
    let diff: Vec<f64> = half.iter().zip(x0).map(|(h, x)| mu * x - h).collect();
    Kkt {
        mu,
        residual: riesz.norm(&diff),
        active,
    }
}

struct Ascent {
    x0: Vec<f64>,
    cost: f64,
    kkt: Kkt,
    converged: bool,
    history: Vec<AscentRecord>,
}

#[allow(clippy::too_many_arguments)]
fn ascend(
    model: &ModelSpec,
    u: &ControlSignal,
    design: &ActuatorDesign,
    sets: &AdmissibleSets,
    weights: &CostWeights,
    tg: &TimeGrid,
    config: &OptimizerConfig,
    start: Vec<f64>,
) -> Result<Ascent> {
    let riesz = model.riesz();
    let mut x = project_v_ball(&start, sets.r2, riesz);
    let mut e = evaluate(model, u, design, &x, weights, tg)?;
    let mut history = Vec::new();
    let mut converged = false;
    for iter in 0..=config.max_iters {
        let g = &e.gradients.grad_x0;
        let k = kkt(model, &x, g, sets.r2);
        history.push(AscentRecord {
            iter,
            cost: e.gradients.cost,
            step: 0.0,
            mu: k.mu,
            kkt_residual: k.residual,
        });
        let scale = if k.active { k.mu * sets.r2 } else { 1.0 };
        if k.residual <= config.tolerance * scale || iter == config.max_iters {
            converged = k.residual <= config.tolerance * scale;
            break;
        }
        let gnorm = riesz.norm(g);
        if gnorm == 0.0 {
            converged = true;
            break;
        }
        // a long first trial makes the projected step close to a power iteration
        let mut alpha = 10.0 * sets.r2 / gnorm;
        let mut accepted = None;
        let mut blow_ups = 0;
        for _ in 0..config.max_backtracks {
            let trial: Vec<f64> = x.iter().zip(g).map(|(a, b)| a + alpha * b).collect();
            let trial = project_v_ball(&trial, sets.r2, riesz);
            let dx: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            let gain = riesz.inner(g, &dx);
            match reduced_cost(model, u, design, &trial, weights, tg) {
                Ok(c) if c >= e.gradients.cost + config.c1 * gain => {
                    accepted = Some(trial);
                    break;
                }
                Ok(_) => {}
                Err(err) if is_blow_up(&err) => blow_ups += 1,
                Err(err) => return Err(err),
            }
            alpha *= config.backtrack;
        }
        let Some(next) = accepted else {
            if blow_ups == config.max_backtracks {
                return Err(Error::OptimizerAborted("every ascent trial point blew up".into()));
            }
            debug!("worst-IC line search stalled at iteration {iter}");
            break;
        };
        history.last_mut().expect("pushed above").step = alpha;
        x = next;
        e = evaluate(model, u, design, &x, weights, tg)?;
    }
    let k = kkt(model, &x, &e.gradients.grad_x0, sets.r2);
    Ok(Ascent {
        x0: x,
        cost: e.gradients.cost,
        kkt: k,
        converged,
        history,
    })
}

/// Projected gradient ascent of the cost over the initial-state ball in
/// H¹, from `config.starts` seeded random starts. Returns the best start.
pub fn worst_initial_condition(
    model: &ModelSpec,
    u_fixed: &ControlSignal,
    design_fixed: &ActuatorDesign,
    sets: &AdmissibleSets,
    weights: &CostWeights,
    tg: &TimeGrid,
    config: &OptimizerConfig,
) -> Result<WorstIcResult> {
    config.validate()?;
    sets.validate()?;
    let n = model.state_dim();
    let mut best: Option<(usize, Ascent)> = None;
    let mut starts = Vec::with_capacity(config.starts);
    for i in 0..config.starts {
        let seed = config.seed.wrapping_add(i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = model.riesz().norm(&start);
        let start: Vec<f64> = start.iter().map(|v| v * sets.r2 / norm).collect();
        let a = ascend(model, u_fixed, design_fixed, sets, weights, tg, config, start)?;
        debug!("worst-IC start {i}: cost {:.6e} mu {:.6e} kkt {:.3e}", a.cost, a.kkt.mu, a.kkt.residual);
        starts.push(StartSummary {
            seed,
            cost: a.cost,
            mu: a.kkt.mu,
            kkt_residual: a.kkt.residual,
            iterations: a.history.len() - 1,
            converged: a.converged,
        });
        if best.as_ref().is_none_or(|(_, b)| a.cost > b.cost) {
            best = Some((i, a));
        }
    }
    let (best_start, a) = best.expect("at least one start");
    info!("worst initial condition: cost {:.6e}, mu {:.6e}, start {best_start}", a.cost, a.kkt.mu);
    Ok(WorstIcResult {
        x0: a.x0,
        mu: a.kkt.mu,
        kkt_residual: a.kkt.residual,
        cost: a.cost,
        active: a.kkt.active,
        converged: a.converged,
        best_start,
        history: a.history,
        starts,
    })
}
