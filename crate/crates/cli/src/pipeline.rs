//! The five experiment pipelines. Each writes its artifacts into an output
//! directory and returns a deterministic summary.

use std::path::Path;
use std::time::Instant;

use actuopt::adjoint::{evaluate_cost, gradient_check, GRADIENT_CHECK_TOLERANCE};
use actuopt::forward::{
    energy_bound_constant, energy_margin_with_constant, energy_trace, solve_forward, write_checkpoint,
    write_trajectory_csv,
};
use actuopt::optimizer::{minimize_from, project_u, worst_initial_condition};
use actuopt::riccati::{
    model_lyapunov, model_riccati, verify_feedback_consistency, whitened_alignment, worst_ic_eigen_check,
    RiccatiSolution,
};
use actuopt::grid_ops::laplacian;
use clap::ValueEnum;
use log::info;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{Experiment, ExperimentConfig};
use crate::error::Result;
use crate::output::{Artifacts, FileEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Simulate,
    Optimize,
    WorstIc,
    RiccatiValidate,
    Gradcheck,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Optimize => "optimize",
            Self::WorstIc => "worst-ic",
            Self::RiccatiValidate => "riccati-validate",
            Self::Gradcheck => "gradcheck",
        }
    }
}

/// Summary and file list of a finished run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: Value,
    pub files: Vec<FileEntry>,
}

/// Run a pipeline, writing artifacts, `summary.json` and `manifest.json` to `out`.
pub fn run(pipeline: Pipeline, config: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    let start = Instant::now();
    let exp = config.build()?;
    let mut art = Artifacts::create(out)?;
    info!("{} -> {}", pipeline.name(), out.display());
    let body = match pipeline {
        Pipeline::Simulate => simulate(&exp, &mut art)?,
        Pipeline::Optimize => optimize(&exp, &mut art)?,
        Pipeline::WorstIc => worst_ic(&exp, &mut art)?,
        Pipeline::RiccatiValidate => riccati_validate(&exp, &mut art)?,
        Pipeline::Gradcheck => gradcheck(&exp, config, &mut art)?,
    };
    let summary = json!({
        "command": pipeline.name(),
        "seed": config.seed,
        "state_dim": exp.model.state_dim(),
        "tau": exp.time_grid.tau(),
        "nt": exp.time_grid.nt(),
        "results": body,
    });
    let files = art.finish(pipeline.name(), config, &summary, start.elapsed().as_secs_f64())?;
    Ok(RunOutcome { summary, files })
}

fn margin_json(exp: &Experiment, traj: &actuopt::forward::Trajectory, u: &actuopt::forward::ControlSignal, design: &actuopt::models::ActuatorDesign) -> Result<Value> {
    Ok(match energy_bound_constant(&exp.model) {
        Ok(c) => json!({
            "constant": c,
            "margin": energy_margin_with_constant(&exp.model, traj, u, design, c)?,
        }),
        Err(actuopt::Error::NotApplicable(reason)) => json!({ "constant": null, "margin": null, "reason": reason }),
        Err(e) => return Err(e.into()),
    })
}

fn simulate(exp: &Experiment, art: &mut Artifacts) -> Result<Value> {
    let traj = solve_forward(&exp.model, &exp.control, &exp.design, &exp.x0, &exp.time_grid)?;
    let grid = exp.model.grid();
    let energy = energy_trace(&traj, grid)?;
    let times = exp.time_grid.times();
    art.write_with("trajectory.csv", |w| Ok(write_trajectory_csv(&traj, w)?))?;
    art.write_with("trajectory.bin", |w| Ok(write_checkpoint(&traj, grid, w)?))?;
    art.write_series("energy.csv", "energy", &times, &energy)?;
    art.write_series("control.csv", "u", &times, &exp.control.values)?;
    art.write_vector("final_state.csv", traj.final_state())?;
    Ok(json!({
        "cost": evaluate_cost(&traj, &exp.control, &exp.weights, grid)?,
        "initial_energy": energy[0],
        "final_energy": energy[energy.len() - 1],
        "max_energy": energy.iter().cloned().fold(0.0, f64::max),
        "energy_bound": margin_json(exp, &traj, &exp.control, &exp.design)?,
    }))
}

fn feedback_json(exp: &Experiment, design: &actuopt::models::ActuatorDesign, ric: &RiccatiSolution) -> Result<Value> {
    let sets = exp.sets.with_fixed_design(design);
    let check = verify_feedback_consistency(
        &exp.model,
        ric,
        design,
        &sets,
        &exp.weights,
        &exp.x0,
        &exp.time_grid,
        &exp.optimizer,
    )?;
    Ok(serde_json::to_value(check)?)
}

fn optimize(exp: &Experiment, art: &mut Artifacts) -> Result<Value> {
    let u0 = project_u(&exp.control, &exp.sets);
    let res = minimize_from(
        &exp.model,
        &exp.sets,
        &exp.weights,
        &exp.x0,
        &exp.time_grid,
        &exp.optimizer,
        &u0,
        &exp.design,
    )?;
    let times = exp.time_grid.times();
    art.write_with("iterations.csv", |w| Ok(res.report.write_csv(w)?))?;
    art.write_series("control.csv", "u", &times, &res.u.values)?;
    art.write_vector("final_state.csv", res.evaluation.traj.final_state())?;
    let last = res.report.last();
    let riccati = if exp.model.is_linear() {
        let ric = model_riccati(&exp.model, &res.design, &exp.weights, &exp.time_grid)?;
        feedback_json(exp, &res.design, &ric)?
    } else {
        Value::Null
    };
    Ok(json!({
        "cost": last.cost,
        "res_u": last.res_u,
        "res_r": last.res_r,
        "termination": res.report.termination,
        "converged": res.report.converged(),
        "monotone": res.report.is_monotone(),
        "iterations": res.report.iterations.len() - 1,
        "forward_solves": res.report.forward_solves,
        "design": res.design.params,
        "initial_design": res.report.initial_design,
        "u_norm": res.u.l2_norm(),
        "energy_bound": margin_json(exp, &res.evaluation.traj, &res.u, &res.design)?,
        "riccati_check": riccati,
    }))
}

fn worst_ic(exp: &Experiment, art: &mut Artifacts) -> Result<Value> {
    let res = worst_initial_condition(
        &exp.model,
        &exp.control,
        &exp.design,
        &exp.sets,
        &exp.weights,
        &exp.time_grid,
        &exp.optimizer,
    )?;
    art.write_vector("x0_star.csv", &res.x0)?;
    art.write_with("ascent.csv", |w| {
        use std::io::Write;
        writeln!(w, "iter,cost,step,mu,kkt_residual")?;
        for r in &res.history {
            writeln!(w, "{},{:.16e},{:.16e},{:.16e},{:.16e}", r.iter, r.cost, r.step, r.mu, r.kkt_residual)?;
        }
        Ok(())
    })?;
    let norm = exp.model.riesz().norm(&res.x0);
    let uncontrolled = exp.control.values.iter().all(|v| *v == 0.0);
    let eigen = if exp.model.is_linear() && uncontrolled {
        let lyap = model_lyapunov(&exp.model, &exp.weights, &exp.time_grid)?;
        serde_json::to_value(worst_ic_eigen_check(&lyap, &res.x0, exp.model.grid())?)?
    } else {
        Value::Null
    };
    Ok(json!({
        "cost": res.cost,
        "mu": res.mu,
        "kkt_residual": res.kkt_residual,
        "active": res.active,
        "converged": res.converged,
        "h1_norm": norm,
        "r2": exp.sets.r2,
        "norm_error": (norm - exp.sets.r2).abs(),
        "best_start": res.best_start,
        "starts": res.starts,
        "eigen_check": eigen,
    }))
}

fn riccati_validate(exp: &Experiment, art: &mut Artifacts) -> Result<Value> {
    let linear = Experiment {
        model: exp.model.linearized(),
        ..exp.clone()
    };
    let ric = model_riccati(&linear.model, &linear.design, &linear.weights, &linear.time_grid)?;
    art.write_with("pi0.csv", |w| Ok(ric.write_csv(0, w)?))?;
    let feedback = feedback_json(&linear, &linear.design, &ric)?;
    let gram = laplacian(linear.model.grid())?.shifted(1.0, -1.0).to_dense();
    let alignment = whitened_alignment(&ric.pi(0), &gram, &linear.x0)?;
    Ok(json!({
        "feedback_check": feedback,
        "x0_alignment": alignment,
    }))
}

fn gradcheck(exp: &Experiment, config: &ExperimentConfig, art: &mut Artifacts) -> Result<Value> {
    let report = gradient_check(
        &exp.model,
        &exp.control,
        &exp.design,
        &exp.x0,
        &exp.weights,
        &exp.time_grid,
        &config.gradcheck.epsilons,
        exp.optimizer.seed,
    )?;
    let eval = actuopt::adjoint::evaluate(&exp.model, &exp.control, &exp.design, &exp.x0, &exp.weights, &exp.time_grid)?;
    art.write_json("gradients.json", &eval.gradients.to_json(&exp.time_grid, &exp.model))?;
    art.write_with("gradcheck.csv", |w| {
        use std::io::Write;
        writeln!(w, "component,epsilon,adjoint,finite_difference,rel_error")?;
        for r in &report.rows {
            writeln!(w, "{},{:.16e},{:.16e},{:.16e},{:.16e}", r.component, r.epsilon, r.adjoint, r.finite_difference, r.rel_error)?;
        }
        Ok(())
    })?;
    Ok(json!({
        "cost": eval.gradients.cost,
        "max_rel_error": report.max_rel_error,
        "tolerance": GRADIENT_CHECK_TOLERANCE,
        "passed": report.passed,
        "rows": report.rows,
    }))
}
