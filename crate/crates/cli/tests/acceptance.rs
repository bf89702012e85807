//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use actuopt::adjoint::{adjoint_sweep, tangent_linear, CostWeights};
use actuopt::forward::{solve_forward, verify_heat_iss_bound, verify_ks_bound, ControlSignal, TimeGrid};
use actuopt::grid_ops::{heat_operator, ks_operator, BoundaryKind, Grid1D, Grid2D, LinearOperator};
use actuopt::models::{ActuatorDesign, ActuatorFamily, ModelSpec, ScalarNonlinearity};
use actuopt::riccati::solve_differential_riccati;
use actuopt_cli::config::{InitialKind, ModelKind, NonlinearityKind};
use actuopt_cli::{run, sweep, ExperimentConfig, Pipeline};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn scratch() -> tempfile::TempDir {
    tempfile::tempdir().expect("temporary directory")
}

fn results(summary: &Value) -> &Value {
    &summary["results"]
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

fn ks_model(n: usize) -> (Grid1D, ModelSpec) {
    let g = Grid1D::new(n).unwrap();
    let m = ModelSpec::kuramoto_sivashinsky(g.clone(), 30.0, ActuatorFamily::ks_gaussian(0.05, 0.1, 0.9).unwrap()).unwrap();
    (g, m)
}

fn linear_heat_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.model.kind = ModelKind::Heat;
    c.grid.nx = 16;
    c.grid.ny = 16;
    c.time.tau = 0.25;
    c.time.nt = 100;
    c.weights.r_scale = 1e-3;
    c.control.amplitude = 0.0;
    c
}

fn dot(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q)).sum()
}

fn abs_dot(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p * q).abs())).sum()
}

/// Identity errors for the probe `y = L h` and for an independent `y`.
fn identity(model: &ModelSpec, u: &ControlSignal, design: &ActuatorDesign, x0: &[f64], rng: &mut ChaCha8Rng) -> (f64, f64) {
    let tg = u.time_grid;
    let traj = solve_forward(model, u, design, x0, &tg).unwrap();
    let mut field = || -> Vec<Vec<f64>> {
        (0..=tg.nt()).map(|_| (0..model.state_dim()).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    };
    let (h, y) = (field(), field());
    let lh = tangent_linear(model, &traj, &h).unwrap();
    let classical = {
        let (a, b) = (dot(&lh, &lh), dot(&h, &adjoint_sweep(model, &traj, &lh).unwrap()));
        (a - b).abs() / a
    };
    let independent = {
        let (a, b) = (dot(&lh, &y), dot(&h, &adjoint_sweep(model, &traj, &y).unwrap()));
        (a - b).abs() / abs_dot(&lh, &y)
    };
    (classical, independent)
}

fn criterion_1() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_c, mut worst_i) = (0.0f64, 0.0f64);
    let (g, ks) = ks_model(64);
    let tg = TimeGrid::new(0.1, 100).unwrap();
    for _ in 0..10 {
        let a = rng.random_range(0.5..8.0);
        let x0 = g.sample(|s| a * (PI * s).sin().powi(2) * (1.0 + 2.0 * s));
        let w = rng.random_range(1.0..10.0);
        let u = ControlSignal::from_fn(tg, |t| a * (w * t).sin());
        let r = rng.random_range(0.1..0.9);
        let (c, ind) = identity(&ks, &u, &ActuatorDesign::location(r), &x0, &mut rng);
        worst_c = worst_c.max(c);
        worst_i = worst_i.max(ind);
    }
    let g2 = Grid2D::unit_square_dirichlet(32).unwrap();
    let kinds = [ScalarNonlinearity::NegCubic, ScalarNonlinearity::NegTanh, ScalarNonlinearity::Cubic];
    for i in 0..10 {
        let heat = ModelSpec::nonlinear_heat(g2.clone(), Some(kinds[i % 3]), 9).unwrap();
        let a = rng.random_range(0.5..2.0);
        let x0 = g2.sample(|x, y| a * (PI * x).sin() * (PI * y).sin() * (1.0 + x));
        let u = ControlSignal::from_fn(tg, |t| a + t);
        let bound = heat.actuator().upper_bounds()[0];
        let design = ActuatorDesign::new((0..9).map(|_| rng.random_range(-bound..bound)).collect());
        let (c, ind) = identity(&heat, &u, &design, &x0, &mut rng);
        worst_c = worst_c.max(c);
        worst_i = worst_i.max(ind);
    }
    verdict(
        worst_c <= 1e-11 && worst_i <= 1e-11,
        format!("20 instances, max rel error {worst_c:.2e} (y = Lh), {worst_i:.2e} (independent y, term-scaled); tol 1e-11"),
    )
}

fn criterion_2() -> Verdict {
    let dir = scratch();
    let mut ok = true;
    let mut parts = Vec::new();
    let mut heat = ExperimentConfig::default();
    heat.model.kind = ModelKind::Heat;
    let mut heat_nl = heat.clone();
    heat_nl.model.nonlinearity = NonlinearityKind::NegCubic;
    for (name, config, tol) in [
        ("ks", ExperimentConfig::default(), 1e-4),
        ("heat -z^3", heat_nl, 1e-4),
        ("linear heat", heat, 1e-7),
    ] {
        let s = run(Pipeline::Gradcheck, &config, &dir.path().join(name.replace(' ', "_"))).unwrap().summary;
        let err = num(&results(&s)["max_rel_error"]);
        ok &= err <= tol;
        parts.push(format!("{name} {err:.2e} (tol {tol:.0e})"));
    }
    verdict(ok, format!("u, r, x0 directional checks: {}", parts.join(", ")))
}

fn random_signal(rng: &mut ChaCha8Rng, tg: TimeGrid, scale: f64) -> ControlSignal {
    let amps: Vec<f64> = (0..4).map(|_| rng.random_range(-scale..scale)).collect();
    ControlSignal::from_fn(tg, |t| amps.iter().enumerate().map(|(k, a)| a * ((k + 1) as f64 * PI * t).sin()).sum())
}

fn criterion_3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (g, model) = ks_model(128);
    let tg = TimeGrid::new(1.0, 400).unwrap();
    let mut min_margin = f64::INFINITY;
    for _ in 0..20 {
        let c: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let x0 = g.sample(|s| (PI * s).sin().powi(2) * c.iter().enumerate().map(|(k, a)| a * ((k + 1) as f64 * PI * s).cos()).sum::<f64>());
        let u = random_signal(&mut rng, tg, 20.0);
        let design = ActuatorDesign::location(rng.random_range(0.1..0.9));
        let traj = solve_forward(&model, &u, &design, &x0, &tg).unwrap();
        min_margin = min_margin.min(verify_ks_bound(&model, &traj, &u, &design).unwrap());
    }
    verdict(min_margin >= 0.0, format!("20 runs, n=128, nt=400, min margin {min_margin:.3e}"))
}

fn criterion_4() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let g = Grid2D::unit_square_dirichlet(32).unwrap();
    let model = ModelSpec::nonlinear_heat(g.clone(), Some(ScalarNonlinearity::NegCubic), 9).unwrap();
    let tg = TimeGrid::new(0.5, 200).unwrap();
    let bound = model.actuator().upper_bounds()[0];
    let mut min_margin = f64::INFINITY;
    for _ in 0..20 {
        let design = ActuatorDesign::new((0..9).map(|_| rng.random_range(-bound..bound)).collect());
        let (a, kx, ky) = (rng.random_range(0.1..3.0), rng.random_range(1..4) as f64, rng.random_range(1..4) as f64);
        let x0 = g.sample(|x, y| a * (kx * PI * x).sin() * (ky * PI * y).sin());
        let u = random_signal(&mut rng, tg, 5.0);
        let traj = solve_forward(&model, &u, &design, &x0, &tg).unwrap();
        min_margin = min_margin.min(verify_heat_iss_bound(&model, &traj, &u, &design).unwrap());
    }
    verdict(min_margin >= 0.0, format!("20 runs, 32x32, F = -z^3, min margin {min_margin:.3e}"))
}

fn criterion_5() -> Verdict {
    let dir = scratch();
    let heat = run(Pipeline::RiccatiValidate, &linear_heat_config(), &dir.path().join("heat")).unwrap().summary;
    let mut ks = ExperimentConfig::default();
    ks.time.nt = 1600;
    ks.control.amplitude = 0.0;
    let ks = run(Pipeline::RiccatiValidate, &ks, &dir.path().join("ks")).unwrap().summary;
    let d_heat = num(&results(&heat)["feedback_check"]["max_discrepancy"]);
    let d_ks = num(&results(&ks)["feedback_check"]["max_discrepancy"]);
    let conclusive = [&heat, &ks].iter().all(|s| results(s)["feedback_check"]["inconclusive"] == Value::Bool(false));

    let tg = TimeGrid::new(1.0, 2000).unwrap();
    let mut a = LinearOperator::zeros(1, 0);
    a.set(0, 0, 0.0);
    let ric = solve_differential_riccati(&a.mark_symmetric().unwrap(), &[1.0], &CostWeights::new(1.0, 1.0).unwrap(), 1.0, &tg).unwrap();
    let tanh_err = (0..=tg.nt()).map(|k| (ric.pi(k)[(0, 0)] - (1.0 - tg.time(k)).tanh()).abs()).fold(0.0, f64::max);
    verdict(
        conclusive && d_heat <= 0.02 && d_ks <= 0.02 && tanh_err <= 1e-6,
        format!("feedback discrepancy linear heat {d_heat:.3e}, linearized KS {d_ks:.3e} (tol 2e-2); scalar tanh {tanh_err:.2e} (tol 1e-6)"),
    )
}

fn criterion_6() -> Verdict {
    let dir = scratch();
    let mut c = linear_heat_config();
    c.sets.r2 = 0.5;
    c.optimizer.tolerance = 1e-8;
    c.optimizer.max_iters = 2000;
    let s = run(Pipeline::WorstIc, &c, dir.path()).unwrap().summary;
    let r = results(&s);
    let cosine = num(&r["eigen_check"]["cosine"]);
    let norm_err = num(&r["norm_error"]);
    verdict(
        cosine >= 0.999 && norm_err <= 1e-6,
        format!("{} starts, H1 cosine {cosine:.6} (tol 0.999), |‖x0‖ - R2| {norm_err:.1e} (tol 1e-6)", c.optimizer.starts),
    )
}

fn criterion_7() -> Verdict {
    let dir = scratch();
    let mut c = ExperimentConfig::default();
    c.control.amplitude = 0.0;
    let s = run(Pipeline::Optimize, &c, dir.path()).unwrap().summary;
    let r = results(&s);
    let (res_u, res_r) = (num(&r["res_u"]), num(&r["res_r"]));
    let monotone = r["monotone"] == Value::Bool(true);
    verdict(
        res_u <= 1e-5 && res_r <= 1e-5 && monotone,
        format!(
            "KS lambda=30 n=128: res_u {res_u:.2e}, res_r {res_r:.2e} (tol 1e-5), monotone {monotone}, {} iterations, r = {}",
            r["iterations"], r["design"][0]
        ),
    )
}

fn orders(errors: &[f64], ratio: f64) -> Vec<f64> {
    errors.windows(2).map(|e| (e[0] / e[1]).ln() / ratio.ln()).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn solve_neg(a: &LinearOperator, f: &[f64]) -> Vec<f64> {
    a.shifted(0.0, -1.0).cholesky().unwrap().solve(f)
}

fn criterion_8() -> Verdict {
    let ks: Vec<(Grid1D, Vec<f64>)> = [31, 63, 127, 255, 511]
        .into_iter()
        .map(|n| {
            let g = Grid1D::new(n).unwrap();
            let w = solve_neg(&ks_operator(&g, 30.0).unwrap(), &g.sample(|x| (PI * x).sin() * x.exp() + 1.0));
            (g, w)
        })
        .collect();
    let e: Vec<f64> = ks
        .windows(2)
        .map(|p| max_diff(&p[0].1, &(0..p[0].0.n()).map(|i| p[1].1[2 * i + 1]).collect::<Vec<_>>()))
        .collect();
    let ks_space = orders(&e, 2.0).into_iter().fold(f64::INFINITY, f64::min);

    let bc = [BoundaryKind::Dirichlet, BoundaryKind::Neumann, BoundaryKind::Dirichlet, BoundaryKind::Neumann];
    let heat: Vec<(Grid2D, Vec<f64>)> = [6, 18, 54, 162]
        .into_iter()
        .map(|n| {
            let g = Grid2D::new(n, n, 1.0, 1.0, bc).unwrap();
            let w = solve_neg(&heat_operator(&g).unwrap(), &g.sample(|x, y| (PI * x).sin() * (2.0 * y).cos() + x * y));
            (g, w)
        })
        .collect();
    let e: Vec<f64> = heat
        .windows(2)
        .map(|p| {
            let (gc, gf) = (&p[0].0, &p[1].0);
            (0..gc.ny())
                .flat_map(|j| (0..gc.nx()).map(move |i| (i, j)))
                .map(|(i, j)| (p[0].1[gc.index(i, j)] - p[1].1[gf.index(3 * i + 1, 3 * j + 1)]).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let heat_space = orders(&e, 3.0).into_iter().fold(f64::INFINITY, f64::min);

    let time_order = |model: &ModelSpec, x0: &[f64], design: &ActuatorDesign, tau: f64, steps: &[usize]| {
        let finals: Vec<Vec<f64>> = steps
            .iter()
            .map(|&nt| {
                let tg = TimeGrid::new(tau, nt).unwrap();
                let u = ControlSignal::from_fn(tg, |t| (3.0 * t).cos());
                solve_forward(model, &u, design, x0, &tg).unwrap().final_state().to_vec()
            })
            .collect();
        let e: Vec<f64> = finals.windows(2).map(|p| max_diff(&p[0], &p[1])).collect();
        orders(&e, 2.0).into_iter().fold(f64::INFINITY, f64::min)
    };
    let g = Grid1D::new(63).unwrap();
    let ks = ModelSpec::kuramoto_sivashinsky(g.clone(), 30.0, ActuatorFamily::ks_gaussian(0.1, 0.1, 0.9).unwrap()).unwrap();
    let x0 = g.sample(|s| 2.0 * (PI * s).sin().powi(4) * (1.0 + 2.0 * s));
    let ks_time = time_order(&ks, &x0, &ActuatorDesign::location(0.3), 0.02, &[50, 100, 200, 400, 800]);
    let g2 = Grid2D::unit_square_dirichlet(16).unwrap();
    let heat = ModelSpec::nonlinear_heat(g2.clone(), Some(ScalarNonlinearity::NegCubic), 4).unwrap();
    let x0 = g2.sample(|x, y| 2.0 * (PI * x).sin() * (PI * y).sin());
    let heat_time = time_order(&heat, &x0, &ActuatorDesign::new(vec![0.2, -0.1, 0.05, 0.1]), 0.1, &[20, 40, 80, 160, 320]);

    let worst = ks_space.min(heat_space).min(ks_time).min(heat_time);
    verdict(
        worst >= 1.8,
        format!("min orders: space KS {ks_space:.2}, heat {heat_space:.2}; time KS {ks_time:.2}, heat {heat_time:.2} (tol 1.8)"),
    )
}

fn criterion_9() -> Verdict {
    let dir = scratch();
    let mut c = ExperimentConfig::default();
    c.control.amplitude = 0.0;
    c.optimizer.tolerance = 1e-9;
    c.initial_condition.kind = InitialKind::Skewed;
    let values: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let s = sweep(Pipeline::Optimize, &c, "actuator.location", &values, &dir.path().join("sweep")).unwrap();
    let best = s.best().unwrap().value;
    let joint = run(Pipeline::Optimize, &c, &dir.path().join("joint")).unwrap().summary;
    let r_joint = num(&results(&joint)["design"][0]);
    let cell = values[1] - values[0];
    verdict(
        (best - r_joint).abs() <= cell + 1e-12,
        format!("sweep best r = {best:.2}, joint r = {r_joint:.4}, |diff| {:.4} (tol {cell:.1})", (best - r_joint).abs()),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, fn() -> Verdict); 9] = [
        ("discrete adjoint identity", Duration::from_secs(30), criterion_1),
        ("gradient fidelity", Duration::from_secs(120), criterion_2),
        ("KS energy bound", Duration::from_secs(60), criterion_3),
        ("heat ISS bound", Duration::from_secs(120), criterion_4),
        ("Riccati equivalence", Duration::from_secs(180), criterion_5),
        ("worst-IC eigen-alignment", Duration::from_secs(120), criterion_6),
        ("optimality residuals", Duration::from_secs(300), criterion_7),
        ("convergence orders", Duration::from_secs(120), criterion_8),
        ("sweep vs joint", Duration::from_secs(600), criterion_9),
    ];
    let mut failures = 0;
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = f();
        let elapsed = start.elapsed();
        let passed = v.passed && elapsed <= *budget;
        failures += usize::from(!passed);
        println!(
            "criterion {} {}: {name}: {} [{:.1} s of {} s]",
            i + 1,
            if passed { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
