//! The energy estimates hold along randomized admissible runs.

use std::f64::consts::PI;

use actuopt::forward::{solve_forward, verify_heat_iss_bound, verify_ks_bound, ControlSignal, TimeGrid};
use actuopt::grid_ops::{Grid1D, Grid2D};
use actuopt::models::{ActuatorDesign, ActuatorFamily, ModelSpec, ScalarNonlinearity};
use proptest::prelude::*;

fn signal(tg: TimeGrid, amps: &[f64]) -> ControlSignal {
    ControlSignal::from_fn(tg, |t| amps.iter().enumerate().map(|(k, a)| a * ((k as f64 + 1.0) * PI * t).sin()).sum())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn ks_bound_nonnegative(
        r in 0.1f64..0.9,
        amps in proptest::collection::vec(-20.0f64..20.0, 4),
        modes in proptest::collection::vec(-2.0f64..2.0, 4),
    ) {
        let g = Grid1D::new(128).unwrap();
        let model = ModelSpec::kuramoto_sivashinsky(g.clone(), 30.0, ActuatorFamily::ks_gaussian(0.05, 0.1, 0.9).unwrap()).unwrap();
        let tg = TimeGrid::new(1.0, 400).unwrap();
        let x0 = g.sample(|s| {
            (PI * s).sin().powi(2) * modes.iter().enumerate().map(|(k, m)| m * ((k + 1) as f64 * PI * s).cos()).sum::<f64>()
        });
        let u = signal(tg, &amps);
        let design = ActuatorDesign::location(r);
        let traj = solve_forward(&model, &u, &design, &x0, &tg).unwrap();
        let margin = verify_ks_bound(&model, &traj, &u, &design).unwrap();
        prop_assert!(margin >= 0.0, "margin {margin:e}");
    }

    #[test]
    fn heat_iss_bound_nonnegative(
        coeffs in proptest::collection::vec(-1.0f64..1.0, 9),
        amps in proptest::collection::vec(-5.0f64..5.0, 3),
        a in 0.1f64..3.0,
    ) {
        let g = Grid2D::unit_square_dirichlet(32).unwrap();
        let model = ModelSpec::nonlinear_heat(g.clone(), Some(ScalarNonlinearity::NegCubic), 9).unwrap();
        let tg = TimeGrid::new(0.5, 200).unwrap();
        let bound = model.actuator().upper_bounds()[0];
        let design = ActuatorDesign::new(coeffs.iter().map(|c| c * bound).collect());
        let x0 = g.sample(|x, y| a * (PI * x).sin() * (2.0 * PI * y).sin().abs());
        let u = signal(tg, &amps);
        let traj = solve_forward(&model, &u, &design, &x0, &tg).unwrap();
        let margin = verify_heat_iss_bound(&model, &traj, &u, &design).unwrap();
        prop_assert!(margin >= 0.0, "margin {margin:e}");
    }
}
