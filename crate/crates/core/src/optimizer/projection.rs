use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{ControlSignal, TimeGrid};
use crate::grid_ops::RieszMap;
use crate::models::{ActuatorDesign, ActuatorFamily};

/// `U_ad × K_ad` and the initial-state ball `B_V(R2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleSets {
    /// Radius of the input ball in L²(0, τ).
    pub r1: f64,
    /// Optional bound on `|u(t_k)|`.
    pub u_box: Option<f64>,
    pub design_lower: Vec<f64>,
    pub design_upper: Vec<f64>,
    /// Radius of the initial-state ball in H¹.
    pub r2: f64,
}

impl AdmissibleSets {
    pub fn new(r1: f64, u_box: Option<f64>, family: &ActuatorFamily, r2: f64) -> Result<Self> {
        let sets = Self {
            r1,
            u_box,
            design_lower: family.lower_bounds(),
            design_upper: family.upper_bounds(),
            r2,
        };
        sets.validate()?;
        Ok(sets)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r1 > 0.0 && self.r1.is_finite()) {
            return Err(Error::InvalidParameter(format!("R1 must be > 0, got {}", self.r1)));
        }
        if !(self.r2 > 0.0 && self.r2.is_finite()) {
            return Err(Error::InvalidParameter(format!("R2 must be > 0, got {}", self.r2)));
        }
        if let Some(b) = self.u_box {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::InvalidParameter(format!("input box must be > 0, got {b}")));
            }
        }
        if self.design_lower.len() != self.design_upper.len()
            || self.design_lower.iter().zip(&self.design_upper).any(|(a, b)| !(a <= b))
        {
            return Err(Error::InvalidParameter("design bounds must satisfy lower <= upper".into()));
        }
        Ok(())
    }

    /// Whether the box lies strictly inside the L² ball on this horizon.
    pub fn box_inside_ball(&self, tg: &TimeGrid) -> bool {
        self.u_box.is_none_or(|b| b * tg.tau().sqrt() < self.r1)
    }

    /// Same sets with the design pinned to `design`.
    pub fn with_fixed_design(&self, design: &ActuatorDesign) -> Self {
        Self {
            design_lower: design.params.clone(),
            design_upper: design.params.clone(),
            ..self.clone()
        }
    }

    pub fn design_fixed(&self) -> bool {
        self.design_lower == self.design_upper
    }
}

/// Box clamp if active, then radial scaling onto the L² ball.
pub fn project_u(u: &ControlSignal, sets: &AdmissibleSets) -> ControlSignal {
    let mut out = u.clone();
    if let Some(b) = sets.u_box {
        for v in &mut out.values {
            *v = v.clamp(-b, b);
        }
    }
    let norm = out.l2_norm();
    if norm > sets.r1 {
        let s = sets.r1 / norm;
        for v in &mut out.values {
            *v *= s;
        }
    }
    out
}

pub fn project_k(design: &ActuatorDesign, sets: &AdmissibleSets) -> ActuatorDesign {
    ActuatorDesign::new(
        design
            .params
            .iter()
            .zip(sets.design_lower.iter().zip(&sets.design_upper))
            .map(|(&p, (&lo, &hi))| p.clamp(lo, hi))
            .collect(),
    )
}

/// Radial projection onto `{‖x‖_H¹ <= r2}`.
pub fn project_v_ball(x0: &[f64], r2: f64, riesz: &RieszMap) -> Vec<f64> {
    let norm = riesz.norm(x0);
    if norm > r2 {
        x0.iter().map(|v| v * r2 / norm).collect()
    } else {
        x0.to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_ops::{Grid, Grid1D};
    use proptest::prelude::*;

    fn sets() -> AdmissibleSets {
        AdmissibleSets::new(1.5, None, &ActuatorFamily::ks_gaussian(0.05, 0.1, 0.9).unwrap(), 2.0).unwrap()
    }

    fn tg() -> TimeGrid {
        TimeGrid::new(1.0, 10).unwrap()
    }

    fn l2_dist(a: &ControlSignal, b: &ControlSignal) -> f64 {
        let d: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
        ControlSignal { time_grid: a.time_grid, values: d }.l2_norm()
    }

    #[test]
    fn validation() {
        let fam = ActuatorFamily::ks_gaussian(0.05, 0.1, 0.9).unwrap();
        assert!(AdmissibleSets::new(0.0, None, &fam, 1.0).is_err());
        assert!(AdmissibleSets::new(1.0, None, &fam, -1.0).is_err());
        assert!(AdmissibleSets::new(1.0, Some(0.0), &fam, 1.0).is_err());
        let s = AdmissibleSets::new(1.0, Some(0.5), &fam, 1.0).unwrap();
        assert!(s.box_inside_ball(&tg()));
        assert!(!s.box_inside_ball(&TimeGrid::new(9.0, 10).unwrap()));
    }

    #[test]
    fn inside_ball_unchanged() {
        let u = ControlSignal::from_fn(tg(), |t| 0.3 * t);
        assert_eq!(project_u(&u, &sets()), u);
    }

    #[test]
    fn radial_scaling() {
        let s = sets();
        let u = ControlSignal::from_fn(tg(), |_| 3.0);
        let p = project_u(&u, &s);
        assert!((p.l2_norm() - s.r1).abs() < 1e-14);
        assert!((p.values[3] / p.values[7] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn box_then_ball() {
        let mut s = sets();
        s.u_box = Some(0.5);
        let u = ControlSignal::from_fn(tg(), |t| if t < 0.5 { 2.0 } else { -0.1 });
        let p = project_u(&u, &s);
        assert!(p.values.iter().all(|v| v.abs() <= 0.5));
        assert_eq!(p.values[0], 0.5);
    }

    #[test]
    fn clamp_design() {
        let s = sets();
        assert_eq!(project_k(&ActuatorDesign::location(0.95), &s).params, vec![0.9]);
        assert_eq!(project_k(&ActuatorDesign::location(0.05), &s).params, vec![0.1]);
        assert_eq!(project_k(&ActuatorDesign::location(0.4), &s).params, vec![0.4]);
    }

    #[test]
    fn v_ball_scaling() {
        let grid = Grid::from(Grid1D::new(31).unwrap());
        let riesz = RieszMap::new(&grid).unwrap();
        let x: Vec<f64> = (0..31).map(|i| ((i as f64) * 0.3).sin()).collect();
        let r2 = 0.5 * riesz.norm(&x);
        let p = project_v_ball(&x, r2, &riesz);
        assert!((riesz.norm(&p) - r2).abs() < 1e-12 * r2);
        let cos = riesz.inner(&p, &x) / (riesz.norm(&p) * riesz.norm(&x));
        assert!((cos - 1.0).abs() < 1e-12);
        assert_eq!(project_v_ball(&p, 2.0 * r2, &riesz), p);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn u_projection_idempotent_nonexpansive(
            a in proptest::collection::vec(-5.0f64..5.0, 11),
            b in proptest::collection::vec(-5.0f64..5.0, 11),
            boxed in any::<bool>(),
        ) {
            let mut s = sets();
            if boxed { s.u_box = Some(1.0); }
            let ua = ControlSignal::new(tg(), a).unwrap();
            let ub = ControlSignal::new(tg(), b).unwrap();
            let pa = project_u(&ua, &s);
            let pb = project_u(&ub, &s);
            prop_assert!(l2_dist(&project_u(&pa, &s), &pa) <= 1e-14);
            prop_assert!(l2_dist(&pa, &pb) <= l2_dist(&ua, &ub) + 1e-12);
            prop_assert!(pa.l2_norm() <= s.r1 * (1.0 + 1e-14));
        }

        #[test]
        fn k_projection_idempotent_nonexpansive(a in -1.0f64..2.0, b in -1.0f64..2.0) {
            let s = sets();
            let pa = project_k(&ActuatorDesign::location(a), &s);
            let pb = project_k(&ActuatorDesign::location(b), &s);
            prop_assert_eq!(&project_k(&pa, &s), &pa);
            prop_assert!((pa.params[0] - pb.params[0]).abs() <= (a - b).abs());
        }

        #[test]
        fn v_projection_idempotent_nonexpansive(
            a in proptest::collection::vec(-3.0f64..3.0, 15),
            b in proptest::collection::vec(-3.0f64..3.0, 15),
        ) {
            let grid = Grid::from(Grid1D::new(15).unwrap());
            let riesz = RieszMap::new(&grid).unwrap();
            let pa = project_v_ball(&a, 1.0, &riesz);
            let pb = project_v_ball(&b, 1.0, &riesz);
            let ppa = project_v_ball(&pa, 1.0, &riesz);
            let diff = |x: &[f64], y: &[f64]| {
                let d: Vec<f64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
                riesz.norm(&d)
            };
            prop_assert!(diff(&ppa, &pa) <= 1e-12);
            prop_assert!(diff(&pa, &pb) <= diff(&a, &b) * (1.0 + 1e-12) + 1e-12);
        }
    }
}
