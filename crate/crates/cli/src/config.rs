//! Experiment configuration, read from TOML.
//!
//! ```toml
//! seed = 0
//! output_dir = "out"
//!
//! [model]
//! kind = "ks"            # ks | heat
//! lambda = 30.0
//! nonlinearity = "none"  # heat only: none | neg-cubic | neg-tanh | cubic
//! linearize = false
//!
//! [grid]
//! n = 128                # ks
//! nx = 32                # heat
//! ny = 32
//!
//! [time]
//! tau = 1.0
//! nt = 400
//! ```
//!
//! The remaining sections are `[weights]`, `[sets]`, `[actuator]`,
//! `[initial_condition]`, `[control]`, `[optimizer]` and `[gradcheck]`; every
//! field has a default.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use actuopt::adjoint::CostWeights;
use actuopt::forward::{ControlSignal, TimeGrid};
use actuopt::grid_ops::{BoundaryKind, Grid, Grid1D, Grid2D};
use actuopt::models::{ActuatorDesign, ActuatorFamily, ModelSpec, ScalarNonlinearity};
use actuopt::optimizer::{AdmissibleSets, OptimizerConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Ks,
    Heat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NonlinearityKind {
    None,
    NegCubic,
    NegTanh,
    Cubic,
}

impl NonlinearityKind {
    fn scalar(self) -> Option<ScalarNonlinearity> {
        match self {
            Self::None => None,
            Self::NegCubic => Some(ScalarNonlinearity::NegCubic),
            Self::NegTanh => Some(ScalarNonlinearity::NegTanh),
            Self::Cubic => Some(ScalarNonlinearity::Cubic),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    pub lambda: f64,
    pub nonlinearity: NonlinearityKind,
    /// Drop the nonlinearity (KS advection or the heat source).
    pub linearize: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            kind: ModelKind::Ks,
            lambda: 30.0,
            nonlinearity: NonlinearityKind::None,
            linearize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    /// Edge kinds in the order left, right, bottom, top.
    pub boundary: [BoundaryKind; 4],
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            n: 128,
            nx: 32,
            ny: 32,
            lx: 1.0,
            ly: 1.0,
            boundary: [BoundaryKind::Dirichlet; 4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSection {
    pub tau: f64,
    pub nt: usize,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self { tau: 1.0, nt: 400 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsSection {
    /// State weight `q`.
    pub q_scale: f64,
    /// Input weight `ρ`.
    pub r_scale: f64,
}

impl Default for WeightsSection {
    fn default() -> Self {
        Self {
            q_scale: 1.0,
            r_scale: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SetsSection {
    pub r1: f64,
    pub u_box: Option<f64>,
    pub r2: f64,
}

impl Default for SetsSection {
    fn default() -> Self {
        Self {
            r1: 1e3,
            u_box: None,
            r2: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActuatorSection {
    /// Gaussian width ω (KS).
    pub width: f64,
    /// Admissible locations `[lower, upper]` (KS).
    pub lower: f64,
    pub upper: f64,
    /// Number of cosine basis functions (heat), a perfect square.
    pub basis_size: usize,
    /// Starting or fixed design. Defaults to the midpoint of the admissible
    /// box for KS and to half the upper bound on every coefficient for heat,
    /// whose midpoint is the zero actuator.
    pub design: Option<Vec<f64>>,
    /// Keep the design fixed when optimizing.
    pub fixed: bool,
}

impl Default for ActuatorSection {
    fn default() -> Self {
        Self {
            width: 0.05,
            lower: 0.1,
            upper: 0.9,
            basis_size: 9,
            design: None,
            fixed: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    Zero,
    /// `sin(πξ)`, or `sin(πx/lx) sin(πy/ly)` on the rectangle.
    Sine,
    /// `sin²(πξ)`, or the product of the squares on the rectangle.
    SineSquared,
    /// `sin²(πξ)(1 + 2ξ)`, or the same in `x` times `sin(πy/ly)`.
    Skewed,
    /// Gaussian bump at `center` with `width`.
    Bump,
    Values,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub kind: InitialKind,
    pub amplitude: f64,
    pub center: Vec<f64>,
    pub width: f64,
    pub values: Vec<f64>,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            kind: InitialKind::Skewed,
            amplitude: 1.0,
            center: vec![0.5, 0.5],
            width: 0.1,
            values: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlKind {
    Zero,
    Constant,
    /// `amplitude · sin(2π frequency t)`
    Sine,
    Values,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlSection {
    pub kind: ControlKind,
    pub amplitude: f64,
    pub frequency: f64,
    pub values: Vec<f64>,
}

impl Default for ControlSection {
    fn default() -> Self {
        Self {
            kind: ControlKind::Constant,
            amplitude: 50.0,
            frequency: 1.0,
            values: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckSection {
    pub epsilons: Vec<f64>,
}

impl Default for GradcheckSection {
    fn default() -> Self {
        Self {
            epsilons: vec![1e-3, 1e-4, 1e-5, 1e-6],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub model: ModelSection,
    pub grid: GridSection,
    pub time: TimeSection,
    pub weights: WeightsSection,
    pub sets: SetsSection,
    pub actuator: ActuatorSection,
    pub initial_condition: InitialSection,
    pub control: ControlSection,
    pub optimizer: OptimizerConfig,
    pub gradcheck: GradcheckSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("out"),
            model: ModelSection::default(),
            grid: GridSection::default(),
            time: TimeSection::default(),
            weights: WeightsSection::default(),
            sets: SetsSection::default(),
            actuator: ActuatorSection::default(),
            initial_condition: InitialSection::default(),
            control: ControlSection::default(),
            optimizer: OptimizerConfig::default(),
            gradcheck: GradcheckSection::default(),
        }
    }
}

/// Everything a pipeline needs, built and validated from a config.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub model: ModelSpec,
    pub time_grid: TimeGrid,
    pub weights: CostWeights,
    pub sets: AdmissibleSets,
    pub x0: Vec<f64>,
    pub control: ControlSignal,
    pub design: ActuatorDesign,
    pub optimizer: OptimizerConfig,
}

fn invalid(field: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {e}"))
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    fn grid(&self) -> Result<Grid> {
        match self.model.kind {
            ModelKind::Ks => Ok(Grid1D::new(self.grid.n).map_err(|e| invalid("grid.n", e))?.into()),
            ModelKind::Heat => Ok(Grid2D::new(self.grid.nx, self.grid.ny, self.grid.lx, self.grid.ly, self.grid.boundary)
                .map_err(|e| invalid("grid", e))?
                .into()),
        }
    }

    pub fn build_model(&self) -> Result<ModelSpec> {
        let model = match self.grid()? {
            Grid::OneD(g) => {
                if !self.model.lambda.is_finite() {
                    return Err(invalid("model.lambda", "must be finite"));
                }
                let fam = ActuatorFamily::ks_gaussian(self.actuator.width, self.actuator.lower, self.actuator.upper)
                    .map_err(|e| invalid("actuator", e))?;
                ModelSpec::kuramoto_sivashinsky(g, self.model.lambda, fam).map_err(|e| invalid("model", e))?
            }
            Grid::TwoD(g) => ModelSpec::nonlinear_heat(g, self.model.nonlinearity.scalar(), self.actuator.basis_size)
                .map_err(|e| invalid("actuator.basis_size", e))?,
        };
        Ok(if self.model.linearize { model.linearized() } else { model })
    }

    fn initial_state(&self, grid: &Grid) -> Result<Vec<f64>> {
        let ic = &self.initial_condition;
        let a = ic.amplitude;
        let x = match (ic.kind, grid) {
            (InitialKind::Zero, _) => vec![0.0; grid.len()],
            (InitialKind::Values, _) => {
                grid.check_len(&ic.values).map_err(|e| invalid("initial_condition.values", e))?;
                ic.values.clone()
            }
            (InitialKind::Sine, Grid::OneD(g)) => g.sample(|s| a * (PI * s).sin()),
            (InitialKind::SineSquared, Grid::OneD(g)) => g.sample(|s| a * (PI * s).sin().powi(2)),
            (InitialKind::Skewed, Grid::OneD(g)) => g.sample(|s| a * (PI * s).sin().powi(2) * (1.0 + 2.0 * s)),
            (InitialKind::Bump, Grid::OneD(g)) => {
                let c = *ic.center.first().ok_or_else(|| invalid("initial_condition.center", "missing"))?;
                g.sample(|s| a * (-(s - c).powi(2) / (2.0 * ic.width * ic.width)).exp())
            }
            (kind, Grid::TwoD(g)) => {
                let (lx, ly) = (g.lx(), g.ly());
                match kind {
                    InitialKind::Sine => g.sample(|x, y| a * (PI * x / lx).sin() * (PI * y / ly).sin()),
                    InitialKind::SineSquared => g.sample(|x, y| a * ((PI * x / lx).sin() * (PI * y / ly).sin()).powi(2)),
                    InitialKind::Skewed => {
                        g.sample(|x, y| a * (PI * x / lx).sin().powi(2) * (1.0 + 2.0 * x / lx) * (PI * y / ly).sin())
                    }
                    InitialKind::Bump => {
                        if ic.center.len() != 2 {
                            return Err(invalid("initial_condition.center", "needs two coordinates"));
                        }
                        let (cx, cy) = (ic.center[0], ic.center[1]);
                        g.sample(|x, y| a * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * ic.width * ic.width)).exp())
                    }
                    _ => unreachable!("handled above"),
                }
            }
        };
        Ok(x)
    }

    fn control_signal(&self, tg: TimeGrid) -> Result<ControlSignal> {
        let c = &self.control;
        Ok(match c.kind {
            ControlKind::Zero => ControlSignal::zero(tg),
            ControlKind::Constant => ControlSignal::from_fn(tg, |_| c.amplitude),
            ControlKind::Sine => ControlSignal::from_fn(tg, |t| c.amplitude * (2.0 * PI * c.frequency * t).sin()),
            ControlKind::Values => ControlSignal::new(tg, c.values.clone()).map_err(|e| invalid("control.values", e))?,
        })
    }

    pub fn build(&self) -> Result<Experiment> {
        let model = self.build_model()?;
        let time_grid = TimeGrid::new(self.time.tau, self.time.nt).map_err(|e| invalid("time", e))?;
        let weights = CostWeights::new(self.weights.q_scale, self.weights.r_scale).map_err(|e| invalid("weights", e))?;
        let design = match &self.actuator.design {
            Some(p) => ActuatorDesign::new(p.clone()),
            None => match self.model.kind {
                ModelKind::Ks => model.actuator().midpoint(),
                ModelKind::Heat => ActuatorDesign::new(model.actuator().upper_bounds().iter().map(|b| 0.5 * b).collect()),
            },
        };
        if !model.actuator().contains(&design) {
            return Err(invalid("actuator.design", format!("{:?} is not admissible", design.params)));
        }
        let mut sets = AdmissibleSets::new(self.sets.r1, self.sets.u_box, model.actuator(), self.sets.r2)
            .map_err(|e| invalid("sets", e))?;
        if !sets.box_inside_ball(&time_grid) {
            return Err(invalid("sets.u_box", "box must lie inside the R1 ball"));
        }
        if self.actuator.fixed {
            sets = sets.with_fixed_design(&design);
        }
        let mut optimizer = self.optimizer.clone();
        optimizer.seed = self.seed;
        optimizer.validate().map_err(|e| invalid("optimizer", e))?;
        if self.gradcheck.epsilons.iter().any(|e| !(*e > 0.0)) {
            return Err(invalid("gradcheck.epsilons", "must be positive"));
        }
        let x0 = self.initial_state(model.grid())?;
        let control = self.control_signal(time_grid)?;
        Ok(Experiment {
            model,
            time_grid,
            weights,
            sets,
            x0,
            control,
            design,
            optimizer,
        })
    }

    /// Overwrite a numeric field addressed by a dotted path, e.g.
    /// `weights.r_scale`. `actuator.location` sets a fixed scalar design.
    pub fn with_param(&self, param: &str, value: f64) -> Result<Self> {
        if param == "actuator.location" {
            let mut c = self.clone();
            c.actuator.design = Some(vec![value]);
            c.actuator.fixed = true;
            return Ok(c);
        }
        let mut tree = toml::Value::try_from(self).map_err(|e| CliError::Config(e.to_string()))?;
        let (sections, leaf) = match param.rsplit_once('.') {
            Some((s, l)) => (s.split('.').collect(), l),
            None => (Vec::new(), param),
        };
        let mut table = tree.as_table_mut().expect("config serializes to a table");
        for s in sections {
            table = table
                .get_mut(s)
                .and_then(toml::Value::as_table_mut)
                .ok_or_else(|| CliError::Config(format!("{param}: unknown section '{s}'")))?;
        }
        let new = match table.get(leaf) {
            Some(toml::Value::Integer(_)) => {
                if value.fract() != 0.0 {
                    return Err(CliError::Config(format!("{param}: expects an integer, got {value}")));
                }
                toml::Value::Integer(value as i64)
            }
            Some(toml::Value::Float(_)) | None => toml::Value::Float(value),
            Some(toml::Value::Array(_)) => toml::Value::Array(vec![toml::Value::Float(value)]),
            Some(_) => return Err(CliError::Config(format!("{param}: not a numeric field"))),
        };
        table.insert(leaf.to_string(), new);
        tree.try_into().map_err(|e: toml::de::Error| CliError::Config(format!("{param}: {e}")))
    }
}
