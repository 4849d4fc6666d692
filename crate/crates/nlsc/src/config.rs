//! Run configuration, validation and the reproducibility manifest.
//!
//! Configs are TOML; every omitted optional field takes a documented
//! default (T = 1, n_steps = 1000, γ₁ = 0, γ₂ = 1e−2, potential ε = dx).
//! Validation collects every violation, not just the first. A run
//! manifest JSON echoes the full effective configuration together with
//! the artifact version, seed, invariant summary and wall-clock time —
//! enough to reproduce the run exactly.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::control::{AdmissibilityBounds, ControlPath, ControlShape};
use crate::cost::{CostBreakdown, CostParams};
use crate::error::Error;
use crate::forward::SolverOptions;
use crate::model::{
    make_observable, make_potential, ModelParams, ObservableSpec, PotentialSpec,
};
use crate::spectral::{Fourier, Grid, RealField, State};
use crate::Result;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct GridConfig {
    pub dim: usize,
    pub points: usize,
    pub half_width: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { dim: 1, points: 256, half_width: 10.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct ModelConfig {
    pub lambda: f64,
    pub sigma: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { lambda: 1.0, sigma: 1.0 }
    }
}

/// Initial wavefunction families.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialStateSpec {
    Gaussian { width: f64, center: Vec<f64>, amplitude: f64, normalize: bool },
    Constant { re: f64, im: f64 },
    /// `exp(i k_m x)` along the first axis, m-th grid mode.
    PlaneWave { mode: usize },
    FromFile { path: String },
}

impl Default for InitialStateSpec {
    fn default() -> Self {
        InitialStateSpec::Gaussian {
            width: 1.0,
            center: vec![0.0],
            amplitude: 1.0,
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct ControlConfig {
    pub horizon: f64,
    pub n_steps: usize,
    pub phi0: f64,
    pub shape: ControlShape,
    /// Optional CSV file (t, phi) overriding `shape`.
    pub from_csv: Option<String>,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            horizon: 1.0,
            n_steps: 1000,
            phi0: 0.0,
            shape: ControlShape::Constant { value: 0.0 },
            from_csv: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct CostConfig {
    pub gamma1: f64,
    pub gamma2: f64,
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig { gamma1: 0.0, gamma2: 1e-2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct BoundsConfig {
    pub m1: f64,
    pub m2: f64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig { m1: 10.0, m2: 5.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct SolverConfig {
    pub stride: usize,
    pub blowup_guard: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { stride: 1, blowup_guard: 1e8 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct OptimizeConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub armijo_c1: f64,
    pub backtrack: f64,
    pub initial_step: f64,
    pub max_backtracks: usize,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        let o = crate::optimize::OptimizeOptions::default();
        OptimizeConfig {
            max_iters: o.max_iters,
            grad_tol: o.grad_tol,
            armijo_c1: o.armijo_c1,
            backtrack: o.backtrack,
            initial_step: o.initial_step,
            max_backtracks: o.max_backtracks,
        }
    }
}

/// Full run configuration; houses every model and solver parameter.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub grid: GridConfig,
    pub model: ModelConfig,
    pub potential: Option<PotentialSpec>,
    pub observable: ObservableSpec,
    pub initial_state: InitialStateSpec,
    pub control: ControlConfig,
    pub cost: CostConfig,
    pub bounds: BoundsConfig,
    pub solver: SolverConfig,
    pub optimize: OptimizeConfig,
}

/// Materialised problem, ready for the solvers.
pub struct Problem {
    pub grid: Arc<Grid>,
    pub model: ModelParams,
    pub potential: RealField,
    pub observable: RealField,
    pub u0: State,
    pub control: ControlPath,
    pub cost: CostParams,
    pub solver: SolverOptions,
    pub optimize: crate::optimize::OptimizeOptions,
    pub seed: u64,
}

impl RunConfig {
    /// Parse a TOML config file. Parse errors keep toml's line/column
    /// rendering; constraint violations are collected by [`Self::validate`].
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::ConfigParse(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::ConfigParse(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Cross-field validation; returns every violation at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(1..=3).contains(&self.grid.dim) {
            problems.push(format!("grid.dim must be 1, 2 or 3, got {}", self.grid.dim));
        }
        if self.grid.points < 8 || !self.grid.points.is_power_of_two() {
            problems.push(format!(
                "grid.points must be a power of two >= 8, got {}",
                self.grid.points
            ));
        }
        if !(self.grid.half_width > 0.0) {
            problems.push(format!("grid.half_width must be > 0, got {}", self.grid.half_width));
        }
        if !(self.model.sigma > 0.0) {
            problems.push(format!("model.sigma must be > 0, got {}", self.model.sigma));
        }
        if self.observable.radius >= self.grid.half_width {
            problems.push(format!(
                "observable.radius {} must be < grid.half_width {}",
                self.observable.radius, self.grid.half_width
            ));
        }
        if self.control.n_steps < 2 {
            problems.push(format!("control.n_steps must be >= 2, got {}", self.control.n_steps));
        }
        if !(self.control.horizon > 0.0) {
            problems.push(format!("control.horizon must be > 0, got {}", self.control.horizon));
        }
        if !(self.cost.gamma2 > 0.0) {
            problems.push(format!(
                "cost.gamma2 must be > 0 (the objective requires gamma2 > 0), got {}",
                self.cost.gamma2
            ));
        }
        if self.cost.gamma1 < 0.0 {
            problems.push(format!("cost.gamma1 must be >= 0, got {}", self.cost.gamma1));
        }
        if !(self.bounds.m1 > 0.0 && self.bounds.m2 > 0.0) {
            problems.push(format!(
                "bounds must be positive, got M1 = {}, M2 = {}",
                self.bounds.m1, self.bounds.m2
            ));
        }
        if self.control.phi0.abs() > self.bounds.m2 {
            problems.push(format!(
                "control.phi0 = {} violates |phi0| <= M2 = {}",
                self.control.phi0, self.bounds.m2
            ));
        }
        if self.solver.stride == 0 {
            problems.push("solver.stride must be >= 1".to_string());
        }
        if let Some(PotentialSpec::InversePower { alpha, epsilon }) = &self.potential {
            if !(*alpha > 0.0 && *alpha < 1.0) {
                problems.push(format!("potential.alpha must lie in (0, 1), got {alpha}"));
            }
            if let Some(eps) = epsilon {
                if !(*eps > 0.0) {
                    problems.push(format!("potential.epsilon must be > 0, got {eps}"));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigInvalid(problems))
        }
    }

    /// Materialise grid, fields, model, control and cost parameters.
    pub fn build(&self) -> Result<Problem> {
        self.validate()?;
        let grid = Grid::new(self.grid.dim, self.grid.points, self.grid.half_width)?;
        let model = ModelParams::new(self.model.lambda, self.model.sigma, self.grid.dim)?;
        let potential_spec = self
            .potential
            .clone()
            .unwrap_or(PotentialSpec::InversePower { alpha: 0.5, epsilon: None });
        let potential = make_potential(&potential_spec, &grid)?;
        let observable = make_observable(&self.observable, &grid)?;
        let bounds = AdmissibilityBounds::new(self.bounds.m1, self.bounds.m2)?;
        let cost = CostParams::new(self.cost.gamma1, self.cost.gamma2, observable.clone(), bounds)?;

        let u0 = match &self.initial_state {
            InitialStateSpec::Gaussian { width, center, amplitude, normalize } => {
                if !(*width > 0.0) {
                    return Err(Error::invalid("initial_state.width must be > 0"));
                }
                let s = State::gaussian(&grid, center, *width, *amplitude);
                if *normalize {
                    s.normalized()
                } else {
                    s
                }
            }
            InitialStateSpec::Constant { re, im } => {
                let c = Complex64::new(*re, *im);
                State::from_fn(&grid, |_| c)
            }
            InitialStateSpec::PlaneWave { mode } => {
                if *mode >= grid.points_per_dim() {
                    return Err(Error::invalid(format!(
                        "plane_wave mode {mode} exceeds grid modes"
                    )));
                }
                let k = grid.wavenumbers()[*mode];
                State::from_fn(&grid, |x| Complex64::from_polar(1.0, k * x[0]))
            }
            InitialStateSpec::FromFile { path } => {
                let s = crate::io::read_state(Path::new(path))?;
                if s.grid.as_ref() != grid.as_ref() {
                    return Err(Error::GridMismatch(format!(
                        "initial state file {path} was sampled on another grid"
                    )));
                }
                s
            }
        };

        let control = match &self.control.from_csv {
            Some(path) => {
                let mut c = crate::io::read_control(Path::new(path))?;
                c.pin_initial(self.control.phi0, Some(&bounds))?;
                c
            }
            None => ControlPath::new(
                self.control.horizon,
                self.control.n_steps,
                self.control.phi0,
                &self.control.shape,
                Some(&bounds),
            )?,
        };

        let solver =
            SolverOptions { stride: self.solver.stride, blowup_guard: self.solver.blowup_guard };
        let optimize = crate::optimize::OptimizeOptions {
            max_iters: self.optimize.max_iters,
            grad_tol: self.optimize.grad_tol,
            armijo_c1: self.optimize.armijo_c1,
            backtrack: self.optimize.backtrack,
            initial_step: self.optimize.initial_step,
            max_backtracks: self.optimize.max_backtracks,
            solver,
        };

        Ok(Problem {
            grid,
            model,
            potential,
            observable,
            u0,
            control,
            cost,
            solver,
            optimize,
            seed: self.seed,
        })
    }
}

impl Problem {
    /// H¹ norm of the initial state, for the M₁ admissibility check.
    pub fn u0_h1(&self) -> f64 {
        Fourier::new(&self.grid).norms(&self.u0).h1
    }
}

/// Invariant summary embedded in every manifest.
#[derive(Debug, Clone, Serialize, Default)]
pub struct InvariantSummary {
    pub mass_drift: Option<f64>,
    pub energy_identity_residual: Option<f64>,
    /// Largest |u| within 10% of the box boundary (truncation diagnostic).
    pub boundary_max: Option<f64>,
}

/// Reproducibility manifest written next to every run's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub subcommand: String,
    pub seed: u64,
    pub config: RunConfig,
    pub invariants: InvariantSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostBreakdown>,
    pub wall_clock_s: f64,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: &RunConfig) -> RunManifest {
        RunManifest {
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            seed: config.seed,
            config: config.clone(),
            invariants: InvariantSummary::default(),
            cost: None,
            wall_clock_s: 0.0,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}
