//! One-command verification harness.
//!
//! Every testable identity of the model runs here at desk scale
//! (1D, M = 256, L = 10, T = 1, dt = 1e−3 unless a check states
//! otherwise) and reports pass/fail with its measured values:
//!
//! * mass conservation under focusing, defocusing and λ = 0 dynamics
//!   with the singular potential,
//! * the energy identity E(T) − E(0) = −½∫φ'ω dt and its convergence
//!   order in dt,
//! * the three closed-form forward oracles and the self-convergence
//!   order of the splitting,
//! * adjoint/finite-difference gradient consistency on seeded random
//!   directions,
//! * stationarity of the pure-penalty analytic case and the exact
//!   factor-2 identity between the optimality-ODE residual and the
//!   gradient,
//! * the Lipschitz difference-quotient probe in the discrete L^∞(H²)
//!   norm,
//! * descent behaviour on the localization task with a
//!   regression-locked baseline,
//! * boundedness of the discrete H² norm along theorem-range runs.
//!
//! All tolerances are configuration data ([`Tolerances`]), recorded in
//! every report. Random directions derive from the single seed in
//! [`VerifyConfig`], which the reports embed. Checks run concurrently;
//! report assembly is serialized in registry order.

use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::adjoint::evolve_backward;
use crate::control::{AdmissibilityBounds, ControlPath, ControlShape};
use crate::cost::{evaluate, terminal_term, CostParams};
use crate::error::Error;
use crate::forward::{evolve, SolverOptions, Trajectory};
use crate::gradient::{assemble_gradient, fd_directional, h1_dual_norm, pair};
use crate::model::{
    make_observable, make_potential, ModelParams, ObservableSpec, PotentialSpec,
};
use crate::optimize::{optimize, stationarity_residual, OptimizeOptions};
use crate::spectral::{l2_norm, Fourier, Grid, RealField, State};
use crate::Result;

/// Localization-task baseline terminal value, computed by this artifact
/// on its first run at the pinned configuration and locked against
/// regressions since.
const DESCENT_BASELINE_LOCK: f64 = 0.420_597_392_354_601_14;

/// Every check the harness must register.
pub const REQUIRED_CHECKS: &[&str] = &[
    "mass_conservation",
    "energy_identity",
    "forward_oracles",
    "convergence_order",
    "gradient_consistency",
    "stationarity",
    "lipschitz_probe",
    "descent",
    "h2_diagnostic",
];

/// Tolerances are data, not code constants; serialized into every report.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub mass_drift: f64,
    pub energy_residual_abs: f64,
    pub energy_order_min: f64,
    pub plane_wave_phase: f64,
    pub gaussian_max_err: f64,
    pub order_band: (f64, f64),
    pub gradient_rel_err: f64,
    pub stationarity_residual: f64,
    pub factor_two_rel: f64,
    pub lipschitz_spread: f64,
    pub descent_drop: f64,
    pub baseline_lock_rel: f64,
    pub h2_growth: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            mass_drift: 1e-10,
            energy_residual_abs: 1e-6,
            energy_order_min: 1.8,
            plane_wave_phase: 1e-8,
            gaussian_max_err: 1e-6,
            order_band: (1.8, 2.2),
            gradient_rel_err: 1e-4,
            stationarity_residual: 1e-8,
            factor_two_rel: 1e-12,
            lipschitz_spread: 0.10,
            descent_drop: 0.5,
            baseline_lock_rel: 1e-6,
            h2_growth: 10.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyConfig {
    pub seed: u64,
    pub tolerances: Tolerances,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { seed: 20250809, tolerances: Tolerances::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub status: CheckStatus,
    pub measured: serde_json::Value,
    pub tolerance: serde_json::Value,
    pub runtime_s: f64,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }
}

fn timed(name: &str, f: impl FnOnce() -> Result<(bool, serde_json::Value, serde_json::Value)>) -> CheckReport {
    let start = Instant::now();
    let (status, measured, tolerance) = match f() {
        Ok((pass, measured, tolerance)) => {
            (if pass { CheckStatus::Pass } else { CheckStatus::Fail }, measured, tolerance)
        }
        Err(e) => (CheckStatus::Fail, json!({ "error": e.to_string() }), json!(null)),
    };
    CheckReport {
        name: name.to_string(),
        status,
        measured,
        tolerance,
        runtime_s: start.elapsed().as_secs_f64(),
    }
}

/// Least-squares slope of log(error) against log(dt); needs at least
/// three points with strictly decreasing dts and positive errors.
pub fn measure_order(errors: &[f64], dts: &[f64]) -> Result<f64> {
    if errors.len() < 3 || errors.len() != dts.len() {
        return Err(Error::invalid("measure_order needs >= 3 matching points"));
    }
    if dts.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("dts must be strictly decreasing"));
    }
    if errors.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::invalid("errors must be positive"));
    }
    let pts: Vec<(f64, f64)> =
        dts.iter().zip(errors).map(|(d, e)| (d.ln(), e.ln())).collect();
    Ok(crate::gradient::least_squares_slope(&pts))
}

// ---------------------------------------------------------------------
// Desk-scale fixtures
// ---------------------------------------------------------------------

fn desk_grid() -> Arc<Grid> {
    Grid::new(1, 256, 10.0).expect("desk grid")
}

fn singular_potential(g: &Arc<Grid>) -> RealField {
    make_potential(&PotentialSpec::InversePower { alpha: 0.5, epsilon: None }, g)
        .expect("singular potential")
}

fn smooth_potential(g: &Arc<Grid>) -> RealField {
    make_potential(&PotentialSpec::GaussianWell { depth: 1.0, width: 2.0 }, g)
        .expect("smooth potential")
}

fn desk_u0(g: &Arc<Grid>) -> State {
    State::gaussian(g, &[0.0], 1.0, 1.0).normalized()
}

fn desk_cost(gamma1: f64, gamma2: f64, g: &Arc<Grid>) -> CostParams {
    CostParams::new(
        gamma1,
        gamma2,
        make_observable(&ObservableSpec { radius: 3.0, amplitude: 1.0 }, g).expect("observable"),
        AdmissibilityBounds::new(10.0, 5.0).expect("bounds"),
    )
    .expect("cost params")
}

fn ramp(to: f64, horizon: f64, n: usize) -> ControlPath {
    ControlPath::new(horizon, n, 0.0, &ControlShape::Ramp { from: 0.0, to }, None)
        .expect("ramp control")
}

/// Smooth seeded direction with δφ(0) = 0, for FD probes.
fn seeded_direction(n: usize, seed: u64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let coef: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (1..=n)
        .map(|k| {
            let t = k as f64 / n as f64;
            coef.iter()
                .enumerate()
                .map(|(m, c)| c * ((m as f64 + 0.5) * std::f64::consts::PI * t).sin())
                .sum()
        })
        .collect()
}

// ---------------------------------------------------------------------
// Individual checks
// ---------------------------------------------------------------------

fn check_mass_conservation(tol: &Tolerances) -> CheckReport {
    timed("mass_conservation", || {
        let g = desk_grid();
        let v = singular_potential(&g);
        let u0 = desk_u0(&g);
        let control = ramp(0.5, 1.0, 1000);
        let mut measured = serde_json::Map::new();
        let mut pass = true;
        for (label, lambda) in [("focusing", 1.0), ("defocusing", -1.0), ("lambda_zero", 0.0)] {
            let model = ModelParams::new(lambda, 1.0, 1)?;
            let traj = evolve(&u0, &control, &model, &v, &SolverOptions::default())?;
            let drift = traj.mass_drift();
            pass &= drift <= tol.mass_drift;
            measured.insert(label.to_string(), json!(drift));
        }
        Ok((pass, serde_json::Value::Object(measured), json!({ "mass_drift": tol.mass_drift })))
    })
}

fn energy_case(n: usize) -> Result<(Trajectory, ControlPath)> {
    let g = desk_grid();
    let v = smooth_potential(&g);
    let model = ModelParams::new(1.0, 1.0, 1)?;
    let u0 = desk_u0(&g);
    let control = ramp(0.5, 1.0, n);
    let traj = evolve(&u0, &control, &model, &v, &SolverOptions::default())?;
    Ok((traj, control))
}

fn check_energy_identity(tol: &Tolerances) -> CheckReport {
    timed("energy_identity", || {
        let dts: [f64; 3] = [4e-3, 2e-3, 1e-3];
        let mut residuals = Vec::new();
        for &dt in &dts {
            let n = (1.0 / dt).round() as usize;
            let (traj, control) = energy_case(n)?;
            residuals.push(traj.energy_identity_residual(&control));
        }
        let order = measure_order(&residuals, &dts)?;
        let pass = order >= tol.energy_order_min && residuals[2] <= tol.energy_residual_abs;
        Ok((
            pass,
            json!({ "residuals": residuals, "dts": dts, "order": order }),
            json!({
                "energy_order_min": tol.energy_order_min,
                "energy_residual_abs": tol.energy_residual_abs,
            }),
        ))
    })
}

fn check_forward_oracles(tol: &Tolerances) -> CheckReport {
    timed("forward_oracles", || {
        let g = desk_grid();

        // Plane-wave dispersion: u(t) = e^{ikx + i(λ−k²)t}.
        let model = ModelParams::new(1.0, 1.0, 1)?;
        let k = g.wavenumbers()[8];
        let u0 = State::from_fn(&g, |x| Complex64::from_polar(1.0, k * x[0]));
        let free = RealField::constant(&g, 0.0);
        let control =
            ControlPath::new(1.0, 1000, 0.0, &ControlShape::Constant { value: 0.0 }, None)?;
        let traj = evolve(&u0, &control, &model, &free, &SolverOptions::default())?;
        let rot = Complex64::from_polar(1.0, model.lambda - k * k);
        let plane_err = traj
            .final_state()
            .values
            .iter()
            .zip(&u0.values)
            .map(|(u, u0)| (u - u0 * rot).norm())
            .fold(0.0, f64::max);

        // Free Gaussian: u = (1+4it)^{−1/2} exp(−x²/(1+4it)) at T = 0.5.
        let model0 = ModelParams::new(0.0, 1.0, 1)?;
        let gauss = State::from_fn(&g, |x| Complex64::new((-x[0] * x[0]).exp(), 0.0));
        let half = ControlPath::new(0.5, 500, 0.0, &ControlShape::Constant { value: 0.0 }, None)?;
        let traj = evolve(&gauss, &half, &model0, &free, &SolverOptions::default())?;
        let beta = Complex64::new(1.0, 2.0);
        let amp = 1.0 / beta.sqrt();
        let gauss_err = traj
            .final_state()
            .values
            .iter()
            .enumerate()
            .map(|(j, u)| {
                let x = g.position(j)[0];
                (u - amp * (-x * x / beta).exp()).norm()
            })
            .fold(0.0, f64::max);

        // Constant-field phase ODE against a smooth (sine) control sampled
        // nodally: max-over-time error is O(dt²) from the control sampling.
        let vval = 0.8;
        let vuni = RealField::constant(&g, vval);
        let c0 = Complex64::new(0.6, 0.3);
        let uc = State::from_fn(&g, |_| c0);
        let modelc = ModelParams::new(1.0, 1.0, 1)?;
        let dts: [f64; 3] = [4e-3, 2e-3, 1e-3];
        let mut errors = Vec::new();
        for &dt in &dts {
            let n = (1.0 / dt).round() as usize;
            let control = ControlPath::new(
                1.0,
                n,
                0.0,
                &ControlShape::Sine { amplitude: 0.5, cycles: 1.0, offset: 0.0 },
                None,
            )?;
            let traj = evolve(&uc, &control, &modelc, &vuni, &SolverOptions::default())?;
            let two_pi = 2.0 * std::f64::consts::PI;
            let mut max_err = 0.0f64;
            for j in 0..=n {
                let t = j as f64 * dt;
                let integral = 0.5 * (1.0 - (two_pi * t).cos()) / two_pi;
                let phase = modelc.lambda * c0.norm_sqr() * t + vval * integral;
                let exact = c0 * Complex64::from_polar(1.0, phase);
                if let Some(s) = traj.state_at(j) {
                    max_err = max_err.max((s.values[0] - exact).norm());
                }
            }
            errors.push(max_err);
        }
        let phase_order = measure_order(&errors, &dts)?;

        let pass = plane_err <= tol.plane_wave_phase
            && gauss_err <= tol.gaussian_max_err
            && phase_order >= tol.order_band.0
            && phase_order <= tol.order_band.1;
        Ok((
            pass,
            json!({
                "plane_wave_error": plane_err,
                "gaussian_error": gauss_err,
                "phase_ode_errors": errors,
                "phase_ode_order": phase_order,
            }),
            json!({
                "plane_wave_phase": tol.plane_wave_phase,
                "gaussian_max_err": tol.gaussian_max_err,
                "order_band": tol.order_band,
            }),
        ))
    })
}

fn check_convergence_order(tol: &Tolerances) -> CheckReport {
    timed("convergence_order", || {
        // Self-convergence of a generic nonlinear run against a fine-dt
        // reference computed by the same scheme.
        let g = desk_grid();
        let v = smooth_potential(&g);
        let model = ModelParams::new(1.0, 1.0, 1)?;
        let u0 = desk_u0(&g);
        let t_final = 0.5;
        let reference = {
            let control = ramp(0.5, t_final, 4000);
            evolve(&u0, &control, &model, &v, &SolverOptions::default())?
        };
        let uref = reference.final_state();
        let dts: [f64; 3] = [4e-3, 2e-3, 1e-3];
        let mut errors = Vec::new();
        for &dt in &dts {
            let n = (t_final / dt).round() as usize;
            let control = ramp(0.5, t_final, n);
            let traj = evolve(&u0, &control, &model, &v, &SolverOptions::default())?;
            let diff = State {
                grid: g.clone(),
                values: traj
                    .final_state()
                    .values
                    .iter()
                    .zip(&uref.values)
                    .map(|(a, b)| a - b)
                    .collect(),
            };
            errors.push(l2_norm(&diff));
        }
        let order = measure_order(&errors, &dts)?;
        let pass = order >= tol.order_band.0 && order <= tol.order_band.1;
        Ok((
            pass,
            json!({ "errors": errors, "dts": dts, "order": order }),
            json!({ "order_band": tol.order_band }),
        ))
    })
}

/// Per-direction gradient check record, also used by the CLI report.
#[derive(Debug, Clone, Serialize)]
pub struct GradientCheckRecord {
    pub direction_id: usize,
    pub adjoint_value: f64,
    pub fd_values: Vec<f64>,
    pub richardson: f64,
    pub order: Option<f64>,
    pub rel_err: f64,
}

/// Adjoint/FD gradient check on an arbitrary problem: `count` smooth
/// seeded directions with δφ(0) = 0, probed at the given ε values.
#[allow(clippy::too_many_arguments)]
pub fn gradient_check(
    u0: &State,
    control: &ControlPath,
    model: &ModelParams,
    v: &RealField,
    p: &CostParams,
    seed: u64,
    count: usize,
    eps: &[f64],
) -> Result<Vec<GradientCheckRecord>> {
    let n = control.n_steps();
    let traj = evolve(u0, control, model, v, &SolverOptions::default())?;
    let run = evolve_backward(&traj, control, model, v, p, false)?;
    let grad = assemble_gradient(&run.pairing, control, &traj.omega, p)?;

    let mut f = |path: &ControlPath| -> Result<f64> {
        let t = evolve(u0, path, model, v, &SolverOptions::default())?;
        Ok(evaluate(&t, path, p)?.total)
    };
    let mut records = Vec::new();
    for id in 0..count {
        let dir = seeded_direction(n, seed.wrapping_add(id as u64));
        let probe = fd_directional(&mut f, control, &dir, eps)?;
        let adjoint_value = pair(&grad, &dir);
        let rel_err =
            (adjoint_value - probe.richardson).abs() / probe.richardson.abs().max(1e-12);
        records.push(GradientCheckRecord {
            direction_id: id,
            adjoint_value,
            fd_values: probe.estimates,
            richardson: probe.richardson,
            order: probe.order,
            rel_err,
        });
    }
    Ok(records)
}

/// Adjoint/FD consistency records on the desk-scale focusing configuration
/// with singular V and γ₁ > 0; shared by the harness and the acceptance
/// suite.
pub fn gradient_consistency_records(seed: u64) -> Result<Vec<GradientCheckRecord>> {
    let g = desk_grid();
    let v = singular_potential(&g);
    let model = ModelParams::new(1.0, 1.0, 1)?;
    let u0 = desk_u0(&g);
    let control = ramp(0.3, 1.0, 1000);
    let p = desk_cost(0.5, 1e-2, &g);
    gradient_check(&u0, &control, &model, &v, &p, seed, 3, &[1e-2, 5e-3])
}

fn check_gradient_consistency(seed: u64, tol: &Tolerances) -> CheckReport {
    timed("gradient_consistency", || {
        let records = gradient_consistency_records(seed)?;
        let pass = records.iter().all(|r| r.rel_err <= tol.gradient_rel_err);
        Ok((
            pass,
            json!({ "seed": seed, "directions": records }),
            json!({ "gradient_rel_err": tol.gradient_rel_err }),
        ))
    })
}

fn check_stationarity(tol: &Tolerances) -> CheckReport {
    timed("stationarity", || {
        // Analytic pure-penalty case: minimizer φ ≡ φ₀.
        let g = desk_grid();
        let free = RealField::constant(&g, 0.0);
        let model0 = ModelParams::new(0.0, 1.0, 1)?;
        let u0 = desk_u0(&g);
        let c0 = ramp(1.0, 1.0, 200);
        let p = desk_cost(0.0, 0.5, &g);
        let opts = OptimizeOptions { max_iters: 50, grad_tol: 1e-9, ..Default::default() };
        let report = optimize(&u0, &c0, &model0, &free, &p, &opts)?;
        let penalty = crate::cost::penalty_term(&report.final_control, p.gamma2);
        let pure_ok = report.converged
            && report.stationarity_residual <= tol.stationarity_residual
            && penalty < 1e-10;

        // Factor-2 identity on an arbitrary non-stationary control.
        let v = singular_potential(&g);
        let model = ModelParams::new(1.0, 1.0, 1)?;
        let c = ControlPath::new(
            1.0,
            1000,
            0.1,
            &ControlShape::Sine { amplitude: 0.4, cycles: 1.5, offset: 0.1 },
            None,
        )?;
        let pfull = desk_cost(0.7, 3e-2, &g);
        let traj = evolve(&u0, &c, &model, &v, &SolverOptions::default())?;
        let run = evolve_backward(&traj, &c, &model, &v, &pfull, false)?;
        let grad = assemble_gradient(&run.pairing, &c, &traj.omega, &pfull)?;
        let residual = stationarity_residual(&c, &run.pairing, &traj.omega, &pfull)?;
        let half = 0.5 * h1_dual_norm(&grad);
        let factor_rel = (residual - half).abs() / half.max(1e-300);
        let factor_ok = factor_rel <= tol.factor_two_rel;

        Ok((
            pure_ok && factor_ok,
            json!({
                "pure_penalty": {
                    "converged": report.converged,
                    "residual": report.stationarity_residual,
                    "penalty": penalty,
                    "iterations": report.iterates.len(),
                },
                "factor_two": { "residual": residual, "half_dual_norm": half, "rel": factor_rel },
            }),
            json!({
                "stationarity_residual": tol.stationarity_residual,
                "factor_two_rel": tol.factor_two_rel,
            }),
        ))
    })
}

fn check_lipschitz(seed: u64, tol: &Tolerances) -> CheckReport {
    timed("lipschitz_probe", || {
        let g = desk_grid();
        let v = singular_potential(&g);
        let model = ModelParams::new(1.0, 1.0, 1)?;
        let u0 = desk_u0(&g);
        let n = 1000;
        let control = ramp(0.3, 1.0, n);
        let fourier = Fourier::new(&g);

        let dir = seeded_direction(n, seed.wrapping_add(77));
        let mut dir_nodes = vec![0.0; n + 1];
        dir_nodes[1..].copy_from_slice(&dir);
        let dir_h1 = ControlPath::from_nodes(1.0, dir_nodes)?.h1_norm();

        let base = evolve(&u0, &control, &model, &v, &SolverOptions::default())?;
        let epsilons = [1e-1, 1e-2, 1e-3];
        let mut ratios = Vec::new();
        for &eps in &epsilons {
            let shifted = control.displaced(&dir, eps)?;
            let traj = evolve(&u0, &shifted, &model, &v, &SolverOptions::default())?;
            let mut sup_h2 = 0.0f64;
            for k in 0..=n {
                let (a, b) = (traj.state_at(k).unwrap(), base.state_at(k).unwrap());
                let diff = State {
                    grid: g.clone(),
                    values: a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect(),
                };
                sup_h2 = sup_h2.max(fourier.norms(&diff).h2);
            }
            ratios.push(sup_h2 / (eps * dir_h1));
        }
        let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
        let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
        let spread = (max - min) / min;
        Ok((
            spread < tol.lipschitz_spread,
            json!({ "epsilons": epsilons, "ratios": ratios, "spread": spread,
                    "direction_h1": dir_h1, "seed": seed }),
            json!({ "lipschitz_spread": tol.lipschitz_spread }),
        ))
    })
}

/// The localization task: expel the state from the observed ball.
fn descent_setup() -> Result<(State, ControlPath, ModelParams, RealField, CostParams)> {
    let g = desk_grid();
    let v = singular_potential(&g);
    let model = ModelParams::new(1.0, 1.0, 1)?;
    let u0 = desk_u0(&g);
    let control = ControlPath::new(1.0, 1000, 0.0, &ControlShape::Constant { value: 0.0 }, None)?;
    let p = desk_cost(0.0, 1e-2, &g);
    Ok((u0, control, model, v, p))
}

fn check_descent(tol: &Tolerances) -> CheckReport {
    timed("descent", || {
        let (u0, c0, model, v, p) = descent_setup()?;
        let baseline_traj = evolve(&u0, &c0, &model, &v, &SolverOptions::default())?;
        let baseline = terminal_term(baseline_traj.final_state(), &p.observable)?;

        let lock_ok = if DESCENT_BASELINE_LOCK.is_nan() {
            true // first run: the measured baseline becomes the lock value
        } else {
            (baseline - DESCENT_BASELINE_LOCK).abs()
                <= tol.baseline_lock_rel * DESCENT_BASELINE_LOCK
        };

        let opts = OptimizeOptions { max_iters: 200, grad_tol: 1e-10, ..Default::default() };
        let report = optimize(&u0, &c0, &model, &v, &p, &opts)?;
        let final_terminal = report.iterates.last().expect("non-empty").cost.terminal;
        let monotone = report
            .iterates
            .windows(2)
            .all(|w| w[1].cost.total <= w[0].cost.total);
        let armijo_ok = report.iterates.windows(2).all(|w| {
            w[1].cost.total
                <= w[0].cost.total - 1e-4 * w[0].step * w[0].descent_pairing
                    + 1e-14 * w[0].cost.total.abs().max(1.0)
        });
        let drop = 1.0 - final_terminal / baseline;
        let pass =
            lock_ok && monotone && armijo_ok && final_terminal <= tol.descent_drop * baseline;
        Ok((
            pass,
            json!({
                "baseline_terminal": baseline,
                "baseline_lock": if DESCENT_BASELINE_LOCK.is_nan() {
                    serde_json::Value::Null
                } else {
                    json!(DESCENT_BASELINE_LOCK)
                },
                "final_terminal": final_terminal,
                "terminal_drop": drop,
                "iterations": report.iterates.len(),
                "monotone": monotone,
                "armijo_ok": armijo_ok,
                "stagnated": report.stagnated,
            }),
            json!({ "descent_drop": tol.descent_drop, "baseline_lock_rel": tol.baseline_lock_rel }),
        ))
    })
}

fn check_h2_diagnostic(tol: &Tolerances) -> CheckReport {
    timed("h2_diagnostic", || {
        let g = desk_grid();
        let v = singular_potential(&g);
        let u0 = desk_u0(&g);
        let control = ramp(0.3, 1.0, 1000);
        let fourier = Fourier::new(&g);
        let mut measured = serde_json::Map::new();
        let mut pass = true;
        for (label, lambda) in [("focusing", 1.0), ("defocusing", -1.0)] {
            let model = ModelParams::new(lambda, 1.0, 1)?;
            let traj = evolve(&u0, &control, &model, &v, &SolverOptions::default())?;
            let h2_0 = fourier.norms(traj.initial_state()).h2;
            let mut h2_max = 0.0f64;
            for k in 0..=traj.n_steps {
                let h2 = fourier.norms(traj.state_at(k).expect("stride 1")).h2;
                if !h2.is_finite() {
                    pass = false;
                }
                h2_max = h2_max.max(h2);
            }
            pass &= h2_max <= tol.h2_growth * h2_0;
            measured
                .insert(label.to_string(), json!({ "h2_initial": h2_0, "h2_max": h2_max }));
        }
        Ok((pass, serde_json::Value::Object(measured), json!({ "h2_growth": tol.h2_growth })))
    })
}

/// Run every registered check. Individual failures never abort the suite;
/// the report vector always contains each registry entry exactly once, in
/// registry order.
pub fn run_all(cfg: &VerifyConfig) -> Vec<CheckReport> {
    let tol = &cfg.tolerances;
    let seed = cfg.seed;
    let mut reports: Vec<Option<CheckReport>> = Vec::new();
    reports.resize_with(REQUIRED_CHECKS.len(), || None);

    std::thread::scope(|scope| {
        let handles: Vec<_> = REQUIRED_CHECKS
            .iter()
            .map(|&name| {
                scope.spawn(move || match name {
                    "mass_conservation" => check_mass_conservation(tol),
                    "energy_identity" => check_energy_identity(tol),
                    "forward_oracles" => check_forward_oracles(tol),
                    "convergence_order" => check_convergence_order(tol),
                    "gradient_consistency" => check_gradient_consistency(seed, tol),
                    "stationarity" => check_stationarity(tol),
                    "lipschitz_probe" => check_lipschitz(seed, tol),
                    "descent" => check_descent(tol),
                    "h2_diagnostic" => check_h2_diagnostic(tol),
                    other => CheckReport {
                        name: other.to_string(),
                        status: CheckStatus::Skipped,
                        measured: json!(null),
                        tolerance: json!(null),
                        runtime_s: 0.0,
                    },
                })
            })
            .collect();
        for (slot, handle) in reports.iter_mut().zip(handles) {
            *slot = Some(handle.join().expect("check thread panicked"));
        }
    });

    let out: Vec<CheckReport> = reports.into_iter().map(|r| r.expect("filled")).collect();
    debug_assert_eq!(out.len(), REQUIRED_CHECKS.len());
    out
}
