//! The control objective and its decomposition.
//!
//! ```text
//! F(u, φ) = ⟨u(T), A u(T)⟩² + γ₁ ∫ (φ'(t) ω(t))² dt + γ₂ ∫ (φ'(t))² dt,
//! ```
//!
//! with ω(t) = ∫ V |u|² dx. By the energy identity E' = −½ φ' ω the work
//! term equals 4γ₁ ∫ (E')² dt; the (φ'ω)² form is used because the whole
//! first-order system (adjoint source, gradient, optimality ODE) is
//! consistent with it, and E' is never numerically differentiated.

use serde::{Deserialize, Serialize};

use crate::control::{AdmissibilityBounds, ControlPath};
use crate::error::Error;
use crate::forward::Trajectory;
use crate::spectral::{inner_product, RealField, State};
use crate::Result;

/// Objective parameters. γ₂ > 0 is required; γ₁ ≥ 0.
#[derive(Debug, Clone)]
pub struct CostParams {
    pub gamma1: f64,
    pub gamma2: f64,
    /// Materialised observable weight w(x) (multiplication operator A).
    pub observable: RealField,
    pub bounds: AdmissibilityBounds,
}

impl CostParams {
    pub fn new(
        gamma1: f64,
        gamma2: f64,
        observable: RealField,
        bounds: AdmissibilityBounds,
    ) -> Result<CostParams> {
        if !(gamma1 >= 0.0) {
            return Err(Error::invalid(format!("gamma1 must be >= 0, got {gamma1}")));
        }
        if !(gamma2 > 0.0) {
            return Err(Error::invalid(format!("gamma2 must be > 0, got {gamma2}")));
        }
        Ok(CostParams { gamma1, gamma2, observable, bounds })
    }
}

/// The three summands of the objective; `total` is their sum and every
/// part is non-negative.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct CostBreakdown {
    pub terminal: f64,
    pub work: f64,
    pub penalty: f64,
    pub total: f64,
}

/// Apply the observable: pointwise multiplication by w.
pub fn apply_observable(a: &RealField, s: &State) -> Result<State> {
    a.grid.as_ref().eq(s.grid.as_ref()).then_some(()).ok_or_else(|| {
        Error::GridMismatch("apply_observable: field and state grids differ".into())
    })?;
    Ok(State {
        grid: s.grid.clone(),
        values: s.values.iter().zip(&a.values).map(|(v, w)| v * w).collect(),
    })
}

/// Real pairing ⟨s, A s⟩ with a self-adjointness guard on the imaginary part.
pub fn observable_pairing(a: &RealField, s: &State) -> Result<f64> {
    let asu = apply_observable(a, s)?;
    let ip = inner_product(s, &asu)?;
    let scale = ip.re.abs().max(1.0);
    if ip.im.abs() > 1e-10 * scale {
        return Err(Error::ObservableNotSelfAdjoint { imag: ip.im });
    }
    Ok(ip.re)
}

/// Terminal term `⟨u(T), A u(T)⟩²`.
pub fn terminal_term(u_t: &State, a: &RealField) -> Result<f64> {
    Ok(observable_pairing(a, u_t)?.powi(2))
}

/// Work term `γ₁ Σ_k dt (φ'_{k+1/2})² (ω_{k+1/2})²` with nodal-average ω.
pub fn work_term(c: &ControlPath, omega: &[f64], gamma1: f64) -> Result<f64> {
    if omega.len() != c.n_steps() + 1 {
        return Err(Error::invalid(format!(
            "omega has {} nodes, expected {}",
            omega.len(),
            c.n_steps() + 1
        )));
    }
    let dt = c.dt();
    let nodes = c.nodes();
    let sum: f64 = (0..c.n_steps())
        .map(|k| {
            let dphi = (nodes[k + 1] - nodes[k]) / dt;
            let om = 0.5 * (omega[k] + omega[k + 1]);
            dt * (dphi * om).powi(2)
        })
        .sum();
    Ok(gamma1 * sum)
}

/// Penalty term `γ₂ Σ_k dt (φ'_{k+1/2})²`.
pub fn penalty_term(c: &ControlPath, gamma2: f64) -> f64 {
    gamma2 * c.derivative_sq_integral()
}

/// Evaluate the full objective for a trajectory produced under `c`.
pub fn evaluate(traj: &Trajectory, c: &ControlPath, p: &CostParams) -> Result<CostBreakdown> {
    if traj.n_steps != c.n_steps() || (traj.dt - c.dt()).abs() > 1e-12 * c.dt() {
        return Err(Error::invalid(format!(
            "trajectory/control horizon mismatch: {} steps of {} vs {} steps of {}",
            traj.n_steps,
            traj.dt,
            c.n_steps(),
            c.dt()
        )));
    }
    let terminal = terminal_term(traj.final_state(), &p.observable)?;
    let work = work_term(c, &traj.omega, p.gamma1)?;
    let penalty = penalty_term(c, p.gamma2);
    Ok(CostBreakdown { terminal, work, penalty, total: terminal + work + penalty })
}
