//! Projected descent on the control minimizing F, with the stationarity
//! residual of the first-order optimality system.
//!
//! Each iterate runs the forward solver, the backward adjoint sweep, the
//! weak-form gradient assembly and the H¹ Riesz lift, then an Armijo
//! backtracking line search along −h. Node 0 of the control is never
//! modified (φ(0) = φ₀ stays pinned), which realises the projection onto
//! the admissible set. The problem is non-convex; the optimizer reports
//! local stationarity, never global optimality.

use serde::Serialize;

use crate::adjoint::{evolve_backward, PairingSeries};
use crate::control::ControlPath;
use crate::cost::{evaluate, CostBreakdown, CostParams};
use crate::error::Error;
use crate::forward::{evolve, SolverOptions};
use crate::gradient::{assemble_gradient, h1_riesz_lift, pair, GradientPath};
use crate::model::ModelParams;
use crate::spectral::{Fourier, RealField, State};
use crate::Result;

/// Line-search and stopping parameters, all exposed.
#[derive(Debug, Clone, Copy)]
pub struct OptimizeOptions {
    pub max_iters: usize,
    /// Stop when the H¹-dual norm of the gradient falls below this.
    pub grad_tol: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo_c1: f64,
    /// Step shrink factor per backtrack.
    pub backtrack: f64,
    /// Step the line search starts from at every iterate.
    pub initial_step: f64,
    pub max_backtracks: usize,
    pub solver: SolverOptions,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            max_iters: 200,
            grad_tol: 1e-8,
            armijo_c1: 1e-4,
            backtrack: 0.5,
            initial_step: 1.0,
            max_backtracks: 40,
            solver: SolverOptions::default(),
        }
    }
}

/// One accepted iterate of the descent loop.
#[derive(Debug, Clone, Serialize)]
pub struct IterateRecord {
    pub iter: usize,
    pub cost: CostBreakdown,
    /// H¹-dual norm of the assembled gradient at this iterate.
    pub grad_h1: f64,
    /// ⟨grad, h⟩ with h the Riesz lift (equals grad_h1²; kept for the
    /// Armijo audit).
    pub descent_pairing: f64,
    /// Step length accepted when leaving this iterate (0 at the last one).
    pub step: f64,
}

/// Outcome of a descent run.
#[derive(Debug, Clone, Serialize)]
pub struct OptimizeReport {
    pub iterates: Vec<IterateRecord>,
    #[serde(skip)]
    pub final_control: ControlPath,
    pub converged: bool,
    /// Line search could not decrease the objective within max_backtracks.
    pub stagnated: bool,
    /// H¹-dual norm of the optimality-ODE defect at the final control.
    pub stationarity_residual: f64,
    pub warnings: Vec<String>,
    /// Set when the forward solver blew up at an accepted iterate.
    pub failure: Option<String>,
}

/// Weak-form residual of the optimality ODE
/// `d/dt(φ'(γ₂+γ₁ω²)) = −½ g(t)` with φ(0) = φ₀ and the natural boundary
/// condition φ'(T) = 0 folded in through the half-hat at t = T. Returns
/// the H¹-dual norm of the defect, which equals exactly half the dual
/// norm of the assembled gradient.
pub fn stationarity_residual(
    c: &ControlPath,
    g: &PairingSeries,
    omega: &[f64],
    p: &CostParams,
) -> Result<f64> {
    let n = c.n_steps();
    if g.values.len() != n + 1 || omega.len() != n + 1 {
        return Err(Error::invalid("stationarity_residual: inconsistent series lengths"));
    }
    let dt = c.dt();
    let slopes = c.derivative();
    let coeff = crate::gradient::interval_coefficients(omega, p.gamma1, p.gamma2);
    let pairing_part = crate::gradient::hat_integrals(&g.values, dt);
    let values: Vec<f64> = (1..=n)
        .map(|k| {
            let left = slopes[k - 1] * coeff[k - 1];
            let right = if k < n { slopes[k] * coeff[k] } else { 0.0 };
            // ∫ d/dt(φ'c) η_k = −∫ φ'c η'_k  (natural BC at T), so the
            // defect against η_k is −(left − right) + ½ ∫ g η_k.
            -(left - right) + 0.5 * pairing_part[k - 1]
        })
        .collect();
    Ok(crate::gradient::h1_dual_norm(&GradientPath { horizon: c.horizon(), dt, values }))
}

struct GradientEval {
    cost: CostBreakdown,
    lift: GradientPath,
    pairing: PairingSeries,
    omega: Vec<f64>,
    descent_pairing: f64,
}

fn eval_gradient(
    u0: &State,
    c: &ControlPath,
    model: &ModelParams,
    v: &RealField,
    p: &CostParams,
    opts: &OptimizeOptions,
) -> Result<GradientEval> {
    let traj = evolve(u0, c, model, v, &opts.solver)?;
    let cost = evaluate(&traj, c, p)?;
    let run = evolve_backward(&traj, c, model, v, p, false)?;
    let grad = assemble_gradient(&run.pairing, c, &traj.omega, p)?;
    let lift = h1_riesz_lift(&grad);
    let descent_pairing = pair(&grad, &lift.values);
    Ok(GradientEval { cost, lift, pairing: run.pairing, omega: traj.omega, descent_pairing })
}

/// Descend on φ from `c0`, keeping φ(0) pinned. Requires |φ₀| ≤ M₂; a
/// violated ‖u₀‖_{H¹} ≤ M₁ bound is reported as a warning, not an error.
pub fn optimize(
    u0: &State,
    c0: &ControlPath,
    model: &ModelParams,
    v: &RealField,
    p: &CostParams,
    opts: &OptimizeOptions,
) -> Result<OptimizeReport> {
    if c0.phi0().abs() > p.bounds.m2 {
        return Err(Error::BoundViolation { phi0: c0.phi0(), m2: p.bounds.m2 });
    }
    let mut warnings = Vec::new();
    let h1 = Fourier::new(&u0.grid).norms(u0).h1;
    if h1 > p.bounds.m1 {
        warnings.push(format!(
            "initial state H1 norm {h1:.6} exceeds M1 = {}; proceeding outside the admissible set",
            p.bounds.m1
        ));
    }

    let mut c = c0.clone();
    let mut cur = eval_gradient(u0, &c, model, v, p, opts)?;
    let mut iterates = Vec::new();
    let mut converged = false;
    let mut stagnated = false;
    let mut failure = None;

    for iter in 0..=opts.max_iters {
        let grad_h1 = cur.descent_pairing.max(0.0).sqrt();
        iterates.push(IterateRecord {
            iter,
            cost: cur.cost,
            grad_h1,
            descent_pairing: cur.descent_pairing,
            step: 0.0,
        });

        if grad_h1 <= opts.grad_tol {
            converged = true;
            break;
        }
        if iter == opts.max_iters {
            break;
        }

        // Armijo backtracking along the descent direction −h.
        let direction: Vec<f64> = cur.lift.values.iter().map(|x| -x).collect();
        let mut step = opts.initial_step;
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let trial = c.displaced(&direction, step)?;
            match eval_gradient(u0, &trial, model, v, p, opts) {
                Ok(next) => {
                    let sufficient =
                        cur.cost.total - opts.armijo_c1 * step * cur.descent_pairing;
                    if next.cost.total <= sufficient {
                        accepted = Some((trial, next));
                        break;
                    }
                }
                Err(Error::Blowup { .. }) => {
                    // Trial step left the stable region; shrink and retry.
                }
                Err(e) => return Err(e),
            }
            step *= opts.backtrack;
        }

        match accepted {
            Some((trial, next)) => {
                iterates.last_mut().expect("just pushed").step = step;
                c = trial;
                cur = next;
            }
            None => {
                stagnated = true;
                break;
            }
        }
    }

    // A blow-up at the accepted iterate would have surfaced in
    // eval_gradient above; reaching here with non-finite cost is recorded
    // as failure context rather than an abort.
    if !cur.cost.total.is_finite() {
        failure = Some("objective became non-finite at the final iterate".to_string());
    }

    let stationarity = stationarity_residual(&c, &cur.pairing, &cur.omega, p)?;
    Ok(OptimizeReport {
        iterates,
        final_control: c,
        converged,
        stagnated,
        stationarity_residual: stationarity,
        warnings,
        failure,
    })
}
