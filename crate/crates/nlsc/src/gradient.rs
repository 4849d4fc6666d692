//! Gâteaux gradient of the reduced objective, assembled in weak form.
//!
//! The derivative of φ ↦ F(u(φ), φ) against a direction δφ with δφ(0) = 0 is
//!
//! ```text
//! dF[δφ] = −∫ g(t) δφ(t) dt + 2 ∫ φ'(t) (γ₂ + γ₁ ω²(t)) δφ'(t) dt,
//! ```
//!
//! with g(t) = Re∫p̄Vu dx from the backward adjoint sweep. The
//! distributional form −2 d/dt(φ'(γ₂+γ₁ω²)) is never differenced
//! pointwise; testing against the piecewise-linear hat basis η_k
//! (k = 1..n, all vanishing at t = 0) moves the derivative onto η'_k and
//! realises the natural boundary condition φ'(T) = 0 through the half-hat
//! at the last node. All integrals are exact for the piecewise-polynomial
//! data. Node 0 carries no gradient component: φ(0) is pinned.
//!
//! The H¹ Riesz lift converts the assembled functional into the steepest
//! descent direction of H¹(0,T) by solving the tridiagonal finite-element
//! system (K + M) h = grad with h(0) = 0 and a natural condition at T.

use serde::Serialize;

use crate::adjoint::PairingSeries;
use crate::control::ControlPath;
use crate::cost::CostParams;
use crate::error::Error;
use crate::Result;

/// Nodal gradient functional over k = 1..n_steps (node 0 excluded).
/// `values[k-1]` is the pairing of the gradient with the hat at node k, so
/// `⟨grad, δφ⟩ = Σ_k values[k-1] · δφ_k`.
#[derive(Debug, Clone)]
pub struct GradientPath {
    pub horizon: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

/// Interval coefficients `γ₂ + γ₁ ((ω_k + ω_{k+1})/2)²`.
pub(crate) fn interval_coefficients(omega: &[f64], gamma1: f64, gamma2: f64) -> Vec<f64> {
    omega
        .windows(2)
        .map(|w| {
            let om = 0.5 * (w[0] + w[1]);
            gamma2 + gamma1 * om * om
        })
        .collect()
}

/// Exact hat-function integrals `∫ g η_k dt` for nodal g treated as
/// piecewise linear; k = 1..n.
pub(crate) fn hat_integrals(g: &[f64], dt: f64) -> Vec<f64> {
    let n = g.len() - 1;
    (1..=n)
        .map(|k| {
            if k < n {
                dt * (g[k - 1] + 4.0 * g[k] + g[k + 1]) / 6.0
            } else {
                dt * (g[n - 1] + 2.0 * g[n]) / 6.0
            }
        })
        .collect()
}

/// Assemble the gradient functional from the pairing series, the control
/// and the stored ω(t).
pub fn assemble_gradient(
    g: &PairingSeries,
    c: &ControlPath,
    omega: &[f64],
    p: &CostParams,
) -> Result<GradientPath> {
    let n = c.n_steps();
    if g.values.len() != n + 1 || omega.len() != n + 1 {
        return Err(Error::invalid(format!(
            "assemble_gradient: series of {} and {} nodes, expected {}",
            g.values.len(),
            omega.len(),
            n + 1
        )));
    }
    if !c.nodes()[0].is_finite() {
        return Err(Error::invalid("assemble_gradient: control has no pinned initial value"));
    }
    let dt = c.dt();
    let slopes = c.derivative();
    let coeff = interval_coefficients(omega, p.gamma1, p.gamma2);
    let pairing_part = hat_integrals(&g.values, dt);

    let values = (1..=n)
        .map(|k| {
            let left = 2.0 * slopes[k - 1] * coeff[k - 1];
            let right = if k < n { 2.0 * slopes[k] * coeff[k] } else { 0.0 };
            -pairing_part[k - 1] + left - right
        })
        .collect();
    Ok(GradientPath { horizon: c.horizon(), dt, values })
}

/// Euclidean pairing `⟨grad, δφ⟩ = Σ_k grad_k δφ_k` against nodal
/// increments (one entry per node k = 1..n).
pub fn pair(gr: &GradientPath, direction: &[f64]) -> f64 {
    gr.values.iter().zip(direction).map(|(g, d)| g * d).sum()
}

/// Solve the symmetric tridiagonal system with the Thomas algorithm.
fn solve_tridiagonal(diag: &[f64], off: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c_prime = vec![0.0; n];
    let mut d_prime = vec![0.0; n];
    c_prime[0] = off.first().map_or(0.0, |o| o / diag[0]);
    d_prime[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - off[i - 1] * c_prime[i - 1];
        assert!(m != 0.0, "H1 lift system is positive definite for dt > 0");
        if i < n - 1 {
            c_prime[i] = off[i] / m;
        }
        d_prime[i] = (rhs[i] - off[i - 1] * d_prime[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d_prime[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d_prime[i] - c_prime[i] * x[i + 1];
    }
    x
}

/// H¹ Riesz lift: nodal h with `∫h'η'_k + ∫hη_k = grad_k`, h(0) = 0,
/// natural condition at T. The descent direction is −h.
pub fn h1_riesz_lift(gr: &GradientPath) -> GradientPath {
    let n = gr.values.len();
    let dt = gr.dt;
    let mut diag = vec![2.0 / dt + 2.0 * dt / 3.0; n];
    diag[n - 1] = 1.0 / dt + dt / 3.0;
    let off = vec![-1.0 / dt + dt / 6.0; n.saturating_sub(1)];
    let values = solve_tridiagonal(&diag, &off, &gr.values);
    GradientPath { horizon: gr.horizon, dt, values }
}

/// H¹-dual norm of the assembled gradient, `sqrt(⟨grad, lift(grad)⟩)`.
pub fn h1_dual_norm(gr: &GradientPath) -> f64 {
    let lift = h1_riesz_lift(gr);
    pair(gr, &lift.values).max(0.0).sqrt()
}

/// One finite-difference probe of the objective along a direction.
#[derive(Debug, Clone, Serialize)]
pub struct FdProbe {
    pub eps: Vec<f64>,
    /// Central differences (F(φ+εδ) − F(φ−εδ)) / 2ε.
    pub estimates: Vec<f64>,
    /// Richardson extrapolation of the two smallest ε (eliminates the ε² term).
    pub richardson: f64,
    /// Observed convergence order of the ε-sweep; `None` when the
    /// differences are already at rounding level (quadratic objectives).
    pub order: Option<f64>,
}

/// Central finite differences of `f` at `c` along `direction` (nodal
/// increments for k = 1..n, node 0 fixed), for each ε in `eps_list`
/// (strictly decreasing, at least two entries).
pub fn fd_directional(
    f: &mut dyn FnMut(&ControlPath) -> Result<f64>,
    c: &ControlPath,
    direction: &[f64],
    eps_list: &[f64],
) -> Result<FdProbe> {
    if eps_list.len() < 2 || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("eps_list must be strictly decreasing with >= 2 entries"));
    }
    let mut estimates = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let plus = f(&c.displaced(direction, eps)?)?;
        let minus = f(&c.displaced(direction, -eps)?)?;
        estimates.push((plus - minus) / (2.0 * eps));
    }
    let m = eps_list.len();
    let rho = eps_list[m - 2] / eps_list[m - 1];
    let richardson = (rho * rho * estimates[m - 1] - estimates[m - 2]) / (rho * rho - 1.0);

    // Observed order: slope of log|D(ε) − richardson| against log ε over
    // the points that sit above rounding noise.
    let scale = estimates.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1e-300);
    let pts: Vec<(f64, f64)> = eps_list
        .iter()
        .zip(&estimates)
        .filter(|(_, d)| (*d - richardson).abs() > 1e-12 * scale)
        .map(|(e, d)| (e.ln(), (d - richardson).abs().ln()))
        .collect();
    let order = if pts.len() >= 2 { Some(least_squares_slope(&pts)) } else { None };
    Ok(FdProbe { eps: eps_list.to_vec(), estimates, richardson, order })
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adjoint::evolve_backward;
    use crate::control::{AdmissibilityBounds, ControlShape};
    use crate::cost::evaluate;
    use crate::forward::{evolve, SolverOptions};
    use crate::model::{
        make_observable, make_potential, ModelParams, ObservableSpec, PotentialSpec,
    };
    use crate::spectral::{Grid, State};
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;

    fn series(dt: f64, values: Vec<f64>) -> PairingSeries {
        PairingSeries { dt, values }
    }

    fn cost_params(gamma1: f64, gamma2: f64, g: &Arc<Grid>) -> CostParams {
        CostParams::new(
            gamma1,
            gamma2,
            make_observable(&ObservableSpec { radius: 3.0, amplitude: 1.0 }, g).unwrap(),
            AdmissibilityBounds::new(10.0, 10.0).unwrap(),
        )
        .unwrap()
    }

    /// Smooth seeded direction with δφ(0) = 0: a few low sine modes.
    fn smooth_direction(n: usize, seed: u64) -> Vec<f64> {
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

    #[test]
    fn penalty_gradient_is_exact_discrete_derivative() {
        // γ₁ = 0, g ≡ 0: the assembly must equal the closed-form derivative
        // of the discrete penalty γ₂ Σ dt (φ')².
        let n = 64;
        let c = ControlPath::new(1.0, n, 0.0, &ControlShape::Ramp { from: 0.0, to: 1.0 }, None)
            .unwrap();
        let g = Grid::new(1, 64, 10.0).unwrap();
        let p = cost_params(0.0, 0.37, &g);
        let zeros = series(c.dt(), vec![0.0; n + 1]);
        let omega = vec![0.0; n + 1];
        let grad = assemble_gradient(&zeros, &c, &omega, &p).unwrap();
        let slopes = c.derivative();
        for k in 1..=n {
            let exact = if k < n {
                2.0 * p.gamma2 * (slopes[k - 1] - slopes[k])
            } else {
                2.0 * p.gamma2 * slopes[n - 1]
            };
            assert!(
                (grad.values[k - 1] - exact).abs() <= 1e-12,
                "node {k}: {} vs {}",
                grad.values[k - 1],
                exact
            );
        }
    }

    #[test]
    fn penalty_gradient_matches_fd_exactly() {
        // Quadratic functional: central differences are exact to rounding.
        let n = 32;
        let c = ControlPath::new(1.0, n, 0.0, &ControlShape::Ramp { from: 0.0, to: 1.0 }, None)
            .unwrap();
        let g = Grid::new(1, 64, 10.0).unwrap();
        let p = cost_params(0.0, 0.5, &g);
        let omega = vec![0.0; n + 1];
        let grad =
            assemble_gradient(&series(c.dt(), vec![0.0; n + 1]), &c, &omega, &p).unwrap();

        let dir = smooth_direction(n, 3);
        let mut f = |path: &ControlPath| Ok(crate::cost::penalty_term(path, p.gamma2));
        let probe = fd_directional(&mut f, &c, &dir, &[1e-3, 1e-4]).unwrap();
        let adj = pair(&grad, &dir);
        assert!(
            (adj - probe.richardson).abs() <= 1e-10 * probe.richardson.abs().max(1.0),
            "{adj} vs {}",
            probe.richardson
        );

        let zero_probe = fd_directional(&mut f, &c, &vec![0.0; n], &[1e-3, 1e-4]).unwrap();
        assert!(zero_probe.estimates.iter().all(|&d| d == 0.0), "zero direction");
    }

    #[test]
    fn stationary_constant_control_has_zero_gradient() {
        let n = 16;
        let c = ControlPath::new(1.0, n, 0.2, &ControlShape::Constant { value: 0.2 }, None)
            .unwrap();
        let g = Grid::new(1, 64, 10.0).unwrap();
        let p = cost_params(0.5, 0.1, &g);
        let omega = vec![1.3; n + 1];
        let grad =
            assemble_gradient(&series(c.dt(), vec![0.0; n + 1]), &c, &omega, &p).unwrap();
        assert!(grad.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lift_is_linear_and_positive() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let n = 40;
        let dt = 1.0 / n as f64;
        let mk = |rng: &mut rand_chacha::ChaCha8Rng| GradientPath {
            horizon: 1.0,
            dt,
            values: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        let g1 = mk(&mut rng);
        let g2 = mk(&mut rng);
        let (a, b) = (0.7, -1.3);
        let combo = GradientPath {
            horizon: 1.0,
            dt,
            values: g1.values.iter().zip(&g2.values).map(|(x, y)| a * x + b * y).collect(),
        };
        let l1 = h1_riesz_lift(&g1);
        let l2 = h1_riesz_lift(&g2);
        let lc = h1_riesz_lift(&combo);
        for i in 0..n {
            let expect = a * l1.values[i] + b * l2.values[i];
            assert!((lc.values[i] - expect).abs() <= 1e-12, "lift linearity");
        }

        for seed in 0..5 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(100 + seed);
            let g = mk(&mut rng);
            let h = h1_riesz_lift(&g);
            assert!(pair(&g, &h.values) > 0.0, "⟨grad, h⟩ > 0 for nonzero grad");
        }

        let zero = GradientPath { horizon: 1.0, dt, values: vec![0.0; n] };
        assert!(h1_riesz_lift(&zero).values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lift_inverts_h1_form() {
        // With grad_k = ∫h'η'_k + ∫hη_k assembled from a known h, the lift
        // must return h. Build the form for hat-expanded h directly.
        let n = 24;
        let dt = 0.5 / n as f64;
        let h: Vec<f64> = (1..=n).map(|k| ((k as f64) * 0.3).sin()).collect();
        let mut rhs = vec![0.0; n];
        for k in 1..=n {
            let i = k - 1;
            let hk = h[i];
            let hl = if k > 1 { h[i - 1] } else { 0.0 };
            let hr = if k < n { h[i + 1] } else { 0.0 };
            rhs[i] = if k < n {
                (2.0 * hk - hl - hr) / dt + dt * (hl + 4.0 * hk + hr) / 6.0
            } else {
                (hk - hl) / dt + dt * (hl + 2.0 * hk) / 6.0
            };
        }
        let lifted = h1_riesz_lift(&GradientPath { horizon: 0.5, dt, values: rhs });
        for (a, b) in lifted.values.iter().zip(&h) {
            assert!((a - b).abs() < 1e-11, "{a} vs {b}");
        }
    }

    #[test]
    fn fd_requires_decreasing_eps() {
        let c = ControlPath::new(1.0, 4, 0.0, &ControlShape::Constant { value: 0.0 }, None)
            .unwrap();
        let mut f = |_: &ControlPath| Ok(0.0);
        assert!(fd_directional(&mut f, &c, &[0.0; 4], &[1e-3]).is_err());
        assert!(fd_directional(&mut f, &c, &[0.0; 4], &[1e-4, 1e-3]).is_err());
    }

    /// The decisive consistency check: adjoint-assembled gradient against
    /// Richardson-extrapolated central differences of the full discrete
    /// objective, on a focusing configuration with γ₁ > 0 and singular V.
    #[test]
    fn adjoint_gradient_matches_finite_differences() {
        let g = Grid::new(1, 128, 10.0).unwrap();
        let v = make_potential(&PotentialSpec::InversePower { alpha: 0.5, epsilon: None }, &g)
            .unwrap();
        let model = ModelParams::new(1.0, 1.0, 1).unwrap();
        let u0 = State::gaussian(&g, &[0.0], 1.0, 1.0).normalized();
        let n = 500;
        let c = ControlPath::new(0.5, n, 0.0, &ControlShape::Ramp { from: 0.0, to: 0.3 }, None)
            .unwrap();
        let p = cost_params(0.5, 1e-2, &g);

        let traj = evolve(&u0, &c, &model, &v, &SolverOptions::default()).unwrap();
        let run = evolve_backward(&traj, &c, &model, &v, &p, false).unwrap();
        let grad = assemble_gradient(&run.pairing, &c, &traj.omega, &p).unwrap();

        let mut f = |path: &ControlPath| {
            let t = evolve(&u0, path, &model, &v, &SolverOptions::default())?;
            Ok(evaluate(&t, path, &p)?.total)
        };
        for seed in [7u64, 8, 9] {
            let dir = smooth_direction(n, seed);
            let probe = fd_directional(&mut f, &c, &dir, &[1e-2, 5e-3]).unwrap();
            let adj = pair(&grad, &dir);
            let rel = (adj - probe.richardson).abs() / probe.richardson.abs().max(1e-12);
            assert!(
                rel <= 1e-4,
                "seed {seed}: adjoint {adj} vs FD {} (rel {rel:e})",
                probe.richardson
            );
        }
    }

    /// Same check for σ ≠ 1, where the σ factor in the conjugate-linear
    /// adjoint coefficient matters.
    #[test]
    fn adjoint_gradient_matches_fd_fractional_sigma() {
        let g = Grid::new(1, 128, 10.0).unwrap();
        let v = make_potential(&PotentialSpec::GaussianWell { depth: 1.0, width: 2.0 }, &g)
            .unwrap();
        let model = ModelParams::new(1.0, 0.75, 1).unwrap();
        let u0 = State::gaussian(&g, &[0.5], 1.0, 1.0).normalized();
        let n = 400;
        let c = ControlPath::new(0.4, n, 0.1, &ControlShape::Constant { value: 0.1 }, None)
            .unwrap();
        let p = cost_params(0.3, 2e-2, &g);

        let traj = evolve(&u0, &c, &model, &v, &SolverOptions::default()).unwrap();
        let run = evolve_backward(&traj, &c, &model, &v, &p, false).unwrap();
        let grad = assemble_gradient(&run.pairing, &c, &traj.omega, &p).unwrap();

        let mut f = |path: &ControlPath| {
            let t = evolve(&u0, path, &model, &v, &SolverOptions::default())?;
            Ok(evaluate(&t, path, &p)?.total)
        };
        let dir = smooth_direction(n, 21);
        let probe = fd_directional(&mut f, &c, &dir, &[1e-2, 5e-3]).unwrap();
        let adj = pair(&grad, &dir);
        let rel = (adj - probe.richardson).abs() / probe.richardson.abs().max(1e-12);
        assert!(rel <= 1e-4, "adjoint {adj} vs FD {} (rel {rel:e})", probe.richardson);
    }

    #[test]
    fn adjoint_gradient_matches_fd_in_2d() {
        let g = Grid::new(2, 32, 8.0).unwrap();
        let v = make_potential(&PotentialSpec::InversePower { alpha: 0.5, epsilon: None }, &g)
            .unwrap();
        let model = ModelParams::new(1.0, 0.9, 2).unwrap();
        let u0 = State::gaussian(&g, &[0.0, 0.0], 1.2, 1.0).normalized();
        let n = 150;
        let c = ControlPath::new(0.15, n, 0.0, &ControlShape::Ramp { from: 0.0, to: 0.3 }, None)
            .unwrap();
        let p = CostParams::new(
            0.4,
            1e-2,
            make_observable(&ObservableSpec { radius: 3.0, amplitude: 1.0 }, &g).unwrap(),
            AdmissibilityBounds::new(10.0, 10.0).unwrap(),
        )
        .unwrap();

        let traj = evolve(&u0, &c, &model, &v, &SolverOptions::default()).unwrap();
        let run = evolve_backward(&traj, &c, &model, &v, &p, false).unwrap();
        let grad = assemble_gradient(&run.pairing, &c, &traj.omega, &p).unwrap();

        let mut f = |path: &ControlPath| {
            let t = evolve(&u0, path, &model, &v, &SolverOptions::default())?;
            Ok(evaluate(&t, path, &p)?.total)
        };
        let dir = smooth_direction(n, 31);
        let probe = fd_directional(&mut f, &c, &dir, &[1e-2, 5e-3]).unwrap();
        let adj = pair(&grad, &dir);
        let rel = (adj - probe.richardson).abs() / probe.richardson.abs().max(1e-12);
        assert!(rel <= 1e-4, "2d adjoint {adj} vs FD {} (rel {rel:e})", probe.richardson);
    }

    #[test]
    fn fd_observed_order_is_two_for_smooth_case() {
        let g = Grid::new(1, 64, 10.0).unwrap();
        let v = make_potential(&PotentialSpec::GaussianWell { depth: 1.0, width: 2.0 }, &g)
            .unwrap();
        let model = ModelParams::new(1.0, 1.0, 1).unwrap();
        let u0 = State::gaussian(&g, &[0.0], 1.0, 1.0).normalized();
        let n = 100;
        let c = ControlPath::new(0.2, n, 0.0, &ControlShape::Constant { value: 0.0 }, None)
            .unwrap();
        let p = cost_params(0.0, 1e-2, &g);
        let mut f = |path: &ControlPath| {
            let t = evolve(&u0, path, &model, &v, &SolverOptions::default())?;
            Ok(evaluate(&t, path, &p)?.total)
        };
        let dir = smooth_direction(n, 5);
        let probe = fd_directional(&mut f, &c, &dir, &[4e-1, 2e-1, 1e-1, 5e-2]).unwrap();
        let order = probe.order.expect("nonlinear objective leaves a signal");
        assert!((order - 2.0).abs() < 0.35, "observed order {order}");
    }
}
