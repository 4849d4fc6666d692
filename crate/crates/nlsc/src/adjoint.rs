//! Backward integration of the adjoint equation along a stored trajectory.
//!
//! The adjoint field p solves, backward from t = T,
//!
//! ```text
//! i p_t + Δp + φ(t)V p + λ(σ+1)|u|^{2σ} p + λσ|u|^{2σ−2}u² p̄ = S(t),
//! p(T) = 4i ⟨u(T), A u(T)⟩ (A u(T)),      S = 4γ₁ (φ')² ω(t) V u,
//! ```
//!
//! the formal adjoint of the linearised state equation under the real
//! L² pairing Re∫p̄·v. The conjugate-linear term makes the local flow a
//! real-linear 2×2 system per grid cell; it is integrated with one
//! classical 4-stage explicit step per interval with u frozen at the
//! interval midpoint, between spectral kinetic half-steps with the
//! backward phase direction. Every node records the pairing series
//!
//! ```text
//! g_k = Re ∫ p̄(t_k) V u(t_k) dx
//! ```
//!
//! which the gradient module integrates against hat test functions.

use num_complex::Complex64;

use crate::control::ControlPath;
use crate::cost::{observable_pairing, CostParams};
use crate::error::Error;
use crate::forward::{kinetic_table, strang_step_inplace, Trajectory};
use crate::model::ModelParams;
use crate::spectral::{Fourier, RealField, State};
use crate::Result;

/// Nodal samples of `g(t) = Re ∫ p̄ V u dx`, length n_steps + 1.
#[derive(Debug, Clone)]
pub struct PairingSeries {
    pub dt: f64,
    pub values: Vec<f64>,
}

/// Result of a backward sweep.
pub struct AdjointRun {
    pub pairing: PairingSeries,
    /// Adjoint states p(t_k) for all nodes, kept only on request.
    pub states: Option<Vec<State>>,
}

/// Terminal condition `p(T) = 4i ⟨u(T), A u(T)⟩ (A u(T))`; supported in
/// B(R) by construction.
pub fn terminal_condition(u_t: &State, a: &RealField) -> Result<State> {
    let pairing = observable_pairing(a, u_t)?;
    let scale = Complex64::new(0.0, 4.0 * pairing);
    Ok(State {
        grid: u_t.grid.clone(),
        values: u_t.values.iter().zip(&a.values).map(|(u, w)| scale * w * u).collect(),
    })
}

/// Nodal source field `4 γ₁ (φ'(t_k))² ω_k V u_k`, with φ'(t_k) the
/// average of the adjacent interval slopes (one-sided at the endpoints).
pub fn adjoint_source(
    k: usize,
    c: &ControlPath,
    omega: &[f64],
    u_k: &State,
    v: &RealField,
    gamma1: f64,
) -> Result<State> {
    if omega.len() != c.n_steps() + 1 || k >= omega.len() {
        return Err(Error::invalid("adjoint_source: inconsistent series lengths"));
    }
    let slopes = c.derivative();
    let n = c.n_steps();
    let dphi = if k == 0 {
        slopes[0]
    } else if k == n {
        slopes[n - 1]
    } else {
        0.5 * (slopes[k - 1] + slopes[k])
    };
    let amp = 4.0 * gamma1 * dphi * dphi * omega[k];
    Ok(State {
        grid: u_k.grid.clone(),
        values: u_k.values.iter().zip(&v.values).map(|(u, vj)| amp * vj * u).collect(),
    })
}

/// Conjugate-linear coefficient `λσ|u|^{2σ−2}u²`, defined as 0 where u = 0.
/// Its magnitude is λσ|u|^{2σ}, finite for every σ > 0.
fn conjugate_coefficient(u: Complex64, model: &ModelParams) -> Complex64 {
    let n2 = u.norm_sqr();
    if n2 == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        model.lambda * model.sigma * n2.powf(model.sigma - 1.0) * u * u
    }
}

/// One classical 4-stage step of the frozen pointwise system
/// `q' = −i (a q + c q̄ − s)` over `dt`.
#[inline]
fn local_rk4(q: Complex64, a: f64, c: Complex64, s: Complex64, dt: f64) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    let f = |q: Complex64| -i * (a * q + c * q.conj() - s);
    let k1 = f(q);
    let k2 = f(q + 0.5 * dt * k1);
    let k3 = f(q + 0.5 * dt * k2);
    let k4 = f(q + dt * k3);
    q + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

fn pairing_value(p: &State, v: &RealField, u: &State) -> f64 {
    let sum: f64 = p
        .values
        .iter()
        .zip(&v.values)
        .zip(&u.values)
        .map(|((pj, vj), uj)| vj * (pj.conj() * uj).re)
        .sum();
    sum * p.grid.cell_volume()
}

/// Provides u(t_k) for every node, recomputing checkpoint segments when
/// the trajectory was stored with a stride.
struct NodeStates<'a> {
    traj: &'a Trajectory,
    control: &'a ControlPath,
    model: &'a ModelParams,
    v: &'a RealField,
    fourier: &'a Fourier,
    kinetic_fwd: Vec<Complex64>,
    seg_start: usize,
    seg: Vec<State>,
}

impl<'a> NodeStates<'a> {
    fn new(
        traj: &'a Trajectory,
        control: &'a ControlPath,
        model: &'a ModelParams,
        v: &'a RealField,
        fourier: &'a Fourier,
    ) -> NodeStates<'a> {
        let kinetic_fwd =
            if traj.stride > 1 { kinetic_table(&traj.grid, traj.dt) } else { Vec::new() };
        NodeStates {
            traj,
            control,
            model,
            v,
            fourier,
            kinetic_fwd,
            seg_start: usize::MAX,
            seg: Vec::new(),
        }
    }

    fn get(&mut self, k: usize) -> Result<&State> {
        let traj = self.traj;
        if let Some(s) = traj.state_at(k) {
            return Ok(s);
        }
        let stride = self.traj.stride;
        let start = (k / stride) * stride;
        if self.seg_start != start {
            // Recompute [start, start+stride] from its checkpoint with exactly
            // the forward stepping, so states are bit-identical.
            let mut u = self
                .traj
                .state_at(start)
                .ok_or(Error::MissingStates { stride })?
                .clone();
            self.seg.clear();
            self.seg.push(u.clone());
            let hi = (start + stride).min(self.traj.n_steps);
            for j in start..hi {
                strang_step_inplace(
                    self.fourier,
                    &mut u,
                    self.control.midpoint(j),
                    self.traj.dt,
                    self.model,
                    self.v,
                    &self.kinetic_fwd,
                );
                self.seg.push(u.clone());
            }
            self.seg_start = start;
        }
        Ok(&self.seg[k - start])
    }
}

/// Integrate the adjoint equation from t = T down to t = 0 along `traj`,
/// recording the pairing series at every node.
///
/// Requires `model.gateaux_ok` (σ ≥ 1/2). The trajectory must store every
/// state (stride 1) or checkpoints for segment recomputation.
pub fn evolve_backward(
    traj: &Trajectory,
    c: &ControlPath,
    model: &ModelParams,
    v: &RealField,
    p: &CostParams,
    record_states: bool,
) -> Result<AdjointRun> {
    if !model.gateaux_ok {
        return Err(Error::GateauxRange(model.sigma));
    }
    if traj.n_steps != c.n_steps() {
        return Err(Error::invalid("evolve_backward: trajectory/control step mismatch"));
    }
    let n = traj.n_steps;
    let dt = traj.dt;
    let fourier = Fourier::new(&traj.grid);
    // Backward kinetic half-step: conjugate phase direction exp(+i|k|² dt/2).
    let kinetic_half_back: Vec<Complex64> = (0..traj.grid.cells())
        .map(|j| Complex64::from_polar(1.0, traj.grid.wavenumber_sq(j) * 0.5 * dt))
        .collect();

    let mut nodes = NodeStates::new(traj, c, model, v, &fourier);

    let u_n = nodes.get(n)?.clone();
    let mut padj = terminal_condition(&u_n, &p.observable)?;
    let mut g = vec![0.0; n + 1];
    g[n] = pairing_value(&padj, v, &u_n);
    let mut states = record_states.then(|| {
        let mut s = Vec::with_capacity(n + 1);
        s.push(padj.clone());
        s
    });

    let sp1 = model.sigma + 1.0;
    let mut u_hi = u_n;
    for k in (0..n).rev() {
        let u_lo = nodes.get(k)?.clone();
        let phi_mid = c.midpoint(k);
        let dphi = (c.nodes()[k + 1] - c.nodes()[k]) / dt;
        let omega_mid = 0.5 * (traj.omega[k] + traj.omega[k + 1]);
        let source_amp = 4.0 * p.gamma1 * dphi * dphi * omega_mid;

        // Kinetic half-step backward.
        fourier.forward(&mut padj.values);
        for (x, ph) in padj.values.iter_mut().zip(&kinetic_half_back) {
            *x *= ph;
        }
        fourier.inverse(&mut padj.values);

        // Local RK4 with u frozen at the interval midpoint.
        for (j, q) in padj.values.iter_mut().enumerate() {
            let u_mid = 0.5 * (u_lo.values[j] + u_hi.values[j]);
            let n2 = u_mid.norm_sqr();
            let a = phi_mid * v.values[j]
                + if n2 == 0.0 { 0.0 } else { model.lambda * sp1 * n2.powf(model.sigma) };
            let cc = conjugate_coefficient(u_mid, model);
            let s = source_amp * v.values[j] * u_mid;
            *q = local_rk4(*q, a, cc, s, dt);
        }

        // Kinetic half-step backward.
        fourier.forward(&mut padj.values);
        for (x, ph) in padj.values.iter_mut().zip(&kinetic_half_back) {
            *x *= ph;
        }
        fourier.inverse(&mut padj.values);

        if !padj.is_finite() {
            return Err(Error::AdjointNonFinite { step: k });
        }

        g[k] = pairing_value(&padj, v, &u_lo);
        if let Some(s) = states.as_mut() {
            s.push(padj.clone());
        }
        u_hi = u_lo;
    }

    if let Some(s) = states.as_mut() {
        s.reverse(); // chronological order p(t_0), ..., p(t_n)
    }
    Ok(AdjointRun { pairing: PairingSeries { dt, values: g }, states })
}
