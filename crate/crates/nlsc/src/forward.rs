//! Strang split-step propagation of the controlled NLS.
//!
//! One step over [t_k, t_{k+1}] with φ_mid = (φ_k + φ_{k+1})/2:
//!
//! 1. local half-step: `u ← u · exp(i (dt/2) (λ|u|^{2σ} + φ_mid V))`
//! 2. kinetic step:    `û ← û · exp(−i |k|² dt)`
//! 3. local half-step again.
//!
//! The local flow preserves |u| pointwise, so its phase is exact rather
//! than approximated, and every substep is unitary: mass is conserved to
//! rounding regardless of dt. The scheme is second order in time.

use std::sync::Arc;

use num_complex::Complex64;

use crate::control::ControlPath;
use crate::error::Error;
use crate::model::ModelParams;
use crate::spectral::{l2_norm, weighted_density_integral, Fourier, Grid, RealField, State};
use crate::Result;

/// Options for [`evolve`].
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Keep every `stride`-th state (node 0 and the final node always kept).
    pub stride: usize,
    /// Abort when max|u| exceeds this guard.
    pub blowup_guard: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { stride: 1, blowup_guard: 1e8 }
    }
}

/// Forward trajectory with per-node diagnostics.
///
/// `mass`, `omega` and `energy` are recorded at every node; states are
/// stored at the configured stride (plus the final node).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Arc<Grid>,
    pub dt: f64,
    pub n_steps: usize,
    pub stride: usize,
    states: Vec<State>,
    pub mass: Vec<f64>,
    pub omega: Vec<f64>,
    pub energy: Vec<f64>,
    /// Largest |u| seen within 10% of the box boundary over the whole run;
    /// a truncation diagnostic, never enforced.
    pub boundary_max: f64,
}

impl Trajectory {
    /// Stored state at node k, if the stride kept it.
    pub fn state_at(&self, k: usize) -> Option<&State> {
        if k > self.n_steps {
            return None;
        }
        if k % self.stride == 0 {
            self.states.get(k / self.stride)
        } else if k == self.n_steps {
            self.states.last()
        } else {
            None
        }
    }

    pub fn initial_state(&self) -> &State {
        &self.states[0]
    }

    pub fn final_state(&self) -> &State {
        self.states.last().expect("trajectory has at least the initial state")
    }

    /// Relative L² mass drift max_k |m_k − m_0| / m_0.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.mass[0];
        if m0 == 0.0 {
            return 0.0;
        }
        self.mass.iter().map(|m| (m - m0).abs()).fold(0.0, f64::max) / m0
    }

    /// Discrete residual of the energy identity
    /// `E(T) − E(0) = −½ ∫ φ' ω dt` with midpoint ω on each interval.
    pub fn energy_identity_residual(&self, control: &ControlPath) -> f64 {
        let n = self.n_steps;
        let work: f64 = (0..n)
            .map(|k| {
                let dphi = (control.nodes()[k + 1] - control.nodes()[k]) / self.dt;
                let omega_mid = 0.5 * (self.omega[k] + self.omega[k + 1]);
                self.dt * dphi * omega_mid
            })
            .sum();
        (self.energy[n] - self.energy[0] + 0.5 * work).abs()
    }
}

/// Energy `E = ½‖∇s‖² − λ/(2σ+2) ∫|s|^{2σ+2} − (φ/2) ∫V|s|²`.
/// The gradient term is spectral, the rest pointwise quadrature.
pub fn energy(
    fourier: &Fourier,
    s: &State,
    phi_t: f64,
    model: &ModelParams,
    v: &RealField,
) -> f64 {
    let kinetic = 0.5 * fourier.grad_norm_sq(s);
    let p = model.sigma + 1.0;
    let nl_sum: f64 = s.values.iter().map(|u| u.norm_sqr().powf(p)).sum();
    let nonlinear = model.lambda / (2.0 * model.sigma + 2.0)
        * nl_sum
        * s.grid.cell_volume();
    let potential = 0.5
        * phi_t
        * v.values
            .iter()
            .zip(&s.values)
            .map(|(vj, uj)| vj * uj.norm_sqr())
            .sum::<f64>()
        * s.grid.cell_volume();
    kinetic - nonlinear - potential
}

/// Exact pointwise phase of the local flow over `dt`:
/// `u ← u · exp(i dt (λ|u|^{2σ} + φ V))`.
fn local_phase(s: &mut State, dt: f64, phi: f64, model: &ModelParams, v: &RealField) {
    for (u, vj) in s.values.iter_mut().zip(&v.values) {
        let n2 = u.norm_sqr();
        let amp = if n2 == 0.0 { 0.0 } else { model.lambda * n2.powf(model.sigma) };
        let phase = dt * (amp + phi * vj);
        *u *= Complex64::from_polar(1.0, phase);
    }
}

/// One Strang step. `dt` may be negative (time reversal).
pub fn strang_step(
    fourier: &Fourier,
    s: &State,
    phi_mid: f64,
    dt: f64,
    model: &ModelParams,
    v: &RealField,
) -> State {
    let mut u = s.clone();
    local_phase(&mut u, 0.5 * dt, phi_mid, model, v);
    fourier.kinetic_phase(&mut u, dt);
    local_phase(&mut u, 0.5 * dt, phi_mid, model, v);
    u
}

/// Kinetic full-step phase table `exp(−i |k|² dt)`.
pub(crate) fn kinetic_table(grid: &Grid, dt: f64) -> Vec<Complex64> {
    (0..grid.cells())
        .map(|j| Complex64::from_polar(1.0, -grid.wavenumber_sq(j) * dt))
        .collect()
}

/// In-place Strang step using a precomputed kinetic phase table.
pub(crate) fn strang_step_inplace(
    fourier: &Fourier,
    u: &mut State,
    phi_mid: f64,
    dt: f64,
    model: &ModelParams,
    v: &RealField,
    kinetic: &[Complex64],
) {
    local_phase(u, 0.5 * dt, phi_mid, model, v);
    fourier.forward(&mut u.values);
    for (x, p) in u.values.iter_mut().zip(kinetic) {
        *x *= p;
    }
    fourier.inverse(&mut u.values);
    local_phase(u, 0.5 * dt, phi_mid, model, v);
}

fn boundary_shell_max(s: &State) -> f64 {
    let g = &s.grid;
    let cut = 0.9 * g.half_width();
    let mut max = 0.0f64;
    for (j, v) in s.values.iter().enumerate() {
        let x = g.position(j);
        if x[..g.dim()].iter().any(|c| c.abs() >= cut) {
            max = max.max(v.norm());
        }
    }
    max
}

/// Propagate `u0` under `control` over [0, T], recording diagnostics at
/// every node. Aborts with the step index if the blow-up guard trips.
pub fn evolve(
    u0: &State,
    control: &ControlPath,
    model: &ModelParams,
    v: &RealField,
    opts: &SolverOptions,
) -> Result<Trajectory> {
    u0.grid.as_ref().eq(v.grid.as_ref()).then_some(()).ok_or_else(|| {
        Error::GridMismatch("evolve: state and potential grids differ".into())
    })?;
    if !u0.is_finite() {
        return Err(Error::invalid("initial state is not finite"));
    }
    if opts.stride == 0 {
        return Err(Error::invalid("stride must be >= 1"));
    }
    let fourier = Fourier::new(&u0.grid);
    let n = control.n_steps();
    let dt = control.dt();
    let kinetic = kinetic_table(&u0.grid, dt);

    let mut u = u0.clone();
    let mut states = Vec::with_capacity(n / opts.stride + 2);
    let mut mass = Vec::with_capacity(n + 1);
    let mut omega = Vec::with_capacity(n + 1);
    let mut energy_series = Vec::with_capacity(n + 1);
    let mut boundary_max = boundary_shell_max(&u);

    states.push(u.clone());
    mass.push(l2_norm(&u));
    omega.push(weighted_density_integral(v, &u)?);
    energy_series.push(energy(&fourier, &u, control.nodes()[0], model, v));

    for k in 0..n {
        strang_step_inplace(&fourier, &mut u, control.midpoint(k), dt, model, v, &kinetic);

        let max_abs = u.max_abs();
        if !max_abs.is_finite() || max_abs > opts.blowup_guard {
            return Err(Error::Blowup { step: k + 1, max_abs });
        }

        mass.push(l2_norm(&u));
        omega.push(weighted_density_integral(v, &u)?);
        energy_series.push(energy(&fourier, &u, control.nodes()[k + 1], model, v));
        boundary_max = boundary_max.max(boundary_shell_max(&u));

        if (k + 1) % opts.stride == 0 || k + 1 == n {
            states.push(u.clone());
        }
    }

    Ok(Trajectory {
        grid: u0.grid.clone(),
        dt,
        n_steps: n,
        stride: opts.stride,
        states,
        mass,
        omega,
        energy: energy_series,
        boundary_max,
    })
}
