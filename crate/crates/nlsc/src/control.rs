//! Nodal controls φ ∈ H¹(0,T) with the pinned initial value φ(0) = φ₀.
//!
//! A control is piecewise linear between its nodes, so φ' is piecewise
//! constant and both objective integrals are exactly computable on the
//! discrete space. The forward solver samples φ at interval midpoints.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Admissibility bounds of the problem: ‖u₀‖_{H¹} ≤ M₁ and |φ₀| ≤ M₂.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct AdmissibilityBounds {
    pub m1: f64,
    pub m2: f64,
}

impl AdmissibilityBounds {
    pub fn new(m1: f64, m2: f64) -> Result<AdmissibilityBounds> {
        if !(m1 > 0.0 && m2 > 0.0) {
            return Err(Error::invalid(format!("bounds must be positive, got M1={m1}, M2={m2}")));
        }
        Ok(AdmissibilityBounds { m1, m2 })
    }
}

/// Named control shapes for configs and the JSON descriptor.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlShape {
    Constant { value: f64 },
    Ramp { from: f64, to: f64 },
    /// `offset + amplitude · sin(2π · cycles · t/T)`.
    Sine { amplitude: f64, cycles: f64, offset: f64 },
    Nodes { values: Vec<f64> },
}

impl ControlShape {
    fn sample(&self, t: f64, horizon: f64, k: usize, n_steps: usize) -> Result<f64> {
        Ok(match self {
            ControlShape::Constant { value } => *value,
            ControlShape::Ramp { from, to } => from + (to - from) * t / horizon,
            ControlShape::Sine { amplitude, cycles, offset } => {
                offset + amplitude * (2.0 * std::f64::consts::PI * cycles * t / horizon).sin()
            }
            ControlShape::Nodes { values } => {
                if values.len() != n_steps + 1 {
                    return Err(Error::invalid(format!(
                        "nodal profile has {} values, expected n_steps + 1 = {}",
                        values.len(),
                        n_steps + 1
                    )));
                }
                values[k]
            }
        })
    }
}

/// Piecewise-linear control on [0, T] with n_steps intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPath {
    horizon: f64,
    dt: f64,
    /// Node values φ_k at t_k = k·dt, length n_steps + 1; nodes[0] = φ₀.
    nodes: Vec<f64>,
}

impl ControlPath {
    /// Build a control from a shape, pin node 0 to `phi0`, and check the
    /// admissibility bound when one is supplied.
    pub fn new(
        horizon: f64,
        n_steps: usize,
        phi0: f64,
        shape: &ControlShape,
        bounds: Option<&AdmissibilityBounds>,
    ) -> Result<ControlPath> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
        }
        if n_steps < 2 {
            return Err(Error::invalid(format!("n_steps must be >= 2, got {n_steps}")));
        }
        let dt = horizon / n_steps as f64;
        let mut nodes = Vec::with_capacity(n_steps + 1);
        for k in 0..=n_steps {
            nodes.push(shape.sample(k as f64 * dt, horizon, k, n_steps)?);
        }
        if nodes.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("control profile contains non-finite values"));
        }
        let mut path = ControlPath { horizon, dt, nodes };
        path.pin_initial(phi0, bounds)?;
        Ok(path)
    }

    pub fn from_nodes(horizon: f64, nodes: Vec<f64>) -> Result<ControlPath> {
        let n = nodes.len().saturating_sub(1);
        ControlPath::new(horizon, n, *nodes.first().ok_or_else(|| Error::invalid("empty profile"))?,
            &ControlShape::Nodes { values: nodes }, None)
    }

    /// Set node 0 to `phi0`, leaving all other nodes unchanged. Idempotent.
    pub fn pin_initial(&mut self, phi0: f64, bounds: Option<&AdmissibilityBounds>) -> Result<()> {
        if !phi0.is_finite() {
            return Err(Error::invalid("phi0 must be finite"));
        }
        if let Some(b) = bounds {
            if phi0.abs() > b.m2 {
                return Err(Error::BoundViolation { phi0, m2: b.m2 });
            }
        }
        self.nodes[0] = phi0;
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn phi0(&self) -> f64 {
        self.nodes[0]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node_times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.nodes.len()).map(move |k| k as f64 * self.dt)
    }

    /// Midpoint value on interval k: (φ_k + φ_{k+1})/2.
    pub fn midpoint(&self, k: usize) -> f64 {
        0.5 * (self.nodes[k] + self.nodes[k + 1])
    }

    /// Piecewise-constant derivative, one value per interval.
    pub fn derivative(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| (w[1] - w[0]) / self.dt).collect()
    }

    /// Discrete H¹(0,T) norm: trapezoid L² part plus the exact ∫(φ')².
    pub fn h1_norm(&self) -> f64 {
        (self.l2_sq() + self.derivative_sq_integral()).sqrt()
    }

    /// Trapezoid-rule ∫ φ² dt.
    pub fn l2_sq(&self) -> f64 {
        let n = self.n_steps();
        let mut sum = 0.5 * (self.nodes[0].powi(2) + self.nodes[n].powi(2));
        for k in 1..n {
            sum += self.nodes[k].powi(2);
        }
        sum * self.dt
    }

    /// Exact ∫ (φ')² dt for the piecewise-linear control.
    pub fn derivative_sq_integral(&self) -> f64 {
        self.nodes.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / self.dt
    }

    /// Shift every node except node 0 by `step · direction[k]`.
    /// `direction` has one entry per node k = 1..n_steps.
    pub fn displaced(&self, direction: &[f64], step: f64) -> Result<ControlPath> {
        if direction.len() != self.n_steps() {
            return Err(Error::invalid(format!(
                "direction has {} entries, expected n_steps = {}",
                direction.len(),
                self.n_steps()
            )));
        }
        let mut nodes = self.nodes.clone();
        for (k, d) in direction.iter().enumerate() {
            nodes[k + 1] += step * d;
        }
        if nodes.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("displaced control is not finite"));
        }
        Ok(ControlPath { horizon: self.horizon, dt: self.dt, nodes })
    }
}
