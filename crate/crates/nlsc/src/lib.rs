//! Bilinear optimal control of the nonlinear Schrödinger equation
//!
//! `nlsc` propagates the focusing/defocusing NLS
//!
//! ```text
//! i u_t + Δu + λ|u|^{2σ} u + φ(t) V(x) u = 0,   u(0) = u₀,
//! ```
//!
//! on a periodic box with a split-step Fourier scheme, integrates the
//! associated adjoint equation backward in time, assembles the Gâteaux
//! gradient of the control objective
//!
//! ```text
//! F(φ) = ⟨u(T), A u(T)⟩² + γ₁ ∫ (φ' ω)² dt + γ₂ ∫ (φ')² dt,
//! ```
//!
//! and descends on the control φ ∈ H¹(0,T) with an Armijo-backtracked,
//! Sobolev-preconditioned gradient method. A verification harness
//! ([`checks`]) runs every testable identity of the model at desk scale.
//!
//! The crate is organised along the pipeline:
//!
//! * [`spectral`] — periodic grid, complex fields, FFT-based operators
//! * [`model`]    — potentials V, observable A, nonlinearity (λ, σ)
//! * [`control`]  — nodal controls φ with pinned initial value
//! * [`forward`]  — Strang split-step propagation with diagnostics
//! * [`cost`]     — objective evaluation and its breakdown
//! * [`adjoint`]  — backward adjoint integration, pairing series g(t)
//! * [`gradient`] — weak-form gradient assembly, H¹ Riesz lift, FD probes
//! * [`optimize`] — projected descent and the stationarity residual
//! * [`checks`]   — one-command verification harness
//! * [`io`], [`config`] — snapshots, CSV series, manifests, run configs

pub mod adjoint;
pub mod checks;
pub mod config;
pub mod control;
pub mod cost;
pub mod error;
pub mod forward;
pub mod gradient;
pub mod io;
pub mod model;
pub mod optimize;
pub mod spectral;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
