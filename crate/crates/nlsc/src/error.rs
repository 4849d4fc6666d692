//! Error type shared by every module of the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or operation received an argument outside its domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Two fields live on different grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// The forward solver hit a non-finite value or exceeded the blow-up
    /// guard. Focusing runs outside the theorem σ-range may do this
    /// legitimately.
    #[error("blow-up guard tripped at step {step}: max|u| = {max_abs:.3e}")]
    Blowup { step: usize, max_abs: f64 },

    /// The backward adjoint integration produced a non-finite value.
    #[error("adjoint integration produced non-finite values at step {step}")]
    AdjointNonFinite { step: usize },

    /// The trajectory does not store the states the adjoint needs.
    #[error(
        "trajectory stores states at stride {stride} without checkpoint \
         recomputation data; re-run evolve with stride 1 or keep the control, \
         model and potential available for checkpoint mode"
    )]
    MissingStates { stride: usize },

    /// The gradient machinery requires σ ≥ 1/2.
    #[error("gradient machinery requires sigma >= 1/2, got sigma = {0}")]
    GateauxRange(f64),

    /// An admissibility bound |φ₀| ≤ M₂ was violated.
    #[error("initial control value {phi0} violates |phi0| <= M2 = {m2}")]
    BoundViolation { phi0: f64, m2: f64 },

    /// ⟨u, Au⟩ came out with a non-negligible imaginary part, which means
    /// the observable is not acting as a real multiplication operator.
    #[error("observable pairing has imaginary part {imag:.3e}; observable is broken")]
    ObservableNotSelfAdjoint { imag: f64 },

    /// Configuration file failed validation; every violation is listed.
    #[error("invalid configuration:\n{}", .0.join("\n"))]
    ConfigInvalid(Vec<String>),

    /// Configuration file failed to parse.
    #[error("configuration parse error: {0}")]
    ConfigParse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed on-disk data (snapshot magic, CSV shape, ...).
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Exit-code class used by the command-line surface: 1 for usage and
    /// configuration problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Blowup { .. }
            | Error::AdjointNonFinite { .. }
            | Error::ObservableNotSelfAdjoint { .. } => 2,
            _ => 1,
        }
    }
}
