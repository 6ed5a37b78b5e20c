use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstaError {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical routine did not reach its accuracy target.
    #[error("accuracy error: {0}")]
    Accuracy(String),

    /// Iterative solver ran out of iterations.
    #[error("convergence error: {0}")]
    Convergence(String),

    /// The spatial grid does not resolve the wavefunction.
    #[error("grid error: {0}")]
    Grid(String),

    /// Perturbative order outside the implemented range.
    #[error("unsupported expansion order {0} (only 0..=2 are available)")]
    UnsupportedOrder(usize),

    /// The fidelity gradient is too small for a parabolic step.
    #[error("degenerate gradient: |R| = {norm:.3e} below threshold {threshold:.3e}")]
    DegenerateGradient { norm: f64, threshold: f64 },

    /// Configuration could not be parsed or failed validation.
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },

    /// Singular linear system (cannot happen for distinct knots).
    #[error("internal error: {0}")]
    Internal(String),
}

impl EstaError {
    pub fn domain(msg: impl Into<String>) -> Self {
        EstaError::Domain(msg.into())
    }

    pub fn accuracy(msg: impl Into<String>) -> Self {
        EstaError::Accuracy(msg.into())
    }

    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        EstaError::Config { key: key.into(), message: message.into() }
    }

    /// Adds context to the message of accuracy-type errors.
    pub fn context(self, ctx: &str) -> Self {
        match self {
            EstaError::Accuracy(m) => EstaError::Accuracy(format!("{ctx}: {m}")),
            EstaError::Convergence(m) => EstaError::Convergence(format!("{ctx}: {m}")),
            EstaError::Grid(m) => EstaError::Grid(format!("{ctx}: {m}")),
            EstaError::Domain(m) => EstaError::Domain(format!("{ctx}: {m}")),
            other => other,
        }
    }

    /// True for failures that stem from numerical accuracy rather than usage.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            EstaError::Accuracy(_)
                | EstaError::Convergence(_)
                | EstaError::Grid(_)
                | EstaError::DegenerateGradient { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, EstaError>;
