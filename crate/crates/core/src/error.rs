use thiserror::Error;

/// Errors surfaced by the library. Validation failures name the violated
/// invariant; regime errors mark inputs for which a formula is inapplicable
/// rather than wrong.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("not Hermitian: ||m - m^dag||_F = {dev:.3e} exceeds {tol:.1e}")]
    NotHermitian { dev: f64, tol: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("near-degenerate spectrum: min gap {gap:.3e} <= {tol:.1e}; use the degenerate path")]
    SpectrumGap { gap: f64, tol: f64 },

    #[error("regime: {0}")]
    Regime(String),

    #[error("no certificate available: {0}")]
    NoCertificate(String),

    #[error("eigensolver: {0}")]
    Eigensolver(String),

    #[error("objective evaluation failed at theta {theta:?}: {source}")]
    Probe {
        theta: Vec<f64>,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
