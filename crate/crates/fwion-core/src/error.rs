use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum FwError {
    /// Invalid grid, pulse, potential or run parameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// NaN/Inf detected, non-convergence, or other numerical failure.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// An expectation value came back with an imaginary residue above
    /// tolerance, which signals a broken operator construction.
    #[error("non-Hermitian expectation value: residue {residue:.3e} exceeds tolerance {tolerance:.3e}")]
    NonHermitian { residue: f64, tolerance: f64 },

    /// Snapshot/ledger files that do not match the run they claim to belong to.
    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl FwError {
    /// Process exit code for the CLI: 2 for configuration problems,
    /// 3 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            FwError::Config(_) => 2,
            FwError::Numerical(_) | FwError::NonHermitian { .. } => 3,
            _ => 1,
        }
    }
}

impl From<serde_json::Error> for FwError {
    fn from(e: serde_json::Error) -> Self {
        FwError::Serde(e.to_string())
    }
}

impl From<toml::de::Error> for FwError {
    fn from(e: toml::de::Error) -> Self {
        FwError::Config(e.to_string())
    }
}
