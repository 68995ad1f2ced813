use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("matrix is not Hermitian (relative asymmetry {rel_asymmetry:.3e})")]
    NotHermitian { rel_asymmetry: f64 },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),

    #[error("worst-case incident power {incident:.6e} cannot cover the IRS budget {required:.6e}")]
    EnergyInfeasible { incident: f64, required: f64 },

    #[error("problem infeasible: {0}")]
    Infeasible(String),

    #[error("no feasible beamformer after {draws} randomizations")]
    ExtractionFailure { draws: usize },

    #[error("numerical failure in conic solver: {0}")]
    Numerical(String),
}

impl Error {
    /// No solution exists for the given data (as opposed to a breakdown).
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible(_) | Error::EnergyInfeasible { .. } | Error::ExtractionFailure { .. })
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_) | Error::NonFinite)
    }

    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Self::InvalidParameter { field, reason: reason.into() }
    }
}
