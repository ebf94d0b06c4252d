use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("outside the convergence domain: {0}")]
    Domain(String),

    #[error("I - zeta*K(zeta) is numerically singular at zeta = {zeta} (rcond {rcond:.3e})")]
    Singular { zeta: Complex64, rcond: f64 },

    #[error("det(I - zeta*K(zeta)) vanishes on the circle near zeta = {zeta} (sigma_min {sigma_min:.3e})")]
    BoundaryZero { zeta: Complex64, sigma_min: f64 },

    #[error("insufficient data for a decay fit: {usable} usable points, need at least 3")]
    InsufficientData { usable: usize },

    #[error("base system is not uniformly exponentially stable: {0}")]
    BaseUnstable(String),

    #[error("perturbation structure does not decay exponentially: {0}")]
    NonDecayingStructure(String),

    #[error("phase space not supported: {0}")]
    SpaceNotSupported(String),

    #[error("weighted disturbance sum diverges: {0}")]
    DivergentWeight(String),

    #[error("operation requires the 2-norm state mode: {0}")]
    Mode(String),

    #[error("numerical certification failed: {0}")]
    Certification(String),
}

impl Error {
    /// True for failures of a numerical check, as opposed to inputs that are
    /// outside an operation's domain.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. }
                | Error::BoundaryZero { .. }
                | Error::InsufficientData { .. }
                | Error::Certification(_)
        )
    }
}
