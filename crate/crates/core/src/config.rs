use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::StateNorm;

/// Numerical knobs shared by every analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// Uniform grid points on the unit circle before refinement.
    pub grid_size: usize,
    /// Relative singularity threshold for `I - ζK̂(ζ)`.
    pub sigma_tol: f64,
    /// Relative tolerance of the golden-section refinement.
    pub refine_tol: f64,
    /// Length of computed resolvent sequences.
    pub n_max: usize,
    /// Block size of finite Toeplitz sections.
    pub section: usize,
    pub state_norm: StateNorm,
    pub seed: u64,
    /// Rate reported when a sequence vanishes identically.
    pub nu_max: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            grid_size: 4096,
            sigma_tol: 1e-9,
            refine_tol: 1e-8,
            n_max: 256,
            section: 128,
            state_norm: StateNorm::Two,
            seed: 42,
            nu_max: 50.0,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 64 || !self.grid_size.is_power_of_two() {
            return Err(Error::InvalidInput(format!(
                "grid_size must be a power of two >= 64, got {}",
                self.grid_size
            )));
        }
        for (name, v) in [("sigma_tol", self.sigma_tol), ("refine_tol", self.refine_tol), ("nu_max", self.nu_max)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.n_max == 0 {
            return Err(Error::InvalidInput("n_max must be positive".into()));
        }
        if self.section == 0 {
            return Err(Error::InvalidInput("section must be positive".into()));
        }
        Ok(())
    }

    pub fn with_norm(mut self, norm: StateNorm) -> Self {
        self.state_norm = norm;
        self
    }
}
