//! Uniform exponential stability and stability radii of linear Volterra
//! difference systems of convolution type,
//!
//! ```text
//! x(n+1) = Σ_{j≥0} K(j) x(n-j),
//! ```
//!
//! on `ℂ^d` with a selectable state norm.

mod circle;
pub mod config;
pub mod error;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod operators;
pub mod radii;
pub mod serde_util;
pub mod spectral;
pub mod tvcert;

pub use config::AnalysisConfig;
pub use error::{Error, Result};
pub use kernel::{ConvolutionKernel, GeometricTail, PhaseSpace, Prehistory, Variant};
pub use linalg::{ComplexMatrix, ComplexVector, StateNorm};
pub use num_complex::Complex64;
pub use operators::{NormBounds, PerturbationStructure};
pub use radii::{RadiusReport, Validity};
pub use spectral::{DecayEstimate, StabilityVerdict};
pub use tvcert::{CertKind, Certificate, DisturbanceSpec};
