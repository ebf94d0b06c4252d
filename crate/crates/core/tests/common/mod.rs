#![allow(dead_code)]

use std::f64::consts::PI;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};
use vstab_core::kernel::GeometricTail;
use vstab_core::linalg::{self, StateNorm};
use vstab_core::{AnalysisConfig, Complex64, ComplexMatrix, ConvolutionKernel};

pub fn proptest_config() -> Config {
    let cases = std::env::var("PROPTEST_CASES").ok().and_then(|c| c.parse().ok()).unwrap_or(1000);
    Config { cases, rng_seed: RngSeed::Fixed(0x5eed), failure_persistence: None, ..Config::default() }
}

/// Coarser numerics than the defaults so that a thousand cases stay cheap.
pub fn analysis_config() -> AnalysisConfig {
    AnalysisConfig { grid_size: 256, n_max: 128, section: 32, ..AnalysisConfig::default() }
}

pub fn complex(a: f64) -> impl Strategy<Value = Complex64> {
    (-a..a, -a..a).prop_map(|(re, im)| Complex64::new(re, im))
}

pub fn matrix(rows: usize, cols: usize, a: f64) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec(complex(a), rows * cols)
        .prop_map(move |e| linalg::from_row_major(rows, cols, &e).unwrap())
}

pub fn ratio(max_modulus: f64) -> impl Strategy<Value = Complex64> {
    (0.01..max_modulus, -PI..PI).prop_map(|(r, t)| Complex64::from_polar(r, t))
}

pub fn kernel_of(rows: usize, cols: usize, max_modulus: f64) -> impl Strategy<Value = ConvolutionKernel> {
    (
        prop::collection::vec(matrix(rows, cols, 1.0), 0..=2),
        prop::collection::vec((matrix(rows, cols, 1.0), ratio(max_modulus)), 0..=2),
    )
        .prop_map(move |(head, tails)| {
            let tails = tails.into_iter().map(|(coeff, ratio)| GeometricTail { coeff, ratio }).collect();
            ConvolutionKernel::new(rows, cols, head, tails).unwrap()
        })
}

/// Square kernels of dimension 1 to 4 with tail ratios below 0.85 in modulus.
pub fn kernel() -> impl Strategy<Value = ConvolutionKernel> {
    (1usize..=4).prop_flat_map(|d| kernel_of(d, d, 0.85))
}

/// `Σ_j ‖K(j)‖₂` bounded through the triangle inequality.
pub fn coefficient_mass(k: &ConvolutionKernel) -> f64 {
    let j0 = k.head().len() as i32;
    let head: f64 = k.head().iter().map(|m| StateNorm::Two.matrix_norm(m)).sum();
    let tails: f64 = k
        .tails()
        .iter()
        .map(|t| {
            let r = t.ratio.norm();
            StateNorm::Two.matrix_norm(&t.coeff) * r.powi(j0) / (1.0 - r)
        })
        .sum();
    head + tails
}

/// Rescales `k` so that its coefficient mass is `mass`, which makes
/// `I - ζK̂(ζ)` invertible on the closed unit disc when `mass < 1`.
pub fn with_mass(k: &ConvolutionKernel, mass: f64) -> ConvolutionKernel {
    let current = coefficient_mass(k);
    if current == 0.0 {
        k.clone()
    } else {
        k.scaled(Complex64::new(mass / current, 0.0))
    }
}

/// Kernels with coefficient mass in `[0.05, 0.9]`; all are stable.
pub fn stable_kernel() -> impl Strategy<Value = ConvolutionKernel> {
    (kernel(), 0.05..0.9f64).prop_map(|(k, m)| with_mass(&k, m))
}

pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}
