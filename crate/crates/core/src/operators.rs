//! Input-state and input-output operators of the convolution system and
//! bounds on their `ℓ^q` operator norms.
//!
//! Both operators are causal block-Toeplitz convolutions `y(n) = Σ_{j<n}
//! B(n-1-j) u(j)`. Finite sections give lower bounds; Young's inequality
//! `‖B * u‖_q ≤ (Σ_n ‖B(n)‖) ‖u‖_q` gives the upper bound.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::AnalysisConfig;
use crate::error::{Error, Result};
use crate::kernel::ConvolutionKernel;
use crate::linalg::{self, ComplexMatrix, ComplexVector, StateNorm};
use crate::spectral;

/// Number of trailing block-norm ratios that must all be below one for the
/// Young sum to be closed with a geometric tail.
const RATIO_TEST_STEPS: usize = 8;
const MIN_YOUNG_BUDGET: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBounds {
    pub lower: f64,
    #[serde(with = "crate::serde_util::ext_real")]
    pub upper: f64,
    pub section_size: usize,
    pub q: StateNorm,
    pub certified_upper: bool,
    /// `lower` is the exact norm of the finite section (not just a bound on it).
    pub lower_exact: bool,
    /// Geometric ratio used to close the Young sum.
    pub tail_ratio: Option<f64>,
}

/// Feedback structure `x ↦ E * x` (output, `u1 × d` kernel) and `v ↦ Dv`
/// (input, `d × u2`).
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationStructure {
    d: ComplexMatrix,
    e: ConvolutionKernel,
}

impl PerturbationStructure {
    pub fn new(d: ComplexMatrix, e: ConvolutionKernel) -> Result<Self> {
        if d.nrows() == 0 || d.ncols() == 0 {
            return Err(Error::Dimension("D must be nonempty".into()));
        }
        linalg::ensure_finite(&d)?;
        if e.dim_in() != d.nrows() {
            return Err(Error::Dimension(format!(
                "E maps from dimension {} but D maps into dimension {}",
                e.dim_in(),
                d.nrows()
            )));
        }
        Ok(Self { d, e })
    }

    /// `D = I`, `E(j) = δ_{j0} I`.
    pub fn memoryless(dim: usize) -> Self {
        Self { d: linalg::identity(dim), e: ConvolutionKernel::memoryless(linalg::identity(dim)) }
    }

    pub fn d(&self) -> &ComplexMatrix {
        &self.d
    }

    pub fn e(&self) -> &ConvolutionKernel {
        &self.e
    }

    pub fn state_dim(&self) -> usize {
        self.d.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.d.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.e.dim_out()
    }

    pub fn e_decays(&self) -> bool {
        self.e.decays_exponentially()
    }

    pub fn check_against(&self, kernel: &ConvolutionKernel) -> Result<()> {
        if !kernel.is_square() || kernel.dim_out() != self.state_dim() {
            return Err(Error::Dimension(format!(
                "structure acts on dimension {}, kernel is {}x{}",
                self.state_dim(),
                kernel.dim_out(),
                kernel.dim_in()
            )));
        }
        Ok(())
    }

    /// Scales `D` by `s`.
    pub fn with_d_scaled(&self, s: f64) -> Self {
        Self { d: &self.d * Complex64::new(s, 0.0), e: self.e.clone() }
    }

    /// Scales `E` by `s`.
    pub fn with_e_scaled(&self, s: f64) -> Self {
        Self { d: self.d.clone(), e: self.e.scaled(Complex64::new(s, 0.0)) }
    }
}

/// Resolvent by the linear recurrence of the cleared pencil, whose cost is
/// linear in `n_max`.
pub(crate) fn resolvent(kernel: &ConvolutionKernel, n_max: usize) -> Result<Vec<ComplexMatrix>> {
    spectral::rational_resolvent_sequence(kernel, n_max)
}

fn check_forcing(d: usize, f: &[ComplexVector]) -> Result<()> {
    match f.iter().position(|v| v.len() != d) {
        Some(j) => Err(Error::Dimension(format!("f({j}) has length {}, expected {d}", f[j].len()))),
        None => Ok(()),
    }
}

/// `(Γ_K f)(n) = Σ_{j<n} X(n-1-j) f(j)` for `0 ≤ n ≤ n_max`; `f` is zero
/// past its end. The result is checked against [`apply_input_state_recursive`].
pub fn apply_input_state(kernel: &ConvolutionKernel, f: &[ComplexVector], n_max: usize) -> Result<Vec<ComplexVector>> {
    if !kernel.is_square() {
        return Err(Error::Dimension("kernel must be square".into()));
    }
    let d = kernel.dim_out();
    check_forcing(d, f)?;
    let xs = resolvent(kernel, n_max)?;
    let mut out = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let mut acc = ComplexVector::zeros(d);
        for (j, fj) in f.iter().enumerate().take(n) {
            acc += &xs[n - 1 - j] * fj;
        }
        out.push(acc);
    }
    let oracle = apply_input_state_recursive(kernel, f, n_max)?;
    let scale = 1.0 + out.iter().chain(&oracle).map(|v| v.norm()).fold(0.0, f64::max);
    let gap = out.iter().zip(&oracle).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    if !(gap <= 1e-9 * scale) {
        return Err(Error::Certification(format!(
            "input-state convolution disagrees with the recursion by {gap:.3e}"
        )));
    }
    Ok(out)
}

/// Zero-initial-data solution of `x(n+1) = Σ_{j≤n} K(n-j) x(j) + f(n)`.
pub fn apply_input_state_recursive(
    kernel: &ConvolutionKernel,
    f: &[ComplexVector],
    n_max: usize,
) -> Result<Vec<ComplexVector>> {
    if !kernel.is_square() {
        return Err(Error::Dimension("kernel must be square".into()));
    }
    let d = kernel.dim_out();
    check_forcing(d, f)?;
    let ks = kernel.coefficients(n_max);
    let mut xs = vec![ComplexVector::zeros(d)];
    for n in 0..n_max {
        let mut acc = f.get(n).cloned().unwrap_or_else(|| ComplexVector::zeros(d));
        for j in 0..=n {
            acc += &ks[n - j] * &xs[j];
        }
        xs.push(acc);
    }
    Ok(xs)
}

/// `H(m) = Σ_{i≤m} E(i) X(m-i)`, so that the closed loop output is
/// `y(n) = Σ_{j<n} H(n-1-j) D v(j)`.
pub fn io_coefficients(
    kernel: &ConvolutionKernel,
    structure: &PerturbationStructure,
    n_max: usize,
) -> Result<Vec<ComplexMatrix>> {
    structure.check_against(kernel)?;
    let xs = resolvent(kernel, n_max)?;
    Ok(convolve_output(structure.e(), &xs))
}

/// `Σ_{i≤m} E(i) X(m-i)`. Each tail `C r^i` contributes `C U(m)` with the
/// running sum `U(m) = r U(m-1) + r^J X(m-J)`.
fn convolve_output(e: &ConvolutionKernel, xs: &[ComplexMatrix]) -> Vec<ComplexMatrix> {
    let j0 = e.head().len();
    let (d, cols) = (xs[0].nrows(), xs[0].ncols());
    let mut sums: Vec<ComplexMatrix> = vec![linalg::zeros(d, cols); e.tails().len()];
    let base: Vec<Complex64> = e.tails().iter().map(|t| linalg::powi(t.ratio, j0)).collect();
    (0..xs.len())
        .map(|m| {
            let mut acc = linalg::zeros(e.dim_out(), cols);
            for (i, h) in e.head().iter().enumerate().take(m + 1) {
                if !linalg::is_zero(h) {
                    acc += h * &xs[m - i];
                }
            }
            if m >= j0 {
                for ((t, u), b) in e.tails().iter().zip(sums.iter_mut()).zip(&base) {
                    *u *= t.ratio;
                    *u += &xs[m - j0] * *b;
                    acc += &t.coeff * &*u;
                }
            }
            acc
        })
        .collect()
}

/// Bounds on `‖Γ_K‖_{ℓ^q → ℓ^q}`.
pub fn gamma_norm(kernel: &ConvolutionKernel, q: StateNorm, section: usize, cfg: &AnalysisConfig) -> Result<NormBounds> {
    if !kernel.is_square() {
        return Err(Error::Dimension("kernel must be square".into()));
    }
    if section == 0 {
        return Err(Error::InvalidInput("section size must be positive".into()));
    }
    let budget = young_budget(section, cfg);
    let xs = resolvent(kernel, budget)?;
    Ok(toeplitz_bounds(&xs, q, section, cfg.state_norm))
}

/// Bounds on `‖L_K‖_{ℓ^q → ℓ^q}` for the structure `(D, E)`.
pub fn io_norm(
    kernel: &ConvolutionKernel,
    structure: &PerturbationStructure,
    q: StateNorm,
    section: usize,
    cfg: &AnalysisConfig,
) -> Result<NormBounds> {
    structure.check_against(kernel)?;
    if !structure.e_decays() {
        return Err(Error::NonDecayingStructure("E has a tail ratio of modulus >= 1".into()));
    }
    if section == 0 {
        return Err(Error::InvalidInput("section size must be positive".into()));
    }
    let budget = young_budget(section, cfg);
    let blocks: Vec<ComplexMatrix> =
        io_coefficients(kernel, structure, budget)?.into_iter().map(|h| h * structure.d()).collect();
    Ok(toeplitz_bounds(&blocks, q, section, cfg.state_norm))
}

fn young_budget(section: usize, cfg: &AnalysisConfig) -> usize {
    section.max(cfg.n_max).max(MIN_YOUNG_BUDGET)
}

/// Section lower bound from `blocks[..section]` and Young upper bound from
/// all of `blocks`.
pub fn toeplitz_bounds(blocks: &[ComplexMatrix], q: StateNorm, section: usize, norm: StateNorm) -> NormBounds {
    let section = section.min(blocks.len());
    let (lower, lower_exact) = section_lower_bound(&blocks[..section], q, norm);
    let (upper, tail_ratio) = young_upper_bound(blocks, norm);
    NormBounds {
        lower,
        upper,
        section_size: section,
        q,
        certified_upper: tail_ratio.is_some(),
        lower_exact,
        tail_ratio,
    }
}

/// `Σ_n ‖B(n)‖` closed by `‖B(last)‖ ρ/(1-ρ)`, with `ρ` the largest of the
/// trailing ratios. `+∞` when the ratio test fails.
fn young_upper_bound(blocks: &[ComplexMatrix], norm: StateNorm) -> (f64, Option<f64>) {
    let a: Vec<f64> = blocks.iter().map(|b| norm.matrix_norm(b)).collect();
    if a.len() <= RATIO_TEST_STEPS || a.iter().any(|x| !x.is_finite()) {
        return (f64::INFINITY, None);
    }
    let tail = &a[a.len() - RATIO_TEST_STEPS - 1..];
    let rho = tail
        .windows(2)
        .map(|w| match (w[0], w[1]) {
            (_, y) if y == 0.0 => 0.0,
            (x, _) if x == 0.0 => f64::INFINITY,
            (x, y) => y / x,
        })
        .fold(0.0, f64::max);
    if !(rho < 1.0) {
        return (f64::INFINITY, None);
    }
    let sum: f64 = a.iter().sum();
    let last = a[a.len() - 1];
    let closing = if last == 0.0 { 0.0 } else { last * rho / (1.0 - rho) };
    (sum + closing, Some(rho))
}

/// Norm of the `N × N` lower-triangular block-Toeplitz section on
/// `ℓ^q(ℂ^d, |·|)`. Exact when `q` matches the state norm; otherwise the
/// best ratio `‖T f‖/‖f‖` over a few structured trial vectors.
fn section_lower_bound(blocks: &[ComplexMatrix], q: StateNorm, norm: StateNorm) -> (f64, bool) {
    if blocks.is_empty() {
        return (0.0, true);
    }
    let (rows, cols) = (blocks[0].nrows(), blocks[0].ncols());
    match (q, norm) {
        (StateNorm::One, StateNorm::One) => {
            // the first block column dominates every other one
            let best = (0..cols)
                .map(|k| blocks.iter().map(|b| b.column(k).iter().map(|z| z.norm()).sum::<f64>()).sum::<f64>())
                .fold(0.0, f64::max);
            (best, true)
        }
        (StateNorm::Inf, StateNorm::Inf) => {
            // so does the last block row
            let best = (0..rows)
                .map(|r| blocks.iter().map(|b| b.row(r).iter().map(|z| z.norm()).sum::<f64>()).sum::<f64>())
                .fold(0.0, f64::max);
            (best, true)
        }
        (StateNorm::Two, StateNorm::Two) => (linalg::largest_singular_value(&section_matrix(blocks)), true),
        (StateNorm::One, _) => {
            // impulse inputs f = δ_0 x: Σ_m |B(m) x| / |x|
            let mut trials: Vec<ComplexVector> = (0..cols).map(|k| unit(cols, k)).collect();
            trials.extend(dyadic_prefixes(blocks.len()).map(|n| linalg::top_singular_triplet(&vstack(&blocks[..n])).2));
            let best = trials
                .iter()
                .map(|x| blocks.iter().map(|b| norm.vector_norm((b * x).iter())).sum::<f64>() / norm.vector_norm(x.iter()))
                .fold(0.0, f64::max);
            (best, false)
        }
        (StateNorm::Inf, _) => {
            // last output sample against the worst bounded input: for a unit
            // dual functional y, Σ_m |B(m)^* y|_dual
            let dual = norm.dual();
            let mut trials: Vec<ComplexVector> = (0..rows).map(|r| unit(rows, r)).collect();
            trials.extend(
                dyadic_prefixes(blocks.len()).map(|n| linalg::top_singular_triplet(&hstack(&blocks[..n]).adjoint()).2),
            );
            let best = trials
                .iter()
                .map(|y| {
                    blocks.iter().map(|b| dual.vector_norm((b.adjoint() * y).iter())).sum::<f64>() / dual.vector_norm(y.iter())
                })
                .fold(0.0, f64::max);
            (best, false)
        }
        (StateNorm::Two, _) => {
            let t = section_matrix(blocks);
            let n = blocks.len();
            let mut trials: Vec<ComplexVector> = (0..cols).map(|k| unit(n * cols, k)).collect();
            for m in dyadic_prefixes(n) {
                let top = linalg::top_singular_triplet(&section_matrix(&blocks[..m])).2;
                let mut f = ComplexVector::zeros(n * cols);
                f.rows_mut(0, m * cols).copy_from(&top);
                trials.push(f);
            }
            let seq_norm = |v: &ComplexVector, d: usize| -> f64 {
                (0..v.len() / d)
                    .map(|i| norm.vector_norm(v.rows(i * d, d).iter()).powi(2))
                    .sum::<f64>()
                    .sqrt()
            };
            let best = trials.iter().map(|f| seq_norm(&(&t * f), rows) / seq_norm(f, cols)).fold(0.0, f64::max);
            (best, false)
        }
    }
}

/// Prefix lengths `1, 2, 4, … ≤ n`. Trial vectors taken from these prefixes
/// are shared by every longer section, which keeps the bounds monotone.
fn dyadic_prefixes(n: usize) -> impl Iterator<Item = usize> {
    std::iter::successors(Some(1usize), |&m| m.checked_mul(2)).take_while(move |&m| m <= n)
}

fn unit(n: usize, k: usize) -> ComplexVector {
    let mut v = ComplexVector::zeros(n);
    v[k] = Complex64::new(1.0, 0.0);
    v
}

fn section_matrix(blocks: &[ComplexMatrix]) -> ComplexMatrix {
    let n = blocks.len();
    let (r, c) = (blocks[0].nrows(), blocks[0].ncols());
    let mut t = linalg::zeros(n * r, n * c);
    for i in 0..n {
        for j in 0..=i {
            t.view_mut((i * r, j * c), (r, c)).copy_from(&blocks[i - j]);
        }
    }
    t
}

fn vstack(blocks: &[ComplexMatrix]) -> ComplexMatrix {
    let (r, c) = (blocks[0].nrows(), blocks[0].ncols());
    let mut m = linalg::zeros(blocks.len() * r, c);
    for (i, b) in blocks.iter().enumerate() {
        m.view_mut((i * r, 0), (r, c)).copy_from(b);
    }
    m
}

fn hstack(blocks: &[ComplexMatrix]) -> ComplexMatrix {
    let (r, c) = (blocks[0].nrows(), blocks[0].ncols());
    let mut m = linalg::zeros(r, blocks.len() * c);
    for (i, b) in blocks.iter().enumerate() {
        m.view_mut((0, i * c), (r, c)).copy_from(b);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn example() -> ConvolutionKernel {
        ConvolutionKernel::scalar(&[], &[(c(-1.0, 0.0), c(0.5, 0.0))]).unwrap()
    }

    fn scalar_seq(values: &[f64]) -> Vec<ComplexVector> {
        values.iter().map(|&x| ComplexVector::from_element(1, c(x, 0.0))).collect()
    }

    #[test]
    fn input_state_closed_forms() {
        let f = scalar_seq(&[1.0, -2.0, 0.5, 3.0, 0.25, -1.0]);
        let x = apply_input_state(&example(), &f, 6).unwrap();
        assert_eq!(x[0][0], c(0.0, 0.0));
        for n in 1..=6 {
            let fv = |j: usize| f[j][0];
            let mut want = fv(n - 1);
            for j in 2..=n {
                want -= c((-0.5f64).powi(j as i32 - 2), 0.0) * fv(n - j);
            }
            assert!((x[n][0] - want).norm() < 1e-14, "n = {n}");
        }
        let growing = ConvolutionKernel::scalar(&[], &[(c(-2.0, 0.0), c(2.0, 0.0))]).unwrap();
        let x = apply_input_state(&growing, &f, 6).unwrap();
        assert_eq!(x[1][0], f[0][0]);
        for n in 2..=6 {
            assert_eq!(x[n][0], f[n - 1][0] - f[n - 2][0] * 2.0);
        }
        let zero_f = scalar_seq(&[0.0; 4]);
        assert!(apply_input_state(&example(), &zero_f, 8).unwrap().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn gamma_norms_of_the_example() {
        let cfg = AnalysisConfig::default();
        for q in [StateNorm::One, StateNorm::Inf] {
            let b = gamma_norm(&example(), q, 64, &cfg).unwrap();
            assert!((b.lower - 3.0).abs() < 1e-3 && b.lower <= 3.0);
            assert!((b.upper - 3.0).abs() < 1e-9 && b.certified_upper);
        }
        let b = gamma_norm(&example(), StateNorm::Two, 256, &cfg).unwrap();
        assert!((b.lower - 3.0).abs() < 1e-3 && b.lower <= b.upper);
    }

    #[test]
    fn zero_kernel_norms_are_one() {
        for norm in [StateNorm::One, StateNorm::Two, StateNorm::Inf] {
            let cfg = AnalysisConfig::default().with_norm(norm);
            for q in [StateNorm::One, StateNorm::Two, StateNorm::Inf] {
                let b = gamma_norm(&ConvolutionKernel::zero(2, 2), q, 16, &cfg).unwrap();
                assert!((b.lower - 1.0).abs() < 1e-14, "{norm} {q}: {b:?}");
                assert_eq!(b.upper, 1.0);
            }
        }
    }

    #[test]
    fn io_coefficients_reduce_to_the_resolvent() {
        let k = example();
        let h = io_coefficients(&k, &PerturbationStructure::memoryless(1), 10).unwrap();
        assert_eq!(h, spectral::resolvent_sequence(&k, 10).unwrap());
        let e = ConvolutionKernel::scalar(&[c(0.0, 0.0), c(2.5, -1.0)], &[]).unwrap();
        let s = PerturbationStructure::new(linalg::identity(1), e).unwrap();
        let h = io_coefficients(&ConvolutionKernel::zero(1, 1), &s, 4).unwrap();
        assert_eq!(h[0][(0, 0)], c(0.0, 0.0));
        assert_eq!(h[1][(0, 0)], c(2.5, -1.0));
    }

    #[test]
    fn io_norms() {
        let cfg = AnalysisConfig::default();
        let s = PerturbationStructure::memoryless(1);
        let b = io_norm(&example(), &s, StateNorm::One, 64, &cfg).unwrap();
        assert!((b.lower - 3.0).abs() < 1e-3);
        let b = io_norm(&ConvolutionKernel::zero(1, 1), &s, StateNorm::Two, 8, &cfg).unwrap();
        assert_eq!((b.lower, b.upper), (1.0, 1.0));
        let e = ConvolutionKernel::scalar(&[], &[(c(1.0, 0.0), c(1.0, 0.0))]).unwrap();
        let bad = PerturbationStructure::new(linalg::identity(1), e).unwrap();
        assert!(matches!(io_norm(&example(), &bad, StateNorm::Two, 8, &cfg), Err(Error::NonDecayingStructure(_))));
    }

    #[test]
    fn unstable_kernels_have_no_certified_upper_bound() {
        let k = ConvolutionKernel::scalar(&[c(2.0, 0.0)], &[]).unwrap();
        let b = gamma_norm(&k, StateNorm::Two, 8, &AnalysisConfig::default()).unwrap();
        assert!(!b.certified_upper && b.upper == f64::INFINITY);
    }

    #[test]
    fn mixed_norm_bounds_are_below_young() {
        let m = linalg::from_row_major(2, 2, &[c(0.3, 0.1), c(-0.2, 0.0), c(0.1, 0.4), c(0.2, -0.1)]).unwrap();
        let k = ConvolutionKernel::new(2, 2, vec![], vec![crate::kernel::GeometricTail { coeff: m, ratio: c(0.5, 0.2) }])
            .unwrap();
        for norm in [StateNorm::One, StateNorm::Two, StateNorm::Inf] {
            let cfg = AnalysisConfig::default().with_norm(norm);
            for q in [StateNorm::One, StateNorm::Two, StateNorm::Inf] {
                let b = gamma_norm(&k, q, 24, &cfg).unwrap();
                assert!(b.lower >= 1.0 - 1e-12 && b.lower <= b.upper, "{norm} {q}: {b:?}");
                assert_eq!(b.lower_exact, q == norm);
            }
        }
    }
}
