//! Resolvent sequences and uniform exponential stability verdicts.
//!
//! The resolvent `X(·)` is the coefficient sequence of `[I - ζK̂(ζ)]^{-1}`.
//! When the convergence radius exceeds one, stability is decided on the
//! closed unit disc by a boundary test (smallest gain of the pencil on the
//! circle) plus a zero count (winding number of its determinant). Otherwise
//! the pencil is cleared of the tail denominators and the resulting matrix
//! polynomial is examined instead.

use std::ops::RangeInclusive;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circle::{self, Sense};
use crate::config::AnalysisConfig;
use crate::error::{Error, Result};
use crate::kernel::ConvolutionKernel;
use crate::linalg::{self, ComplexMatrix, StateNorm};

/// Fitted envelope `‖X(n)‖ ≤ C e^{-νn}` over a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayEstimate {
    #[serde(rename = "C", with = "crate::serde_util::ext_real")]
    pub c: f64,
    pub nu: f64,
    /// The rate hit the configured cap (e.g. a sequence that vanishes).
    pub capped: bool,
    pub window: [usize; 2],
    pub usable_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub ue_resolvent_sense: bool,
    #[serde(with = "crate::serde_util::ext_real")]
    pub convergence_radius: f64,
    pub winding_number: Option<i64>,
    pub min_singular_value: f64,
    #[serde(with = "crate::serde_util::complex_pair")]
    pub min_singular_zeta: Complex64,
    #[serde(with = "crate::serde_util::option_complex_pair")]
    pub witness_zeta: Option<Complex64>,
    pub decay: Option<DecayEstimate>,
    pub fading_space_applicable: bool,
    /// The pencil is numerically singular on the unit circle.
    pub marginal: bool,
    pub summary: String,
}

fn require_square(kernel: &ConvolutionKernel) -> Result<()> {
    if kernel.is_square() {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "kernel must be square, got {}x{}",
            kernel.dim_out(),
            kernel.dim_in()
        )))
    }
}

/// `I - ζK̂(ζ)`.
pub fn pencil(kernel: &ConvolutionKernel, zeta: Complex64) -> Result<ComplexMatrix> {
    require_square(kernel)?;
    let k = kernel.eval_ztransform(zeta)?;
    Ok(linalg::identity(kernel.dim_out()) - k * zeta)
}

/// `X(0), …, X(n_max)` by power-series inversion:
/// `X(0) = I`, `X(n) = Σ_{j<n} K(j) X(n-1-j)`.
pub fn resolvent_sequence(kernel: &ConvolutionKernel, n_max: usize) -> Result<Vec<ComplexMatrix>> {
    require_square(kernel)?;
    let d = kernel.dim_out();
    let ks = kernel.coefficients(n_max);
    let mut xs = Vec::with_capacity(n_max + 1);
    xs.push(linalg::identity(d));
    for n in 1..=n_max {
        let mut acc = linalg::zeros(d, d);
        for (j, k) in ks.iter().enumerate().take(n) {
            acc += k * &xs[n - 1 - j];
        }
        xs.push(acc);
    }
    Ok(xs)
}

/// Scalar polynomial `Π_k (1 - r_k ζ)` over the tail ratios.
fn tail_denominator(kernel: &ConvolutionKernel, skip: Option<usize>) -> Vec<Complex64> {
    let mut q = vec![Complex64::new(1.0, 0.0)];
    for (k, t) in kernel.tails().iter().enumerate() {
        if Some(k) == skip {
            continue;
        }
        let mut next = vec![Complex64::new(0.0, 0.0); q.len() + 1];
        for (i, &a) in q.iter().enumerate() {
            next[i] += a;
            next[i + 1] -= a * t.ratio;
        }
        q = next;
    }
    q
}

/// Coefficients `P_0 = I, P_1, …` of the matrix polynomial
/// `P(ζ) = q(ζ)[I - ζK̂(ζ)]` with `q(ζ) = Π_k (1 - r_k ζ)`.
pub fn rational_pencil(kernel: &ConvolutionKernel) -> Result<Vec<ComplexMatrix>> {
    require_square(kernel)?;
    let d = kernel.dim_out();
    let q = tail_denominator(kernel, None);
    let j0 = kernel.head().len();
    let degree = j0 + kernel.tails().len();
    let mut qk = vec![linalg::zeros(d, d); degree];
    for (j, h) in kernel.head().iter().enumerate() {
        for (i, &qi) in q.iter().enumerate() {
            qk[j + i] += h * qi;
        }
    }
    for (k, t) in kernel.tails().iter().enumerate() {
        let qk_other = tail_denominator(kernel, Some(k));
        let lead = &t.coeff * linalg::powi(t.ratio, j0);
        for (i, &a) in qk_other.iter().enumerate() {
            qk[j0 + i] += &lead * a;
        }
    }
    let mut p = vec![linalg::zeros(d, d); degree + 1];
    for (i, &qi) in q.iter().enumerate() {
        p[i] += linalg::identity(d) * qi;
    }
    for (i, m) in qk.into_iter().enumerate() {
        p[i + 1] -= m;
    }
    Ok(p)
}

fn eval_matrix_poly(coeffs: &[ComplexMatrix], zeta: Complex64) -> ComplexMatrix {
    let mut acc = linalg::zeros(coeffs[0].nrows(), coeffs[0].ncols());
    for m in coeffs.iter().rev() {
        acc *= zeta;
        acc += m;
    }
    acc
}

/// Resolvent by the recursion `Σ_i P_i X(n-i) = q_n I` of the cleared
/// pencil. Agrees with [`resolvent_sequence`] in exact arithmetic and avoids
/// its cancellation when the kernel grows.
pub fn rational_resolvent_sequence(kernel: &ConvolutionKernel, n_max: usize) -> Result<Vec<ComplexMatrix>> {
    let p = rational_pencil(kernel)?;
    let q = tail_denominator(kernel, None);
    let d = kernel.dim_out();
    let mut xs: Vec<ComplexMatrix> = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let mut acc = if n < q.len() { linalg::identity(d) * q[n] } else { linalg::zeros(d, d) };
        for i in 1..p.len().min(n + 1) {
            acc -= &p[i] * &xs[n - i];
        }
        xs.push(acc);
    }
    Ok(xs)
}

/// `[I - ζK̂(ζ)]^{-1}`; fails with [`Error::Singular`] when the reciprocal
/// 2-norm condition number is at most `sigma_tol`.
pub fn transfer_resolvent(kernel: &ConvolutionKernel, zeta: Complex64, cfg: &AnalysisConfig) -> Result<ComplexMatrix> {
    let p = pencil(kernel, zeta)?;
    let sv = linalg::singular_values(&p);
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let rcond = if smax > 0.0 { smin / smax } else { 0.0 };
    if rcond <= cfg.sigma_tol {
        return Err(Error::Singular { zeta, rcond });
    }
    let d = kernel.dim_out();
    linalg::solve(&p, &linalg::identity(d)).ok_or(Error::Singular { zeta, rcond })
}

/// `X̂(ζ) = [I - ζK̂(ζ)]^{-1}`, continued as `q(ζ) P(ζ)^{-1}` outside the
/// convergence disc of `K̂`.
pub fn resolvent_transform(kernel: &ConvolutionKernel, zeta: Complex64) -> Result<ComplexMatrix> {
    require_square(kernel)?;
    let d = kernel.dim_out();
    let (m, scale) = if zeta.norm() < kernel.convergence_radius() {
        (pencil(kernel, zeta)?, Complex64::new(1.0, 0.0))
    } else {
        let q = tail_denominator(kernel, None);
        let qz = q.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &a| acc * zeta + a);
        (eval_matrix_poly(&rational_pencil(kernel)?, zeta), qz)
    };
    match linalg::solve(&m, &linalg::identity(d)) {
        Some(inv) => Ok(inv * scale),
        None => Err(Error::Singular { zeta, rcond: 0.0 }),
    }
}

struct CircleMin {
    sigma: f64,
    zeta: Complex64,
    pencil_norm: f64,
}

fn min_gain_on<F>(eval: F, radius: f64, cfg: &AnalysisConfig) -> Result<CircleMin>
where
    F: Fn(Complex64) -> Result<ComplexMatrix>,
{
    let norm = cfg.state_norm;
    let (sigma, theta) = circle::extremize(
        |t| Ok(norm.min_gain(&eval(Complex64::from_polar(radius, t))?)),
        cfg.grid_size,
        1e-15,
        Sense::Min,
    )?;
    let zeta = Complex64::from_polar(radius, theta);
    let pencil_norm = norm.matrix_norm(&eval(zeta)?);
    Ok(CircleMin { sigma, zeta, pencil_norm })
}

fn is_marginal(m: &CircleMin, cfg: &AnalysisConfig) -> bool {
    m.sigma <= cfg.sigma_tol * m.pencil_norm.max(f64::MIN_POSITIVE)
}

fn require_radius_above(kernel: &ConvolutionKernel, radius: f64) -> Result<()> {
    let r = kernel.convergence_radius();
    if r > radius {
        Ok(())
    } else {
        Err(Error::Domain(format!("convergence radius {r} does not exceed {radius}")))
    }
}

/// Smallest gain of `I - ζK̂(ζ)` over the unit circle, in the configured
/// state norm, and the point where it is attained.
pub fn circle_min_singular(kernel: &ConvolutionKernel, cfg: &AnalysisConfig) -> Result<(f64, Complex64)> {
    require_square(kernel)?;
    require_radius_above(kernel, 1.0)?;
    let m = min_gain_on(|z| pencil(kernel, z), 1.0, cfg)?;
    Ok((m.sigma, m.zeta))
}

/// Number of zeros of `det(I - ζK̂(ζ))` in the open unit disc.
pub fn winding_number_det(kernel: &ConvolutionKernel, cfg: &AnalysisConfig) -> Result<i64> {
    winding_number_det_on(kernel, 1.0, cfg)
}

/// Number of zeros of `det(I - ζK̂(ζ))` in `|ζ| < radius`.
pub fn winding_number_det_on(kernel: &ConvolutionKernel, radius: f64, cfg: &AnalysisConfig) -> Result<i64> {
    require_square(kernel)?;
    if !(radius > 0.0) {
        return Err(Error::InvalidInput(format!("circle radius must be positive, got {radius}")));
    }
    require_radius_above(kernel, radius)?;
    let eval = |z: Complex64| pencil(kernel, z);
    let m = min_gain_on(eval, radius, cfg)?;
    if is_marginal(&m, cfg) {
        return Err(Error::BoundaryZero { zeta: m.zeta, sigma_min: m.sigma });
    }
    circle::winding(|z| Ok(linalg::determinant(&eval(z)?)), radius, cfg.grid_size)
}

/// Locates a zero of `f` in `|ζ| < 1` given that `f(0) ≠ 0` and the winding
/// number on the unit circle is positive: bisection on the circle radius,
/// then Newton from the smallest `|f|` on the critical circle.
fn locate_zero<F>(f: F, grid: usize) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let count = |rho: f64| circle::winding(&f, rho, grid);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..48 {
        let mid = 0.5 * (lo + hi);
        match count(mid) {
            Ok(0) => lo = mid,
            _ => hi = mid,
        }
    }
    let (_, theta) = circle::extremize(|t| Ok(f(Complex64::from_polar(hi, t))?.norm()), grid, 1e-14, Sense::Min)?;
    let start = Complex64::from_polar(hi, theta);
    let mut z = start;
    let mut fz = f(z)?;
    for _ in 0..50 {
        let h = 1e-7;
        let df = (f(z + h)? - f(z - h)?) / (2.0 * h);
        if df.norm() == 0.0 {
            break;
        }
        let step = fz / df;
        let next = z - step;
        let fnext = f(next)?;
        if !(fnext.norm() < fz.norm()) {
            break;
        }
        z = next;
        fz = fnext;
        if step.norm() < 1e-15 {
            break;
        }
    }
    Ok(if z.norm() <= 1.0 { z } else { start })
}

/// Fits `log‖X(n)‖ ≈ log C - νn` on `window`. See [`decay_fit_norms`].
pub fn decay_fit(
    xs: &[ComplexMatrix],
    window: RangeInclusive<usize>,
    norm: StateNorm,
    nu_max: f64,
) -> Result<DecayEstimate> {
    let norms: Vec<f64> = xs.iter().map(|x| norm.matrix_norm(x)).collect();
    decay_fit_norms(&norms, window, nu_max)
}

/// Least-squares fit of `log a_n` against `n` over `window`, skipping zero
/// entries. `ν` is the negated slope, capped at `nu_max`; `C` is the
/// smallest constant with `a_n ≤ C e^{-νn}` at every sampled `n`. A window
/// whose entries vanish from some point on, with fewer than three nonzero
/// values, reports the capped rate.
pub fn decay_fit_norms(norms: &[f64], window: RangeInclusive<usize>, nu_max: f64) -> Result<DecayEstimate> {
    let (start, end) = (*window.start(), (*window.end()).min(norms.len().saturating_sub(1)));
    if norms.is_empty() || start > end {
        return Err(Error::InsufficientData { usable: 0 });
    }
    let points: Vec<(f64, f64)> = (start..=end)
        .filter(|&n| norms[n] > 0.0 && norms[n].is_finite())
        .map(|n| (n as f64, norms[n].ln()))
        .collect();
    let envelope = |nu: f64| -> f64 {
        let log_c = points.iter().map(|&(n, y)| y + nu * n).fold(f64::NEG_INFINITY, f64::max);
        if log_c == f64::NEG_INFINITY {
            1.0
        } else {
            log_c.exp()
        }
    };
    let window_arr = [start, end];
    if points.len() < 3 {
        if norms[end] == 0.0 {
            return Ok(DecayEstimate {
                c: envelope(nu_max),
                nu: nu_max,
                capped: true,
                window: window_arr,
                usable_points: points.len(),
            });
        }
        return Err(Error::InsufficientData { usable: points.len() });
    }
    let k = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / k;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let mut nu = -sxy / sxx;
    let capped = nu > nu_max;
    if capped {
        nu = nu_max;
    }
    Ok(DecayEstimate { c: envelope(nu), nu, capped, window: window_arr, usable_points: points.len() })
}

fn default_window(n_max: usize) -> RangeInclusive<usize> {
    (n_max / 2)..=n_max
}

/// Decides uniform exponential stability in the resolvent matrix sense.
///
/// Numerically singular pencils on the circle are reported as not stable
/// with `marginal` set rather than raised as errors.
pub fn ue_verdict(kernel: &ConvolutionKernel, cfg: &AnalysisConfig) -> Result<StabilityVerdict> {
    require_square(kernel)?;
    cfg.validate()?;
    let radius = kernel.convergence_radius();
    if radius > 1.0 {
        verdict_analytic(kernel, radius, cfg)
    } else {
        verdict_rational(kernel, radius, cfg)
    }
}

fn verdict_analytic(kernel: &ConvolutionKernel, radius: f64, cfg: &AnalysisConfig) -> Result<StabilityVerdict> {
    let eval = |z: Complex64| pencil(kernel, z);
    let det = |z: Complex64| Ok(linalg::determinant(&pencil(kernel, z)?));
    let m = min_gain_on(eval, 1.0, cfg)?;
    let mut marginal = is_marginal(&m, cfg);
    let mut winding = None;
    let mut witness = None;
    if !marginal {
        match circle::winding(det, 1.0, cfg.grid_size) {
            Ok(w) => {
                winding = Some(w);
                if w != 0 {
                    witness = Some(locate_zero(det, cfg.grid_size)?);
                }
            }
            Err(Error::BoundaryZero { .. }) => marginal = true,
            Err(e) => return Err(e),
        }
    }
    if marginal {
        witness = Some(m.zeta);
    }
    let ue = !marginal && winding == Some(0);
    let xs = resolvent_sequence(kernel, cfg.n_max)?;
    let decay = decay_fit(&xs, default_window(cfg.n_max), cfg.state_norm, cfg.nu_max).ok();
    let summary = if ue {
        let bound = if radius.is_finite() { format!("ln R = {}", radius.ln()) } else { "inf".to_string() };
        format!("UES in the resolvent matrix sense; UES w.r.t. every B^{{p,gamma}} with 0 < gamma < {bound} and w.r.t. B_0^{{inf,0}}")
    } else if marginal {
        "not UES (marginal): I - zeta*K(zeta) is numerically singular on the unit circle".to_string()
    } else {
        format!(
            "not UES: det(I - zeta*K(zeta)) has {} zero(s) in the open unit disc",
            winding.unwrap_or_default()
        )
    };
    Ok(StabilityVerdict {
        ue_resolvent_sense: ue,
        convergence_radius: radius,
        winding_number: winding,
        min_singular_value: m.sigma,
        min_singular_zeta: m.zeta,
        witness_zeta: witness,
        decay,
        fading_space_applicable: true,
        marginal,
        summary,
    })
}

/// Kernels with convergence radius at most one: `[I - ζK̂]^{-1} = q P^{-1}`
/// with the matrix polynomial `P = q(I - ζK̂)`. A zero-free `det P` on the
/// closed disc proves stability; otherwise the zeros may be cancelled by
/// `q`, and the decay of the resolvent decides.
fn verdict_rational(kernel: &ConvolutionKernel, radius: f64, cfg: &AnalysisConfig) -> Result<StabilityVerdict> {
    let p = rational_pencil(kernel)?;
    let eval = |z: Complex64| Ok(eval_matrix_poly(&p, z));
    let det = |z: Complex64| Ok(linalg::determinant(&eval_matrix_poly(&p, z)));
    let m = min_gain_on(eval, 1.0, cfg)?;
    let mut marginal = is_marginal(&m, cfg);
    let mut winding = None;
    if !marginal {
        match circle::winding(det, 1.0, cfg.grid_size) {
            Ok(w) => winding = Some(w),
            Err(Error::BoundaryZero { .. }) => marginal = true,
            Err(e) => return Err(e),
        }
    }
    let xs = rational_resolvent_sequence(kernel, cfg.n_max)?;
    let decay = decay_fit(&xs, default_window(cfg.n_max), cfg.state_norm, cfg.nu_max).ok();
    let proven = !marginal && winding == Some(0);
    let (ue, witness) = if proven {
        (true, None)
    } else {
        let decays = decay.is_some_and(|d| d.nu > DECAY_RATE_FLOOR);
        if decays {
            winding = None;
            (true, None)
        } else if marginal {
            (false, Some(m.zeta))
        } else {
            (false, Some(locate_zero(det, cfg.grid_size)?))
        }
    };
    let summary = if ue {
        format!("UES in the resolvent matrix sense; not defined on fading spaces (convergence radius {radius} <= 1)")
    } else if marginal {
        "not UES (marginal): the resolvent has a pole on the unit circle".to_string()
    } else {
        "not UES: the resolvent has a pole in the open unit disc".to_string()
    };
    Ok(StabilityVerdict {
        ue_resolvent_sense: ue,
        convergence_radius: radius,
        winding_number: winding,
        min_singular_value: m.sigma,
        min_singular_zeta: m.zeta,
        witness_zeta: witness,
        decay,
        fading_space_applicable: false,
        marginal,
        summary,
    })
}

/// Smallest fitted rate accepted as exponential decay when the zero count
/// is inconclusive.
const DECAY_RATE_FLOOR: f64 = 1e-3;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn example() -> ConvolutionKernel {
        ConvolutionKernel::scalar(&[], &[(c(-1.0, 0.0), c(0.5, 0.0))]).unwrap()
    }

    fn growing() -> ConvolutionKernel {
        ConvolutionKernel::scalar(&[], &[(c(-2.0, 0.0), c(2.0, 0.0))]).unwrap()
    }

    fn destabilized() -> ConvolutionKernel {
        ConvolutionKernel::scalar(&[c(-4.0 / 3.0, 0.0)], &[(c(-1.0, 0.0), c(0.5, 0.0))]).unwrap()
    }

    #[test]
    fn resolvent_of_the_reference_kernels() {
        let xs = resolvent_sequence(&example(), 3).unwrap();
        let want = [1.0, -1.0, 0.5, -0.25];
        for (x, w) in xs.iter().zip(want) {
            assert_eq!(x[(0, 0)], c(w, 0.0));
        }
        let xs = resolvent_sequence(&growing(), 6).unwrap();
        assert_eq!(xs[1][(0, 0)], c(-2.0, 0.0));
        assert!(xs[2..].iter().all(linalg::is_zero));
        let xs = resolvent_sequence(&ConvolutionKernel::zero(2, 2), 3).unwrap();
        assert_eq!(xs[0], linalg::identity(2));
        assert!(xs[1..].iter().all(linalg::is_zero));
    }

    #[test]
    fn rational_recursion_matches_convolution() {
        let k = ConvolutionKernel::scalar(
            &[c(0.1, 0.2), c(-0.3, 0.0)],
            &[(c(0.2, 0.0), c(0.5, 0.1)), (c(-0.1, 0.3), c(-0.4, 0.0))],
        )
        .unwrap();
        let a = resolvent_sequence(&k, 40).unwrap();
        let b = rational_resolvent_sequence(&k, 40).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-12);
        }
        let g = rational_resolvent_sequence(&growing(), 20).unwrap();
        assert_eq!(g[1][(0, 0)], c(-2.0, 0.0));
        assert!(g[2..].iter().all(linalg::is_zero));
    }

    #[test]
    fn transfer_resolvent_values() {
        let cfg = AnalysisConfig::default();
        let k = example();
        assert!((transfer_resolvent(&k, c(0.5, 0.0), &cfg).unwrap()[(0, 0)] - c(0.6, 0.0)).norm() < 1e-15);
        assert!((transfer_resolvent(&k, c(-1.0, 0.0), &cfg).unwrap()[(0, 0)] - c(3.0, 0.0)).norm() < 1e-14);
        let zero = ConvolutionKernel::zero(3, 3);
        assert_eq!(transfer_resolvent(&zero, c(0.3, 0.9), &cfg).unwrap(), linalg::identity(3));
        assert!(matches!(
            transfer_resolvent(&destabilized(), c(-1.0, 0.0), &cfg),
            Err(Error::Singular { .. })
        ));
        assert!(matches!(transfer_resolvent(&k, c(2.5, 0.0), &cfg), Err(Error::Domain(_))));
    }

    #[test]
    fn continued_resolvent_transform() {
        let z = c(0.3, -0.8);
        let want = (c(2.0, 0.0) - z) / (c(2.0, 0.0) + z);
        assert!((resolvent_transform(&example(), z).unwrap()[(0, 0)] - want).norm() < 1e-15);
        // X̂ = 1 - 2ζ is entire although K̂ only converges for |ζ| < 1/2
        let x = resolvent_transform(&growing(), c(0.0, 1.0)).unwrap();
        assert!((x[(0, 0)] - c(1.0, -2.0)).norm() < 1e-15);
    }

    #[test]
    fn circle_minimum_of_the_example() {
        let cfg = AnalysisConfig::default();
        let (s, z) = circle_min_singular(&example(), &cfg).unwrap();
        assert!((s - 1.0 / 3.0).abs() < 1e-15);
        assert!((z - c(-1.0, 0.0)).norm() < 1e-12);
        let (s, z) = circle_min_singular(&ConvolutionKernel::zero(2, 2), &cfg).unwrap();
        assert_eq!((s, z), (1.0, c(1.0, 0.0)));
        let (s, z) = circle_min_singular(&destabilized(), &cfg).unwrap();
        assert!(s < 1e-12 && (z - c(-1.0, 0.0)).norm() < 1e-12);
        assert!(circle_min_singular(&growing(), &cfg).is_err());
    }

    #[test]
    fn winding_numbers() {
        let cfg = AnalysisConfig::default();
        assert_eq!(winding_number_det(&example(), &cfg).unwrap(), 0);
        assert_eq!(winding_number_det(&ConvolutionKernel::zero(3, 3), &cfg).unwrap(), 0);
        assert!(matches!(winding_number_det(&destabilized(), &cfg), Err(Error::BoundaryZero { .. })));
        assert_eq!(winding_number_det_on(&destabilized(), 1.01, &cfg).unwrap(), 1);
        assert_eq!(winding_number_det_on(&destabilized(), 0.99, &cfg).unwrap(), 0);
        assert!(matches!(winding_number_det(&growing(), &cfg), Err(Error::Domain(_))));
    }

    #[test]
    fn verdicts() {
        let cfg = AnalysisConfig::default();
        let v = ue_verdict(&example(), &cfg).unwrap();
        assert!(v.ue_resolvent_sense && v.fading_space_applicable && v.winding_number == Some(0));
        assert!(v.witness_zeta.is_none());
        assert!((v.decay.unwrap().nu - 2f64.ln()).abs() < 1e-9);

        let v = ue_verdict(&growing(), &cfg).unwrap();
        assert!(v.ue_resolvent_sense && !v.fading_space_applicable);
        assert_eq!(v.convergence_radius, 0.5);
        assert!(v.decay.unwrap().capped);

        let v = ue_verdict(&destabilized(), &cfg).unwrap();
        assert!(!v.ue_resolvent_sense && v.marginal);
        assert!((v.witness_zeta.unwrap() - c(-1.0, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn unstable_kernels_get_interior_witnesses() {
        let cfg = AnalysisConfig::default();
        // 1 - 2ζ vanishes at ζ = 1/2
        let k = ConvolutionKernel::scalar(&[c(2.0, 0.0)], &[]).unwrap();
        let v = ue_verdict(&k, &cfg).unwrap();
        assert!(!v.ue_resolvent_sense && !v.marginal);
        assert_eq!(v.winding_number, Some(1));
        assert!((v.witness_zeta.unwrap() - c(0.5, 0.0)).norm() < 1e-10);

        // K(j) = 3^j: 1 - ζ/(1-3ζ) = (1-4ζ)/(1-3ζ), pole-free polynomial zero at 1/4
        let k = ConvolutionKernel::scalar(&[], &[(c(1.0, 0.0), c(3.0, 0.0))]).unwrap();
        let v = ue_verdict(&k, &cfg).unwrap();
        assert!(!v.ue_resolvent_sense);
        assert!((v.witness_zeta.unwrap() - c(0.25, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn decay_fits() {
        let xs = resolvent_sequence(&example(), 60).unwrap();
        let fit = decay_fit(&xs, 5..=40, StateNorm::Two, 50.0).unwrap();
        assert!((fit.nu - 2f64.ln()).abs() < 1e-6);
        for (n, x) in xs.iter().enumerate().take(41).skip(5) {
            assert!(x.norm() <= fit.c * (-fit.nu * n as f64).exp() * (1.0 + 1e-12));
        }
        let norms: Vec<f64> = (0..30).map(|n| (-0.3 * n as f64).exp()).collect();
        let fit = decay_fit_norms(&norms, 3..=25, 50.0).unwrap();
        assert!((fit.nu - 0.3).abs() < 1e-12 && !fit.capped);
        let xs = resolvent_sequence(&growing(), 20).unwrap();
        let fit = decay_fit(&xs, 1..=20, StateNorm::Two, 50.0).unwrap();
        assert!(fit.capped && fit.nu == 50.0);
        assert!(matches!(decay_fit_norms(&[1.0, 0.5], 0..=1, 50.0), Err(Error::InsufficientData { usable: 2 })));
    }
}
