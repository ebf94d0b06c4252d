//! Stability radii and destabilizing perturbations.
//!
//! Every radius is a phase-space factor divided by the maximum over the unit
//! circle of a transfer function `G(ζ) = Ê(ζ)[I - ζK̂(ζ)]^{-1}D`. Radii for
//! time-varying perturbations are exact in 2-norm mode and bracketed by the
//! Young bound on the corresponding operator otherwise.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circle::{self, Sense};
use crate::config::AnalysisConfig;
use crate::error::{Error, Result};
use crate::kernel::{ConvolutionKernel, PhaseSpace};
use crate::linalg::{self, ComplexMatrix, StateNorm};
use crate::operators::{self, PerturbationStructure};
use crate::spectral;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Validity {
    FadingOk,
    #[serde(rename = "nonfading_decaying_E")]
    NonfadingDecayingE,
    #[serde(rename = "zero_by_nondecaying_E")]
    ZeroByNondecayingE,
    ZeroUnstructuredNonfading,
    BaseNotUes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusKind {
    Structured,
    Unstructured,
    DelayedFeedback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusReport {
    pub kind: RadiusKind,
    #[serde(with = "crate::serde_util::ext_real")]
    pub r_c: f64,
    pub r_t_lower: f64,
    #[serde(with = "crate::serde_util::ext_real")]
    pub r_t_upper: f64,
    pub r_t_exact: bool,
    pub transfer_max: Option<f64>,
    #[serde(with = "crate::serde_util::option_complex_pair")]
    pub zeta_star: Option<Complex64>,
    pub space_factor: f64,
    pub space: PhaseSpace,
    pub validity: Validity,
    pub state_norm: StateNorm,
    /// Young upper bound on the operator whose inverse norm bounds `r_t`.
    #[serde(with = "option_ext_real")]
    pub operator_norm_upper: Option<f64>,
}

mod option_ext_real {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Wrap(#[serde(with = "crate::serde_util::ext_real")] f64);

    pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        x.map(Wrap).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

/// Result of [`synthesize_destabilizer`].
#[derive(Debug, Clone, PartialEq)]
pub struct Destabilizer {
    pub delta: ComplexMatrix,
    pub zeta_star: Complex64,
    pub transfer_max: f64,
    pub delta_norm: f64,
    /// Smallest singular value of the margin-0 perturbed pencil at `ζ*`,
    /// relative to `1 + ‖K̂(ζ*) + DΔÊ(ζ*)‖`.
    pub pencil_residual: f64,
}

/// `G(ζ) = Ê(ζ) X̂(ζ) D`.
pub fn transfer_matrix(
    kernel: &ConvolutionKernel,
    structure: &PerturbationStructure,
    zeta: Complex64,
) -> Result<ComplexMatrix> {
    let x = spectral::resolvent_transform(kernel, zeta)?;
    let e = structure.e().eval_ztransform(zeta)?;
    Ok(e * x * structure.d())
}

fn require_ues(kernel: &ConvolutionKernel, cfg: &AnalysisConfig) -> Result<()> {
    let v = spectral::ue_verdict(kernel, cfg)?;
    if v.ue_resolvent_sense {
        Ok(())
    } else {
        Err(Error::BaseUnstable(v.summary))
    }
}

fn max_on_circle(
    kernel: &ConvolutionKernel,
    structure: &PerturbationStructure,
    cfg: &AnalysisConfig,
) -> Result<(f64, Complex64)> {
    let norm = cfg.state_norm;
    let (m, theta) = circle::extremize(
        |t| Ok(norm.matrix_norm(&transfer_matrix(kernel, structure, linalg::unit_circle_point(t))?)),
        cfg.grid_size,
        cfg.refine_tol,
        Sense::Max,
    )?;
    Ok((m, linalg::unit_circle_point(theta)))
}

/// `M = max_{|ζ|=1} ‖G(ζ)‖` and a maximizer `ζ*`.
pub fn transfer_max_on_circle(
    kernel: &ConvolutionKernel,
    structure: &PerturbationStructure,
    cfg: &AnalysisConfig,
) -> Result<(f64, Complex64)> {
    cfg.validate()?;
    structure.check_against(kernel)?;
    if !structure.e_decays() {
        return Err(Error::NonDecayingStructure("E has a tail ratio of modulus >= 1".into()));
    }
    require_ues(kernel, cfg)?;
    max_on_circle(kernel, structure, cfg)
}

/// `‖G(e^{iθ})‖` on the uniform grid `θ_i = 2πi/n`.
pub fn circle_profile(
    kernel: &ConvolutionKernel,
    structure: &PerturbationStructure,
    n: usize,
    norm: StateNorm,
) -> Result<Vec<(f64, f64)>> {
    structure.check_against(kernel)?;
    (0..n)
        .map(|i| {
            let theta = circle::grid_theta(i, n);
            Ok((theta, norm.matrix_norm(&transfer_matrix(kernel, structure, linalg::unit_circle_point(theta))?)))
        })
        .collect()
}

fn check_space(kernel: &ConvolutionKernel, space: &PhaseSpace) -> Result<()> {
    if space.gamma() < 0.0 {
        return Err(Error::SpaceNotSupported(format!("gamma = {} < 0", space.gamma())));
    }
    if space.gamma() == 0.0 && space.p() != f64::INFINITY {
        return Err(Error::SpaceNotSupported(format!(
            "non-fading spaces are supported only for p = inf, got p = {}",
            space.p()
        )));
    }
    if !kernel.defined_on(space) {
        return Err(Error::SpaceNotSupported(format!("the kernel is not defined on {space}")));
    }
    Ok(())
}

fn reciprocal(m: f64) -> f64 {
    if m > 0.0 {
        1.0 / m
    } else {
        f64::INFINITY
    }
}

fn zero_report(kind: RadiusKind, space: &PhaseSpace, validity: Validity, cfg: &AnalysisConfig) -> RadiusReport {
    RadiusReport {
        kind,
        r_c: 0.0,
        r_t_lower: 0.0,
        r_t_upper: 0.0,
        r_t_exact: true,
        transfer_max: None,
        zeta_star: None,
        space_factor: space.weight_factor(),
        space: *space,
        validity,
        state_norm: cfg.state_norm,
        operator_norm_upper: None,
    }
}

struct Bracket {
    r_c: f64,
    r_t_lower: f64,
    exact: bool,
}

fn bracket(factor: f64, m: f64, operator_upper: f64, exact: bool) -> Bracket {
    let r_c = if m > 0.0 { factor / m } else { f64::INFINITY };
    let r_t_lower = if exact { r_c } else { (factor * reciprocal(operator_upper)).min(r_c) };
    Bracket { r_c, r_t_lower, exact }
}

/// Radii for perturbations `D Δ E(·)` with `Δ` time-invariant (`r_c`) or
/// time-varying (`r_t`). No phase-space factor enters.
pub fn radius_structured(
    kernel: &ConvolutionKernel,
    structure: &PerturbationStructure,
    space: &PhaseSpace,
    cfg: &AnalysisConfig,
) -> Result<RadiusReport> {
    cfg.validate()?;
    structure.check_against(kernel)?;
    check_space(kernel, space)?;
    require_ues(kernel, cfg)?;
    let fading = space.is_fading();
    if !structure.e_decays() {
        if fading {
            return Err(Error::NonDecayingStructure(format!("E is not defined on {space}")));
        }
        let mut r = zero_report(RadiusKind::Structured, space, Validity::ZeroByNondecayingE, cfg);
        r.space_factor = 1.0;
        return Ok(r);
    }
    if fading && !structure.e().defined_on(space) {
        return Err(Error::NonDecayingStructure(format!("E is not defined on {space}")));
    }
    let (m, zeta) = max_on_circle(kernel, structure, cfg)?;
    let upper = operators::io_norm(kernel, structure, cfg.state_norm, 1, cfg)?.upper;
    let b = bracket(1.0, m, upper, cfg.state_norm == StateNorm::Two);
    Ok(RadiusReport {
        kind: RadiusKind::Structured,
        r_c: b.r_c,
        r_t_lower: b.r_t_lower,
        r_t_upper: b.r_c,
        r_t_exact: b.exact,
        transfer_max: Some(m),
        zeta_star: Some(zeta),
        space_factor: 1.0,
        space: *space,
        validity: if fading { Validity::FadingOk } else { Validity::NonfadingDecayingE },
        state_norm: cfg.state_norm,
        operator_norm_upper: Some(upper),
    })
}

/// Radii for perturbations acting on the whole prehistory,
/// `(1 - e^{-pγ})^{1/p} / max_{|ζ|=1} ‖[I - ζK̂(ζ)]^{-1}‖`, and zero on
/// non-fading spaces.
pub fn radius_unstructured(kernel: &ConvolutionKernel, space: &PhaseSpace, cfg: &AnalysisConfig) -> Result<RadiusReport> {
    cfg.validate()?;
    if !kernel.is_square() {
        return Err(Error::Dimension("kernel must be square".into()));
    }
    check_space(kernel, space)?;
    require_ues(kernel, cfg)?;
    let identity = PerturbationStructure::memoryless(kernel.dim_out());
    let (m, zeta) = max_on_circle(kernel, &identity, cfg)?;
    let upper = operators::gamma_norm(kernel, cfg.state_norm, 1, cfg)?.upper;
    let mut report = if space.is_fading() {
        let exact = cfg.state_norm == StateNorm::Two && space.p() == 2.0;
        let b = bracket(space.weight_factor(), m, upper, exact);
        RadiusReport {
            kind: RadiusKind::Unstructured,
            r_c: b.r_c,
            r_t_lower: b.r_t_lower,
            r_t_upper: b.r_c,
            r_t_exact: b.exact,
            transfer_max: None,
            zeta_star: None,
            space_factor: space.weight_factor(),
            space: *space,
            validity: Validity::FadingOk,
            state_norm: cfg.state_norm,
            operator_norm_upper: Some(upper),
        }
    } else {
        zero_report(RadiusKind::Unstructured, space, Validity::ZeroUnstructuredNonfading, cfg)
    };
    report.transfer_max = Some(m);
    report.zeta_star = Some(zeta);
    report.operator_norm_upper = Some(upper);
    Ok(report)
}

/// Radii for the delayed feedback scheme, in which the disturbance sees the
/// prehistory of `𝔈 x`: `(1 - e^{-pγ})^{1/p} / max ‖𝔈[I - ζK̂(ζ)]^{-1}D‖`,
/// and zero on non-fading spaces unless `𝔈 = 0` or `D = 0`.
pub fn radius_delayed_feedback(
    kernel: &ConvolutionKernel,
    d: &ComplexMatrix,
    frak_e: &ComplexMatrix,
    space: &PhaseSpace,
    cfg: &AnalysisConfig,
) -> Result<RadiusReport> {
    cfg.validate()?;
    let structure = PerturbationStructure::new(d.clone(), ConvolutionKernel::memoryless(frak_e.clone()))?;
    structure.check_against(kernel)?;
    check_space(kernel, space)?;
    require_ues(kernel, cfg)?;
    let (m, zeta) = max_on_circle(kernel, &structure, cfg)?;
    let upper = operators::io_norm(kernel, &structure, cfg.state_norm, 1, cfg)?.upper;
    let trivial = linalg::is_zero(d) || linalg::is_zero(frak_e);
    let mut report = if space.is_fading() || trivial {
        let exact = cfg.state_norm == StateNorm::Two && (space.p() == 2.0 || trivial);
        let b = bracket(space.weight_factor(), m, upper, exact);
        RadiusReport {
            kind: RadiusKind::DelayedFeedback,
            r_c: b.r_c,
            r_t_lower: b.r_t_lower,
            r_t_upper: b.r_c,
            r_t_exact: b.exact,
            transfer_max: None,
            zeta_star: None,
            space_factor: space.weight_factor(),
            space: *space,
            validity: if space.is_fading() { Validity::FadingOk } else { Validity::NonfadingDecayingE },
            state_norm: cfg.state_norm,
            operator_norm_upper: None,
        }
    } else {
        zero_report(RadiusKind::DelayedFeedback, space, Validity::ZeroByNondecayingE, cfg)
    };
    report.transfer_max = Some(m);
    report.zeta_star = Some(zeta);
    report.operator_norm_upper = Some(upper);
    Ok(report)
}

/// `K(·) + D Δ E(·)`.
pub fn perturbed_kernel(
    kernel: &ConvolutionKernel,
    structure: &PerturbationStructure,
    delta: &ComplexMatrix,
) -> Result<ConvolutionKernel> {
    structure.check_against(kernel)?;
    if delta.nrows() != structure.input_dim() || delta.ncols() != structure.output_dim() {
        return Err(Error::Dimension(format!(
            "delta must be {}x{}, got {}x{}",
            structure.input_dim(),
            structure.output_dim(),
            delta.nrows(),
            delta.ncols()
        )));
    }
    kernel.add(&structure.e().left_mul(&(structure.d() * delta))?)
}

/// Rank-one `Δ = (1 + margin) v u^* / (ζ* M)` built from the dominant
/// singular pair `G(ζ*) v = M u`, so that `‖Δ‖ = (1 + margin)/M` and the
/// perturbed pencil is singular at `ζ*` for margin 0. The singularity is
/// checked on every call.
pub fn synthesize_destabilizer(
    kernel: &ConvolutionKernel,
    structure: &PerturbationStructure,
    margin: f64,
    cfg: &AnalysisConfig,
) -> Result<Destabilizer> {
    if cfg.state_norm != StateNorm::Two {
        return Err(Error::Mode(format!("destabilizer synthesis needs the 2-norm, got {}", cfg.state_norm)));
    }
    if !(margin.is_finite() && margin >= 0.0) {
        return Err(Error::InvalidInput(format!("margin must be finite and nonnegative, got {margin}")));
    }
    let (_, zeta) = transfer_max_on_circle(kernel, structure, cfg)?;
    let g = transfer_matrix(kernel, structure, zeta)?;
    let (m, u, v) = linalg::top_singular_triplet(&g);
    if !(m > 0.0) {
        return Err(Error::InvalidInput("the transfer function vanishes on the unit circle".into()));
    }
    let base = (&v * u.adjoint()) / (zeta * m);
    let perturbed = perturbed_kernel(kernel, structure, &base)?;
    let p = spectral::pencil(&perturbed, zeta)?;
    let scale = 1.0 + linalg::largest_singular_value(&perturbed.eval_ztransform(zeta)?);
    let residual = linalg::smallest_singular_value(&p) / scale;
    if !(residual < 1e-8) {
        return Err(Error::Certification(format!(
            "perturbed pencil at zeta* is not singular (relative sigma_min {residual:.3e})"
        )));
    }
    let delta = base * Complex64::new(1.0 + margin, 0.0);
    let delta_norm = linalg::largest_singular_value(&delta);
    Ok(Destabilizer { delta, zeta_star: zeta, transfer_max: m, delta_norm, pencil_residual: residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn example() -> ConvolutionKernel {
        ConvolutionKernel::scalar(&[], &[(c(-1.0, 0.0), c(0.5, 0.0))]).unwrap()
    }

    fn factor(p: f64, gamma: f64) -> f64 {
        if p == f64::INFINITY {
            1.0
        } else {
            (1.0 - (-p * gamma).exp()).powf(1.0 / p)
        }
    }

    #[test]
    fn transfer_maximum_of_the_example() {
        let cfg = AnalysisConfig::default();
        let (m, z) = transfer_max_on_circle(&example(), &PerturbationStructure::memoryless(1), &cfg).unwrap();
        assert!((m - 3.0).abs() < 1e-12);
        assert!((z.arg().abs() - std::f64::consts::PI).abs() < 1e-6);
        let (m, _) =
            transfer_max_on_circle(&ConvolutionKernel::zero(2, 2), &PerturbationStructure::memoryless(2), &cfg).unwrap();
        assert_eq!(m, 1.0);
    }

    #[test]
    fn structured_radius_is_space_independent() {
        let cfg = AnalysisConfig::default();
        let s = PerturbationStructure::memoryless(1);
        for space in ["2:0.5", "1:0.2", "inf:0.3", "inf:0:czero", "inf:0:ellp"] {
            let r = radius_structured(&example(), &s, &space.parse().unwrap(), &cfg).unwrap();
            assert!((r.r_c - 1.0 / 3.0).abs() < 1e-12, "{space}");
            assert!(r.r_t_exact && r.r_t_lower == r.r_c);
        }
        let r = radius_structured(&ConvolutionKernel::zero(1, 1), &s, &"2:0.1".parse().unwrap(), &cfg).unwrap();
        assert_eq!(r.r_c, 1.0);
    }

    #[test]
    fn nondecaying_output_gives_zero_on_nonfading_spaces() {
        let cfg = AnalysisConfig::default();
        let e = ConvolutionKernel::scalar(&[], &[(c(1.0, 0.0), c(1.0, 0.0))]).unwrap();
        let s = PerturbationStructure::new(linalg::identity(1), e).unwrap();
        let r = radius_structured(&example(), &s, &PhaseSpace::czero(0.0), &cfg).unwrap();
        assert_eq!((r.r_c, r.validity), (0.0, Validity::ZeroByNondecayingE));
        assert!(radius_structured(&example(), &s, &"2:0.3".parse().unwrap(), &cfg).is_err());
    }

    #[test]
    fn unstructured_radii_match_the_closed_form() {
        let cfg = AnalysisConfig::default();
        for p in [1.0, 2.0, f64::INFINITY] {
            for gamma in [0.1, 0.5] {
                let space = PhaseSpace::ellp(p, gamma).unwrap();
                let r = radius_unstructured(&example(), &space, &cfg).unwrap();
                assert!((r.r_c - factor(p, gamma) / 3.0).abs() < 1e-9, "p = {p}, gamma = {gamma}");
                assert!(r.r_t_lower <= r.r_c);
                assert_eq!(r.r_t_exact, p == 2.0);
            }
        }
        let r = radius_unstructured(&example(), &PhaseSpace::czero(0.0), &cfg).unwrap();
        assert_eq!((r.r_c, r.r_t_lower, r.validity), (0.0, 0.0, Validity::ZeroUnstructuredNonfading));
        let r = radius_unstructured(&ConvolutionKernel::zero(1, 1), &"inf:0.4".parse().unwrap(), &cfg).unwrap();
        assert_eq!(r.r_c, 1.0);
    }

    #[test]
    fn unsupported_spaces() {
        let cfg = AnalysisConfig::default();
        let k = example();
        for space in ["2:-0.1", "2:0", "2:0.8"] {
            assert!(matches!(radius_unstructured(&k, &space.parse().unwrap(), &cfg), Err(Error::SpaceNotSupported(_))));
        }
        let unstable = ConvolutionKernel::scalar(&[c(2.0, 0.0)], &[]).unwrap();
        assert!(matches!(radius_unstructured(&unstable, &"2:0.1".parse().unwrap(), &cfg), Err(Error::BaseUnstable(_))));
    }

    #[test]
    fn delayed_feedback_radii() {
        let cfg = AnalysisConfig::default();
        let one = linalg::identity(1);
        let space = PhaseSpace::ellp(2.0, 0.5).unwrap();
        let r = radius_delayed_feedback(&example(), &one, &one, &space, &cfg).unwrap();
        assert!((r.r_c - (1.0 - (-1.0f64).exp()).sqrt() / 3.0).abs() < 1e-12);
        let u = radius_unstructured(&example(), &space, &cfg).unwrap();
        assert_eq!(r.r_c, u.r_c);
        let r = radius_delayed_feedback(&example(), &one, &one, &PhaseSpace::czero(0.0), &cfg).unwrap();
        assert_eq!((r.r_c, r.validity), (0.0, Validity::ZeroByNondecayingE));
        let zero = linalg::zeros(1, 1);
        let r = radius_delayed_feedback(&example(), &zero, &one, &PhaseSpace::czero(0.0), &cfg).unwrap();
        assert_eq!(r.r_c, f64::INFINITY);
    }

    #[test]
    fn destabilizer_of_the_example() {
        let cfg = AnalysisConfig::default();
        let s = PerturbationStructure::memoryless(1);
        let d = synthesize_destabilizer(&example(), &s, 0.0, &cfg).unwrap();
        assert!((d.delta[(0, 0)] - c(-1.0 / 3.0, 0.0)).norm() < 1e-8);
        let k = perturbed_kernel(&example(), &s, &d.delta).unwrap();
        let v = spectral::ue_verdict(&k, &cfg).unwrap();
        assert!(!v.ue_resolvent_sense);
        assert!((v.witness_zeta.unwrap() - c(-1.0, 0.0)).norm() < 1e-6);

        let z = synthesize_destabilizer(&ConvolutionKernel::zero(1, 1), &s, 0.0, &cfg).unwrap();
        assert!((c(1.0, 0.0) - z.zeta_star * z.delta[(0, 0)]).norm() < 1e-12);
        assert!((z.delta_norm - 1.0).abs() < 1e-12);

        let bigger = synthesize_destabilizer(&example(), &s, 0.5, &cfg).unwrap();
        assert!((bigger.delta_norm - 0.5).abs() < 1e-12);
        let banach = cfg.with_norm(StateNorm::One);
        assert!(matches!(synthesize_destabilizer(&example(), &s, 0.0, &banach), Err(Error::Mode(_))));
    }
}
