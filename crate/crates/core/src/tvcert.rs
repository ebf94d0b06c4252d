//! Small-gain certificates for time-varying perturbations
//! `x(n+1) = Σ_j [K(j) + Δ(n,j)] x(n-j)` and a direct simulator.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::AnalysisConfig;
use crate::error::{Error, Result};
use crate::kernel::{ConvolutionKernel, PhaseSpace, Prehistory};
use crate::linalg::{self, ComplexVector, StateNorm};
use crate::operators::PerturbationStructure;
use crate::radii;
use crate::spectral::{self, DecayEstimate};

/// Relative margin by which `attained` must undercut a nominal threshold,
/// so that rounding never certifies a disturbance sitting at the threshold.
pub const STRICTNESS: f64 = 1e-9;

/// Rows `Δ(n, ·)` for `n < n0` followed by one kernel for all `n ≥ n0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceSpec {
    rows: Vec<ConvolutionKernel>,
    eventual: ConvolutionKernel,
}

impl DisturbanceSpec {
    pub fn new(rows: Vec<ConvolutionKernel>, eventual: ConvolutionKernel) -> Result<Self> {
        let shape = (eventual.dim_out(), eventual.dim_in());
        if let Some(n) = rows.iter().position(|r| (r.dim_out(), r.dim_in()) != shape) {
            return Err(Error::Dimension(format!(
                "row {n} is {}x{}, eventual kernel is {}x{}",
                rows[n].dim_out(),
                rows[n].dim_in(),
                shape.0,
                shape.1
            )));
        }
        if !eventual.decays_exponentially() {
            return Err(Error::InvalidInput("the eventual disturbance kernel must decay exponentially".into()));
        }
        Ok(Self { rows, eventual })
    }

    /// Time-invariant disturbance.
    pub fn constant(eventual: ConvolutionKernel) -> Result<Self> {
        Self::new(Vec::new(), eventual)
    }

    pub fn zero(d: usize) -> Self {
        Self { rows: Vec::new(), eventual: ConvolutionKernel::zero(d, d) }
    }

    pub fn n0(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[ConvolutionKernel] {
        &self.rows
    }

    pub fn eventual(&self) -> &ConvolutionKernel {
        &self.eventual
    }

    pub fn dim_out(&self) -> usize {
        self.eventual.dim_out()
    }

    pub fn dim_in(&self) -> usize {
        self.eventual.dim_in()
    }

    /// `Δ(n, ·)`.
    pub fn row(&self, n: usize) -> &ConvolutionKernel {
        self.rows.get(n).unwrap_or(&self.eventual)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CertKind {
    N1,
    N2,
    Ninf,
    #[serde(rename = "general_p")]
    GeneralP,
    #[serde(rename = "radius_smallgain")]
    RadiusSmallgain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub holds: bool,
    pub test_kind: CertKind,
    /// Effective threshold: `nominal_threshold · (1 - 1e-9)`.
    pub threshold: f64,
    #[serde(with = "crate::serde_util::ext_real")]
    pub nominal_threshold: f64,
    /// Supremum of the tested quantity over the eventual regime.
    pub attained: f64,
    pub space: PhaseSpace,
    pub n0: usize,
    /// Same quantity for the rows `n < n0`; diagnostic only.
    #[serde(with = "ext_real_vec")]
    pub prefix_attained: Vec<f64>,
}

mod ext_real_vec {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Wrap(#[serde(with = "crate::serde_util::ext_real")] f64);

    pub fn serialize<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(xs.iter().map(|&x| Wrap(x)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<Wrap>::deserialize(d)?.into_iter().map(|w| w.0).collect())
    }
}

fn certificate(kind: CertKind, nominal: f64, attained: f64, space: PhaseSpace, n0: usize, prefix: Vec<f64>) -> Certificate {
    let threshold = if nominal.is_finite() { nominal * (1.0 - STRICTNESS) } else { f64::MAX };
    Certificate {
        holds: attained < threshold,
        test_kind: kind,
        threshold,
        nominal_threshold: nominal,
        attained,
        space,
        n0,
        prefix_attained: prefix,
    }
}

/// `(Σ_j ‖e^{jγ} Δ(j)‖^{p'})^{1/p'}`, or `sup_j ‖e^{jγ} Δ(j)‖` when
/// `p' = ∞`. A single geometric tail is summed in closed form; several
/// tails are summed term by term up to a geometric remainder bound, which
/// is added, so the value is then an upper bound accurate to rounding.
pub fn weighted_row_norm(row: &ConvolutionKernel, space: &PhaseSpace, norm: StateNorm) -> Result<f64> {
    let pc = space.conjugate();
    let w = row.weighted(space.gamma());
    if !row.defined_on(space) {
        return Err(Error::DivergentWeight(format!("the weighted row is not in l^{pc} on {space}")));
    }
    let head: Vec<f64> = w.head().iter().map(|m| norm.matrix_norm(m)).collect();
    let j0 = w.head().len();
    // moduli clamped at one: ratios on the unit circle pass the check above only for p' = ∞
    let tails: Vec<(f64, f64)> =
        w.tails().iter().map(|t| (norm.matrix_norm(&t.coeff), t.ratio.norm().min(1.0))).collect();
    let envelope = |j: usize| -> f64 { tails.iter().map(|&(c, r)| c * r.powi(j as i32)).sum() };
    if pc == f64::INFINITY {
        let mut best = head.iter().copied().fold(0.0, f64::max);
        match tails.as_slice() {
            [] => {}
            [(c, r)] => best = best.max(c * r.powi(j0 as i32)),
            _ => {
                let value_at = |j: usize| norm.matrix_norm(&w.coefficient_at(j));
                let mut j = j0;
                while envelope(j) > best && j < j0 + MAX_EXPLICIT_TERMS {
                    best = best.max(value_at(j));
                    j += 1;
                }
                best = best.max(envelope(j));
            }
        }
        return Ok(best);
    }
    let mut sum: f64 = head.iter().map(|x| x.powf(pc)).sum();
    match tails.as_slice() {
        [] => {}
        [(c, r)] => sum += (c * r.powi(j0 as i32)).powf(pc) / (1.0 - r.powf(pc)),
        _ => {
            let rho = tails.iter().map(|t| t.1).fold(0.0, f64::max);
            let tail_bound = |j: usize| envelope(j).powf(pc) / (1.0 - rho.powf(pc));
            let mut j = j0;
            while tail_bound(j) > 1e-17 * sum && j < j0 + MAX_EXPLICIT_TERMS {
                sum += norm.matrix_norm(&w.coefficient_at(j)).powf(pc);
                j += 1;
            }
            sum += tail_bound(j);
        }
    }
    Ok(sum.powf(1.0 / pc))
}

const MAX_EXPLICIT_TERMS: usize = 100_000;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn prefix_values<F: Fn(&ConvolutionKernel) -> Result<f64>>(spec: &DisturbanceSpec, f: F) -> Vec<f64> {
    spec.rows().iter().map(|r| f(r).unwrap_or(f64::INFINITY)).collect()
}

/// Small-gain test against the time-varying radius. Without a structure the
/// rows act on the whole prehistory and are measured by
/// [`weighted_row_norm`] against the unstructured radius; with a structure
/// `(D, E)` every row must be a single matrix `Δ(n)` and is measured by its
/// operator norm against the structured radius. Only the eventual regime
/// enters the verdict.
pub fn smallgain_certify(
    kernel: &ConvolutionKernel,
    spec: &DisturbanceSpec,
    space: &PhaseSpace,
    structure: Option<&PerturbationStructure>,
    cfg: &AnalysisConfig,
) -> Result<Certificate> {
    let norm = cfg.state_norm;
    match structure {
        None => {
            if spec.dim_out() != kernel.dim_out() || spec.dim_in() != kernel.dim_in() {
                return Err(Error::Dimension("disturbance rows must match the kernel dimensions".into()));
            }
            let report = radii::radius_unstructured(kernel, space, cfg)?;
            let attained = weighted_row_norm(spec.eventual(), space, norm)?;
            let prefix = prefix_values(spec, |r| weighted_row_norm(r, space, norm));
            Ok(certificate(CertKind::RadiusSmallgain, report.r_t_lower, attained, *space, spec.n0(), prefix))
        }
        Some(s) => {
            if spec.dim_out() != s.input_dim() || spec.dim_in() != s.output_dim() {
                return Err(Error::Dimension(format!(
                    "structured disturbance rows must be {}x{}",
                    s.input_dim(),
                    s.output_dim()
                )));
            }
            let memoryless = |r: &ConvolutionKernel| r.tails().is_empty() && r.head().len() <= 1;
            if !memoryless(spec.eventual()) || !spec.rows().iter().all(memoryless) {
                return Err(Error::InvalidInput("structured disturbances must be single matrices per time step".into()));
            }
            let report = radii::radius_structured(kernel, s, space, cfg)?;
            let op_norm = |r: &ConvolutionKernel| Ok(norm.matrix_norm(&r.coefficient_at(0)));
            let attained = op_norm(spec.eventual())?;
            let prefix = prefix_values(spec, op_norm);
            Ok(certificate(CertKind::RadiusSmallgain, report.r_t_lower, attained, *space, spec.n0(), prefix))
        }
    }
}

/// Sufficient test for the unperturbed-zero system `x(n+1) = Σ_j Q(n,j)
/// x(n-j)` on `B^{p,β}`: for `p > 1`, `sup Σ_j ‖e^{jβ}Q(n,j)‖^{p'} <
/// (1 - e^{-pβ})^{1/(p-1)}` (threshold 1 for `p = ∞`); for `p = 1`,
/// `sup_j ‖e^{jβ}Q(n,j)‖ < 1 - e^{-β}`.
pub fn base_zero_test(spec: &DisturbanceSpec, p: f64, beta: f64, norm: StateNorm) -> Result<Certificate> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidInput(format!("beta must be positive, got {beta}")));
    }
    if spec.dim_out() != spec.dim_in() {
        return Err(Error::Dimension("disturbance rows must be square".into()));
    }
    let space = PhaseSpace::ellp(p, beta)?;
    let kind = if p == 1.0 {
        CertKind::N1
    } else if p == 2.0 {
        CertKind::N2
    } else if p == f64::INFINITY {
        CertKind::Ninf
    } else {
        CertKind::GeneralP
    };
    let pc = space.conjugate();
    let (threshold, measure): (f64, Box<dyn Fn(&ConvolutionKernel) -> Result<f64>>) = if p == 1.0 {
        (-(-beta).exp_m1(), Box::new(move |r| weighted_row_norm(r, &space, norm)))
    } else {
        let exponent = if p == f64::INFINITY { 0.0 } else { 1.0 / (p - 1.0) };
        let t = (-(-p * beta).exp_m1()).powf(exponent);
        (t, Box::new(move |r| Ok(weighted_row_norm(r, &space, norm)?.powf(pc))))
    };
    let attained = measure(spec.eventual())?;
    let prefix = prefix_values(spec, &measure);
    Ok(certificate(kind, threshold, attained, space, spec.n0(), prefix))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub tau: usize,
    /// `x(τ), x(τ+1), …, x(τ+horizon)`.
    pub states: Vec<ComplexVector>,
    pub decay: Option<DecayEstimate>,
}

/// Direct recursion from the prehistory `x(τ+m) = φ^{[m]}`, `m ≤ 0`. All
/// sums are finite because the prehistory has finite support. The decay is
/// fitted on the second half of the horizon.
pub fn simulate(
    kernel: &ConvolutionKernel,
    spec: Option<&DisturbanceSpec>,
    init: &Prehistory,
    tau: usize,
    horizon: usize,
    cfg: &AnalysisConfig,
) -> Result<Trajectory> {
    if !kernel.is_square() {
        return Err(Error::Dimension("kernel must be square".into()));
    }
    let d = kernel.dim_out();
    if init.dim() != d {
        return Err(Error::Dimension(format!("prehistory has dimension {}, kernel {d}", init.dim())));
    }
    if let Some(s) = spec {
        if s.dim_out() != d || s.dim_in() != d {
            return Err(Error::Dimension("disturbance rows must match the kernel dimensions".into()));
        }
    }
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be positive".into()));
    }
    let depth = init.entries().first().map_or(0, |(m, _)| m.unsigned_abs() as usize);
    let span = depth + horizon;
    let ks = kernel.coefficients(span);
    let eventual = spec.map(|s| s.eventual().coefficients(span));
    // history[i] = x(τ - depth + i)
    let mut history: Vec<ComplexVector> = (0..=depth).map(|i| init.value_at(i as i64 - depth as i64)).collect();
    for step in 0..horizon {
        let n = tau + step;
        let now = depth + step;
        let prefix_row = spec.filter(|s| n < s.n0()).map(|s| s.row(n));
        let mut next = ComplexVector::zeros(d);
        for j in 0..=now {
            let x = &history[now - j];
            if x.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
                continue;
            }
            next.gemv(ONE, &ks[j], x, ONE);
            if prefix_row.is_none() {
                if let Some(t) = &eventual {
                    next.gemv(ONE, &t[j], x, ONE);
                }
            }
        }
        if let Some(row) = prefix_row {
            next += apply_row(row, &history);
        }
        history.push(next);
    }
    let states: Vec<ComplexVector> = history.split_off(depth);
    let norms: Vec<f64> = states.iter().map(|x| cfg.state_norm.vector_norm(x.iter())).collect();
    let decay = spectral::decay_fit_norms(&norms, (horizon / 2)..=horizon, cfg.nu_max).ok();
    Ok(Trajectory { tau, states, decay })
}

/// `Σ_j Δ(j) h(now - j)` for the newest entry `h(now)` of `history`, with
/// each tail reduced to one matrix-vector product.
fn apply_row(row: &ConvolutionKernel, history: &[ComplexVector]) -> ComplexVector {
    let now = history.len() - 1;
    let mut acc = ComplexVector::zeros(row.dim_out());
    for (j, m) in row.head().iter().enumerate().take(now + 1) {
        acc.gemv(ONE, m, &history[now - j], ONE);
    }
    let j0 = row.head().len();
    for t in row.tails() {
        let mut s = ComplexVector::zeros(row.dim_in());
        let mut w = linalg::powi(t.ratio, j0);
        for j in j0..=now {
            s.axpy(w, &history[now - j], ONE);
            w *= t.ratio;
        }
        acc.gemv(ONE, &t.coeff, &s, ONE);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn example() -> ConvolutionKernel {
        ConvolutionKernel::scalar(&[], &[(c(-1.0, 0.0), c(0.5, 0.0))]).unwrap()
    }

    fn const_row(a: f64) -> ConvolutionKernel {
        ConvolutionKernel::scalar(&[c(a, 0.0)], &[]).unwrap()
    }

    #[test]
    fn weighted_row_norms() {
        let row = ConvolutionKernel::scalar(&[], &[(c(0.7, 0.0), c((-0.5f64).exp(), 0.0))]).unwrap();
        let space = PhaseSpace::ellp(1.0, 0.2).unwrap();
        assert!((weighted_row_norm(&row, &space, StateNorm::Two).unwrap() - 0.7).abs() < 1e-15);
        let space2 = PhaseSpace::ellp(2.0, 0.2).unwrap();
        assert_eq!(weighted_row_norm(&ConvolutionKernel::zero(2, 2), &space2, StateNorm::Two).unwrap(), 0.0);
        assert_eq!(weighted_row_norm(&const_row(-0.4), &space2, StateNorm::Two).unwrap(), 0.4);
        let two_tails = ConvolutionKernel::scalar(&[], &[(c(0.5, 0.0), c(0.5, 0.0)), (c(0.25, 0.0), c(-0.25, 0.0))]).unwrap();
        let want: f64 = (0..200).map(|j| (0.5 * 0.5f64.powi(j) + 0.25 * (-0.25f64).powi(j)).abs().powi(2)).sum::<f64>().sqrt();
        let got = weighted_row_norm(&two_tails, &PhaseSpace::ellp(2.0, 0.0).unwrap(), StateNorm::Two).unwrap();
        assert!(got >= want && got - want < 1e-14);
        let growing = ConvolutionKernel::scalar(&[], &[(c(1.0, 0.0), c(0.9, 0.0))]).unwrap();
        assert!(matches!(weighted_row_norm(&growing, &space2, StateNorm::Two), Err(Error::DivergentWeight(_))));
    }

    #[test]
    fn unstructured_certificates() {
        let cfg = AnalysisConfig::default();
        let space = PhaseSpace::ellp(2.0, 0.5).unwrap();
        let spec = DisturbanceSpec::constant(const_row(-0.3)).unwrap();
        let cert = smallgain_certify(&example(), &spec, &space, None, &cfg).unwrap();
        assert!(!cert.holds);
        assert!((cert.nominal_threshold - (1.0 - (-1.0f64).exp()).sqrt() / 3.0).abs() < 1e-12);
        let cert = smallgain_certify(&example(), &DisturbanceSpec::zero(1), &space, None, &cfg).unwrap();
        assert!(cert.holds);
    }

    #[test]
    fn sharp_rows_are_rejected() {
        let cfg = AnalysisConfig::default();
        let beta = 0.3;
        let space = PhaseSpace::ellp(f64::INFINITY, beta).unwrap();
        // Δ(j) = a e^{-2βj} with Σ_j |Δ(j)| e^{jβ} = a/(1 - e^{-β}) = 1/3
        let row = ConvolutionKernel::scalar(
            &[],
            &[(c((1.0 - (-beta).exp()) / 3.0, 0.0), c((-2.0 * beta).exp(), 0.0))],
        )
        .unwrap();
        let attained = weighted_row_norm(&row, &space, StateNorm::Two).unwrap();
        assert!((attained - 1.0 / 3.0).abs() < 1e-15);
        let cert = smallgain_certify(&example(), &DisturbanceSpec::constant(row).unwrap(), &space, None, &cfg).unwrap();
        assert!(!cert.holds);
    }

    #[test]
    fn structured_certificates_use_operator_norms() {
        let cfg = AnalysisConfig::default();
        let s = PerturbationStructure::memoryless(1);
        let space = PhaseSpace::ellp(2.0, 0.5).unwrap();
        let ok = DisturbanceSpec::new(vec![const_row(5.0)], const_row(0.3)).unwrap();
        let cert = smallgain_certify(&example(), &ok, &space, Some(&s), &cfg).unwrap();
        assert!(cert.holds && cert.prefix_attained == vec![5.0]);
        let bad = DisturbanceSpec::constant(const_row(1.0 / 3.0)).unwrap();
        assert!(!smallgain_certify(&example(), &bad, &space, Some(&s), &cfg).unwrap().holds);
    }

    #[test]
    fn base_zero_tests() {
        let ln2 = 2f64.ln();
        // sup_j |Q(j)| e^{jβ} = 0.4 at j = 0
        let row = ConvolutionKernel::scalar(&[], &[(c(0.4, 0.0), c(0.25, 0.0))]).unwrap();
        let cert = base_zero_test(&DisturbanceSpec::constant(row).unwrap(), 1.0, ln2, StateNorm::Two).unwrap();
        assert!(cert.holds && cert.test_kind == CertKind::N1);
        assert!((cert.nominal_threshold - 0.5).abs() < 1e-15);
        for p in [1.0, 2.0, 3.5, f64::INFINITY] {
            assert!(base_zero_test(&DisturbanceSpec::zero(2), p, 0.7, StateNorm::Two).unwrap().holds);
        }
        let beta: f64 = 0.5;
        let row = ConvolutionKernel::scalar(&[], &[(c(1.0 - (-beta).exp(), 0.0), c((-2.0 * beta).exp(), 0.0))]).unwrap();
        let cert = base_zero_test(&DisturbanceSpec::constant(row).unwrap(), f64::INFINITY, beta, StateNorm::Two).unwrap();
        assert!((cert.attained - 1.0).abs() < 1e-15 && cert.nominal_threshold == 1.0);
        assert!(!cert.holds && cert.test_kind == CertKind::Ninf);
    }

    #[test]
    fn impulse_trajectories_are_resolvent_columns() {
        let cfg = AnalysisConfig::default();
        let k = example();
        let traj = simulate(&k, None, &Prehistory::impulse(1, 0, 0).unwrap(), 0, 30, &cfg).unwrap();
        let xs = spectral::resolvent_sequence(&k, 30).unwrap();
        for (x, want) in traj.states.iter().zip(&xs) {
            assert!((x[0] - want[(0, 0)]).norm() < 1e-15);
        }
        let growing = ConvolutionKernel::scalar(&[], &[(c(-2.0, 0.0), c(2.0, 0.0))]).unwrap();
        let traj = simulate(&growing, None, &Prehistory::impulse(1, 0, 0).unwrap(), 3, 10, &cfg).unwrap();
        assert_eq!(traj.states[1][0], c(-2.0, 0.0));
        assert!(traj.states[2..].iter().all(|x| x[0] == c(0.0, 0.0)));
    }

    #[test]
    fn zero_kernel_forgets_its_prehistory() {
        let cfg = AnalysisConfig::default();
        let v = ComplexVector::from_element(2, c(1.0, -1.0));
        let init = Prehistory::new(2, vec![(0, v.clone()), (-4, v)]).unwrap();
        let traj = simulate(&ConvolutionKernel::zero(2, 2), None, &init, 0, 12, &cfg).unwrap();
        assert!(traj.states[1..].iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn deep_prehistory_reaches_the_future() {
        let cfg = AnalysisConfig::default();
        // x(n+1) = x(n-2): the value at m = -2 reappears at n = 1
        let k = ConvolutionKernel::scalar(&[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], &[]).unwrap();
        let init = Prehistory::new(1, vec![(-2, ComplexVector::from_element(1, c(7.0, 0.0)))]).unwrap();
        let traj = simulate(&k, None, &init, 5, 4, &cfg).unwrap();
        let got: Vec<_> = traj.states.iter().map(|x| x[0].re).collect();
        assert_eq!(got, vec![0.0, 7.0, 0.0, 0.0, 7.0]);
    }
}
