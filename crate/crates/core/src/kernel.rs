//! Convolution kernels, phase spaces and prehistories.
//!
//! A kernel is a finite head `K(0), …, K(J-1)` followed by a mixture of
//! geometric tails `Σ_k C_k r_k^j` for `j ≥ J`, which keeps every Z-transform
//! in closed form.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, ComplexVector, StateNorm};

/// One geometric tail `coeff · ratio^j`, active for `j ≥ J`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricTail {
    pub coeff: ComplexMatrix,
    pub ratio: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionKernel {
    dim_out: usize,
    dim_in: usize,
    head: Vec<ComplexMatrix>,
    tails: Vec<GeometricTail>,
}

fn canonical_ratio(r: Complex64) -> Complex64 {
    // folds -0.0 into +0.0 so that the ordering by argument is stable
    Complex64::new(r.re + 0.0, r.im + 0.0)
}

fn ratio_order(a: &Complex64, b: &Complex64) -> Ordering {
    a.arg()
        .total_cmp(&b.arg())
        .then_with(|| a.norm().total_cmp(&b.norm()))
        .then_with(|| a.re.total_cmp(&b.re))
        .then_with(|| a.im.total_cmp(&b.im))
}

impl ConvolutionKernel {
    /// Builds a kernel, merging tails with equal ratios and dropping tails
    /// whose merged coefficient vanishes. Tails are stored ordered by ratio
    /// argument, then modulus.
    pub fn new(
        dim_out: usize,
        dim_in: usize,
        head: Vec<ComplexMatrix>,
        tails: Vec<GeometricTail>,
    ) -> Result<Self> {
        if dim_out == 0 || dim_in == 0 {
            return Err(Error::Dimension(format!("kernel dimensions must be positive, got {dim_out}x{dim_in}")));
        }
        let check = |m: &ComplexMatrix, what: &str| -> Result<()> {
            if m.nrows() != dim_out || m.ncols() != dim_in {
                return Err(Error::Dimension(format!(
                    "{what} is {}x{}, kernel is {dim_out}x{dim_in}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            linalg::ensure_finite(m)
        };
        for (j, m) in head.iter().enumerate() {
            check(m, &format!("head[{j}]"))?;
        }
        let mut merged: Vec<GeometricTail> = Vec::with_capacity(tails.len());
        for (k, t) in tails.into_iter().enumerate() {
            check(&t.coeff, &format!("tail[{k}].coeff"))?;
            let ratio = canonical_ratio(t.ratio);
            if !(ratio.re.is_finite() && ratio.im.is_finite()) || ratio.norm() == 0.0 {
                return Err(Error::InvalidInput(format!("tail[{k}] ratio must be finite and nonzero")));
            }
            match merged.iter_mut().find(|m| m.ratio == ratio) {
                Some(existing) => existing.coeff += &t.coeff,
                None => merged.push(GeometricTail { coeff: t.coeff, ratio }),
            }
        }
        merged.retain(|t| !linalg::is_zero(&t.coeff));
        merged.sort_by(|a, b| ratio_order(&a.ratio, &b.ratio));
        Ok(Self { dim_out, dim_in, head, tails: merged })
    }

    pub fn zero(dim_out: usize, dim_in: usize) -> Self {
        Self { dim_out, dim_in, head: Vec::new(), tails: Vec::new() }
    }

    /// Kernel with a single nonzero coefficient `K(0) = m`.
    pub fn memoryless(m: ComplexMatrix) -> Self {
        Self { dim_out: m.nrows(), dim_in: m.ncols(), head: vec![m], tails: Vec::new() }
    }

    /// Scalar kernel from head values and `(coeff, ratio)` tails.
    pub fn scalar(head: &[Complex64], tails: &[(Complex64, Complex64)]) -> Result<Self> {
        Self::new(
            1,
            1,
            head.iter().map(|&z| linalg::scalar(z)).collect(),
            tails
                .iter()
                .map(|&(coeff, ratio)| GeometricTail { coeff: linalg::scalar(coeff), ratio })
                .collect(),
        )
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn is_square(&self) -> bool {
        self.dim_out == self.dim_in
    }

    pub fn head(&self) -> &[ComplexMatrix] {
        &self.head
    }

    pub fn tails(&self) -> &[GeometricTail] {
        &self.tails
    }

    pub fn is_zero(&self) -> bool {
        self.tails.is_empty() && self.head.iter().all(linalg::is_zero)
    }

    /// `K(j)`.
    pub fn coefficient_at(&self, j: usize) -> ComplexMatrix {
        if j < self.head.len() {
            return self.head[j].clone();
        }
        let mut acc = linalg::zeros(self.dim_out, self.dim_in);
        for t in &self.tails {
            acc += &t.coeff * linalg::powi(t.ratio, j);
        }
        acc
    }

    /// `K(0), …, K(n-1)`.
    pub fn coefficients(&self, n: usize) -> Vec<ComplexMatrix> {
        (0..n).map(|j| self.coefficient_at(j)).collect()
    }

    /// `+∞` without tails, otherwise `min_k 1/|r_k|`.
    pub fn convergence_radius(&self) -> f64 {
        self.tails.iter().map(|t| 1.0 / t.ratio.norm()).fold(f64::INFINITY, f64::min)
    }

    /// All tails strictly inside the unit circle (or none at all).
    pub fn decays_exponentially(&self) -> bool {
        self.tails.iter().all(|t| t.ratio.norm() < 1.0)
    }

    /// `K̂(ζ) = Σ_j ζ^j K(j)`, defined for `|ζ|` below the convergence radius.
    pub fn eval_ztransform(&self, zeta: Complex64) -> Result<ComplexMatrix> {
        let radius = self.convergence_radius();
        if !(zeta.norm() < radius) {
            return Err(Error::Domain(format!(
                "|zeta| = {} is not below the convergence radius {radius}",
                zeta.norm()
            )));
        }
        Ok(self.eval_closed_form(zeta))
    }

    /// Meromorphic continuation of `K̂` through the tail closed forms; fails
    /// only at (numerical) poles `ζ = 1/r_k`.
    pub fn eval_continued(&self, zeta: Complex64) -> Result<ComplexMatrix> {
        for t in &self.tails {
            let denom = Complex64::new(1.0, 0.0) - t.ratio * zeta;
            if denom.norm() < 1e-14 {
                return Err(Error::Domain(format!("zeta = {zeta} is a pole of the kernel's Z-transform")));
            }
        }
        Ok(self.eval_closed_form(zeta))
    }

    fn eval_closed_form(&self, zeta: Complex64) -> ComplexMatrix {
        let mut acc = linalg::zeros(self.dim_out, self.dim_in);
        // Horner on the head polynomial
        for m in self.head.iter().rev() {
            acc *= zeta;
            acc += m;
        }
        let j0 = self.head.len();
        for t in &self.tails {
            let rz = t.ratio * zeta;
            let w = linalg::powi(rz, j0) / (Complex64::new(1.0, 0.0) - rz);
            acc += &t.coeff * w;
        }
        acc
    }

    /// Whether `Σ_j (e^{γj} ‖K(j)‖)^{p'}` is finite (bounded for `p' = ∞`),
    /// i.e. the system is defined on the phase space.
    pub fn defined_on(&self, space: &PhaseSpace) -> bool {
        let sup_only = !space.conjugate().is_finite();
        self.tails.iter().all(|t| {
            let log_rho = space.gamma() + t.ratio.norm().ln();
            if sup_only {
                log_rho <= 1e-14
            } else {
                log_rho < 0.0
            }
        })
    }

    /// Kernel with coefficients `e^{γj} K(j)`.
    pub fn weighted(&self, gamma: f64) -> ConvolutionKernel {
        let head = self
            .head
            .iter()
            .enumerate()
            .map(|(j, m)| m * Complex64::new((gamma * j as f64).exp(), 0.0))
            .collect();
        let factor = gamma.exp();
        let tails = self
            .tails
            .iter()
            .map(|t| GeometricTail { coeff: t.coeff.clone(), ratio: t.ratio * factor })
            .collect();
        ConvolutionKernel { dim_out: self.dim_out, dim_in: self.dim_in, head, tails }
    }

    /// Head extended to length `len` by materializing tail values.
    fn head_padded(&self, len: usize) -> Vec<ComplexMatrix> {
        (0..len.max(self.head.len())).map(|j| self.coefficient_at(j)).collect()
    }

    /// Tails re-based so that they start at `j0 ≥ J`: coefficients are
    /// unchanged since each tail is `C r^j` in absolute `j`.
    pub fn add(&self, other: &ConvolutionKernel) -> Result<ConvolutionKernel> {
        if self.dim_out != other.dim_out || self.dim_in != other.dim_in {
            return Err(Error::Dimension(format!(
                "cannot add {}x{} and {}x{} kernels",
                self.dim_out, self.dim_in, other.dim_out, other.dim_in
            )));
        }
        let len = self.head.len().max(other.head.len());
        let a = self.head_padded(len);
        let b = other.head_padded(len);
        let head = a.into_iter().zip(b).map(|(x, y)| x + y).collect();
        let tails = self.tails.iter().chain(other.tails.iter()).cloned().collect();
        ConvolutionKernel::new(self.dim_out, self.dim_in, head, tails)
    }

    /// `M · K(·)`.
    pub fn left_mul(&self, m: &ComplexMatrix) -> Result<ConvolutionKernel> {
        if m.ncols() != self.dim_out {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} matrix by {}x{} kernel",
                m.nrows(),
                m.ncols(),
                self.dim_out,
                self.dim_in
            )));
        }
        ConvolutionKernel::new(
            m.nrows(),
            self.dim_in,
            self.head.iter().map(|h| m * h).collect(),
            self.tails.iter().map(|t| GeometricTail { coeff: m * &t.coeff, ratio: t.ratio }).collect(),
        )
    }

    /// `K(·) · M`.
    pub fn right_mul(&self, m: &ComplexMatrix) -> Result<ConvolutionKernel> {
        if m.nrows() != self.dim_in {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} kernel by {}x{} matrix",
                self.dim_out,
                self.dim_in,
                m.nrows(),
                m.ncols()
            )));
        }
        ConvolutionKernel::new(
            self.dim_out,
            m.ncols(),
            self.head.iter().map(|h| h * m).collect(),
            self.tails.iter().map(|t| GeometricTail { coeff: &t.coeff * m, ratio: t.ratio }).collect(),
        )
    }

    pub fn scaled(&self, s: Complex64) -> ConvolutionKernel {
        ConvolutionKernel::new(
            self.dim_out,
            self.dim_in,
            self.head.iter().map(|h| h * s).collect(),
            self.tails.iter().map(|t| GeometricTail { coeff: &t.coeff * s, ratio: t.ratio }).collect(),
        )
        .expect("scaling preserves kernel invariants")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Ellp,
    Czero,
}

/// Exponentially weighted prehistory space `B^{p,γ}` (variant `ellp`) or
/// `B_0^{∞,γ}` (variant `czero`, which forces `p = ∞`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpace {
    #[serde(with = "crate::serde_util::ext_real")]
    p: f64,
    gamma: f64,
    variant: Variant,
}

impl PhaseSpace {
    pub fn new(p: f64, gamma: f64, variant: Variant) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidInput(format!("phase space exponent p must be >= 1, got {p}")));
        }
        if !gamma.is_finite() {
            return Err(Error::InvalidInput(format!("phase space weight gamma must be finite, got {gamma}")));
        }
        if variant == Variant::Czero && p != f64::INFINITY {
            return Err(Error::InvalidInput("the czero variant requires p = inf".into()));
        }
        Ok(Self { p, gamma, variant })
    }

    pub fn ellp(p: f64, gamma: f64) -> Result<Self> {
        Self::new(p, gamma, Variant::Ellp)
    }

    pub fn czero(gamma: f64) -> Self {
        Self { p: f64::INFINITY, gamma, variant: Variant::Czero }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Hölder conjugate `p'`.
    pub fn conjugate(&self) -> f64 {
        if self.p == 1.0 {
            f64::INFINITY
        } else if self.p == f64::INFINITY {
            1.0
        } else {
            self.p / (self.p - 1.0)
        }
    }

    pub fn is_fading(&self) -> bool {
        self.gamma > 0.0
    }

    /// `(1 - e^{-pγ})^{1/p}`, read as `1` for `p = ∞`.
    pub fn weight_factor(&self) -> f64 {
        if self.p == f64::INFINITY {
            1.0
        } else {
            (-(-self.p * self.gamma).exp_m1()).powf(1.0 / self.p)
        }
    }
}

impl fmt::Display for PhaseSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = if self.p == f64::INFINITY { "inf".to_string() } else { self.p.to_string() };
        let v = match self.variant {
            Variant::Ellp => "ellp",
            Variant::Czero => "czero",
        };
        write!(f, "{p}:{}:{v}", self.gamma)
    }
}

/// `p:gamma[:variant]`, e.g. `2:0.5:ellp` or `inf:0:czero`.
impl FromStr for PhaseSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        if parts.len() < 2 || parts.len() > 3 {
            return Err(Error::InvalidInput(format!("phase space '{s}' is not of the form p:gamma:variant")));
        }
        let p = match parts[0].to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => f64::INFINITY,
            other => other
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("bad exponent p '{other}' in phase space '{s}'")))?,
        };
        let gamma = parts[1]
            .parse::<f64>()
            .map_err(|_| Error::InvalidInput(format!("bad weight gamma '{}' in phase space '{s}'", parts[1])))?;
        let variant = match parts.get(2).map(|v| v.to_ascii_lowercase()) {
            None => Variant::Ellp,
            Some(v) if v == "ellp" => Variant::Ellp,
            Some(v) if v == "czero" => Variant::Czero,
            Some(v) => return Err(Error::InvalidInput(format!("unknown phase space variant '{v}'"))),
        };
        PhaseSpace::new(p, gamma, variant)
    }
}

/// Finitely supported prehistory `φ^{[m]}`, `m ≤ 0`; unspecified
/// coordinates are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Prehistory {
    dim: usize,
    entries: Vec<(i64, ComplexVector)>,
}

impl Prehistory {
    pub fn new(dim: usize, mut entries: Vec<(i64, ComplexVector)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("prehistory dimension must be positive".into()));
        }
        for (m, v) in &entries {
            if *m > 0 {
                return Err(Error::InvalidInput(format!("prehistory index m = {m} must be <= 0")));
            }
            if v.len() != dim {
                return Err(Error::Dimension(format!(
                    "prehistory value at m = {m} has length {}, expected {dim}",
                    v.len()
                )));
            }
            if !v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::InvalidInput(format!("prehistory value at m = {m} is not finite")));
            }
        }
        entries.sort_by_key(|(m, _)| *m);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidInput("prehistory indices must be distinct".into()));
        }
        Ok(Self { dim, entries })
    }

    pub fn empty(dim: usize) -> Self {
        Self { dim, entries: Vec::new() }
    }

    /// `P_m^T e_k`: unit vector `e_k` placed at coordinate `m`.
    pub fn impulse(dim: usize, m: i64, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::Dimension(format!("impulse component {k} out of range for dimension {dim}")));
        }
        let mut v = ComplexVector::zeros(dim);
        v[k] = Complex64::new(1.0, 0.0);
        Self::new(dim, vec![(m, v)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entries sorted by increasing `m`.
    pub fn entries(&self) -> &[(i64, ComplexVector)] {
        &self.entries
    }

    pub fn value_at(&self, m: i64) -> ComplexVector {
        self.entries
            .iter()
            .find(|(k, _)| *k == m)
            .map(|(_, v)| v.clone())
            .unwrap_or_else(|| ComplexVector::zeros(self.dim))
    }

    /// Weighted `ℓ^p` norm of `{e^{γm} |φ^{[m]}|}` (supremum for `p = ∞`).
    pub fn phase_norm(&self, space: &PhaseSpace, norm: StateNorm) -> f64 {
        let weighted = self
            .entries
            .iter()
            .map(|(m, v)| (space.gamma() * *m as f64).exp() * norm.vector_norm(v.iter()));
        if space.p() == f64::INFINITY {
            weighted.fold(0.0, f64::max)
        } else {
            let p = space.p();
            weighted.map(|w| w.powf(p)).sum::<f64>().powf(1.0 / p)
        }
    }
}
