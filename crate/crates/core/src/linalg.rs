//! Small dense complex linear algebra on top of `nalgebra`, and the state
//! norms the analysis can be run in.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Norm on the finite-dimensional state space. Operator norms are the
/// induced ones. Only `Two` yields a Hilbert state space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum StateNorm {
    #[serde(rename = "1")]
    One,
    #[default]
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "inf")]
    Inf,
}

impl StateNorm {
    pub fn dual(self) -> StateNorm {
        match self {
            StateNorm::One => StateNorm::Inf,
            StateNorm::Two => StateNorm::Two,
            StateNorm::Inf => StateNorm::One,
        }
    }

    pub fn is_hilbert(self) -> bool {
        self == StateNorm::Two
    }

    pub fn vector_norm<'a>(self, v: impl IntoIterator<Item = &'a Complex64>) -> f64 {
        let it = v.into_iter();
        match self {
            StateNorm::One => it.map(|z| z.norm()).sum(),
            StateNorm::Two => it.map(|z| z.norm_sqr()).sum::<f64>().sqrt(),
            StateNorm::Inf => it.map(|z| z.norm()).fold(0.0, f64::max),
        }
    }

    /// Induced operator norm.
    pub fn matrix_norm(self, m: &ComplexMatrix) -> f64 {
        if m.is_empty() {
            return 0.0;
        }
        match self {
            StateNorm::One => m
                .column_iter()
                .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
                .fold(0.0, f64::max),
            StateNorm::Inf => m
                .row_iter()
                .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
                .fold(0.0, f64::max),
            StateNorm::Two => largest_singular_value(m),
        }
    }

    /// `inf_{|x|=1} |m x|` for square `m`: the smallest singular value in
    /// 2-norm mode, `1/‖m⁻¹‖` otherwise (zero when `m` is singular).
    pub fn min_gain(self, m: &ComplexMatrix) -> f64 {
        match self {
            StateNorm::Two => smallest_singular_value(m),
            _ => match inverse(m) {
                Some(inv) => {
                    let n = self.matrix_norm(&inv);
                    if n.is_finite() && n > 0.0 {
                        1.0 / n
                    } else {
                        0.0
                    }
                }
                None => 0.0,
            },
        }
    }
}

impl fmt::Display for StateNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StateNorm::One => "1",
            StateNorm::Two => "2",
            StateNorm::Inf => "inf",
        })
    }
}

impl FromStr for StateNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" => Ok(StateNorm::One),
            "2" => Ok(StateNorm::Two),
            "inf" | "infinity" | "∞" => Ok(StateNorm::Inf),
            other => Err(Error::InvalidInput(format!(
                "unknown state norm '{other}' (expected 1, 2 or inf)"
            ))),
        }
    }
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(d: usize) -> ComplexMatrix {
    ComplexMatrix::identity(d, d)
}

pub fn zeros(rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::zeros(rows, cols)
}

pub fn scalar(z: Complex64) -> ComplexMatrix {
    ComplexMatrix::from_element(1, 1, z)
}

pub fn from_row_major(rows: usize, cols: usize, entries: &[Complex64]) -> Result<ComplexMatrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::Dimension(format!("matrix must be nonempty, got {rows}x{cols}")));
    }
    if entries.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "{rows}x{cols} matrix needs {} entries, got {}",
            rows * cols,
            entries.len()
        )));
    }
    let m = ComplexMatrix::from_row_slice(rows, cols, entries);
    ensure_finite(&m)?;
    Ok(m)
}

pub fn row_major_entries(m: &ComplexMatrix) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(m.len());
    for r in 0..m.nrows() {
        for col in 0..m.ncols() {
            out.push(m[(r, col)]);
        }
    }
    out
}

pub fn ensure_finite(m: &ComplexMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput("matrix has non-finite entries".into()))
    }
}

pub fn is_zero(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re == 0.0 && z.im == 0.0)
}

pub fn singular_values(m: &ComplexMatrix) -> DVector<f64> {
    if m.nrows() == 1 && m.ncols() == 1 {
        return DVector::from_element(1, m[(0, 0)].norm());
    }
    m.clone().singular_values()
}

pub fn largest_singular_value(m: &ComplexMatrix) -> f64 {
    singular_values(m).iter().copied().fold(0.0, f64::max)
}

pub fn smallest_singular_value(m: &ComplexMatrix) -> f64 {
    let s = singular_values(m);
    if m.nrows() != m.ncols() {
        return 0.0;
    }
    s.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Dominant singular triplet `(σ, u, v)` with `m v = σ u`, `|u| = |v| = 1`.
pub fn top_singular_triplet(m: &ComplexMatrix) -> (f64, ComplexVector, ComplexVector) {
    if m.nrows() == 1 && m.ncols() == 1 {
        let z = m[(0, 0)];
        let sigma = z.norm();
        let u = if sigma > 0.0 { z / sigma } else { Complex64::new(1.0, 0.0) };
        return (
            sigma,
            ComplexVector::from_element(1, u),
            ComplexVector::from_element(1, Complex64::new(1.0, 0.0)),
        );
    }
    let svd = m.clone().svd(true, true);
    let (idx, sigma) = svd
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, s)| if s > best.1 { (i, s) } else { best });
    let u = svd.u.expect("requested u").column(idx).into_owned();
    let v = svd.v_t.expect("requested v_t").row(idx).adjoint();
    (sigma, u, v)
}

pub fn determinant(m: &ComplexMatrix) -> Complex64 {
    match m.nrows() {
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        _ => m.clone().lu().determinant(),
    }
}

pub fn inverse(m: &ComplexMatrix) -> Option<ComplexMatrix> {
    if m.nrows() == 1 && m.ncols() == 1 {
        let z = m[(0, 0)];
        return if z.norm() > 0.0 { Some(scalar(z.inv())) } else { None };
    }
    let inv = m.clone().lu().try_inverse()?;
    if inv.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Some(inv)
    } else {
        None
    }
}

pub fn solve(m: &ComplexMatrix, rhs: &ComplexMatrix) -> Option<ComplexMatrix> {
    if m.nrows() == 1 && m.ncols() == 1 {
        let z = m[(0, 0)];
        return if z.norm() > 0.0 { Some(rhs / z) } else { None };
    }
    let x = m.clone().lu().solve(rhs)?;
    if x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// Integer power by repeated squaring; exact whenever the intermediate
/// products are (e.g. powers of two).
pub fn powi(base: Complex64, mut exp: usize) -> Complex64 {
    let mut acc = Complex64::new(1.0, 0.0);
    let mut b = base;
    while exp > 0 {
        if exp & 1 == 1 {
            acc *= b;
        }
        exp >>= 1;
        if exp > 0 {
            b *= b;
        }
    }
    acc
}

pub fn unit_circle_point(theta: f64) -> Complex64 {
    Complex64::from_polar(1.0, theta)
}
