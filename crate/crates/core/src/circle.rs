//! Sampling, extremization and phase tracking on circles `|ζ| = ρ`.

use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;
const MAX_SUBDIVISION: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Sense {
    Min,
    Max,
}

impl Sense {
    fn better(self, a: f64, b: f64) -> bool {
        match self {
            Sense::Min => a < b,
            Sense::Max => a > b,
        }
    }
}

pub(crate) fn grid_theta(i: usize, n: usize) -> f64 {
    TAU * i as f64 / n as f64
}

/// Extremum of `f(θ)` over a uniform grid of `n` points starting at `θ = 0`,
/// followed by golden-section refinement on the two cells adjacent to the
/// best grid point until the bracket is narrower than `bracket_tol`.
/// Grid ties go to the lowest index; refinement is kept only if strictly
/// better. Returns `(value, θ)`.
pub(crate) fn extremize<F>(mut f: F, n: usize, bracket_tol: f64, sense: Sense) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut best = (f(0.0)?, 0.0, 0usize);
    for i in 1..n {
        let theta = grid_theta(i, n);
        let v = f(theta)?;
        if sense.better(v, best.0) {
            best = (v, theta, i);
        }
    }
    let h = TAU / n as f64;
    let (mut a, mut b) = (best.1 - h, best.1 + h);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > bracket_tol {
        if sense.better(f1, f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2)?;
        }
    }
    let (x, fx) = if sense.better(f1, f2) { (x1, f1) } else { (x2, f2) };
    if sense.better(fx, best.0) {
        Ok((fx, x.rem_euclid(TAU)))
    } else {
        Ok((best.0, best.1))
    }
}

/// Winding number of `f` along `|ζ| = radius`, tracked on an `n`-point grid
/// whose steps are bisected until every phase increment is below `π/2`.
pub(crate) fn winding<F>(mut f: F, radius: f64, n: usize) -> Result<i64>
where
    F: FnMut(Complex64) -> Result<Complex64>,
{
    let point = |theta: f64| Complex64::from_polar(radius, theta);
    let mut eval = |theta: f64| -> Result<Complex64> {
        let z = point(theta);
        let v = f(z)?;
        if v.norm() == 0.0 || !v.norm().is_finite() {
            return Err(Error::BoundaryZero { zeta: z, sigma_min: 0.0 });
        }
        Ok(v)
    };
    let mut total = 0.0;
    let mut prev = eval(0.0)?;
    let first = prev;
    for i in 1..=n {
        let t0 = grid_theta(i - 1, n);
        let t1 = grid_theta(i, n);
        let next = if i == n { first } else { eval(t1)? };
        total += tracked_increment(&mut eval, t0, t1, prev, next, 0)?;
        prev = next;
    }
    let turns = total / TAU;
    let rounded = turns.round();
    if (turns - rounded).abs() > 0.25 {
        return Err(Error::Certification(format!("phase tracking did not close (total {turns} turns)")));
    }
    Ok(rounded as i64)
}

fn tracked_increment<F>(eval: &mut F, t0: f64, t1: f64, v0: Complex64, v1: Complex64, depth: u32) -> Result<f64>
where
    F: FnMut(f64) -> Result<Complex64>,
{
    let delta = (v1 / v0).arg();
    if delta.abs() < FRAC_PI_2 {
        return Ok(delta);
    }
    if depth >= MAX_SUBDIVISION {
        let z = Complex64::from_polar(1.0, t0);
        return Err(Error::BoundaryZero { zeta: z, sigma_min: v0.norm().min(v1.norm()) });
    }
    let tm = 0.5 * (t0 + t1);
    let vm = eval(tm)?;
    Ok(tracked_increment(eval, t0, tm, v0, vm, depth + 1)? + tracked_increment(eval, tm, t1, vm, v1, depth + 1)?)
}
