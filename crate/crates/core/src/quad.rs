//! Composite trapezoid quadrature on uniform grids.

use crate::error::{Error, Result};
use crate::field::ScalarField1D;
use crate::scalar::{real, Real};

/// Integrates the piecewise-linear interpolant of `f` over `[a, b]`.
///
/// Grid-aligned limits reduce to the classic composite rule and are exact for
/// piecewise-linear integrands; partial cells integrate the interpolant, so
/// they are exact for it as well. `a <= b` required, both within `[0, 1]`.
///
/// Internally this is the difference `F(b) - F(a)` of one fixed antiderivative
/// of the interpolant, so splitting an interval at any midpoint changes the
/// result by at most a rounding each.
pub fn quad_trapezoid<T: Real>(f: &ScalarField1D<T>, a: T, b: T) -> Result<T> {
    if !(a.is_finite() && b.is_finite()) || a > b || a < T::zero() || b > T::one() {
        return Err(Error::invalid(format!(
            "integration limits [{a}, {b}] must satisfy 0 <= a <= b <= 1"
        )));
    }
    if a == b {
        return Ok(T::zero());
    }
    Ok(antiderivative(f, b) - antiderivative(f, a))
}

/// Integral of the interpolant over `[0, x]`, accumulated left to right.
fn antiderivative<T: Real>(f: &ScalarField1D<T>, x: T) -> T {
    let grid = f.grid();
    let h = grid.h();
    let half = real::<T>(0.5);
    let v = f.values();
    let cell = grid.cell_of(x);
    let mut acc = T::zero();
    for i in 0..cell {
        acc = acc + h * half * (v[i] + v[i + 1]);
    }
    let left = grid.node(cell);
    if x > left {
        acc = acc + (x - left) * half * (v[cell] + f.eval(x));
    }
    acc
}

/// Trapezoid sum of `w[lo..=hi] * v[lo..=hi]` with spacing `h`.
#[inline]
pub(crate) fn trapz_product<T: Real>(w: &[T], v: &[T], lo: usize, hi: usize, h: T) -> T {
    debug_assert!(hi >= lo && hi < w.len() && hi < v.len());
    if hi == lo {
        return T::zero();
    }
    let half = real::<T>(0.5);
    let mut acc = half * (w[lo] * v[lo] + w[hi] * v[hi]);
    for k in lo + 1..hi {
        acc = acc + w[k] * v[k];
    }
    acc * h
}

/// Cumulative integral `x_i -> integral of f over [0, x_i]` as a field.
pub fn cumulative_integral<T: Real>(f: &ScalarField1D<T>) -> ScalarField1D<T> {
    let grid = f.grid();
    let h = grid.h();
    let half = real::<T>(0.5);
    let v = f.values();
    let mut out = Vec::with_capacity(grid.n());
    let mut acc = T::zero();
    out.push(acc);
    for i in 1..grid.n() {
        acc = acc + h * half * (v[i - 1] + v[i]);
        out.push(acc);
    }
    ScalarField1D::new(grid, out).expect("cumulative integral of a finite field is finite")
}
