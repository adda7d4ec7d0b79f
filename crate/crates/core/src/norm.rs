//! Norms and derivative stencils on 1-D fields.

use crate::error::{Error, Result};
use crate::field::ScalarField1D;
use crate::quad::quad_trapezoid;
use crate::scalar::{real, Real};

/// Sign of the exponential weight in [`NormKind::WeightedExp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightSign {
    Plus,
    Minus,
}

/// Norm selector for [`norm`].
///
/// `L2` and `H1` are true norms (square roots taken). `WeightedExp` is the
/// Lyapunov-style functional `integral of exp(sign*c*x) * f(x)^2 / d(x) dx`
/// and is deliberately *not* square-rooted, since decay guarantees quote the
/// functional itself.
#[derive(Debug, Clone)]
pub enum NormKind<T: Real> {
    L2,
    H1,
    WeightedExp {
        c: T,
        sign: WeightSign,
        divisor: Option<ScalarField1D<T>>,
    },
}

///// Second-order derivative stencil: centered in the interior, one-sided
/// three-point at both endpoints. Needs at least 3 nodes.
pub fn derivative<T: Real>(f: &ScalarField1D<T>) -> Result<ScalarField1D<T>> {
    let grid = f.grid();
    let n = grid.n();
    if n < 3 {
        return Err(Error::invalid("derivative stencil needs at least 3 nodes"));
    }
    let h = grid.h();
    let two = real::<T>(2.0);
    let three = real::<T>(3.0);
    let four = real::<T>(4.0);
    let v = f.values();
    let mut d = vec![T::zero(); n];
    d[0] = (-three * v[0] + four * v[1] - v[2]) / (two * h);
    for i in 1..n - 1 {
        d[i] = (v[i + 1] - v[i - 1]) / (two * h);
    }
    d[n - 1] = (three * v[n - 1] - four * v[n - 2] + v[n - 3]) / (two * h);
    ScalarField1D::new(grid, d)
}

/// Evaluates `kind` on `f` by trapezoid quadrature of the nodal integrand.
pub fn norm<T: Real>(f: &ScalarField1D<T>, kind: &NormKind<T>) -> Result<T> {
    let grid = f.grid();
    match kind {
        NormKind::L2 => {
            let sq = ScalarField1D::new(grid, f.values().iter().map(|v| *v * *v).collect())?;
            Ok(quad_trapezoid(&sq, T::zero(), T::one())?.sqrt())
        }
        NormKind::H1 => {
            let d = derivative(f)?;
            let integrand = ScalarField1D::new(
                grid,
                f.values()
                    .iter()
                    .zip(d.values())
                    .map(|(v, dv)| *v * *v + *dv * *dv)
                    .collect(),
            )?;
            Ok(quad_trapezoid(&integrand, T::zero(), T::one())?.sqrt())
        }
        NormKind::WeightedExp { c, sign, divisor } => {
            if let Some(d) = divisor {
                if d.grid() != grid {
                    return Err(Error::invalid("weighted norm divisor on a different grid"));
                }
                if d.values().iter().any(|v| *v <= T::zero()) {
                    return Err(Error::invalid("weighted norm divisor must be positive"));
                }
            }
            let s = match sign {
                WeightSign::Plus => T::one(),
                WeightSign::Minus => -T::one(),
            };
            let mut vals = Vec::with_capacity(grid.n());
            for i in 0..grid.n() {
                let x = grid.node(i);
                let v = f.values()[i];
                let den = divisor.as_ref().map_or(T::one(), |d| d.values()[i]);
                vals.push((s * *c * x).exp() * v * v / den);
            }
            let integrand = ScalarField1D::new(grid, vals)?;
            quad_trapezoid(&integrand, T::zero(), T::one())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_uniform_grid;

    /// f(x) = x: L2 = 1/sqrt(3) up to quadrature, H1 = sqrt(1/3 + 1) with the
    /// derivative reproduced exactly by the stencil.
    #[test]
    fn h1_of_identity() {
        let g = make_uniform_grid::<f64>(201).unwrap();
        let f = ScalarField1D::from_fn(g, |x| x).unwrap();
        let l2 = norm(&f, &NormKind::L2).unwrap();
        let h1 = norm(&f, &NormKind::H1).unwrap();
        let h = g.h();
        assert!((l2 - (1.0f64 / 3.0 + h * h / 6.0).sqrt()).abs() < 1e-12);
        assert!((h1 - (1.0f64 / 3.0 + h * h / 6.0 + 1.0).sqrt()).abs() < 1e-12);
    }

    /// Weighted functional with c=1, +sign, f=1: integral of e^x = e - 1.
    #[test]
    fn weighted_exp_of_one() {
        let g = make_uniform_grid::<f64>(401).unwrap();
        let f = ScalarField1D::constant(g, 1.0).unwrap();
        let v = norm(
            &f,
            &NormKind::WeightedExp {
                c: 1.0,
                sign: WeightSign::Plus,
                divisor: None,
            },
        )
        .unwrap();
        assert!(
            (v - (std::f64::consts::E - 1.0)).abs() < 2e-6,
            "got {v}, want e-1"
        );
    }

    #[test]
    fn weighted_divisor_and_sign() {
        let g = make_uniform_grid::<f64>(401).unwrap();
        let f = ScalarField1D::constant(g, 2.0).unwrap();
        let d = ScalarField1D::constant(g, 4.0).unwrap();
        // integral of e^{-x} * 4 / 4 = 1 - e^{-1}
        let v = norm(
            &f,
            &NormKind::WeightedExp {
                c: 1.0,
                sign: WeightSign::Minus,
                divisor: Some(d),
            },
        )
        .unwrap();
        assert!((v - (1.0 - (-1.0f64).exp())).abs() < 1e-6);
    }

    #[test]
    fn l2_never_exceeds_h1() {
        let g = make_uniform_grid::<f64>(101).unwrap();
        for k in 1..6 {
            let f = ScalarField1D::from_fn(g, |x| (k as f64 * 2.1 * x).sin() + 0.3).unwrap();
            let l2 = norm(&f, &NormKind::L2).unwrap();
            let h1 = norm(&f, &NormKind::H1).unwrap();
            assert!(l2 <= h1 + 1e-14, "k={k}: l2 {l2} > h1 {h1}");
        }
    }

    #[test]
    fn derivative_needs_three_nodes() {
        let g = make_uniform_grid::<f64>(2).unwrap();
        let f = ScalarField1D::from_fn(g, |x| x).unwrap();
        assert!(derivative(&f).is_err());
        assert!(norm(&f, &NormKind::H1).is_err());
    }

    #[test]
    fn derivative_exact_on_quadratics() {
        let g = make_uniform_grid::<f64>(51).unwrap();
        let f = ScalarField1D::from_fn(g, |x| 1.5 * x * x - 0.7 * x + 0.2).unwrap();
        let d = derivative(&f).unwrap();
        for i in 0..g.n() {
            let want = 3.0 * g.node(i) - 0.7;
            assert!((d.values()[i] - want).abs() < 1e-11, "node {i}");
        }
    }
}
