//! Volterra transforms of the second kind and their inversion.

use crate::error::{Error, Result};
use crate::field::{ScalarField1D, TriangularField};
use crate::quad::trapz_product;
use crate::scalar::{real, solver_tol, Real};

/// Direction of [`volterra_apply`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformDirection {
    /// `w(x) = f(x) - integral over [0,x] of K(x,xi) f(xi) dxi`
    Forward,
    /// `u(x) = f(x) + integral over [0,x] of K(x,xi) f(xi) dxi`
    Inverse,
}

/// Applies the Volterra transform with kernel `kernel` to `f`.
pub fn volterra_apply<T: Real>(
    kernel: &TriangularField<T>,
    f: &ScalarField1D<T>,
    direction: TransformDirection,
) -> Result<ScalarField1D<T>> {
    if kernel.grid() != f.grid() {
        return Err(Error::invalid("kernel and field grids differ"));
    }
    let grid = f.grid();
    let h = grid.h();
    let sign = match direction {
        TransformDirection::Forward => -T::one(),
        TransformDirection::Inverse => T::one(),
    };
    let v = f.values();
    let mut out = Vec::with_capacity(grid.n());
    for i in 0..grid.n() {
        let integral = trapz_product(kernel.row(i), v, 0, i, h);
        out.push(v[i] + sign * integral);
    }
    ScalarField1D::new(grid, out)
}

/// Converged column-wise solve of a second-kind Volterra equation.
#[derive(Debug, Clone)]
pub struct SecondKindSolution<T: Real> {
    pub field: TriangularField<T>,
    /// Largest per-column iteration count.
    pub iterations: usize,
    /// Largest final sup-difference between successive iterates.
    pub residual: T,
}

/// Solves `X(x,xi) = R(x,xi) + integral over [xi,x] of K(x,s) X(s,xi) ds` by
/// successive approximation, one xi-column at a time.
///
/// Columns are independent; each starts from `X = R` and stops when the
/// sup-difference between sweeps falls below `tol` (cap `max_iter`, with a
/// numeric-failure error carrying the last residual on overrun).
pub fn solve_second_kind<T: Real>(
    kernel: &TriangularField<T>,
    rhs: &TriangularField<T>,
    tol: T,
    max_iter: usize,
) -> Result<SecondKindSolution<T>> {
    if kernel.grid() != rhs.grid() {
        return Err(Error::invalid("kernel and rhs grids differ"));
    }
    let grid = kernel.grid();
    let n = grid.n();
    let h = grid.h();
    let half = real::<T>(0.5);
    let mut out = TriangularField::zeros(grid);
    let mut worst_iters = 0usize;
    let mut worst_resid = T::zero();

    let mut col = vec![T::zero(); n];
    let mut next = vec![T::zero(); n];
    for j in 0..n {
        for i in j..n {
            col[i] = rhs.value(i, j);
        }
        let mut iters = 0usize;
        let mut resid = T::infinity();
        while iters < max_iter {
            iters += 1;
            let mut diff = T::zero();
            for i in j..n {
                // trapezoid over s-nodes j..=i of K(x_i, s) * col(s)
                let mut acc = T::zero();
                if i > j {
                    let krow = kernel.row(i);
                    acc = half * (krow[j] * col[j] + krow[i] * col[i]);
                    for s in j + 1..i {
                        acc = acc + krow[s] * col[s];
                    }
                    acc = acc * h;
                }
                let v = rhs.value(i, j) + acc;
                diff = diff.max((v - col[i]).abs());
                next[i] = v;
            }
            col[j..n].copy_from_slice(&next[j..n]);
            resid = diff;
            if diff < tol {
                break;
            }
        }
        if resid >= tol && iters >= max_iter {
            return Err(Error::no_converge(
                format!("second-kind Volterra solve, column {j}"),
                resid.to_f64().unwrap_or(f64::NAN),
                iters,
            ));
        }
        worst_iters = worst_iters.max(iters);
        worst_resid = worst_resid.max(resid);
        for i in j..n {
            out.set(i, j, col[i]);
        }
    }
    Ok(SecondKindSolution {
        field: out,
        iterations: worst_iters,
        residual: worst_resid,
    })
}

/// Inverts a Volterra kernel through the reciprocity identity
/// `L(x,xi) = K(x,xi) + integral over [xi,x] of K(x,s) L(s,xi) ds`,
/// so that the `Inverse` transform with `L` undoes the `Forward` transform
/// with `K`. Tolerance 1e-12, cap 200 iterations.
pub fn volterra_invert<T: Real>(kernel: &TriangularField<T>) -> Result<SecondKindSolution<T>> {
    solve_second_kind(kernel, kernel, solver_tol::<T>(1e-12), 200)
}
