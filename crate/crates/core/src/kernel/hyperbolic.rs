//! Kernel solver for the transport plant with recirculation,
//!
//! ```text
//! u_t = u_x + g(x) u(0,t) + integral over [0,x] of f(x,y) u(y,t) dy,
//! u(1,t) = U(t).
//! ```
//!
//! The backstepping kernel solves
//!
//! ```text
//! K_x + K_xi = integral over [xi,x] of K(x,s) f(s,xi) ds - f(x,xi)   on T,
//! K(x,0)     = integral over [0,x]  of K(x,s) g(s)    ds - g(x),
//! ```
//!
//! integrated along the characteristics `x - xi = const` from the bottom
//! boundary, with Picard iteration supplying the nonlocal right-hand side.

use crate::error::{Error, Result};
use crate::field::{ScalarField1D, TriangularField};
use crate::grid::UniformGrid;
use crate::quad::trapz_product;
use crate::scalar::{real, solver_tol, Real};
use crate::volterra::volterra_invert;

/// Recirculation data of the transport plant.
#[derive(Debug, Clone)]
pub struct HyperbolicPlantSpec<T: Real> {
    pub f: TriangularField<T>,
    pub g: ScalarField1D<T>,
}

impl<T: Real> HyperbolicPlantSpec<T> {
    pub fn new(f: TriangularField<T>, g: ScalarField1D<T>) -> Result<Self> {
        if f.grid() != g.grid() {
            return Err(Error::invalid("f and g live on different grids"));
        }
        Ok(Self { f, g })
    }

    pub fn grid(&self) -> UniformGrid<T> {
        self.g.grid()
    }
}

/// Converged kernel pair and the boundary gain it induces.
#[derive(Debug, Clone)]
pub struct HyperbolicKernelSolution<T: Real> {
    /// Direct kernel `K`.
    pub kernel: TriangularField<T>,
    /// Inverse kernel `L` from the reciprocity identity.
    pub inverse: TriangularField<T>,
    /// Boundary gain `K1(xi) = K(1, xi)`: the top kernel row, verbatim.
    pub gain_k1: ScalarField1D<T>,
    pub iterations: usize,
    pub residual: T,
}

/// Sup-norm bound `(B_f + B_g) e^{B_f + B_g}` valid for both `K` and `L`
/// whenever `sup|f| <= B_f` and `sup|g| <= B_g`.
pub fn hyperbolic_kernel_bound<T: Real>(b_f: T, b_g: T) -> Result<T> {
    if b_f < T::zero() || b_g < T::zero() || !(b_f.is_finite() && b_g.is_finite()) {
        return Err(Error::invalid("sup-norm bounds must be finite and nonnegative"));
    }
    let s = b_f + b_g;
    Ok(s * s.exp())
}

/// Solves the kernel equations on `grid` by Picard iteration along
/// characteristics (tolerance 1e-10, cap 200 sweeps), then inverts the
/// converged kernel and extracts the gain row.
pub fn solve_kernel_pide<T: Real>(
    plant: &HyperbolicPlantSpec<T>,
    grid: &UniformGrid<T>,
) -> Result<HyperbolicKernelSolution<T>> {
    if plant.grid() != *grid {
        return Err(Error::invalid("plant coefficients are not on the solve grid"));
    }
    let n = grid.n();
    let h = grid.h();
    let half = real::<T>(0.5);
    let tol = solver_tol::<T>(1e-10);
    let max_iter = 200usize;

    let f = &plant.f;
    let g = plant.g.values();

    let mut kernel = TriangularField::zeros(*grid);
    let mut rhs = TriangularField::zeros(*grid);
    let mut bottom = vec![T::zero(); n];
    let mut iterations = 0usize;
    let mut residual = T::infinity();

    while iterations < max_iter {
        iterations += 1;
        // bottom data b(x_i) = integral K(x_i, s) g(s) ds - g(x_i)
        for i in 0..n {
            bottom[i] = trapz_product(kernel.row(i), g, 0, i, h) - g[i];
        }
        // rhs(x_i, xi_j) = integral over [xi_j, x_i] of K(x_i,s) f(s,xi_j) ds - f(x_i,xi_j)
        for i in 0..n {
            let krow = kernel.row(i);
            for j in 0..=i {
                let mut acc = T::zero();
                if i > j {
                    acc = half * (krow[j] * f.value(j, j) + krow[i] * f.value(i, j));
                    for s in j + 1..i {
                        acc = acc + krow[s] * f.value(s, j);
                    }
                    acc = acc * h;
                }
                rhs.set(i, j, acc - f.value(i, j));
            }
        }
        // rebuild K along each characteristic x - xi = d*h by cumulative
        // trapezoid of the rhs, starting from the bottom data
        let mut diff = T::zero();
        for d in 0..n {
            let mut acc = T::zero();
            let mut prev = rhs.value(d, 0);
            let base = bottom[d];
            let v0 = base;
            diff = diff.max((v0 - kernel.value(d, 0)).abs());
            kernel.set(d, 0, v0);
            for k in 1..n - d {
                let cur = rhs.value(d + k, k);
                acc = acc + h * half * (prev + cur);
                prev = cur;
                let v = base + acc;
                diff = diff.max((v - kernel.value(d + k, k)).abs());
                kernel.set(d + k, k, v);
            }
        }
        residual = diff;
        if diff < tol {
            break;
        }
    }
    if residual >= tol {
        return Err(Error::no_converge(
            "hyperbolic kernel Picard iteration",
            residual.to_f64().unwrap_or(f64::NAN),
            iterations,
        ));
    }

    let inverse = volterra_invert(&kernel)?.field;
    let gain_k1 = kernel.top_trace();
    Ok(HyperbolicKernelSolution {
        kernel,
        inverse,
        gain_k1,
        iterations,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_uniform_grid;

    fn oracle_plant(n: usize) -> (HyperbolicPlantSpec<f64>, UniformGrid<f64>) {
        let g = make_uniform_grid::<f64>(n).unwrap();
        let f = TriangularField::from_fn(g, |_, _| 0.0).unwrap();
        let gfun = ScalarField1D::constant(g, 1.0).unwrap();
        (HyperbolicPlantSpec::new(f, gfun).unwrap(), g)
    }

    /// f = 0, g = 1 collapses the kernel equations to K(x,xi) = -e^{x-xi}.
    #[test]
    fn closed_form_for_pure_boundary_recirculation() {
        let (plant, grid) = oracle_plant(401);
        let sol = solve_kernel_pide(&plant, &grid).unwrap();
        let n = grid.n();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..=i {
                let want = -(grid.node(i) - grid.node(j)).exp();
                worst = worst.max((sol.kernel.value(i, j) - want).abs());
            }
        }
        assert!(worst < 1e-4, "kernel sup error {worst}");
        assert!(
            (sol.gain_k1.values()[0] + std::f64::consts::E).abs() < 1e-4,
            "K1(0) = {}",
            sol.gain_k1.values()[0]
        );
        // inverse of K = -e^{x-xi} is L = -1 (reciprocity in closed form)
        let mut worst_l = 0.0f64;
        for i in 0..n {
            for j in 0..=i {
                worst_l = worst_l.max((sol.inverse.value(i, j) + 1.0).abs());
            }
        }
        assert!(worst_l < 1e-4, "inverse sup error {worst_l}");
    }

    #[test]
    fn trivial_plant_has_zero_kernel() {
        let g = make_uniform_grid::<f64>(101).unwrap();
        let plant = HyperbolicPlantSpec::new(
            TriangularField::from_fn(g, |_, _| 0.0).unwrap(),
            ScalarField1D::zeros(g),
        )
        .unwrap();
        let sol = solve_kernel_pide(&plant, &g).unwrap();
        assert_eq!(sol.kernel.sup_norm(), 0.0);
        assert_eq!(sol.inverse.sup_norm(), 0.0);
        assert!(sol.iterations <= 2);
    }

    #[test]
    fn bottom_boundary_residual_small_after_convergence() {
        let g = make_uniform_grid::<f64>(201).unwrap();
        let plant = HyperbolicPlantSpec::new(
            TriangularField::from_fn(g, |x, xi| 0.4 * (x - xi).cos()).unwrap(),
            ScalarField1D::from_fn(g, |x| 0.5 + 0.3 * x).unwrap(),
        )
        .unwrap();
        let sol = solve_kernel_pide(&plant, &g).unwrap();
        let h = g.h();
        let mut worst = 0.0f64;
        for i in 0..g.n() {
            let b = trapz_product(sol.kernel.row(i), plant.g.values(), 0, i, h)
                - plant.g.values()[i];
            worst = worst.max((sol.kernel.value(i, 0) - b).abs());
        }
        assert!(worst <= 1e-8, "boundary residual {worst}");
    }

    /// Centered-difference PDE residual at interior nodes stays below C*h and
    /// shrinks under refinement.
    #[test]
    fn pde_residual_shrinks_with_h() {
        let mut prev = f64::INFINITY;
        for n in [101usize, 201] {
            let g = make_uniform_grid::<f64>(n).unwrap();
            let plant = HyperbolicPlantSpec::new(
                TriangularField::from_fn(g, |x, xi| 0.5 * (1.0 + x * xi)).unwrap(),
                ScalarField1D::from_fn(g, |x| 0.5 * (2.0 * x).cos()).unwrap(),
            )
            .unwrap();
            let sol = solve_kernel_pide(&plant, &g).unwrap();
            let h = g.h();
            let mut worst = 0.0f64;
            for i in 2..g.n() - 1 {
                for j in 1..i {
                    let kx = (sol.kernel.value(i + 1, j) - sol.kernel.value(i - 1, j)) / (2.0 * h);
                    let kxi = (sol.kernel.value(i, j + 1) - sol.kernel.value(i, j - 1)) / (2.0 * h);
                    let rhs = char_rhs(&sol.kernel, &plant, i, j, h);
                    worst = worst.max((kx + kxi - rhs).abs());
                }
            }
            assert!(worst <= 2.0 * h, "n={n}: residual {worst} vs h={h}");
            assert!(worst < prev, "residual must shrink with h");
            prev = worst;
        }
    }

    fn char_rhs(
        k: &TriangularField<f64>,
        plant: &HyperbolicPlantSpec<f64>,
        i: usize,
        j: usize,
        h: f64,
    ) -> f64 {
        let mut acc = 0.0;
        if i > j {
            let krow = k.row(i);
            acc = 0.5 * (krow[j] * plant.f.value(j, j) + krow[i] * plant.f.value(i, j));
            for s in j + 1..i {
                acc += krow[s] * plant.f.value(s, j);
            }
            acc *= h;
        }
        acc - plant.f.value(i, j)
    }

    #[test]
    fn bound_formula() {
        let b = hyperbolic_kernel_bound(0.5f64, 0.5).unwrap();
        assert!((b - std::f64::consts::E).abs() < 1e-15);
        assert!(hyperbolic_kernel_bound(-0.1f64, 0.0).is_err());
    }
}
