//! Kernel solver for the 2x2 heterodirectional transport system
//!
//! ```text
//! u_t = -lambda(x) u_x + sigma(x) u + omega(x) v,
//! v_t =     mu(x)  v_x + theta(x) u,
//! u(0,t) = q v(0,t),       v(1,t) = U(t),
//! ```
//!
//! with strictly positive speeds. The transformation
//!
//! ```text
//! beta(x) = v(x) - int_0^x k_u(x,xi) u(xi) dxi - int_0^x k_v(x,xi) v(xi) dxi
//! ```
//!
//! leaves `u` untouched and maps the actuated channel onto a cascade target.
//! The kernel pair solves the first-order system
//!
//! ```text
//! mu(x) d_x k_u - lambda(xi) d_xi k_u = (lambda'(xi) + sigma(xi)) k_u + theta(xi) k_v,
//! mu(x) d_x k_v +     mu(xi) d_xi k_v = mu'(xi) k_v + omega(xi) k_u,
//! k_u(x,x) = -theta(x) / (lambda(x) + mu(x)),
//! k_v(x,0) = (q lambda(0) / mu(0)) k_u(x,0).
//! ```
//!
//! Each equation is integrated along its own characteristic field,
//! `(mu(x), -lambda(xi))` for `k_u` and `(mu(x), +mu(xi))` for `k_v`; traced
//! backward, the first terminates on the diagonal data and the second on the
//! bottom data. The solver advances one grid row at a time: from every node
//! the characteristic is stepped backward (midpoint steps along arclength,
//! coefficients re-interpolated linearly) until it either lands on the data
//! face or crosses the previous row, where the partially updated kernel is
//! read back by quadratic interpolation. Sweeping rows in ascending order
//! makes most dependencies current within one sweep, so the Picard coupling
//! between the two kernels settles in a handful of sweeps.

use crate::error::{Error, Result};
use crate::field::{ScalarField1D, TriangularField};
use crate::grid::UniformGrid;
use crate::norm::derivative;
use crate::scalar::{real, solver_tol, Real};
use crate::volterra::solve_second_kind;

/// Transport speeds, couplings, reflection coefficient, and declared speed
/// floors.
#[derive(Debug, Clone)]
pub struct CoupledPlantSpec<T: Real> {
    pub lambda: ScalarField1D<T>,
    pub mu: ScalarField1D<T>,
    pub sigma: ScalarField1D<T>,
    pub omega: ScalarField1D<T>,
    pub theta: ScalarField1D<T>,
    pub q: T,
    pub c_lambda: T,
    pub c_mu: T,
}

impl<T: Real> CoupledPlantSpec<T> {
    pub fn new(
        lambda: ScalarField1D<T>,
        mu: ScalarField1D<T>,
        sigma: ScalarField1D<T>,
        omega: ScalarField1D<T>,
        theta: ScalarField1D<T>,
        q: T,
        c_lambda: T,
        c_mu: T,
    ) -> Result<Self> {
        let grid = lambda.grid();
        for (name, f) in [("mu", &mu), ("sigma", &sigma), ("omega", &omega), ("theta", &theta)] {
            if f.grid() != grid {
                return Err(Error::invalid(format!("{name} is not on the lambda grid")));
            }
        }
        if !(q != T::zero() && q.is_finite()) {
            return Err(Error::invalid("reflection coefficient q must be finite and nonzero"));
        }
        if !(c_lambda > T::zero() && c_mu > T::zero()) {
            return Err(Error::invalid("speed floors C_lambda, C_mu must be positive"));
        }
        if lambda.min_value() < c_lambda {
            return Err(Error::invalid("lambda dips below its declared floor C_lambda"));
        }
        if mu.min_value() < c_mu {
            return Err(Error::invalid("mu dips below its declared floor C_mu"));
        }
        Ok(Self { lambda, mu, sigma, omega, theta, q, c_lambda, c_mu })
    }

    pub fn grid(&self) -> UniformGrid<T> {
        self.lambda.grid()
    }
}

/// Direct kernels, inverse kernels, target-system kernels, and the boundary
/// gain traces.
#[derive(Debug, Clone)]
pub struct CoupledKernelSolution<T: Real> {
    pub k_u: TriangularField<T>,
    pub k_v: TriangularField<T>,
    pub l_u: TriangularField<T>,
    pub l_v: TriangularField<T>,
    pub kappa_u: TriangularField<T>,
    pub kappa_v: TriangularField<T>,
    pub gain_ku1: ScalarField1D<T>,
    pub gain_kv1: ScalarField1D<T>,
    pub iterations: usize,
    pub residual: T,
}

/// Sup-norm ingredients for the kernel bound `K1 e^{K2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledBoundSet<T: Real> {
    pub theta_bar: T,
    pub q: T,
    pub lambda0: T,
    pub mu0: T,
    pub c_lambda: T,
    pub c_mu: T,
    pub lambda_prime_bar: T,
    pub mu_prime_bar: T,
    pub sigma_bar: T,
    pub omega_bar: T,
}

/// `K1 = C1 C2`, `K2 = C2 C3`, bound `K1 e^{K2}`, with
/// `C1 = theta_bar |q| lambda(0)/mu(0)`, `C2 = max{1/C_lambda, 1/C_mu}`,
/// `C3 = (1+|q|)(lambda_prime_bar + mu_prime_bar + sigma_bar + omega_bar + theta_bar)`.
pub fn coupled_kernel_bound<T: Real>(b: &CoupledBoundSet<T>) -> Result<(T, T, T)> {
    for (name, v) in [
        ("theta_bar", b.theta_bar),
        ("lambda_prime_bar", b.lambda_prime_bar),
        ("mu_prime_bar", b.mu_prime_bar),
        ("sigma_bar", b.sigma_bar),
        ("omega_bar", b.omega_bar),
    ] {
        if !(v.is_finite() && v >= T::zero()) {
            return Err(Error::invalid(format!("{name} must be finite and nonnegative")));
        }
    }
    if !(b.c_lambda > T::zero() && b.c_mu > T::zero()) {
        return Err(Error::invalid("speed floors C_lambda, C_mu must be positive"));
    }
    if !(b.lambda0 > T::zero() && b.mu0 > T::zero()) {
        return Err(Error::invalid("boundary speeds lambda(0), mu(0) must be positive"));
    }
    if b.q == T::zero() || !b.q.is_finite() {
        return Err(Error::invalid("reflection coefficient q must be finite and nonzero"));
    }
    let qa = b.q.abs();
    let c1 = b.theta_bar * qa * b.lambda0 / b.mu0;
    let c2 = (T::one() / b.c_lambda).max(T::one() / b.c_mu);
    let c3 = (T::one() + qa)
        * (b.lambda_prime_bar + b.mu_prime_bar + b.sigma_bar + b.omega_bar + b.theta_bar);
    let k1 = c1 * c2;
    let k2 = c2 * c3;
    Ok((k1, k2, k1 * k2.exp()))
}

#[derive(Clone, Copy, PartialEq)]
enum Channel {
    U,
    V,
}

/// Quadratic interpolation of `get(0..=last)` sampled at spacing `h`,
/// evaluated at `pos`; degrades to linear/nodal when fewer than three
/// samples exist.
fn quad_interp<T: Real>(get: &dyn Fn(usize) -> T, last: usize, pos: T, h: T) -> T {
    if last == 0 {
        return get(0);
    }
    let end = T::from_usize(last).unwrap() * h;
    let pos = pos.max(T::zero()).min(end);
    if last == 1 {
        let t = pos / h;
        return get(0) * (T::one() - t) + get(1) * t;
    }
    let m = (pos / h).floor().to_usize().unwrap_or(0).min(last - 1);
    let base = if m == 0 {
        0
    } else if m + 1 >= last {
        last - 2
    } else {
        m - 1
    };
    let t = (pos - T::from_usize(base).unwrap() * h) / h;
    let half = real::<T>(0.5);
    let one = T::one();
    let two = real::<T>(2.0);
    let w0 = half * (t - one) * (t - two);
    let w1 = t * (two - t);
    let w2 = half * t * (t - one);
    get(base) * w0 + get(base + 1) * w1 + get(base + 2) * w2
}

/// Solves the coupled kernel system (tolerance 1e-10, cap 300 sweeps),
/// computes the inverse kernels from the second-kind identities
/// `l_v = k_v + k_v * l_v` and `l_u = k_u + k_v * l_u`, the target kernels
/// `kappa_u = omega(x) l_u`, `kappa_v = omega(x) l_v`, and the gain traces.
pub fn solve_kernels_2x2<T: Real>(
    plant: &CoupledPlantSpec<T>,
    grid: &UniformGrid<T>,
) -> Result<CoupledKernelSolution<T>> {
    if plant.grid() != *grid {
        return Err(Error::invalid("plant coefficients are not on the solve grid"));
    }
    let n = grid.n();
    if n < 3 {
        return Err(Error::invalid("coupled solve needs at least 3 nodes"));
    }
    let h = grid.h();
    let half = real::<T>(0.5);
    let tol = solver_tol::<T>(1e-10);
    let max_sweeps = 300usize;
    let max_micro_steps = 10_000usize;

    let lambda_p = derivative(&plant.lambda)?;
    let mu_p = derivative(&plant.mu)?;
    let bottom_ratio = plant.q * plant.lambda.values()[0] / plant.mu.values()[0];
    let diag_data = |x: T| -plant.theta.eval(x) / (plant.lambda.eval(x) + plant.mu.eval(x));

    let mut ku = TriangularField::zeros(*grid);
    let mut kv = TriangularField::zeros(*grid);

    let mut iterations = 0usize;
    let mut residual = T::infinity();

    while iterations < max_sweeps {
        iterations += 1;
        let mut diff = T::zero();

        for i in 0..n {
            for ch in [Channel::U, Channel::V] {
                for j in 0..=i {
                    // data nodes are written verbatim
                    if ch == Channel::U && j == i {
                        let v = diag_data(grid.node(i));
                        diff = diff.max((v - ku.value(i, j)).abs());
                        ku.set(i, j, v);
                        continue;
                    }
                    if ch == Channel::V && j == 0 {
                        let v = bottom_ratio * ku.value(i, 0);
                        diff = diff.max((v - kv.value(i, 0)).abs());
                        kv.set(i, 0, v);
                        continue;
                    }

                    let x_prev_row = grid.node(i - 1);
                    let mut x = grid.node(i);
                    let mut xi = grid.node(j);
                    let mut acc = T::zero();

                    let rhs = |x: T, xi: T, ku: &TriangularField<T>, kv: &TriangularField<T>| match ch {
                        Channel::U => {
                            (lambda_p.eval(xi) + plant.sigma.eval(xi)) * ku.eval(x, xi)
                                + plant.theta.eval(xi) * kv.eval(x, xi)
                        }
                        Channel::V => {
                            mu_p.eval(xi) * kv.eval(x, xi) + plant.omega.eval(xi) * ku.eval(x, xi)
                        }
                    };
                    let vel = |x: T, xi: T| match ch {
                        Channel::U => (-plant.mu.eval(x), plant.lambda.eval(xi)),
                        Channel::V => (-plant.mu.eval(x), -plant.mu.eval(xi)),
                    };

                    let mut r_prev = rhs(x, xi, &ku, &kv);
                    let mut done = false;
                    let mut steps = 0usize;
                    while !done {
                        steps += 1;
                        if steps > max_micro_steps {
                            return Err(Error::no_converge(
                                "characteristic row hop exceeded the step cap",
                                f64::NAN,
                                steps,
                            ));
                        }
                        let (vx0, vxi0) = vel(x, xi);
                        let dtau = half * h / (vx0.abs() + vxi0.abs());
                        let (vxm, vxim) =
                            vel(x + half * dtau * vx0, xi + half * dtau * vxi0);
                        let xn = x + dtau * vxm;
                        let xin = xi + dtau * vxim;

                        // earliest crossing along the segment wins: the data
                        // face, otherwise the previous grid row
                        let mut alpha = T::one();
                        let mut event = 0u8; // 0 full step, 1 data face, 2 row
                        match ch {
                            Channel::U => {
                                let g0 = x - xi;
                                let g1 = xn - xin;
                                if g1 <= T::zero() && g0 > g1 {
                                    alpha = (g0 / (g0 - g1)).max(T::zero()).min(T::one());
                                    event = 1;
                                }
                            }
                            Channel::V => {
                                if xin <= T::zero() && xi > xin {
                                    alpha = (xi / (xi - xin)).max(T::zero()).min(T::one());
                                    event = 1;
                                }
                            }
                        }
                        if xn <= x_prev_row && x > xn {
                            let a_row =
                                ((x - x_prev_row) / (x - xn)).max(T::zero()).min(T::one());
                            if event == 0 || a_row < alpha {
                                alpha = a_row;
                                event = 2;
                            }
                        }

                        let xe = x + alpha * (xn - x);
                        let xie = xi + alpha * (xin - xi);
                        let r_new = rhs(xe, xie, &ku, &kv);
                        acc = acc + alpha * dtau * half * (r_prev + r_new);

                        match event {
                            0 => {
                                x = xn;
                                xi = xin;
                                r_prev = r_new;
                            }
                            1 => {
                                let base = match ch {
                                    Channel::U => diag_data(half * (xe + xie)),
                                    Channel::V => {
                                        bottom_ratio
                                            * quad_interp(&|m| ku.value(m, 0), n - 1, xe, h)
                                    }
                                };
                                let v = base + acc;
                                let old = match ch {
                                    Channel::U => ku.value(i, j),
                                    Channel::V => kv.value(i, j),
                                };
                                diff = diff.max((v - old).abs());
                                match ch {
                                    Channel::U => ku.set(i, j, v),
                                    Channel::V => kv.set(i, j, v),
                                }
                                done = true;
                            }
                            _ => {
                                let row = i - 1;
                                let base = match ch {
                                    Channel::U => {
                                        quad_interp(&|m| ku.value(row, m), row, xie, h)
                                    }
                                    Channel::V => {
                                        quad_interp(&|m| kv.value(row, m), row, xie, h)
                                    }
                                };
                                let v = base + acc;
                                let old = match ch {
                                    Channel::U => ku.value(i, j),
                                    Channel::V => kv.value(i, j),
                                };
                                diff = diff.max((v - old).abs());
                                match ch {
                                    Channel::U => ku.set(i, j, v),
                                    Channel::V => kv.set(i, j, v),
                                }
                                done = true;
                            }
                        }
                    }
                }
            }
        }

        residual = diff;
        if diff < tol {
            break;
        }
    }
    if residual >= tol {
        return Err(Error::no_converge(
            "coupled kernel Picard iteration",
            residual.to_f64().unwrap_or(f64::NAN),
            iterations,
        ));
    }

    let inv_tol = solver_tol::<T>(1e-12);
    let l_v = solve_second_kind(&kv, &kv, inv_tol, 200)?.field;
    let l_u = solve_second_kind(&kv, &ku, inv_tol, 200)?.field;

    let mut kappa_u = TriangularField::zeros(*grid);
    let mut kappa_v = TriangularField::zeros(*grid);
    for i in 0..n {
        let w = plant.omega.values()[i];
        for j in 0..=i {
            kappa_u.set(i, j, w * l_u.value(i, j));
            kappa_v.set(i, j, w * l_v.value(i, j));
        }
    }

    Ok(CoupledKernelSolution {
        gain_ku1: ku.top_trace(),
        gain_kv1: kv.top_trace(),
        k_u: ku,
        k_v: kv,
        l_u,
        l_v,
        kappa_u,
        kappa_v,
        iterations,
        residual,
    })
}

/// `beta = v - k_u * u - k_v * v` (forward) and its inverse
/// `v = beta + l_u * u + l_v * beta`; the `u` channel is never transformed.
pub fn transform_2x2<T: Real>(
    sol: &CoupledKernelSolution<T>,
    u: &ScalarField1D<T>,
    second: &ScalarField1D<T>,
    direction: crate::volterra::TransformDirection,
) -> Result<ScalarField1D<T>> {
    use crate::quad::trapz_product;
    use crate::volterra::TransformDirection::*;
    let grid = sol.k_u.grid();
    if u.grid() != grid || second.grid() != grid {
        return Err(Error::invalid("states are not on the kernel grid"));
    }
    let n = grid.n();
    let h = grid.h();
    let mut out = vec![T::zero(); n];
    for i in 0..n {
        out[i] = match direction {
            Forward => {
                second.values()[i]
                    - trapz_product(sol.k_u.row(i), u.values(), 0, i, h)
                    - trapz_product(sol.k_v.row(i), second.values(), 0, i, h)
            }
            Inverse => {
                second.values()[i]
                    + trapz_product(sol.l_u.row(i), u.values(), 0, i, h)
                    + trapz_product(sol.l_v.row(i), second.values(), 0, i, h)
            }
        };
    }
    ScalarField1D::new(grid, out)
}
