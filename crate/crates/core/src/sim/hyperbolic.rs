//! Closed-loop time stepper for the first-order transport plant
//!
//! ```text
//! u_t = u_x + g(x) u(0,t) + integral over [0,x] of f(x,xi) u(xi,t) dxi,
//! u(1,t) = U(t) = integral over [0,1] of gain(xi) u(xi,t) dxi.
//! ```
//!
//! Transport moves values from `x = 1` toward `x = 0`, so the interior uses
//! the right-neighbor upwind difference under the CFL bound `dt <= h`; with
//! `dt = h` the convection becomes an exact shift. The actuated node solves
//! the feedback quadrature self-consistently against the freshly updated
//! interior, which keeps the transformed boundary value at zero to rounding
//! when the gain is exact.

use crate::error::{Error, Result};
use crate::field::{ScalarField1D, TriangularField};
use crate::norm::{norm, NormKind, WeightSign};
use crate::quad::trapz_product;
use crate::scalar::{real, Real};
use crate::volterra::{volterra_apply, TransformDirection};

use super::{check_time_inputs, push_snapshot, series, snapshot_stride, SimTrace};

/// Diagnostics computed along the run with the exact transform kernel.
#[derive(Debug, Clone)]
pub struct HyperbolicMonitor<T: Real> {
    pub kernel: TriangularField<T>,
    /// Weight parameter of the Lyapunov functional
    /// `V = integral of e^{c x} w^2`.
    pub c: T,
}

/// Plant coefficients, feedback gain, initial state, and stepping controls.
#[derive(Debug, Clone)]
pub struct HyperbolicSimSetup<T: Real> {
    pub f: TriangularField<T>,
    pub g: ScalarField1D<T>,
    pub gain: ScalarField1D<T>,
    pub u0: ScalarField1D<T>,
    pub dt: T,
    pub horizon: T,
    pub monitor: Option<HyperbolicMonitor<T>>,
}

/// Runs the closed loop and records norms, boundary values, and thinned
/// state snapshots. The actuated node of `u0` is overwritten at ingestion so
/// the trajectory starts on the feedback manifold.
pub fn simulate_hyperbolic_pide<T: Real>(setup: &HyperbolicSimSetup<T>) -> Result<SimTrace<T>> {
    let grid = setup.u0.grid();
    if setup.f.grid() != grid || setup.g.grid() != grid || setup.gain.grid() != grid {
        return Err(Error::invalid("plant, gain, and state grids differ"));
    }
    if let Some(m) = &setup.monitor {
        if m.kernel.grid() != grid {
            return Err(Error::invalid("monitor kernel is not on the state grid"));
        }
    }
    let n = grid.n();
    if n < 3 {
        return Err(Error::invalid("simulation needs at least 3 nodes"));
    }
    let h = grid.h();
    let dt = setup.dt;
    let steps = check_time_inputs(dt, setup.horizon)?;
    let nu = dt / h;
    if nu > T::one() + real::<T>(1e-9) {
        return Err(Error::invalid(format!(
            "dt/h = {nu} exceeds the transport CFL limit of 1"
        )));
    }

    let gain = setup.gain.values();
    let g = setup.g.values();
    let half = real::<T>(0.5);
    let denom = T::one() - half * h * gain[n - 1];
    if denom.abs() < real::<T>(0.25) {
        return Err(Error::no_converge(
            "self-consistent boundary feedback at x = 1",
            denom.abs().to_f64().unwrap_or(0.0),
            0,
        ));
    }

    let mut u = setup.u0.values().to_vec();
    solve_boundary(&mut u, gain, h, denom);

    let stride = snapshot_stride(steps);
    let mut trace = SimTrace::new(grid, dt, steps);
    let record = |trace: &mut SimTrace<T>, t: T, u: &[T]| -> Result<()> {
        let uf = ScalarField1D::new(grid, u.to_vec())?;
        trace.times.push(t);
        trace.push(series::L2_U, norm(&uf, &NormKind::L2)?);
        trace.push(series::CONTROL, u[n - 1]);
        trace.push(series::U_LEFT, u[0]);
        if let Some(m) = &setup.monitor {
            let w = volterra_apply(&m.kernel, &uf, TransformDirection::Forward)?;
            trace.push(series::L2_W, norm(&w, &NormKind::L2)?);
            trace.push(series::TARGET_BOUNDARY, w.values()[n - 1].abs());
            trace.push(
                series::LYAPUNOV,
                norm(
                    &w,
                    &NormKind::WeightedExp { c: m.c, sign: WeightSign::Plus, divisor: None },
                )?,
            );
        }
        Ok(())
    };

    record(&mut trace, T::zero(), &u)?;
    push_snapshot(&mut trace, T::zero(), &u, None, &grid);

    let mut unew = vec![T::zero(); n];
    for m in 0..steps {
        let u_left = u[0];
        for i in 0..n - 1 {
            let conv = nu * (u[i + 1] - u[i]);
            let src = g[i] * u_left + trapz_product(setup.f.row(i), &u, 0, i, h);
            unew[i] = u[i] + conv + dt * src;
        }
        unew[n - 1] = T::zero();
        solve_boundary(&mut unew, gain, h, denom);
        std::mem::swap(&mut u, &mut unew);

        let t = dt * T::from_usize(m + 1).unwrap();
        record(&mut trace, t, &u)?;
        if (m + 1) % stride == 0 || m + 1 == steps {
            push_snapshot(&mut trace, t, &u, None, &grid);
        }
    }
    Ok(trace)
}

/// Overwrites `u[n-1]` with the unique value satisfying the trapezoid
/// feedback quadrature against the rest of `u`.
fn solve_boundary<T: Real>(u: &mut [T], gain: &[T], h: T, denom: T) {
    let n = u.len();
    let half = real::<T>(0.5);
    let mut s = half * gain[0] * u[0];
    for j in 1..n - 1 {
        s = s + gain[j] * u[j];
    }
    u[n - 1] = s * h / denom;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_uniform_grid;

    fn zero_setup(n: usize, u0: impl Fn(f64) -> f64, dt_frac: f64, horizon: f64) -> HyperbolicSimSetup<f64> {
        let g = make_uniform_grid(n).unwrap();
        HyperbolicSimSetup {
            f: TriangularField::zeros(g),
            g: ScalarField1D::zeros(g),
            gain: ScalarField1D::zeros(g),
            u0: ScalarField1D::from_fn(g, u0).unwrap(),
            dt: g.h() * dt_frac,
            horizon,
            monitor: None,
        }
    }

    #[test]
    fn pure_transport_drains_to_exact_zero() {
        let setup = zero_setup(101, |x| (std::f64::consts::PI * x).sin(), 1.0, 2.0);
        let trace = simulate_hyperbolic_pide(&setup).unwrap();
        let l2 = trace.get(series::L2_U).unwrap();
        let h = setup.u0.grid().h();
        assert!(l2[0] > 0.5);
        for (t, v) in trace.times.iter().zip(l2.iter()) {
            if *t >= 1.0 + setup.dt - 1e-12 {
                assert!(*v <= 1e-6, "t={t}: norm {v}");
            }
        }
        assert!(trace.times.len() == (2.0 / h).round() as usize + 1);
    }

    #[test]
    fn unit_cfl_is_an_exact_shift() {
        let setup = zero_setup(101, |x| (3.0 * x).cos() * x, 1.0, 0.5);
        let trace = simulate_hyperbolic_pide(&setup).unwrap();
        let k = trace
            .snapshot_times
            .iter()
            .position(|t| (t - 0.5).abs() < 1e-12)
            .expect("snapshot at t = 0.5");
        let snap = &trace.snapshots[k];
        let g = setup.u0.grid();
        for i in 0..g.n() {
            let x = g.node(i);
            // Characteristics from x + 0.5 >= 1 carry the actuated node,
            // which ingestion pinned to the (zero) feedback value.
            let want = if x + 0.5 < 1.0 - 1e-12 {
                setup.u0.eval(x + 0.5)
            } else {
                0.0
            };
            assert!(
                (snap.u.values()[i] - want).abs() < 1e-12,
                "x={x}: got {}, want {want}",
                snap.u.values()[i]
            );
        }
    }

    #[test]
    fn boundary_is_self_consistent_with_the_gain_quadrature() {
        let g = make_uniform_grid::<f64>(81).unwrap();
        let setup = HyperbolicSimSetup {
            f: TriangularField::from_fn(g, |x, xi| 0.4 * (x - xi)).unwrap(),
            g: ScalarField1D::from_fn(g, |x| 0.3 * (1.0 - x)).unwrap(),
            gain: ScalarField1D::from_fn(g, |x| -0.8 * (2.0 * x).cos()).unwrap(),
            u0: ScalarField1D::from_fn(g, |x| (std::f64::consts::PI * x).sin() + 0.2).unwrap(),
            dt: g.h(),
            horizon: 0.3,
            monitor: None,
        };
        let trace = simulate_hyperbolic_pide(&setup).unwrap();
        for (k, t) in trace.snapshot_times.iter().enumerate() {
            let u = trace.snapshots[k].u.values();
            let quad = trapz_product(setup.gain.values(), u, 0, g.n() - 1, g.h());
            assert!(
                (u[g.n() - 1] - quad).abs() <= 1e-13,
                "t={t}: boundary {} vs quadrature {quad}",
                u[g.n() - 1]
            );
        }
    }

    #[test]
    fn monitor_records_target_boundary_near_zero_for_exact_style_gain() {
        // With kernel K and gain K(1,.), w(1) equals the self-consistency
        // defect, which the boundary solve keeps at rounding level.
        let g = make_uniform_grid::<f64>(61).unwrap();
        let kernel = TriangularField::from_fn(g, |x, xi| -0.5 * (x + 0.3 * xi)).unwrap();
        let setup = HyperbolicSimSetup {
            f: TriangularField::zeros(g),
            g: ScalarField1D::zeros(g),
            gain: ScalarField1D::new(g, kernel.top_trace().values().to_vec()).unwrap(),
            u0: ScalarField1D::from_fn(g, |x| (2.0 * x).sin()).unwrap(),
            dt: g.h(),
            horizon: 0.4,
            monitor: Some(HyperbolicMonitor { kernel, c: 1.0 }),
        };
        let trace = simulate_hyperbolic_pide(&setup).unwrap();
        let tb = trace.get(series::TARGET_BOUNDARY).unwrap();
        for (t, v) in trace.times.iter().zip(tb.iter()) {
            assert!(*v <= 1e-12, "t={t}: |w(1)| = {v}");
        }
        assert!(trace.get(series::LYAPUNOV).is_some());
    }

    #[test]
    fn rejects_cfl_violation_and_grid_mismatch() {
        let bad = zero_setup(41, |x| x, 1.5, 1.0);
        assert!(simulate_hyperbolic_pide(&bad).is_err());

        let g = make_uniform_grid(41).unwrap();
        let g2 = make_uniform_grid(43).unwrap();
        let setup = HyperbolicSimSetup {
            f: TriangularField::zeros(g),
            g: ScalarField1D::zeros(g),
            gain: ScalarField1D::zeros(g2),
            u0: ScalarField1D::from_fn(g, |x| x).unwrap(),
            dt: g.h(),
            horizon: 1.0,
            monitor: None,
        };
        assert!(simulate_hyperbolic_pide(&setup).is_err());
    }

    #[test]
    fn snapshot_thinning_keeps_about_a_hundred() {
        let setup = zero_setup(201, |x| x * (1.0 - x), 1.0, 3.0);
        let trace = simulate_hyperbolic_pide(&setup).unwrap();
        assert!(trace.snapshots.len() <= 103, "{}", trace.snapshots.len());
        assert!(trace.snapshots.len() >= 50);
        assert_eq!(trace.snapshots.len(), trace.snapshot_times.len());
    }
}
