//! Closed-loop time stepper for the counter-convecting pair
//!
//! ```text
//! u_t = -lambda(x) u_x + sigma(x) u + omega(x) v,
//! v_t =     mu(x)  v_x + theta(x) u,
//! u(0,t) = q v(0,t),
//! v(1,t) = U(t) = integral over [0,1] of (gain_u u + gain_v v) dxi.
//! ```
//!
//! Each channel is upwinded along its own characteristic (backward
//! difference for u, forward for v) under the joint CFL bound
//! `dt <= h / max(sup lambda, sup mu)`. The reflection node copies the
//! freshly updated v, and the actuated node solves the feedback quadrature
//! self-consistently against the new states, so the transformed boundary
//! value stays at rounding level when the gains are exact.

use crate::error::{Error, Result};
use crate::field::ScalarField1D;
use crate::kernel::{transform_2x2, CoupledKernelSolution, CoupledPlantSpec};
use crate::norm::{norm, NormKind, WeightSign};
use crate::scalar::{real, Real};
use crate::volterra::TransformDirection;

use super::{check_time_inputs, push_snapshot, series, snapshot_stride, SimTrace};

/// Diagnostics computed along the run with the exact kernel quadruple.
#[derive(Debug, Clone)]
pub struct CoupledMonitor<T: Real> {
    pub solution: CoupledKernelSolution<T>,
    /// Weight parameter of the Lyapunov functional
    /// `V = a integral of e^{-c x} u^2 / lambda + integral of e^{c x} b^2 / mu`
    /// with `b` the transformed second state and `a = min(1/q^2, 1)`.
    pub c: T,
}

/// Plant, feedback traces, initial pair, and stepping controls.
#[derive(Debug, Clone)]
pub struct Coupled2x2Setup<T: Real> {
    pub plant: CoupledPlantSpec<T>,
    pub gain_u: ScalarField1D<T>,
    pub gain_v: ScalarField1D<T>,
    pub u0: ScalarField1D<T>,
    pub v0: ScalarField1D<T>,
    pub dt: T,
    pub horizon: T,
    pub monitor: Option<CoupledMonitor<T>>,
}

/// Runs the closed loop and records per-channel norms, the Lyapunov value,
/// boundary values, and thinned snapshots (`u` and `v`). At ingestion the
/// reflection node of `u0` and the actuated node of `v0` are overwritten so
/// the trajectory starts on both boundary manifolds.
pub fn simulate_2x2<T: Real>(setup: &Coupled2x2Setup<T>) -> Result<SimTrace<T>> {
    let grid = setup.plant.grid();
    if setup.u0.grid() != grid
        || setup.v0.grid() != grid
        || setup.gain_u.grid() != grid
        || setup.gain_v.grid() != grid
    {
        return Err(Error::invalid("plant, gain, and state grids differ"));
    }
    if let Some(m) = &setup.monitor {
        if m.solution.k_u.grid() != grid {
            return Err(Error::invalid("monitor kernels are not on the state grid"));
        }
    }
    let n = grid.n();
    if n < 3 {
        return Err(Error::invalid("simulation needs at least 3 nodes"));
    }
    let h = grid.h();
    let dt = setup.dt;
    let steps = check_time_inputs(dt, setup.horizon)?;
    let speed = setup.plant.lambda.sup_norm().max(setup.plant.mu.sup_norm());
    if dt * speed > h * (T::one() + real::<T>(1e-9)) {
        return Err(Error::invalid(format!(
            "dt max(lambda, mu)/h = {} exceeds the transport CFL limit of 1",
            dt * speed / h
        )));
    }

    let lam = setup.plant.lambda.values();
    let mu = setup.plant.mu.values();
    let sig = setup.plant.sigma.values();
    let omg = setup.plant.omega.values();
    let tht = setup.plant.theta.values();
    let q = setup.plant.q;
    let gu = setup.gain_u.values();
    let gv = setup.gain_v.values();
    let half = real::<T>(0.5);
    let denom = T::one() - half * h * gv[n - 1];
    if denom.abs() < real::<T>(0.25) {
        return Err(Error::no_converge(
            "self-consistent boundary feedback at x = 1",
            denom.abs().to_f64().unwrap_or(0.0),
            0,
        ));
    }

    let alpha = (T::one() / (q * q)).min(T::one());
    let lam_field = setup.plant.lambda.clone();
    let mu_field = setup.plant.mu.clone();

    let mut u = setup.u0.values().to_vec();
    let mut v = setup.v0.values().to_vec();
    u[0] = q * v[0];
    solve_boundary(&mut v, &u, gu, gv, h, denom);

    let stride = snapshot_stride(steps);
    let mut trace = SimTrace::new(grid, dt, steps);
    let record = |trace: &mut SimTrace<T>, t: T, u: &[T], v: &[T]| -> Result<()> {
        let uf = ScalarField1D::new(grid, u.to_vec())?;
        let vf = ScalarField1D::new(grid, v.to_vec())?;
        trace.times.push(t);
        let l2u = norm(&uf, &NormKind::L2)?;
        let l2v = norm(&vf, &NormKind::L2)?;
        trace.push(series::L2_U, l2u);
        trace.push(series::L2_V, l2v);
        trace.push(series::L2_SUM, l2u + l2v);
        trace.push(series::CONTROL, v[v.len() - 1]);
        trace.push(series::U_LEFT, u[0]);
        trace.push(series::V_LEFT, v[0]);
        if let Some(m) = &setup.monitor {
            let beta = transform_2x2(&m.solution, &uf, &vf, TransformDirection::Forward)?;
            trace.push(series::L2_W, norm(&beta, &NormKind::L2)?);
            trace.push(series::TARGET_BOUNDARY, beta.values()[v.len() - 1].abs());
            let part_u = norm(
                &uf,
                &NormKind::WeightedExp {
                    c: m.c,
                    sign: WeightSign::Minus,
                    divisor: Some(lam_field.clone()),
                },
            )?;
            let part_b = norm(
                &beta,
                &NormKind::WeightedExp {
                    c: m.c,
                    sign: WeightSign::Plus,
                    divisor: Some(mu_field.clone()),
                },
            )?;
            trace.push(series::LYAPUNOV, alpha * part_u + part_b);
        }
        Ok(())
    };

    record(&mut trace, T::zero(), &u, &v)?;
    push_snapshot(&mut trace, T::zero(), &u, Some(&v), &grid);

    let mut unew = vec![T::zero(); n];
    let mut vnew = vec![T::zero(); n];
    for m in 0..steps {
        for i in 0..n - 1 {
            vnew[i] = v[i] + dt * (mu[i] * (v[i + 1] - v[i]) / h + tht[i] * u[i]);
        }
        for i in 1..n {
            unew[i] = u[i]
                + dt * (-lam[i] * (u[i] - u[i - 1]) / h + sig[i] * u[i] + omg[i] * v[i]);
        }
        unew[0] = q * vnew[0];
        vnew[n - 1] = T::zero();
        solve_boundary(&mut vnew, &unew, gu, gv, h, denom);
        std::mem::swap(&mut u, &mut unew);
        std::mem::swap(&mut v, &mut vnew);

        let t = dt * T::from_usize(m + 1).unwrap();
        record(&mut trace, t, &u, &v)?;
        if (m + 1) % stride == 0 || m + 1 == steps {
            push_snapshot(&mut trace, t, &u, Some(&v), &grid);
        }
    }
    Ok(trace)
}

/// Overwrites `v[n-1]` with the unique value satisfying the two-channel
/// trapezoid feedback quadrature against `u` and the rest of `v`.
fn solve_boundary<T: Real>(v: &mut [T], u: &[T], gu: &[T], gv: &[T], h: T, denom: T) {
    let n = v.len();
    let half = real::<T>(0.5);
    let mut s = half * (gu[0] * u[0] + gv[0] * v[0] + gu[n - 1] * u[n - 1]);
    for j in 1..n - 1 {
        s = s + gu[j] * u[j] + gv[j] * v[j];
    }
    v[n - 1] = s * h / denom;
}
