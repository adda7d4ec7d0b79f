//! Closed-loop time stepper for the reaction-diffusion plant
//!
//! ```text
//! u_t = u_xx + lambda(x) u,
//! ```
//!
//! with either value actuation (`Dirichlet`: u(0) = 0, u(1) = U) or slope
//! actuation (`Neumann`: u_x(0) = 0, u_x(1) = U). Diffusion advances by
//! Crank-Nicolson; the reaction term and the feedback quadrature stay
//! explicit at the step being left. Neumann slopes enter through
//! second-order ghost nodes, which fold into the first and last tridiagonal
//! rows. The tridiagonal factorization is constant along the run and is
//! reused every step.

use crate::error::{Error, Result};
use crate::field::{ScalarField1D, TriangularField};
use crate::kernel::{ParabolicBc, ParabolicGain};
use crate::norm::{derivative, norm, NormKind};
use crate::quad::trapz_product;
use crate::scalar::{real, Real};
use crate::volterra::{volterra_apply, TransformDirection};

use super::{check_time_inputs, push_snapshot, series, snapshot_stride, SimTrace};

/// Plant data, boundary family, feedback gain, and stepping controls.
/// `gain: None` runs the loop open (U = 0).
#[derive(Debug, Clone)]
pub struct ReactionDiffusionSetup<T: Real> {
    pub lambda: ScalarField1D<T>,
    pub bc: ParabolicBc<T>,
    pub gain: Option<ParabolicGain<T>>,
    pub u0: ScalarField1D<T>,
    pub dt: T,
    pub horizon: T,
    /// Exact transform kernel for the diagnostic series; skipped when absent.
    pub monitor_kernel: Option<TriangularField<T>>,
}

struct TriFactor<T> {
    sub: Vec<T>,
    cp: Vec<T>,
    di: Vec<T>,
}

impl<T: Real> TriFactor<T> {
    /// LU factorization of a tridiagonal system; rows here are strictly
    /// diagonally dominant so no pivoting is needed.
    fn new(sub: Vec<T>, diag: Vec<T>, sup: Vec<T>) -> Result<Self> {
        let m = diag.len();
        let mut cp = vec![T::zero(); m];
        let mut di = vec![T::zero(); m];
        let mut den = diag[0];
        for i in 0..m {
            if i > 0 {
                den = diag[i] - sub[i] * cp[i - 1];
            }
            if den.abs() < real::<T>(1e-300) {
                return Err(Error::no_converge(
                    "tridiagonal factorization",
                    den.to_f64().unwrap_or(0.0),
                    i,
                ));
            }
            di[i] = T::one() / den;
            if i + 1 < m {
                cp[i] = sup[i] * di[i];
            }
        }
        Ok(TriFactor { sub, cp, di })
    }

    fn solve(&self, rhs: &mut [T]) {
        let m = rhs.len();
        rhs[0] = rhs[0] * self.di[0];
        for i in 1..m {
            rhs[i] = (rhs[i] - self.sub[i] * rhs[i - 1]) * self.di[i];
        }
        for i in (0..m - 1).rev() {
            rhs[i] = rhs[i] - self.cp[i] * rhs[i + 1];
        }
    }
}

fn feedback<T: Real>(
    gain: &Option<ParabolicGain<T>>,
    bc: &ParabolicBc<T>,
    u: &[T],
    h: T,
) -> T {
    let n = u.len();
    match gain {
        None => T::zero(),
        Some(ParabolicGain::Dirichlet { k1 }) => trapz_product(k1.values(), u, 0, n - 1, h),
        Some(ParabolicGain::Neumann { k11, k1n }) => {
            let q = match bc {
                ParabolicBc::Neumann { q } => *q,
                ParabolicBc::Dirichlet => unreachable!("variant checked at entry"),
            };
            (*k11 - q) * u[n - 1] + trapz_product(k1n.values(), u, 0, n - 1, h)
        }
    }
}

/// Runs the closed loop and records norms, the Lyapunov split, boundary
/// values, and thinned snapshots. Dirichlet runs overwrite the actuated node
/// of `u0` at ingestion; a Dirichlet initial state must satisfy u0(0) = 0.
pub fn simulate_reaction_diffusion<T: Real>(
    setup: &ReactionDiffusionSetup<T>,
) -> Result<SimTrace<T>> {
    let grid = setup.u0.grid();
    if setup.lambda.grid() != grid {
        return Err(Error::invalid("lambda is not on the state grid"));
    }
    if let Some(k) = &setup.monitor_kernel {
        if k.grid() != grid {
            return Err(Error::invalid("monitor kernel is not on the state grid"));
        }
    }
    let dirichlet = matches!(setup.bc, ParabolicBc::Dirichlet);
    match (&setup.gain, dirichlet) {
        (Some(ParabolicGain::Dirichlet { k1 }), true) => {
            if k1.grid() != grid {
                return Err(Error::invalid("gain is not on the state grid"));
            }
        }
        (Some(ParabolicGain::Neumann { k1n, .. }), false) => {
            if k1n.grid() != grid {
                return Err(Error::invalid("gain is not on the state grid"));
            }
        }
        (None, _) => {}
        _ => return Err(Error::invalid("gain variant does not match the boundary family")),
    }
    let n = grid.n();
    if n < 5 {
        return Err(Error::invalid("simulation needs at least 5 nodes"));
    }
    let h = grid.h();
    let dt = setup.dt;
    let steps = check_time_inputs(dt, setup.horizon)?;
    let lam = setup.lambda.values();
    let lam_sup = setup.lambda.sup_norm();
    if dt * lam_sup > real::<T>(0.5) {
        return Err(Error::invalid(format!(
            "explicit reaction needs dt * sup|lambda| <= 0.5, got {}",
            dt * lam_sup
        )));
    }
    if dirichlet && setup.u0.values()[0].abs() > real::<T>(1e-12) {
        return Err(Error::invalid(format!(
            "Dirichlet initial state must vanish at x = 0, got {}",
            setup.u0.values()[0]
        )));
    }

    let r = dt / (h * h);
    let half = real::<T>(0.5);
    let two = real::<T>(2.0);

    // Dirichlet solves for the n-2 interior nodes; Neumann for all n with
    // ghost-folded end rows.
    let factor = if dirichlet {
        let m = n - 2;
        TriFactor::new(
            vec![-half * r; m],
            vec![T::one() + r; m],
            vec![-half * r; m],
        )?
    } else {
        let mut sub = vec![-half * r; n];
        let mut sup = vec![-half * r; n];
        sub[n - 1] = -r;
        sup[0] = -r;
        TriFactor::new(sub, vec![T::one() + r; n], sup)?
    };

    let mut u = setup.u0.values().to_vec();
    if dirichlet {
        u[n - 1] = feedback(&setup.gain, &setup.bc, &u, h);
    }

    let stride = snapshot_stride(steps);
    let mut trace = SimTrace::new(grid, dt, steps);
    let record = |trace: &mut SimTrace<T>, t: T, u: &[T], control: T| -> Result<()> {
        let uf = ScalarField1D::new(grid, u.to_vec())?;
        trace.times.push(t);
        trace.push(series::L2_U, norm(&uf, &NormKind::L2)?);
        trace.push(series::H1_U, norm(&uf, &NormKind::H1)?);
        trace.push(series::CONTROL, control);
        trace.push(series::U_LEFT, u[0]);
        if let Some(kernel) = &setup.monitor_kernel {
            let w = volterra_apply(kernel, &uf, TransformDirection::Forward)?;
            let wl2 = norm(&w, &NormKind::L2)?;
            let v1 = half * wl2 * wl2;
            let wd = derivative(&w)?;
            let wdl2 = norm(&wd, &NormKind::L2)?;
            let v2 = half * wdl2 * wdl2;
            trace.push(series::L2_W, wl2);
            trace.push(series::V1, v1);
            trace.push(series::V2, v2);
            let wv = w.values();
            match setup.bc {
                ParabolicBc::Dirichlet => {
                    trace.push(series::LYAPUNOV, v1 + real::<T>(4.0) * v2);
                    trace.push(series::TARGET_BOUNDARY, wv[n - 1].abs());
                }
                ParabolicBc::Neumann { q } => {
                    trace.push(series::LYAPUNOV, v1);
                    let wx1 = (real::<T>(3.0) * wv[n - 1] - real::<T>(4.0) * wv[n - 2]
                        + wv[n - 3])
                        / (two * h);
                    trace.push(series::TARGET_BOUNDARY, (wx1 + q * wv[n - 1]).abs());
                }
            }
        }
        Ok(())
    };

    let control0 = feedback(&setup.gain, &setup.bc, &u, h);
    record(&mut trace, T::zero(), &u, control0)?;
    push_snapshot(&mut trace, T::zero(), &u, None, &grid);

    let mut rhs = vec![T::zero(); if dirichlet { n - 2 } else { n }];
    for m in 0..steps {
        let ctrl = feedback(&setup.gain, &setup.bc, &u, h);
        if dirichlet {
            for i in 1..n - 1 {
                rhs[i - 1] = u[i]
                    + half * r * (u[i + 1] - two * u[i] + u[i - 1])
                    + dt * lam[i] * u[i];
            }
            rhs[n - 3] = rhs[n - 3] + half * r * ctrl;
            factor.solve(&mut rhs);
            u[0] = T::zero();
            u[1..n - 1].copy_from_slice(&rhs);
            u[n - 1] = ctrl;
        } else {
            rhs[0] = u[0] + r * (u[1] - u[0]) + dt * lam[0] * u[0];
            for i in 1..n - 1 {
                rhs[i] =
                    u[i] + half * r * (u[i + 1] - two * u[i] + u[i - 1]) + dt * lam[i] * u[i];
            }
            rhs[n - 1] = u[n - 1]
                + r * (u[n - 2] - u[n - 1])
                + two * dt / h * ctrl
                + dt * lam[n - 1] * u[n - 1];
            factor.solve(&mut rhs);
            u.copy_from_slice(&rhs);
        }

        let t = dt * T::from_usize(m + 1).unwrap();
        record(&mut trace, t, &u, ctrl)?;
        if (m + 1) % stride == 0 || m + 1 == steps {
            push_snapshot(&mut trace, t, &u, None, &grid);
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_uniform_grid;
    use crate::sim::{estimate_decay_rate, lyapunov_derivative_check};
    use std::f64::consts::PI;

    #[test]
    fn open_loop_heat_equation_decays_at_pi_squared() {
        let g = make_uniform_grid::<f64>(101).unwrap();
        let setup = ReactionDiffusionSetup {
            lambda: ScalarField1D::zeros(g),
            bc: ParabolicBc::Dirichlet,
            gain: None,
            u0: ScalarField1D::from_fn(g, |x| (PI * x).sin()).unwrap(),
            dt: 1e-4,
            horizon: 0.5,
            monitor_kernel: None,
        };
        let trace = simulate_reaction_diffusion(&setup).unwrap();
        let est = estimate_decay_rate(&trace, series::L2_U, (0.1, 0.5)).unwrap();
        let want = PI * PI;
        assert!(
            (est.rate - want).abs() <= 0.01 * want,
            "rate {} vs pi^2 {}",
            est.rate,
            want
        );
        assert!(est.fit_quality > 0.9999);
    }

    #[test]
    fn open_loop_reaction_15_grows_at_15_minus_pi_squared() {
        let g = make_uniform_grid(81).unwrap();
        let setup = ReactionDiffusionSetup {
            lambda: ScalarField1D::constant(g, 15.0).unwrap(),
            bc: ParabolicBc::Dirichlet,
            gain: None,
            u0: ScalarField1D::from_fn(g, |x| (PI * x).sin()).unwrap(),
            dt: 2e-4,
            horizon: 1.0,
            monitor_kernel: None,
        };
        let trace = simulate_reaction_diffusion(&setup).unwrap();
        let est = estimate_decay_rate(&trace, series::L2_U, (0.3, 1.0)).unwrap();
        let want = -(15.0 - PI * PI);
        assert!(
            (est.rate - want).abs() <= 0.05 * want.abs(),
            "rate {} vs {}",
            est.rate,
            want
        );
    }

    /// For lambda + c = 0 the transform kernel vanishes and the exact gain
    /// reduces to the Robin feedback u_x(1) = -q u(1); the slowest mode then
    /// decays at beta^2 with beta tan(beta) = q.
    #[test]
    fn neumann_robin_feedback_damps_the_slow_mode() {
        let g = make_uniform_grid(101).unwrap();
        let q = 2.0;
        let setup = ReactionDiffusionSetup {
            lambda: ScalarField1D::zeros(g),
            bc: ParabolicBc::Neumann { q },
            gain: Some(ParabolicGain::Neumann {
                k11: 0.0,
                k1n: ScalarField1D::zeros(g),
            }),
            u0: ScalarField1D::from_fn(g, |x| 1.0 + 0.3 * (PI * x).cos()).unwrap(),
            dt: 2e-4,
            horizon: 3.0,
            monitor_kernel: Some(TriangularField::zeros(g)),
        };
        let trace = simulate_reaction_diffusion(&setup).unwrap();
        let est = estimate_decay_rate(&trace, series::L2_U, (1.5, 3.0)).unwrap();
        // beta solves beta tan(beta) = 2, beta^2 = 1.1597...
        assert!(
            est.rate > 1.10 && est.rate < 1.22,
            "slow-mode rate {}",
            est.rate
        );
        let chk = lyapunov_derivative_check(&trace, series::V1, 0.25, 0.95).unwrap();
        assert!(chk.pass, "V1 fraction {}", chk.fraction);
    }

    #[test]
    fn dirichlet_records_h1_and_lyapunov_split() {
        let g = make_uniform_grid::<f64>(51).unwrap();
        let setup = ReactionDiffusionSetup {
            lambda: ScalarField1D::zeros(g),
            bc: ParabolicBc::Dirichlet,
            gain: None,
            u0: ScalarField1D::from_fn(g, |x| (PI * x).sin()).unwrap(),
            dt: 1e-4,
            horizon: 0.05,
            monitor_kernel: Some(TriangularField::zeros(g)),
        };
        let trace = simulate_reaction_diffusion(&setup).unwrap();
        let v1 = trace.get(series::V1).unwrap();
        let v2 = trace.get(series::V2).unwrap();
        let v = trace.get(series::LYAPUNOV).unwrap();
        for k in 0..v.len() {
            assert!((v[k] - (v1[k] + 4.0 * v2[k])).abs() < 1e-14);
        }
        // w = u here; sin(pi x) gives V2/V1 = pi^2 up to the stencil.
        assert!((v2[0] / v1[0] - PI * PI).abs() < 0.01 * PI * PI);
        let tb = trace.get(series::TARGET_BOUNDARY).unwrap();
        assert!(tb.iter().all(|b| *b <= 1e-12));
    }

    #[test]
    fn rejects_bad_setups() {
        let g = make_uniform_grid::<f64>(41).unwrap();
        let g2 = make_uniform_grid(43).unwrap();
        let base = ReactionDiffusionSetup {
            lambda: ScalarField1D::zeros(g),
            bc: ParabolicBc::Dirichlet,
            gain: None,
            u0: ScalarField1D::from_fn(g, |x| (PI * x).sin()).unwrap(),
            dt: 1e-4,
            horizon: 0.1,
            monitor_kernel: None,
        };

        let mut off_manifold = base.clone();
        off_manifold.u0 = ScalarField1D::constant(g, 1.0).unwrap();
        assert!(simulate_reaction_diffusion(&off_manifold).is_err());

        let mut stiff = base.clone();
        stiff.lambda = ScalarField1D::constant(g, 100.0).unwrap();
        stiff.dt = 0.01;
        assert!(simulate_reaction_diffusion(&stiff).is_err());

        let mut mismatched = base.clone();
        mismatched.gain = Some(ParabolicGain::Dirichlet { k1: ScalarField1D::zeros(g2) });
        assert!(simulate_reaction_diffusion(&mismatched).is_err());

        let mut wrong_variant = base;
        wrong_variant.gain = Some(ParabolicGain::Neumann {
            k11: 0.0,
            k1n: ScalarField1D::zeros(g),
        });
        assert!(simulate_reaction_diffusion(&wrong_variant).is_err());
    }
}
