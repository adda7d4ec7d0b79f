//! Gain accuracy budgets, controlled gain perturbations, a least-squares
//! surrogate for the coefficient-to-gain map, and the boundary perturbation
//! functions the budgets protect against.
//!
//! Each stabilization family tolerates a sup-norm gain error up to a budget
//! `epsilon*` computed in closed form from coefficient bounds. A gain
//! approximated within the budget induces a target-system boundary
//! perturbation `G` small enough that the family's Lyapunov argument still
//! closes, which is what the simulators downstream verify empirically.

use crate::error::{Error, Result};
use crate::field::{ScalarField1D, TriangularField};
use crate::kernel::coupled::{coupled_kernel_bound, CoupledBoundSet};
use crate::scalar::{real, Real};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Inputs the budget was evaluated at, kept with the value so reports can
/// show every intermediate constant.
#[derive(Debug, Clone, PartialEq)]
pub enum EpsilonFamily<T: Real> {
    Hyperbolic {
        b_f: T,
        b_g: T,
        c: T,
    },
    Dirichlet {
        b_lambda: T,
        c: T,
    },
    Neumann {
        b_lambda: T,
        c: T,
        q: T,
    },
    Coupled {
        bound_set: CoupledBoundSet<T>,
        b_lambda: T,
        b_mu: T,
        b_sigma: T,
        b_omega: T,
        c_bar: T,
        c: T,
        delta: T,
        k1: T,
        k2: T,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonBudget<T: Real> {
    pub value: T,
    pub family: EpsilonFamily<T>,
}

fn check_bound<T: Real>(name: &str, v: T) -> Result<()> {
    if !(v.is_finite() && v >= T::zero()) {
        return Err(Error::invalid(format!("{name} must be finite and nonnegative")));
    }
    Ok(())
}

/// `sqrt(c / (2 e^c)) / (1 + (B_f + B_g) e^{B_f + B_g})`, requiring `c > 0`.
pub fn epsilon_star_hyperbolic<T: Real>(b_f: T, b_g: T, c: T) -> Result<EpsilonBudget<T>> {
    check_bound("B_f", b_f)?;
    check_bound("B_g", b_g)?;
    if !(c > T::zero() && c.is_finite()) {
        return Err(Error::invalid("decay parameter c must be positive"));
    }
    let two = real::<T>(2.0);
    let s = b_f + b_g;
    let value = (c / (two * c.exp())).sqrt() / (T::one() + s * s.exp());
    Ok(EpsilonBudget { value, family: EpsilonFamily::Hyperbolic { b_f, b_g, c } })
}

/// `1 / (sqrt(20) (1 + (c + B_lambda) e^{2(c + B_lambda)}))`.
pub fn epsilon_star_dirichlet<T: Real>(b_lambda: T, c: T) -> Result<EpsilonBudget<T>> {
    check_bound("B_lambda", b_lambda)?;
    check_bound("c", c)?;
    let s = c + b_lambda;
    let value = T::one()
        / (real::<T>(20.0).sqrt() * (T::one() + s * (real::<T>(2.0) * s).exp()));
    Ok(EpsilonBudget { value, family: EpsilonFamily::Dirichlet { b_lambda, c } })
}

/// `sqrt((q - 1)/2) / (1 + 2(c + B_lambda) e^{4(c + B_lambda)})`, requiring
/// `q > 1`.
pub fn epsilon_star_neumann<T: Real>(b_lambda: T, c: T, q: T) -> Result<EpsilonBudget<T>> {
    check_bound("B_lambda", b_lambda)?;
    check_bound("c", c)?;
    if !(q > T::one()) {
        return Err(Error::invalid(format!("Neumann budget needs q > 1, got {q}")));
    }
    let two = real::<T>(2.0);
    let s = c + b_lambda;
    let value = ((q - T::one()) / two).sqrt()
        / (T::one() + two * s * (real::<T>(4.0) * s).exp());
    Ok(EpsilonBudget { value, family: EpsilonFamily::Neumann { b_lambda, c, q } })
}

/// Coupled-family budget. Computes `K1, K2` from the bound set, then
///
/// ```text
/// delta1 = (1/C_lambda) (2 B_sigma + B_omega (1 + K1 e^{K2} (1 + sqrt(B_lambda/C_lambda)))),
/// delta2 = (B_mu / (C_lambda C_mu)) B_omega (1 + K1 e^{K2}),
/// c      = 2 c_bar / min{C_lambda, C_mu} + 2 max{delta1, delta2},
/// eps*   = [sqrt(c C_lambda (1+q^2) e^{-2c} / (4 B_lambda))
///           + sqrt(c C_mu e^{-c} / (4 B_mu))] / (1 + 2 K1 e^{K2}).
/// ```
pub fn epsilon_star_coupled<T: Real>(
    bound_set: &CoupledBoundSet<T>,
    b_lambda: T,
    b_mu: T,
    c_bar: T,
) -> Result<EpsilonBudget<T>> {
    if !(c_bar > T::zero() && c_bar.is_finite()) {
        return Err(Error::invalid("target decay rate c_bar must be positive"));
    }
    if !(b_lambda > T::zero() && b_mu > T::zero()) {
        return Err(Error::invalid("speed sup-bounds B_lambda, B_mu must be positive"));
    }
    if b_lambda < bound_set.c_lambda || b_mu < bound_set.c_mu {
        return Err(Error::invalid("speed sup-bounds must dominate the declared floors"));
    }
    let (k1, k2, kexp) = coupled_kernel_bound(bound_set)?;
    let b_sigma = bound_set.sigma_bar;
    let b_omega = bound_set.omega_bar;
    let two = real::<T>(2.0);
    let four = real::<T>(4.0);
    let delta1 = (two * b_sigma
        + b_omega * (T::one() + kexp * (T::one() + (b_lambda / bound_set.c_lambda).sqrt())))
        / bound_set.c_lambda;
    let delta2 = b_mu / (bound_set.c_lambda * bound_set.c_mu) * b_omega * (T::one() + kexp);
    let delta = delta1.max(delta2);
    let c = two * c_bar / bound_set.c_lambda.min(bound_set.c_mu) + two * delta;
    let q2 = bound_set.q * bound_set.q;
    let num = (c * bound_set.c_lambda * (T::one() + q2) * (-two * c).exp() / (four * b_lambda))
        .sqrt()
        + (c * bound_set.c_mu * (-c).exp() / (four * b_mu)).sqrt();
    let value = num / (T::one() + two * kexp);
    Ok(EpsilonBudget {
        value,
        family: EpsilonFamily::Coupled {
            bound_set: *bound_set,
            b_lambda,
            b_mu,
            b_sigma,
            b_omega,
            c_bar,
            c,
            delta,
            k1,
            k2,
        },
    })
}

/// Sup-norm targets the proofs impose on the boundary perturbation induced
/// by a within-budget gain error: one target for the scalar families, a
/// `(g_u, g_v)` pair for the coupled family.
pub fn proof_g_targets<T: Real>(budget: &EpsilonBudget<T>) -> (T, Option<T>) {
    let two = real::<T>(2.0);
    let four = real::<T>(4.0);
    match &budget.family {
        EpsilonFamily::Hyperbolic { c, .. } => (((*c) * (-*c).exp() / two).sqrt(), None),
        EpsilonFamily::Dirichlet { .. } => ((T::one() / real::<T>(20.0)).sqrt(), None),
        EpsilonFamily::Neumann { q, .. } => (((*q - T::one()) / two).sqrt(), None),
        EpsilonFamily::Coupled { bound_set, b_lambda, b_mu, c, .. } => {
            let q2 = bound_set.q * bound_set.q;
            let gu = (*c * bound_set.c_lambda * (T::one() + q2) * (-two * *c).exp()
                / (four * *b_lambda))
                .sqrt();
            let gv = (*c * bound_set.c_mu * (-*c).exp() / (four * *b_mu)).sqrt();
            (gu, Some(gv))
        }
    }
}

/// How an approximate gain was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbMode {
    ConstantOffset,
    SmoothNoise { seed: u64 },
    SurrogateFit { basis_size: usize },
}

/// Which perturbation generator to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbKind {
    ConstantOffset,
    SmoothNoise,
}

/// A gain with a certified sup-error against the exact one.
#[derive(Debug, Clone)]
pub struct ApproxGain<T: Real> {
    pub values: ScalarField1D<T>,
    pub declared_eps: T,
    pub mode: PerturbMode,
}

/// Shifts or smoothly perturbs an exact gain so the sup-error equals `eps`
/// at one node at least. `SmoothNoise` adds a seeded 5-term cosine series
/// rescaled to peak `eps` on the grid.
pub fn perturb_gain<T: Real>(
    exact: &ScalarField1D<T>,
    eps: T,
    kind: PerturbKind,
    seed: u64,
) -> Result<ApproxGain<T>> {
    if !(eps > T::zero() && eps.is_finite()) {
        return Err(Error::invalid("perturbation size eps must be positive"));
    }
    let grid = exact.grid();
    match kind {
        PerturbKind::ConstantOffset => {
            let values =
                ScalarField1D::new(grid, exact.values().iter().map(|&v| v + eps).collect())?;
            Ok(ApproxGain { values, declared_eps: eps, mode: PerturbMode::ConstantOffset })
        }
        PerturbKind::SmoothNoise => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut amps = [0.0f64; 5];
            let mut phases = [0.0f64; 5];
            for k in 0..5 {
                amps[k] = rng.gen_range(-1.0..1.0);
                phases[k] = rng.gen_range(0.0..std::f64::consts::TAU);
            }
            let eta = ScalarField1D::from_fn(grid, |x| {
                let xf = x.to_f64().unwrap();
                let mut s = 0.0;
                for k in 0..5 {
                    s += amps[k] * ((k as f64 + 1.0) * std::f64::consts::PI * xf + phases[k]).cos();
                }
                real::<T>(s)
            })?;
            let peak = eta.sup_norm();
            if peak <= T::zero() {
                return Err(Error::no_converge("noise draw degenerated to zero", 0.0, 0));
            }
            let scale = eps / peak;
            let values = ScalarField1D::new(
                grid,
                exact
                    .values()
                    .iter()
                    .zip(eta.values())
                    .map(|(&v, &e)| v + scale * e)
                    .collect(),
            )?;
            Ok(ApproxGain { values, declared_eps: eps, mode: PerturbMode::SmoothNoise { seed } })
        }
    }
}

/// Kernel ridge regression from coefficient-field sensor readings to gain
/// node values: inputs are each coefficient field sampled at 16 equispaced
/// sensors, the kernel is `(1 + <z, z'>/dim)^4`, the centers are the first
/// `basis_size` training samples, and the ridge weight is `1e-10 * m` for
/// `m` training samples. `declared_eps` is the measured sup-error of the
/// prediction for `probe_coeffs` against the caller's independently solved
/// `probe_exact_gain`; extrapolation is never an error, just an honest
/// number.
pub fn fit_surrogate_gain<T: Real>(
    samples: &[(Vec<ScalarField1D<T>>, ScalarField1D<T>)],
    basis_size: usize,
    probe_coeffs: &[ScalarField1D<T>],
    probe_exact_gain: &ScalarField1D<T>,
) -> Result<ApproxGain<T>> {
    const SENSORS: usize = 16;
    if basis_size == 0 {
        return Err(Error::invalid("basis_size must be at least 1"));
    }
    if samples.len() < basis_size {
        return Err(Error::invalid(format!(
            "need at least basis_size = {basis_size} training samples, got {}",
            samples.len()
        )));
    }
    let ncoef = probe_coeffs.len();
    if ncoef == 0 {
        return Err(Error::invalid("at least one coefficient field is required"));
    }
    let gain_grid = samples[0].1.grid();
    for (coeffs, gain) in samples {
        if coeffs.len() != ncoef {
            return Err(Error::invalid("inconsistent coefficient-field counts across samples"));
        }
        if gain.grid() != gain_grid {
            return Err(Error::invalid("training gains are not on one grid"));
        }
    }
    if probe_exact_gain.grid() != gain_grid {
        return Err(Error::invalid("probe gain is not on the training grid"));
    }

    let featurize = |coeffs: &[ScalarField1D<T>]| -> Vec<T> {
        let mut z = Vec::with_capacity(1 + SENSORS * coeffs.len());
        z.push(T::one());
        for f in coeffs {
            for s in 0..SENSORS {
                z.push(f.eval(real::<T>(s as f64 / (SENSORS - 1) as f64)));
            }
        }
        z
    };
    let dim = real::<T>((1 + SENSORS * ncoef) as f64);
    let kfun = |a: &[T], b: &[T]| {
        let mut dot = T::zero();
        for (x, y) in a.iter().zip(b) {
            dot = dot + *x * *y;
        }
        let base = T::one() + dot / dim;
        let sq = base * base;
        sq * sq
    };

    let m = samples.len();
    let feats: Vec<Vec<T>> = samples.iter().map(|(c, _)| featurize(c)).collect();
    let n_gain = gain_grid.n();

    // normal equations (K_sc^T K_sc + rho I) alpha = K_sc^T Y over the
    // center subset, one right-hand side per gain node
    let mut ksc = vec![T::zero(); m * basis_size];
    for i in 0..m {
        for j in 0..basis_size {
            ksc[i * basis_size + j] = kfun(&feats[i], &feats[j]);
        }
    }
    let rho = real::<T>(1e-10) * real::<T>(m as f64);
    let mut a = vec![T::zero(); basis_size * basis_size];
    for r in 0..basis_size {
        for c in 0..basis_size {
            let mut s = T::zero();
            for i in 0..m {
                s = s + ksc[i * basis_size + r] * ksc[i * basis_size + c];
            }
            a[r * basis_size + c] = s + if r == c { rho } else { T::zero() };
        }
    }
    let mut rhs = vec![T::zero(); basis_size * n_gain];
    for r in 0..basis_size {
        for g in 0..n_gain {
            let mut s = T::zero();
            for i in 0..m {
                s = s + ksc[i * basis_size + r] * samples[i].1.values()[g];
            }
            rhs[r * n_gain + g] = s;
        }
    }

    // Cholesky A = L L^T, then forward/back substitution per gain node
    let mut l = vec![T::zero(); basis_size * basis_size];
    for r in 0..basis_size {
        for c in 0..=r {
            let mut s = a[r * basis_size + c];
            for k in 0..c {
                s = s - l[r * basis_size + k] * l[c * basis_size + k];
            }
            if r == c {
                if s <= T::zero() {
                    return Err(Error::no_converge(
                        "surrogate normal equations lost positive definiteness",
                        s.to_f64().unwrap_or(f64::NAN),
                        r,
                    ));
                }
                l[r * basis_size + c] = s.sqrt();
            } else {
                l[r * basis_size + c] = s / l[c * basis_size + c];
            }
        }
    }
    let mut alpha = rhs;
    for g in 0..n_gain {
        for r in 0..basis_size {
            let mut s = alpha[r * n_gain + g];
            for k in 0..r {
                s = s - l[r * basis_size + k] * alpha[k * n_gain + g];
            }
            alpha[r * n_gain + g] = s / l[r * basis_size + r];
        }
        for r in (0..basis_size).rev() {
            let mut s = alpha[r * n_gain + g];
            for k in r + 1..basis_size {
                s = s - l[k * basis_size + r] * alpha[k * n_gain + g];
            }
            alpha[r * n_gain + g] = s / l[r * basis_size + r];
        }
    }

    let zp = featurize(probe_coeffs);
    let kp: Vec<T> = (0..basis_size).map(|j| kfun(&zp, &feats[j])).collect();
    let mut pred = vec![T::zero(); n_gain];
    for g in 0..n_gain {
        let mut s = T::zero();
        for j in 0..basis_size {
            s = s + kp[j] * alpha[j * n_gain + g];
        }
        pred[g] = s;
    }
    let values = ScalarField1D::new(gain_grid, pred)?;
    let mut eps = T::zero();
    for (p, e) in values.values().iter().zip(probe_exact_gain.values()) {
        eps = eps.max((*p - *e).abs());
    }
    Ok(ApproxGain { values, declared_eps: eps, mode: PerturbMode::SurrogateFit { basis_size } })
}

/// `G(xi) = -err(xi) - int_xi^1 L(s, xi) err(s) ds`, the boundary kernel the
/// gain error induces in the target system; the integral runs over the first
/// kernel argument.
pub fn boundary_perturbation<T: Real>(
    gain_error: &ScalarField1D<T>,
    l: &TriangularField<T>,
) -> Result<ScalarField1D<T>> {
    let grid = gain_error.grid();
    if l.grid() != grid {
        return Err(Error::invalid("inverse kernel is not on the gain grid"));
    }
    let n = grid.n();
    let h = grid.h();
    let half = real::<T>(0.5);
    let err = gain_error.values();
    let mut out = vec![T::zero(); n];
    for j in 0..n {
        let mut acc = T::zero();
        if j + 1 < n {
            for i in j..n {
                let w = if i == j || i == n - 1 { half * h } else { h };
                acc = acc + w * l.value(i, j) * err[i];
            }
        }
        out[j] = -err[j] - acc;
    }
    ScalarField1D::new(grid, out)
}

/// Coupled variant: both integral terms carry the `k_v1` error,
/// `g_u = -err_u - int l_u(s, xi) err_v(s) ds` and
/// `g_v = -err_v - int l_v(s, xi) err_v(s) ds`.
pub fn boundary_perturbation_pair<T: Real>(
    err_u: &ScalarField1D<T>,
    err_v: &ScalarField1D<T>,
    l_u: &TriangularField<T>,
    l_v: &TriangularField<T>,
) -> Result<(ScalarField1D<T>, ScalarField1D<T>)> {
    let grid = err_u.grid();
    if err_v.grid() != grid || l_u.grid() != grid || l_v.grid() != grid {
        return Err(Error::invalid("coupled perturbation inputs are not on one grid"));
    }
    let n = grid.n();
    let h = grid.h();
    let half = real::<T>(0.5);
    let eu = err_u.values();
    let ev = err_v.values();
    let mut gu = vec![T::zero(); n];
    let mut gv = vec![T::zero(); n];
    for j in 0..n {
        let mut acc_u = T::zero();
        let mut acc_v = T::zero();
        if j + 1 < n {
            for i in j..n {
                let w = if i == j || i == n - 1 { half * h } else { h };
                acc_u = acc_u + w * l_u.value(i, j) * ev[i];
                acc_v = acc_v + w * l_v.value(i, j) * ev[i];
            }
        }
        gu[j] = -eu[j] - acc_u;
        gv[j] = -ev[j] - acc_v;
    }
    Ok((ScalarField1D::new(grid, gu)?, ScalarField1D::new(grid, gv)?))
}
