//! One-call verification runs: solve the kernel for a plant, price the
//! approximation budget, optionally spend part of it on a perturbed gain,
//! simulate the loop, and compare what was measured against what the
//! stability results guarantee.

use crate::error::{Error, Result};
use crate::field::ScalarField1D;
use crate::gain::{
    boundary_perturbation, boundary_perturbation_pair, epsilon_star_coupled,
    epsilon_star_dirichlet, epsilon_star_hyperbolic, epsilon_star_neumann, perturb_gain,
    proof_g_targets, EpsilonBudget, EpsilonFamily, PerturbKind,
};
use crate::kernel::{
    coupled_kernel_bound, hyperbolic_kernel_bound, parabolic_kernel_bound, solve_kernel_pide,
    solve_kernel_rd, solve_kernels_2x2, CoupledBoundSet, CoupledPlantSpec, HyperbolicPlantSpec,
    ParabolicBc, ParabolicGain, ParabolicPlantSpec,
};
use crate::norm::derivative;
use crate::scalar::{real, Real};

use super::{
    estimate_decay_rate, lyapunov_derivative_check, series, simulate_2x2,
    simulate_hyperbolic_pide, simulate_reaction_diffusion, Coupled2x2Setup, CoupledMonitor,
    HyperbolicMonitor, HyperbolicSimSetup, LyapunovCheck, ReactionDiffusionSetup, SimTrace,
};

/// Plant family a scenario exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Hyperbolic,
    Dirichlet,
    Neumann,
    Coupled,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Hyperbolic => "hyperbolic",
            Family::Dirichlet => "dirichlet",
            Family::Neumann => "neumann",
            Family::Coupled => "coupled",
        }
    }
}

/// Plant description plus the target parameters that live outside the
/// plant spec itself. The reaction-diffusion spec already carries its shift,
/// so the parabolic arm adds nothing.
#[derive(Debug, Clone)]
pub enum ScenarioPlant<T: Real> {
    Hyperbolic { plant: HyperbolicPlantSpec<T>, c: T },
    Parabolic { plant: ParabolicPlantSpec<T> },
    Coupled { plant: CoupledPlantSpec<T>, c_bar: T },
}

/// How much of the budget to spend on degrading the gain, and how.
#[derive(Debug, Clone, Copy)]
pub struct PerturbationSpec<T: Real> {
    /// Generator; required whenever `eps_fraction > 0`.
    pub kind: Option<PerturbKind>,
    /// Fraction of `epsilon*` to spend, in `[0, 1)`. Zero keeps the gain exact.
    pub eps_fraction: T,
    pub seed: u64,
}

impl<T: Real> PerturbationSpec<T> {
    pub fn exact() -> Self {
        Self {
            kind: None,
            eps_fraction: T::zero(),
            seed: 0,
        }
    }
}

/// What the measured trajectory is expected to do.
#[derive(Debug, Clone, Copy)]
pub enum Expectation<T: Real> {
    /// Decay at least as fast as the guaranteed closed-loop rate.
    Decay,
    /// Grow at `rate` to within `tol_fraction * rate` (open-loop baselines).
    Growth { rate: T, tol_fraction: T },
}

/// A full verification run: plant, stepping controls, initial data, gain
/// treatment, and the claim to check.
#[derive(Debug, Clone)]
pub struct Scenario<T: Real> {
    pub plant: ScenarioPlant<T>,
    pub dt: T,
    pub horizon: T,
    pub u0: ScalarField1D<T>,
    /// Second-channel start; coupled plants only.
    pub v0: Option<ScalarField1D<T>>,
    pub perturbation: PerturbationSpec<T>,
    /// Run with the control switched off.
    pub open_loop: bool,
    pub expectation: Expectation<T>,
    /// Fit window for the rate estimate; defaults to the last 80% of the
    /// horizon.
    pub window: Option<(T, T)>,
}

/// Everything a run measured, with the verdict and the reasons for it.
#[derive(Debug, Clone)]
pub struct VerificationReport<T: Real> {
    pub family: Family,
    pub grid_n: usize,
    pub dt: T,
    pub epsilon_star: T,
    pub eps_used: T,
    pub kernel_sup: T,
    pub kernel_bound: T,
    /// Measured boundary perturbation (first channel) and its proof cap.
    pub g_sup: T,
    pub g_bound: T,
    pub g_sup_v: Option<T>,
    pub g_bound_v: Option<T>,
    /// Sup-norm of the inverse kernel(s), for the `eps (1 + |L|)` cap.
    pub l_sup: T,
    pub guaranteed_rate: T,
    pub measured_rate: T,
    pub overshoot_m: T,
    pub fit_quality: T,
    pub extinct: bool,
    pub lyapunov: LyapunovCheck<T>,
    pub kernel_iterations: usize,
    pub kernel_residual: T,
    /// Series the rate was fitted on.
    pub rate_series: &'static str,
    pub window: (T, T),
    pub budget: EpsilonBudget<T>,
    pub pass: bool,
    pub notes: Vec<String>,
    pub trace: SimTrace<T>,
}

fn stage(label: &'static str) -> impl FnOnce(Error) -> Error {
    move |e| match e {
        Error::InvalidArgument(m) => Error::InvalidArgument(format!("{label}: {m}")),
        Error::NumericFailure {
            context,
            residual,
            iterations,
        } => Error::NumericFailure {
            context: format!("{label}: {context}"),
            residual,
            iterations,
        },
    }
}

/// Runs one scenario end to end and reports every measured quantity next to
/// the value the theory promises for it.
pub fn verify_theorem<T: Real>(scenario: &Scenario<T>) -> Result<VerificationReport<T>> {
    let p = &scenario.perturbation;
    if !(p.eps_fraction >= T::zero() && p.eps_fraction < T::one()) {
        return Err(Error::invalid(format!(
            "eps_fraction must lie in [0, 1), got {}",
            p.eps_fraction
        )));
    }
    if p.eps_fraction > T::zero() && p.kind.is_none() {
        return Err(Error::invalid(
            "a perturbation kind is required when eps_fraction > 0",
        ));
    }
    if scenario.open_loop && p.eps_fraction > T::zero() {
        return Err(Error::invalid("an open-loop run has no gain to perturb"));
    }
    if let Some((lo, hi)) = scenario.window {
        if !(lo >= T::zero() && hi > lo && hi <= scenario.horizon) {
            return Err(Error::invalid("fit window must satisfy 0 <= lo < hi <= horizon"));
        }
    }
    match &scenario.plant {
        ScenarioPlant::Hyperbolic { plant, c } => verify_hyperbolic(scenario, plant, *c),
        ScenarioPlant::Parabolic { plant } => verify_parabolic(scenario, plant),
        ScenarioPlant::Coupled { plant, c_bar } => verify_coupled(scenario, plant, *c_bar),
    }
}

fn reject_second_channel<T: Real>(sc: &Scenario<T>) -> Result<()> {
    if sc.v0.is_some() {
        return Err(Error::invalid("v0 only applies to coupled scenarios"));
    }
    Ok(())
}

fn verify_hyperbolic<T: Real>(
    sc: &Scenario<T>,
    plant: &HyperbolicPlantSpec<T>,
    c: T,
) -> Result<VerificationReport<T>> {
    reject_second_channel(sc)?;
    let grid = plant.grid();
    if sc.u0.grid() != grid {
        return Err(Error::invalid("initial state is not on the plant grid"));
    }
    let b_f = plant.f.sup_norm();
    let b_g = plant.g.sup_norm();
    let budget = epsilon_star_hyperbolic(b_f, b_g, c).map_err(stage("budget"))?;
    let kernel_bound = hyperbolic_kernel_bound(b_f, b_g)?;
    let sol = solve_kernel_pide(plant, &grid).map_err(stage("kernel solve"))?;
    let (g_bound, _) = proof_g_targets(&budget);

    let mut eps_used = T::zero();
    let mut g_sup = T::zero();
    let gain = if sc.open_loop {
        ScalarField1D::zeros(grid)
    } else if sc.perturbation.eps_fraction > T::zero() {
        eps_used = sc.perturbation.eps_fraction * budget.value;
        let kind = sc.perturbation.kind.unwrap();
        let approx = perturb_gain(&sol.gain_k1, eps_used, kind, sc.perturbation.seed)
            .map_err(stage("gain perturbation"))?;
        let err = approx.values.axpy(-T::one(), &sol.gain_k1)?;
        g_sup = boundary_perturbation(&err, &sol.inverse)
            .map_err(stage("boundary perturbation"))?
            .sup_norm();
        approx.values
    } else {
        sol.gain_k1.clone()
    };

    let l_sup = sol.inverse.sup_norm();
    let setup = HyperbolicSimSetup {
        f: plant.f.clone(),
        g: plant.g.clone(),
        gain,
        u0: sc.u0.clone(),
        dt: sc.dt,
        horizon: sc.horizon,
        monitor: Some(HyperbolicMonitor {
            kernel: sol.kernel.clone(),
            c,
        }),
    };
    let trace = simulate_hyperbolic_pide(&setup).map_err(stage("simulation"))?;

    finish(FinishArgs {
        sc,
        family: Family::Hyperbolic,
        grid_n: grid.n(),
        budget,
        eps_used,
        kernel_sup: sol.kernel.sup_norm(),
        kernel_bound,
        l_sup,
        eps_cap: eps_used * (T::one() + l_sup),
        g_sup,
        g_bound,
        g_sup_v: None,
        g_bound_v: None,
        kernel_iterations: sol.iterations,
        kernel_residual: sol.residual,
        trace,
        rate_series: series::L2_U,
        decay_guarantee: c / real::<T>(8.0),
        lyap_series: series::LYAPUNOV,
        lyap_rate: c / real::<T>(4.0),
        notes: Vec::new(),
    })
}

fn verify_parabolic<T: Real>(
    sc: &Scenario<T>,
    plant: &ParabolicPlantSpec<T>,
) -> Result<VerificationReport<T>> {
    reject_second_channel(sc)?;
    let grid = plant.lambda.grid();
    if sc.u0.grid() != grid {
        return Err(Error::invalid("initial state is not on the plant grid"));
    }
    let b_lambda = plant.lambda.sup_norm();
    let c = plant.c;
    let (family, budget) = match plant.bc {
        ParabolicBc::Dirichlet => (
            Family::Dirichlet,
            epsilon_star_dirichlet(b_lambda, c).map_err(stage("budget"))?,
        ),
        ParabolicBc::Neumann { q } => (
            Family::Neumann,
            epsilon_star_neumann(b_lambda, c, q).map_err(stage("budget"))?,
        ),
    };
    let kernel_bound = parabolic_kernel_bound(b_lambda, c, &plant.bc)?;
    let sol = solve_kernel_rd(plant, &grid).map_err(stage("kernel solve"))?;
    let (g_bound, _) = proof_g_targets(&budget);

    let mut notes = Vec::new();
    if sol.kx_flagged {
        notes.push(format!(
            "gain-slope stencils disagree by {} on this grid; refine n",
            sol.kx_consistency.unwrap_or_else(T::nan)
        ));
    }

    let mut eps_used = T::zero();
    let mut g_sup = T::zero();
    let gain = if sc.open_loop {
        None
    } else if sc.perturbation.eps_fraction > T::zero() {
        eps_used = sc.perturbation.eps_fraction * budget.value;
        let kind = sc.perturbation.kind.unwrap();
        let (exact, rebuild): (&ScalarField1D<T>, _) = match &sol.gain {
            ParabolicGain::Dirichlet { k1 } => {
                (k1, None)
            }
            ParabolicGain::Neumann { k11, k1n } => (k1n, Some(*k11)),
        };
        let approx = perturb_gain(exact, eps_used, kind, sc.perturbation.seed)
            .map_err(stage("gain perturbation"))?;
        let err = approx.values.axpy(-T::one(), exact)?;
        g_sup = boundary_perturbation(&err, &sol.inverse)
            .map_err(stage("boundary perturbation"))?
            .sup_norm();
        Some(match rebuild {
            None => ParabolicGain::Dirichlet { k1: approx.values },
            Some(k11) => ParabolicGain::Neumann {
                k11,
                k1n: approx.values,
            },
        })
    } else {
        Some(sol.gain.clone())
    };

    let l_sup = sol.inverse.sup_norm();
    let setup = ReactionDiffusionSetup {
        lambda: plant.lambda.clone(),
        bc: plant.bc.clone(),
        gain,
        u0: sc.u0.clone(),
        dt: sc.dt,
        horizon: sc.horizon,
        monitor_kernel: Some(sol.kernel.clone()),
    };
    let trace = simulate_reaction_diffusion(&setup).map_err(stage("simulation"))?;

    let twelfth = T::one() / real::<T>(12.0);
    let sixth = T::one() / real::<T>(6.0);
    let eighth = T::one() / real::<T>(8.0);
    let quarter = T::one() / real::<T>(4.0);
    let two = real::<T>(2.0);
    let (rate_series, decay_guarantee, lyap_series, lyap_rate) = match plant.bc {
        ParabolicBc::Dirichlet => (series::H1_U, c + twelfth, series::LYAPUNOV, two * c + sixth),
        ParabolicBc::Neumann { .. } => (series::L2_U, c + eighth, series::V1, two * c + quarter),
    };

    finish(FinishArgs {
        sc,
        family,
        grid_n: grid.n(),
        budget,
        eps_used,
        kernel_sup: sol.kernel.sup_norm(),
        kernel_bound,
        l_sup,
        eps_cap: eps_used * (T::one() + l_sup),
        g_sup,
        g_bound,
        g_sup_v: None,
        g_bound_v: None,
        kernel_iterations: sol.iterations,
        kernel_residual: sol.residual,
        trace,
        rate_series,
        decay_guarantee,
        lyap_series,
        lyap_rate,
        notes,
    })
}

fn verify_coupled<T: Real>(
    sc: &Scenario<T>,
    plant: &CoupledPlantSpec<T>,
    c_bar: T,
) -> Result<VerificationReport<T>> {
    let grid = plant.grid();
    if sc.u0.grid() != grid {
        return Err(Error::invalid("initial state is not on the plant grid"));
    }
    let v0 = sc
        .v0
        .clone()
        .ok_or_else(|| Error::invalid("a coupled scenario needs v0"))?;
    if v0.grid() != grid {
        return Err(Error::invalid("second channel is not on the plant grid"));
    }

    let b_lambda = plant.lambda.sup_norm();
    let b_mu = plant.mu.sup_norm();
    let bound_set = CoupledBoundSet {
        theta_bar: plant.theta.sup_norm(),
        q: plant.q,
        lambda0: plant.lambda.values()[0],
        mu0: plant.mu.values()[0],
        c_lambda: plant.c_lambda,
        c_mu: plant.c_mu,
        lambda_prime_bar: derivative(&plant.lambda)?.sup_norm(),
        mu_prime_bar: derivative(&plant.mu)?.sup_norm(),
        sigma_bar: plant.sigma.sup_norm(),
        omega_bar: plant.omega.sup_norm(),
    };
    let budget = epsilon_star_coupled(&bound_set, b_lambda, b_mu, c_bar).map_err(stage("budget"))?;
    let c = match &budget.family {
        EpsilonFamily::Coupled { c, .. } => *c,
        _ => unreachable!(),
    };
    let (_, _, kernel_bound) = coupled_kernel_bound(&bound_set)?;
    let sol = solve_kernels_2x2(plant, &grid).map_err(stage("kernel solve"))?;
    let (g_bound, g_bound_v) = proof_g_targets(&budget);

    let l_sup = sol.l_u.sup_norm().max(sol.l_v.sup_norm());
    let eps_cap_scale = T::one() + sol.l_u.sup_norm() + sol.l_v.sup_norm();

    let mut eps_used = T::zero();
    let mut g_sup = T::zero();
    let mut g_sup_v = T::zero();
    let (gain_u, gain_v) = if sc.open_loop {
        (ScalarField1D::zeros(grid), ScalarField1D::zeros(grid))
    } else if sc.perturbation.eps_fraction > T::zero() {
        eps_used = sc.perturbation.eps_fraction * budget.value;
        let kind = sc.perturbation.kind.unwrap();
        let seed = sc.perturbation.seed;
        let au = perturb_gain(&sol.gain_ku1, eps_used, kind, seed)
            .map_err(stage("gain perturbation"))?;
        let av = perturb_gain(&sol.gain_kv1, eps_used, kind, seed.wrapping_add(1))
            .map_err(stage("gain perturbation"))?;
        let err_u = au.values.axpy(-T::one(), &sol.gain_ku1)?;
        let err_v = av.values.axpy(-T::one(), &sol.gain_kv1)?;
        let (gu, gv) = boundary_perturbation_pair(&err_u, &err_v, &sol.l_u, &sol.l_v)
            .map_err(stage("boundary perturbation"))?;
        g_sup = gu.sup_norm();
        g_sup_v = gv.sup_norm();
        (au.values, av.values)
    } else {
        (sol.gain_ku1.clone(), sol.gain_kv1.clone())
    };

    let setup = Coupled2x2Setup {
        plant: plant.clone(),
        gain_u,
        gain_v,
        u0: sc.u0.clone(),
        v0,
        dt: sc.dt,
        horizon: sc.horizon,
        monitor: Some(CoupledMonitor {
            solution: sol.clone(),
            c,
        }),
    };
    let trace = simulate_2x2(&setup).map_err(stage("simulation"))?;

    finish(FinishArgs {
        sc,
        family: Family::Coupled,
        grid_n: grid.n(),
        budget,
        eps_used,
        kernel_sup: sol.k_u.sup_norm().max(sol.k_v.sup_norm()),
        kernel_bound,
        l_sup,
        eps_cap: eps_used * eps_cap_scale,
        g_sup,
        g_bound,
        g_sup_v: Some(g_sup_v),
        g_bound_v,
        kernel_iterations: sol.iterations,
        kernel_residual: sol.residual,
        trace,
        rate_series: series::L2_SUM,
        decay_guarantee: c_bar / real::<T>(2.0),
        lyap_series: series::LYAPUNOV,
        lyap_rate: c_bar,
        notes: Vec::new(),
    })
}

struct FinishArgs<'a, T: Real> {
    sc: &'a Scenario<T>,
    family: Family,
    grid_n: usize,
    budget: EpsilonBudget<T>,
    eps_used: T,
    kernel_sup: T,
    kernel_bound: T,
    l_sup: T,
    /// `eps (1 + |L|)` with every inverse kernel the channel convolves.
    eps_cap: T,
    g_sup: T,
    g_bound: T,
    g_sup_v: Option<T>,
    g_bound_v: Option<T>,
    kernel_iterations: usize,
    kernel_residual: T,
    trace: SimTrace<T>,
    rate_series: &'static str,
    decay_guarantee: T,
    lyap_series: &'static str,
    lyap_rate: T,
    notes: Vec<String>,
}

fn finish<T: Real>(args: FinishArgs<'_, T>) -> Result<VerificationReport<T>> {
    let FinishArgs {
        sc,
        family,
        grid_n,
        budget,
        eps_used,
        kernel_sup,
        kernel_bound,
        l_sup,
        eps_cap,
        g_sup,
        g_bound,
        g_sup_v,
        g_bound_v,
        kernel_iterations,
        kernel_residual,
        trace,
        rate_series,
        decay_guarantee,
        lyap_series,
        lyap_rate,
        mut notes,
    } = args;

    let window = sc
        .window
        .unwrap_or((real::<T>(0.2) * sc.horizon, sc.horizon));
    let est = estimate_decay_rate(&trace, rate_series, window).map_err(stage("rate fit"))?;
    let lyap = lyapunov_derivative_check(&trace, lyap_series, lyap_rate, real::<T>(0.95))
        .map_err(stage("drift check"))?;

    // The bound can be attained with equality (pure transport with a unit
    // source peaks exactly at e), so the discrete check leaves room for
    // quadrature error, which shrinks as h^2.
    let h = T::one() / real::<T>((grid_n - 1) as f64);
    let kernel_tol = h * h * (T::one() + kernel_bound);
    let kernel_ok = kernel_sup <= kernel_bound + kernel_tol;
    if !kernel_ok {
        notes.push(format!(
            "kernel sup {kernel_sup} exceeds its bound {kernel_bound}"
        ));
    }

    let mut g_ok = true;
    if eps_used > T::zero() {
        for (label, g) in [("first-channel", Some(g_sup)), ("second-channel", g_sup_v)] {
            let Some(g) = g else { continue };
            if g > eps_cap {
                g_ok = false;
                notes.push(format!(
                    "{label} boundary perturbation {g} exceeds eps (1 + |L|) = {eps_cap}"
                ));
            }
        }
        match (g_sup_v, g_bound_v) {
            (Some(gv), Some(bv)) => {
                // The paired budget only prices the two channels jointly, so
                // the verdict rides on the summed target; the separate
                // targets are still compared and any exceedance named.
                if g_sup + gv > g_bound + bv {
                    g_ok = false;
                    notes.push(format!(
                        "summed boundary perturbation {} exceeds the proof cap {}",
                        g_sup + gv,
                        g_bound + bv
                    ));
                }
                if g_sup > g_bound {
                    notes.push(format!(
                        "first-channel perturbation {g_sup} exceeds its separate target {g_bound}"
                    ));
                }
                if gv > bv {
                    notes.push(format!(
                        "second-channel perturbation {gv} exceeds its separate target {bv}"
                    ));
                }
            }
            _ => {
                if g_sup > g_bound {
                    g_ok = false;
                    notes.push(format!(
                        "boundary perturbation {g_sup} exceeds the proof cap {g_bound}"
                    ));
                }
            }
        }
    }

    // The drift inequality is only promised for the exact-gain loop; on
    // perturbed and open-loop runs it stays informational.
    let drift_gated = matches!(sc.expectation, Expectation::Decay)
        && !sc.open_loop
        && !(eps_used > T::zero());
    let lyap_ok = !drift_gated || lyap.pass;
    if drift_gated && !lyap.pass {
        notes.push(format!(
            "drift fraction {} at rate {lyap_rate} is below 0.95",
            lyap.fraction
        ));
    }

    let (guaranteed_rate, rate_ok) = match sc.expectation {
        Expectation::Decay => {
            let ok = est.extinct || est.rate >= decay_guarantee;
            if !ok {
                notes.push(format!(
                    "measured rate {} falls short of the guaranteed {decay_guarantee}",
                    est.rate
                ));
            }
            (decay_guarantee, ok)
        }
        Expectation::Growth { rate, tol_fraction } => {
            let target = -rate;
            let ok = !est.extinct && (est.rate - target).abs() <= tol_fraction * rate.abs();
            if !ok {
                notes.push(format!(
                    "measured rate {} is not within {tol_fraction} of {target}",
                    est.rate
                ));
            }
            (target, ok)
        }
    };

    let pass = kernel_ok && g_ok && rate_ok && lyap_ok;

    Ok(VerificationReport {
        family,
        grid_n,
        dt: sc.dt,
        epsilon_star: budget.value,
        eps_used,
        kernel_sup,
        kernel_bound,
        g_sup,
        g_bound,
        g_sup_v,
        g_bound_v,
        l_sup,
        guaranteed_rate,
        measured_rate: est.rate,
        overshoot_m: est.overshoot_m,
        fit_quality: est.fit_quality,
        extinct: est.extinct,
        lyapunov: lyap,
        kernel_iterations,
        kernel_residual,
        rate_series,
        window: est.window,
        budget,
        pass,
        notes,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::TriangularField;
    use crate::grid::{make_uniform_grid, UniformGrid};

    fn grid(n: usize) -> UniformGrid<f64> {
        make_uniform_grid(n).unwrap()
    }

    fn hyperbolic_scenario(n: usize) -> Scenario<f64> {
        let g = grid(n);
        let f = TriangularField::from_fn(g, |x, xi| 0.3 + 0.2 * x * xi).unwrap();
        let gfun = ScalarField1D::from_fn(g, |x| 0.5 * (1.0 - x)).unwrap();
        let plant = HyperbolicPlantSpec::new(f, gfun).unwrap();
        let u0 = ScalarField1D::from_fn(g, |x| (std::f64::consts::PI * x).sin() + 0.3).unwrap();
        Scenario {
            plant: ScenarioPlant::Hyperbolic { plant, c: 2.0 },
            dt: g.h(),
            horizon: 2.0,
            u0,
            v0: None,
            perturbation: PerturbationSpec::exact(),
            open_loop: false,
            expectation: Expectation::Decay,
            window: Some((0.2, 0.9)),
        }
    }

    #[test]
    fn exact_gain_hyperbolic_run_passes() {
        let sc = hyperbolic_scenario(81);
        let report = verify_theorem(&sc).unwrap();
        assert!(report.pass, "notes: {:?}", report.notes);
        assert_eq!(report.family, Family::Hyperbolic);
        assert_eq!(report.eps_used, 0.0);
        assert_eq!(report.g_sup, 0.0);
        assert!(report.kernel_sup <= report.kernel_bound);
        assert!(report.measured_rate >= report.guaranteed_rate);
        assert!(report.lyapunov.pass);
        assert_eq!(report.rate_series, series::L2_U);
    }

    #[test]
    fn perturbed_hyperbolic_run_stays_within_the_budget_caps() {
        let mut sc = hyperbolic_scenario(81);
        sc.perturbation = PerturbationSpec {
            kind: Some(PerturbKind::SmoothNoise),
            eps_fraction: 0.5,
            seed: 7,
        };
        sc.window = None;
        let report = verify_theorem(&sc).unwrap();
        assert!(report.pass, "notes: {:?}", report.notes);
        assert!(report.eps_used > 0.0);
        assert!((report.eps_used - 0.5 * report.epsilon_star).abs() < 1e-15);
        assert!(report.g_sup > 0.0);
        assert!(report.g_sup <= report.eps_used * (1.0 + report.l_sup));
        assert!(report.g_sup <= report.g_bound);
        assert!(!report.extinct);
        assert!(report.measured_rate >= report.guaranteed_rate);
    }

    #[test]
    fn open_loop_unstable_reaction_matches_its_growth_rate() {
        let g = grid(81);
        let lambda = ScalarField1D::constant(g, 15.0).unwrap();
        let plant = ParabolicPlantSpec::new(lambda, 1.0, ParabolicBc::Dirichlet).unwrap();
        let u0 = ScalarField1D::from_fn(g, |x| (std::f64::consts::PI * x).sin()).unwrap();
        let rate = 15.0 - std::f64::consts::PI.powi(2);
        let sc = Scenario {
            plant: ScenarioPlant::Parabolic { plant },
            dt: 5e-4,
            horizon: 1.2,
            u0,
            v0: None,
            perturbation: PerturbationSpec::exact(),
            open_loop: true,
            expectation: Expectation::Growth {
                rate,
                tol_fraction: 0.05,
            },
            window: Some((0.3, 1.2)),
        };
        let report = verify_theorem(&sc).unwrap();
        assert!(report.pass, "notes: {:?}", report.notes);
        assert!(report.measured_rate < 0.0);
        assert!((report.measured_rate + rate).abs() <= 0.05 * rate);
        assert_eq!(report.family, Family::Dirichlet);
    }

    #[test]
    fn exact_gain_slope_actuation_beats_its_guarantee() {
        let g = grid(61);
        let lambda = ScalarField1D::from_fn(g, |x| 1.0 + 0.5 * x).unwrap();
        let plant =
            ParabolicPlantSpec::new(lambda, 0.3, ParabolicBc::Neumann { q: 2.0 }).unwrap();
        let u0 = ScalarField1D::from_fn(g, |x| 1.0 + 0.2 * (std::f64::consts::PI * x).cos())
            .unwrap();
        let sc = Scenario {
            plant: ScenarioPlant::Parabolic { plant },
            dt: 2e-4,
            horizon: 2.0,
            u0,
            v0: None,
            perturbation: PerturbationSpec::exact(),
            open_loop: false,
            expectation: Expectation::Decay,
            window: None,
        };
        let report = verify_theorem(&sc).unwrap();
        assert!(report.pass, "notes: {:?}", report.notes);
        assert_eq!(report.family, Family::Neumann);
        assert_eq!(report.rate_series, series::L2_U);
        assert!(report.measured_rate >= 0.3 + 0.125);
        assert!(report.lyapunov.pass);
    }

    fn coupled_scenario(n: usize) -> Scenario<f64> {
        let g = grid(n);
        let one = ScalarField1D::constant(g, 1.0).unwrap();
        let plant = CoupledPlantSpec::new(
            one.clone(),
            one,
            ScalarField1D::constant(g, 0.2).unwrap(),
            ScalarField1D::constant(g, 0.3).unwrap(),
            ScalarField1D::constant(g, 0.5).unwrap(),
            1.0,
            1.0,
            1.0,
        )
        .unwrap();
        let u0 = ScalarField1D::from_fn(g, |x| (std::f64::consts::PI * x).cos()).unwrap();
        let v0 = ScalarField1D::from_fn(g, |x| (std::f64::consts::PI * x).sin() + 0.5).unwrap();
        Scenario {
            plant: ScenarioPlant::Coupled { plant, c_bar: 0.2 },
            dt: g.h(),
            horizon: 2.5,
            u0,
            v0: Some(v0),
            perturbation: PerturbationSpec::exact(),
            open_loop: false,
            expectation: Expectation::Decay,
            window: Some((0.4, 1.6)),
        }
    }

    #[test]
    fn exact_gain_coupled_run_passes() {
        let sc = coupled_scenario(61);
        let report = verify_theorem(&sc).unwrap();
        assert!(report.pass, "notes: {:?}", report.notes);
        assert_eq!(report.family, Family::Coupled);
        assert_eq!(report.rate_series, series::L2_SUM);
        assert!(report.g_bound_v.is_some());
        assert!(report.measured_rate >= 0.1);
    }

    #[test]
    fn perturbed_coupled_run_checks_both_channels() {
        let mut sc = coupled_scenario(61);
        sc.perturbation = PerturbationSpec {
            kind: Some(PerturbKind::ConstantOffset),
            eps_fraction: 0.5,
            seed: 11,
        };
        let report = verify_theorem(&sc).unwrap();
        assert!(report.pass, "notes: {:?}", report.notes);
        let gv = report.g_sup_v.unwrap();
        assert!(report.g_sup > 0.0 && gv > 0.0);
        // The paired budget guarantees the summed target; a single channel
        // may exceed its separate target and is then named in the notes.
        assert!(report.g_sup + gv <= report.g_bound + report.g_bound_v.unwrap());
        if report.g_sup > report.g_bound {
            assert!(report.notes.iter().any(|n| n.contains("separate target")));
        }
    }

    #[test]
    fn malformed_scenarios_are_rejected() {
        let mut sc = hyperbolic_scenario(21);
        sc.perturbation.eps_fraction = 1.0;
        assert!(verify_theorem(&sc).is_err());

        let mut sc = hyperbolic_scenario(21);
        sc.perturbation.eps_fraction = 0.5;
        assert!(verify_theorem(&sc).is_err(), "kind is required");

        let mut sc = hyperbolic_scenario(21);
        sc.perturbation = PerturbationSpec {
            kind: Some(PerturbKind::ConstantOffset),
            eps_fraction: 0.5,
            seed: 0,
        };
        sc.open_loop = true;
        assert!(verify_theorem(&sc).is_err(), "open loop excludes perturbation");

        let mut sc = hyperbolic_scenario(21);
        sc.v0 = Some(ScalarField1D::zeros(grid(21)));
        assert!(verify_theorem(&sc).is_err(), "v0 is coupled-only");

        let mut sc = coupled_scenario(21);
        sc.v0 = None;
        assert!(verify_theorem(&sc).is_err(), "coupled needs v0");

        let mut sc = hyperbolic_scenario(21);
        sc.window = Some((0.5, 0.1));
        assert!(verify_theorem(&sc).is_err(), "window must be ordered");
    }
}
