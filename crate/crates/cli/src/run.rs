//! Subcommand bodies. Each returns `Ok(pass)` so main can map the verdict
//! and the two failure channels onto the exit-code contract.

use std::path::{Path, PathBuf};

use backstep_core::field::ScalarField1D;
use backstep_core::gain::{
    epsilon_star_coupled, epsilon_star_dirichlet, epsilon_star_hyperbolic, epsilon_star_neumann,
    EpsilonFamily,
};
use backstep_core::kernel::{
    coupled_kernel_bound, hyperbolic_kernel_bound, parabolic_kernel_bound, solve_kernel_pide,
    solve_kernel_rd, solve_kernels_2x2, transform_2x2, CoupledBoundSet, CoupledPlantSpec,
    ParabolicBc,
};
use backstep_core::norm::derivative;
use backstep_core::sim::{verify_theorem, ScenarioPlant};
use backstep_core::volterra::{volterra_apply, TransformDirection};

use crate::config::{self, CliError, OutputKind, ScenarioConfig, SweepAxis};
use crate::output;

pub struct CommandIo<'a> {
    pub config_path: &'a Path,
    pub out_dir: &'a Path,
    pub seed: Option<u64>,
}

impl CommandIo<'_> {
    fn stem(&self) -> String {
        self.config_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".to_string())
    }

    fn write(&self, suffix: &str, content: &str) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(self.out_dir).map_err(|e| {
            CliError::config(format!("cannot create {}: {e}", self.out_dir.display()))
        })?;
        let path = self.out_dir.join(format!("{}.{suffix}", self.stem()));
        std::fs::write(&path, content)
            .map_err(|e| CliError::config(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}

fn load(io: &CommandIo, for_sweep: bool) -> Result<ScenarioConfig, CliError> {
    let cfg = config::load(io.config_path)?;
    if for_sweep != cfg.sweep.is_some() {
        return Err(CliError::config(if for_sweep {
            "sweep needs a `sweep` block listing the axis and its values".to_string()
        } else {
            "this config carries a `sweep` block; run the sweep command on it".to_string()
        }));
    }
    Ok(cfg)
}

pub fn cmd_solve_kernel(io: &CommandIo) -> Result<bool, CliError> {
    let cfg = load(io, false)?;
    let grid = cfg.grid()?;
    let (kernel_csv, gain_csv, kernel_sup, bound) = match cfg.build_plant()? {
        ScenarioPlant::Hyperbolic { plant, .. } => {
            let sol = solve_kernel_pide(&plant, &grid).map_err(config::from_core)?;
            let bound = hyperbolic_kernel_bound(plant.f.sup_norm(), plant.g.sup_norm())
                .map_err(config::from_core)?;
            (
                output::hyperbolic_kernel_csv(&sol),
                output::hyperbolic_gain_csv(&sol),
                sol.kernel.sup_norm(),
                bound,
            )
        }
        ScenarioPlant::Parabolic { plant } => {
            let sol = solve_kernel_rd(&plant, &grid).map_err(config::from_core)?;
            let bound = parabolic_kernel_bound(plant.lambda.sup_norm(), plant.c, &plant.bc)
                .map_err(config::from_core)?;
            (
                output::parabolic_kernel_csv(&sol),
                output::parabolic_gain_csv(&sol),
                sol.kernel.sup_norm(),
                bound,
            )
        }
        ScenarioPlant::Coupled { plant, .. } => {
            let sol = solve_kernels_2x2(&plant, &grid).map_err(config::from_core)?;
            let (_, _, bound) =
                coupled_kernel_bound(&bound_set_of(&plant)?).map_err(config::from_core)?;
            (
                output::coupled_kernel_csv(&sol),
                output::coupled_gain_csv(&sol),
                sol.k_u.sup_norm().max(sol.k_v.sup_norm()),
                bound,
            )
        }
    };
    let kpath = io.write("kernel.csv", &kernel_csv)?;
    let gpath = io.write("gain.csv", &gain_csv)?;
    // Same quadrature allowance as the verify gate: the bound can be
    // attained with equality, so leave h^2 of room.
    let h = grid.h();
    let ok = kernel_sup <= bound + h * h * (1.0 + bound);
    println!(
        "kernel sup {:.6e} vs bound {:.6e} ({})",
        kernel_sup,
        bound,
        if ok { "within" } else { "EXCEEDED" }
    );
    println!("wrote {} and {}", kpath.display(), gpath.display());
    Ok(ok)
}

fn bound_set_of(plant: &CoupledPlantSpec<f64>) -> Result<CoupledBoundSet<f64>, CliError> {
    Ok(CoupledBoundSet {
        theta_bar: plant.theta.sup_norm(),
        q: plant.q,
        lambda0: plant.lambda.values()[0],
        mu0: plant.mu.values()[0],
        c_lambda: plant.c_lambda,
        c_mu: plant.c_mu,
        lambda_prime_bar: derivative(&plant.lambda).map_err(config::from_core)?.sup_norm(),
        mu_prime_bar: derivative(&plant.mu).map_err(config::from_core)?.sup_norm(),
        sigma_bar: plant.sigma.sup_norm(),
        omega_bar: plant.omega.sup_norm(),
    })
}

pub fn cmd_epsilon_star(io: &CommandIo) -> Result<bool, CliError> {
    let cfg = load(io, false)?;
    let jn = output::json_num;
    let line = match cfg.build_plant()? {
        ScenarioPlant::Hyperbolic { plant, c } => {
            let b_f = plant.f.sup_norm();
            let b_g = plant.g.sup_norm();
            let budget = epsilon_star_hyperbolic(b_f, b_g, c).map_err(config::from_core)?;
            format!(
                "{{\"family\":\"hyperbolic\",\"b_f\":{},\"b_g\":{},\"c\":{},\"epsilon_star\":{}}}",
                jn(b_f),
                jn(b_g),
                jn(c),
                jn(budget.value)
            )
        }
        ScenarioPlant::Parabolic { plant } => {
            let b_lambda = plant.lambda.sup_norm();
            match plant.bc {
                ParabolicBc::Dirichlet => {
                    let budget =
                        epsilon_star_dirichlet(b_lambda, plant.c).map_err(config::from_core)?;
                    format!(
                        "{{\"family\":\"dirichlet\",\"b_lambda\":{},\"c\":{},\"epsilon_star\":{}}}",
                        jn(b_lambda),
                        jn(plant.c),
                        jn(budget.value)
                    )
                }
                ParabolicBc::Neumann { q } => {
                    let budget =
                        epsilon_star_neumann(b_lambda, plant.c, q).map_err(config::from_core)?;
                    format!(
                        "{{\"family\":\"neumann\",\"b_lambda\":{},\"c\":{},\"q\":{},\"epsilon_star\":{}}}",
                        jn(b_lambda),
                        jn(plant.c),
                        jn(q),
                        jn(budget.value)
                    )
                }
            }
        }
        ScenarioPlant::Coupled { plant, c_bar } => {
            let bounds = bound_set_of(&plant)?;
            let b_lambda = plant.lambda.sup_norm();
            let b_mu = plant.mu.sup_norm();
            let budget = epsilon_star_coupled(&bounds, b_lambda, b_mu, c_bar)
                .map_err(config::from_core)?;
            let EpsilonFamily::Coupled { b_sigma, b_omega, c, delta, k1, k2, .. } = budget.family
            else {
                unreachable!()
            };
            format!(
                concat!(
                    "{{\"family\":\"coupled\",\"b_lambda\":{},\"b_mu\":{},\"b_sigma\":{},",
                    "\"b_omega\":{},\"k1\":{},\"k2\":{},\"kernel_bound\":{},\"delta\":{},",
                    "\"c\":{},\"c_bar\":{},\"epsilon_star\":{}}}"
                ),
                jn(b_lambda),
                jn(b_mu),
                jn(b_sigma),
                jn(b_omega),
                jn(k1),
                jn(k2),
                jn(k1 * k2.exp()),
                jn(delta),
                jn(c),
                jn(c_bar),
                jn(budget.value)
            )
        }
    };
    println!("{line}");
    Ok(true)
}

pub fn cmd_verify(io: &CommandIo) -> Result<bool, CliError> {
    let cfg = load(io, false)?;
    let scenario = cfg.build_scenario(io.seed)?;
    let report = verify_theorem(&scenario).map_err(config::from_core)?;
    for kind in cfg.outputs() {
        match kind {
            OutputKind::TraceCsv => {
                io.write("trace.csv", &output::trace_csv(&report.trace))?;
            }
            OutputKind::SummaryJson => {
                io.write("summary.json", &output::summary_json(&report))?;
            }
            OutputKind::ReportText => {
                io.write("report.txt", &output::report_text(&report))?;
            }
        }
    }
    print!("{}", output::report_text(&report));
    Ok(report.pass)
}

/// Internal self-consistency probe for sweep rows: push a fixed smooth state
/// through the solved transform and back; the sup defect is pure quadrature
/// error and must shrink under grid refinement.
fn round_trip_error(plant: &ScenarioPlant<f64>) -> Result<f64, CliError> {
    let sup_diff = |a: &ScalarField1D<f64>, b: &ScalarField1D<f64>| {
        a.values()
            .iter()
            .zip(b.values())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    };
    match plant {
        ScenarioPlant::Hyperbolic { plant, .. } => {
            let grid = plant.grid();
            let sol = solve_kernel_pide(plant, &grid).map_err(config::from_core)?;
            let probe = ScalarField1D::from_fn(grid, |x| (2.3 * x).sin() + 0.4 * (5.0 * x).cos())
                .map_err(config::from_core)?;
            let w = volterra_apply(&sol.kernel, &probe, TransformDirection::Forward)
                .map_err(config::from_core)?;
            let back = volterra_apply(&sol.inverse, &w, TransformDirection::Inverse)
                .map_err(config::from_core)?;
            Ok(sup_diff(&back, &probe))
        }
        ScenarioPlant::Parabolic { plant } => {
            let grid = plant.lambda.grid();
            let sol = solve_kernel_rd(plant, &grid).map_err(config::from_core)?;
            let probe = ScalarField1D::from_fn(grid, |x| (2.3 * x).sin() + 0.4 * (5.0 * x).cos())
                .map_err(config::from_core)?;
            let w = volterra_apply(&sol.kernel, &probe, TransformDirection::Forward)
                .map_err(config::from_core)?;
            let back = volterra_apply(&sol.inverse, &w, TransformDirection::Inverse)
                .map_err(config::from_core)?;
            Ok(sup_diff(&back, &probe))
        }
        ScenarioPlant::Coupled { plant, .. } => {
            let grid = plant.grid();
            let sol = solve_kernels_2x2(plant, &grid).map_err(config::from_core)?;
            let u = ScalarField1D::from_fn(grid, |x| (2.3 * x).sin() + 0.4 * (5.0 * x).cos())
                .map_err(config::from_core)?;
            let v = ScalarField1D::from_fn(grid, |x| (1.7 * x).cos() - 0.3 * x)
                .map_err(config::from_core)?;
            let beta = transform_2x2(&sol, &u, &v, TransformDirection::Forward)
                .map_err(config::from_core)?;
            let back = transform_2x2(&sol, &u, &beta, TransformDirection::Inverse)
                .map_err(config::from_core)?;
            Ok(sup_diff(&back, &v))
        }
    }
}

struct SweepRow {
    parameter: f64,
    measured_rate: f64,
    round_trip: f64,
    pass: bool,
}

fn sweep_variant(cfg: &ScenarioConfig, axis: SweepAxis, value: f64) -> Result<ScenarioConfig, CliError> {
    let mut out = cfg.clone();
    out.sweep = None;
    match axis {
        SweepAxis::EpsFraction => {
            if !(0.0..1.0).contains(&value) {
                return Err(CliError::config(format!(
                    "sweep value {value} is outside the eps_fraction range [0, 1)"
                )));
            }
            let Some(p) = out.perturbation.as_mut() else {
                return Err(CliError::config(
                    "sweeping eps_fraction needs a `perturbation` block to vary".to_string(),
                ));
            };
            p.eps_fraction = value;
        }
        SweepAxis::GridN => {
            if value.fract() != 0.0 || value < 3.0 {
                return Err(CliError::config(format!(
                    "sweep value {value} is not a grid size"
                )));
            }
            let n = value as usize;
            // Keep the step-to-cell ratio: refining the grid refines dt with it.
            if let Some(dt) = out.dt {
                out.dt = Some(dt * (cfg.grid_n - 1) as f64 / (n - 1) as f64);
            }
            out.grid_n = n;
        }
    }
    Ok(out)
}

pub fn cmd_sweep(io: &CommandIo) -> Result<bool, CliError> {
    let cfg = load(io, true)?;
    let sweep = cfg.sweep.clone().unwrap();
    if sweep.values.is_empty() {
        return Err(CliError::config("sweep axis lists no values".to_string()));
    }
    let variants = sweep
        .values
        .iter()
        .map(|&v| Ok((v, sweep_variant(&cfg, sweep.axis, v)?)))
        .collect::<Result<Vec<_>, CliError>>()?;

    let rows = std::thread::scope(|scope| {
        let handles: Vec<_> = variants
            .iter()
            .map(|(value, variant)| {
                scope.spawn(move || -> Result<SweepRow, CliError> {
                    let scenario = variant.build_scenario(io.seed)?;
                    let report = verify_theorem(&scenario).map_err(config::from_core)?;
                    Ok(SweepRow {
                        parameter: *value,
                        measured_rate: report.measured_rate,
                        round_trip: round_trip_error(&scenario.plant)?,
                        pass: report.pass,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect::<Result<Vec<_>, CliError>>()
    })?;

    let mut csv = String::from("parameter,measured_rate,round_trip_error,pass\n");
    let mut all_pass = true;
    for row in &rows {
        all_pass &= row.pass;
        csv.push_str(&format!(
            "{},{},{},{}\n",
            output::csv_num(row.parameter),
            output::csv_num(row.measured_rate),
            output::csv_num(row.round_trip),
            row.pass
        ));
        println!(
            "parameter {:.6e}: measured rate {:.6e}, round trip {:.3e}, {}",
            row.parameter,
            row.measured_rate,
            row.round_trip,
            if row.pass { "pass" } else { "FAIL" }
        );
    }
    let path = io.write("sweep.csv", &csv)?;
    println!("wrote {}", path.display());
    Ok(all_pass)
}
