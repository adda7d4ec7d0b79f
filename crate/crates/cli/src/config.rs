//! Scenario ingestion: strict JSON configs rendered into core scenario types.
//!
//! One schema serves every subcommand. `solve-kernel` and `epsilon-star`
//! only need the plant description; `verify` and `sweep` additionally require
//! the stepping fields. Unknown fields are rejected everywhere.

use std::collections::BTreeMap;
use std::path::Path;

use backstep_core::field::{ScalarField1D, TriangularField};
use backstep_core::gain::PerturbKind;
use backstep_core::grid::{make_uniform_grid, UniformGrid};
use backstep_core::kernel::{
    CoupledPlantSpec, HyperbolicPlantSpec, ParabolicBc, ParabolicPlantSpec,
};
use backstep_core::sim::{Expectation, PerturbationSpec, Scenario, ScenarioPlant};
use serde::Deserialize;

/// Failure channel deciding the process exit code: config problems exit 2,
/// numeric failures exit 3.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

/// Core errors keep their split: invalid arguments trace back to the config,
/// convergence failures to the numerics.
pub fn from_core(e: backstep_core::Error) -> CliError {
    match e {
        backstep_core::Error::InvalidArgument(m) => CliError::Config(m),
        other => CliError::Numeric(other.to_string()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyTag {
    Hyperbolic,
    Dirichlet,
    Neumann,
    Coupled,
}

impl FamilyTag {
    pub fn name(self) -> &'static str {
        match self {
            FamilyTag::Hyperbolic => "hyperbolic",
            FamilyTag::Dirichlet => "dirichlet",
            FamilyTag::Neumann => "neumann",
            FamilyTag::Coupled => "coupled",
        }
    }
}

/// Coefficient descriptor, rendered onto the scenario grid at ingestion.
/// `cosine_series` term `k` contributes `amps[k] cos((k+1) pi x + phases[k])`;
/// `sampled` values must match `grid_n`.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Coefficient {
    Constant { value: f64 },
    Polynomial { coeffs: Vec<f64> },
    CosineSeries { amps: Vec<f64>, phases: Vec<f64> },
    Sampled { values: Vec<f64> },
}

impl Coefficient {
    fn validate(&self, name: &str, grid_n: usize) -> Result<(), CliError> {
        let numbers: &[f64] = match self {
            Coefficient::Constant { value } => std::slice::from_ref(value),
            Coefficient::Polynomial { coeffs } => {
                if coeffs.is_empty() {
                    return Err(CliError::config(format!(
                        "coefficient `{name}`: polynomial needs at least one entry"
                    )));
                }
                coeffs
            }
            Coefficient::CosineSeries { amps, phases } => {
                if amps.len() != phases.len() {
                    return Err(CliError::config(format!(
                        "coefficient `{name}`: amps and phases lengths differ"
                    )));
                }
                if amps.is_empty() {
                    return Err(CliError::config(format!(
                        "coefficient `{name}`: cosine series needs at least one term"
                    )));
                }
                if phases.iter().any(|p| !p.is_finite()) {
                    return Err(CliError::config(format!(
                        "coefficient `{name}` contains a non-finite number"
                    )));
                }
                amps
            }
            Coefficient::Sampled { values } => {
                if values.len() != grid_n {
                    return Err(CliError::config(format!(
                        "coefficient `{name}`: sampled values length {} does not match grid_n {grid_n}",
                        values.len()
                    )));
                }
                values
            }
        };
        if numbers.iter().any(|v| !v.is_finite()) {
            return Err(CliError::config(format!(
                "coefficient `{name}` contains a non-finite number"
            )));
        }
        Ok(())
    }

    /// Pointwise evaluation; `sampled` descriptors interpolate linearly
    /// through the prerendered field.
    fn eval(&self, x: f64, sampled: Option<&ScalarField1D<f64>>) -> f64 {
        match self {
            Coefficient::Constant { value } => *value,
            Coefficient::Polynomial { coeffs } => {
                coeffs.iter().rev().fold(0.0, |acc, &a| acc * x + a)
            }
            Coefficient::CosineSeries { amps, phases } => amps
                .iter()
                .zip(phases)
                .enumerate()
                .map(|(k, (a, p))| a * ((k as f64 + 1.0) * std::f64::consts::PI * x + p).cos())
                .sum(),
            Coefficient::Sampled { .. } => sampled.expect("prerendered field").eval(x),
        }
    }
}

pub fn render_1d(
    c: &Coefficient,
    name: &str,
    grid: UniformGrid<f64>,
) -> Result<ScalarField1D<f64>, CliError> {
    c.validate(name, grid.n())?;
    if let Coefficient::Sampled { values } = c {
        return ScalarField1D::new(grid, values.clone()).map_err(from_core);
    }
    ScalarField1D::from_fn(grid, |x| c.eval(x, None)).map_err(from_core)
}

/// The recirculation coefficient is a difference kernel: the descriptor
/// gives `F` and the plant uses `f(x, xi) = F(x - xi)`.
pub fn render_difference_kernel(
    c: &Coefficient,
    name: &str,
    grid: UniformGrid<f64>,
) -> Result<TriangularField<f64>, CliError> {
    c.validate(name, grid.n())?;
    let sampled = match c {
        Coefficient::Sampled { .. } => Some(render_1d(c, name, grid)?),
        _ => None,
    };
    TriangularField::from_fn(grid, |x, xi| c.eval(x - xi, sampled.as_ref())).map_err(from_core)
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthExpect {
    pub rate: f64,
    pub tol_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbModeTag {
    ConstantOffset,
    SmoothNoise,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    pub mode: PerturbModeTag,
    pub eps_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    TraceCsv,
    SummaryJson,
    ReportText,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    EpsFraction,
    GridN,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

/// One scenario file. `c` prices the budget for the scalar families; the
/// coupled family takes `c_bar` instead and derives its `c`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub family: FamilyTag,
    pub coefficients: BTreeMap<String, Coefficient>,
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub q: Option<f64>,
    #[serde(default)]
    pub c_bar: Option<f64>,
    pub grid_n: usize,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub window: Option<[f64; 2]>,
    #[serde(default)]
    pub u0: Option<Coefficient>,
    #[serde(default)]
    pub v0: Option<Coefficient>,
    #[serde(default)]
    pub open_loop: bool,
    #[serde(default)]
    pub expect_growth: Option<GrowthExpect>,
    #[serde(default)]
    pub perturbation: Option<PerturbationConfig>,
    #[serde(default)]
    pub outputs: Option<Vec<OutputKind>>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

pub fn load(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let cfg: ScenarioConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

fn require(name: &str, v: Option<f64>, family: &str) -> Result<f64, CliError> {
    v.ok_or_else(|| CliError::config(format!("missing field `{name}` (required for {family} scenarios)")))
}

fn forbid(name: &str, present: bool, family: &str, why: &str) -> Result<(), CliError> {
    if present {
        return Err(CliError::config(format!("field `{name}` does not apply to {family} scenarios; {why}")));
    }
    Ok(())
}

impl ScenarioConfig {
    fn coefficient(&self, name: &str) -> Result<&Coefficient, CliError> {
        self.coefficients.get(name).ok_or_else(|| {
            CliError::config(format!(
                "missing coefficient `{name}` (required for {} scenarios)",
                self.family.name()
            ))
        })
    }

    fn validate(&self) -> Result<(), CliError> {
        let fam = self.family.name();
        let allowed: &[&str] = match self.family {
            FamilyTag::Hyperbolic => &["f", "g"],
            FamilyTag::Dirichlet | FamilyTag::Neumann => &["lambda"],
            FamilyTag::Coupled => &["lambda", "mu", "sigma", "omega", "theta"],
        };
        for key in self.coefficients.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(CliError::config(format!(
                    "coefficient `{key}` does not apply to {fam} scenarios"
                )));
            }
        }
        for name in allowed {
            self.coefficient(name)?;
        }
        for (name, c) in &self.coefficients {
            c.validate(name, self.grid_n)?;
        }
        for (name, c) in [("u0", &self.u0), ("v0", &self.v0)] {
            if let Some(c) = c {
                c.validate(name, self.grid_n)?;
            }
        }
        match self.family {
            FamilyTag::Hyperbolic | FamilyTag::Dirichlet => {
                require("c", self.c, fam)?;
                forbid("q", self.q.is_some(), fam, "only neumann and coupled take a reflection coefficient")?;
            }
            FamilyTag::Neumann => {
                require("c", self.c, fam)?;
                require("q", self.q, fam)?;
            }
            FamilyTag::Coupled => {
                require("c_bar", self.c_bar, fam)?;
                require("q", self.q, fam)?;
                forbid("c", self.c.is_some(), fam, "the target rate is priced through c_bar and c is derived")?;
            }
        }
        if self.family != FamilyTag::Coupled {
            forbid("c_bar", self.c_bar.is_some(), fam, "only coupled scenarios take c_bar")?;
            forbid("v0", self.v0.is_some(), fam, "only coupled scenarios carry a second channel")?;
        }
        if let Some(p) = &self.perturbation {
            if !(p.eps_fraction >= 0.0 && p.eps_fraction < 1.0) {
                return Err(CliError::config(format!(
                    "perturbation.eps_fraction must lie in [0, 1), got {}",
                    p.eps_fraction
                )));
            }
        }
        if let Some([lo, hi]) = self.window {
            if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi > lo) {
                return Err(CliError::config("window must satisfy 0 <= lo < hi".to_string()));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<UniformGrid<f64>, CliError> {
        make_uniform_grid::<f64>(self.grid_n).map_err(from_core)
    }

    pub fn build_plant(&self) -> Result<ScenarioPlant<f64>, CliError> {
        let grid = self.grid()?;
        match self.family {
            FamilyTag::Hyperbolic => {
                let f = render_difference_kernel(self.coefficient("f")?, "f", grid)?;
                let g = render_1d(self.coefficient("g")?, "g", grid)?;
                let plant = HyperbolicPlantSpec::new(f, g).map_err(from_core)?;
                Ok(ScenarioPlant::Hyperbolic { plant, c: self.c.unwrap() })
            }
            FamilyTag::Dirichlet | FamilyTag::Neumann => {
                let lambda = render_1d(self.coefficient("lambda")?, "lambda", grid)?;
                let bc = match self.family {
                    FamilyTag::Dirichlet => ParabolicBc::Dirichlet,
                    _ => ParabolicBc::Neumann { q: self.q.unwrap() },
                };
                let plant =
                    ParabolicPlantSpec::new(lambda, self.c.unwrap(), bc).map_err(from_core)?;
                Ok(ScenarioPlant::Parabolic { plant })
            }
            FamilyTag::Coupled => {
                let lambda = render_1d(self.coefficient("lambda")?, "lambda", grid)?;
                let mu = render_1d(self.coefficient("mu")?, "mu", grid)?;
                let sigma = render_1d(self.coefficient("sigma")?, "sigma", grid)?;
                let omega = render_1d(self.coefficient("omega")?, "omega", grid)?;
                let theta = render_1d(self.coefficient("theta")?, "theta", grid)?;
                let c_lambda = lambda.min_value();
                let c_mu = mu.min_value();
                let plant = CoupledPlantSpec::new(
                    lambda, mu, sigma, omega, theta, self.q.unwrap(), c_lambda, c_mu,
                )
                .map_err(from_core)?;
                Ok(ScenarioPlant::Coupled { plant, c_bar: self.c_bar.unwrap() })
            }
        }
    }

    fn default_u0(&self, grid: UniformGrid<f64>) -> Result<ScalarField1D<f64>, CliError> {
        use std::f64::consts::PI;
        let f: fn(f64) -> f64 = match self.family {
            FamilyTag::Hyperbolic | FamilyTag::Dirichlet => |x| (PI * x).sin(),
            FamilyTag::Neumann | FamilyTag::Coupled => |x| (PI * x).cos(),
        };
        ScalarField1D::from_fn(grid, f).map_err(from_core)
    }

    /// Full scenario for `verify` and `sweep`; `seed_override` replaces the
    /// config's perturbation seed when the flag is given.
    pub fn build_scenario(&self, seed_override: Option<u64>) -> Result<Scenario<f64>, CliError> {
        let grid = self.grid()?;
        let plant = self.build_plant()?;
        let dt = require("dt", self.dt, self.family.name())?;
        let horizon = require("horizon", self.horizon, self.family.name())?;
        let u0 = match &self.u0 {
            Some(c) => render_1d(c, "u0", grid)?,
            None => self.default_u0(grid)?,
        };
        let v0 = match (&self.v0, self.family) {
            (Some(c), _) => Some(render_1d(c, "v0", grid)?),
            (None, FamilyTag::Coupled) => Some(
                ScalarField1D::from_fn(grid, |x| (std::f64::consts::PI * x).sin() + 0.5)
                    .map_err(from_core)?,
            ),
            (None, _) => None,
        };
        let perturbation = match &self.perturbation {
            None => PerturbationSpec::exact(),
            Some(p) => PerturbationSpec {
                kind: Some(match p.mode {
                    PerturbModeTag::ConstantOffset => PerturbKind::ConstantOffset,
                    PerturbModeTag::SmoothNoise => PerturbKind::SmoothNoise,
                }),
                eps_fraction: p.eps_fraction,
                seed: seed_override.unwrap_or(p.seed),
            },
        };
        let expectation = match self.expect_growth {
            None => Expectation::Decay,
            Some(GrowthExpect { rate, tol_fraction }) => Expectation::Growth { rate, tol_fraction },
        };
        Ok(Scenario {
            plant,
            dt,
            horizon,
            u0,
            v0,
            perturbation,
            open_loop: self.open_loop,
            expectation,
            window: self.window.map(|[lo, hi]| (lo, hi)),
        })
    }

    pub fn outputs(&self) -> Vec<OutputKind> {
        self.outputs.clone().unwrap_or_else(|| {
            vec![OutputKind::TraceCsv, OutputKind::SummaryJson, OutputKind::ReportText]
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ScenarioConfig, CliError> {
        let cfg: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn config_message(r: Result<ScenarioConfig, CliError>) -> String {
        match r {
            Err(CliError::Config(m)) => m,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_hyperbolic_config_parses() {
        let cfg = parse(
            r#"{
                "family": "hyperbolic",
                "coefficients": {
                    "f": {"constant": {"value": 0.5}},
                    "g": {"constant": {"value": 0.5}}
                },
                "c": 1.0,
                "grid_n": 21
            }"#,
        )
        .unwrap();
        assert_eq!(cfg.family, FamilyTag::Hyperbolic);
        let plant = cfg.build_plant().unwrap();
        match plant {
            ScenarioPlant::Hyperbolic { plant, c } => {
                assert_eq!(c, 1.0);
                assert_eq!(plant.g.values()[0], 0.5);
            }
            _ => panic!("wrong family"),
        }
    }

    #[test]
    fn missing_q_is_named() {
        let msg = config_message(parse(
            r#"{
                "family": "neumann",
                "coefficients": {"lambda": {"constant": {"value": 1.0}}},
                "c": 0.3,
                "grid_n": 21
            }"#,
        ));
        assert!(msg.contains("`q`"), "message should name q: {msg}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let msg = config_message(parse(
            r#"{
                "family": "dirichlet",
                "coefficients": {"lambda": {"constant": {"value": 5.0}}},
                "c": 0.5,
                "grid_n": 21,
                "grdi_n": 41
            }"#,
        ));
        assert!(msg.contains("grdi_n"), "message should name the field: {msg}");
    }

    #[test]
    fn coupled_rejects_direct_c() {
        let msg = config_message(parse(
            r#"{
                "family": "coupled",
                "coefficients": {
                    "lambda": {"constant": {"value": 1.0}},
                    "mu": {"constant": {"value": 1.0}},
                    "sigma": {"constant": {"value": 0.2}},
                    "omega": {"constant": {"value": 0.3}},
                    "theta": {"constant": {"value": 0.5}}
                },
                "q": 1.0,
                "c_bar": 0.2,
                "c": 1.0,
                "grid_n": 21
            }"#,
        ));
        assert!(msg.contains("`c`"), "{msg}");
    }

    #[test]
    fn eps_fraction_must_stay_below_one() {
        let msg = config_message(parse(
            r#"{
                "family": "dirichlet",
                "coefficients": {"lambda": {"constant": {"value": 5.0}}},
                "c": 0.5,
                "grid_n": 21,
                "perturbation": {"mode": "smooth_noise", "eps_fraction": 1.0, "seed": 3}
            }"#,
        ));
        assert!(msg.contains("eps_fraction"), "{msg}");
    }

    #[test]
    fn sampled_length_must_match_grid() {
        let msg = config_message(parse(
            r#"{
                "family": "dirichlet",
                "coefficients": {"lambda": {"sampled": {"values": [1.0, 2.0, 3.0]}}},
                "c": 0.5,
                "grid_n": 21
            }"#,
        ));
        assert!(msg.contains("lambda") && msg.contains("grid_n"), "{msg}");
    }

    #[test]
    fn descriptor_rendering_matches_formulas() {
        let g = make_uniform_grid::<f64>(41).unwrap();
        let poly = Coefficient::Polynomial { coeffs: vec![1.0, -2.0, 0.5] };
        let f = render_1d(&poly, "p", g).unwrap();
        let x = 0.35;
        assert!((f.eval(x) - (1.0 - 2.0 * x + 0.5 * x * x)).abs() < 1e-12);

        let cos = Coefficient::CosineSeries { amps: vec![0.3, 0.1], phases: vec![0.2, 1.1] };
        let f = render_1d(&cos, "w", g).unwrap();
        let x = 0.5;
        let pi = std::f64::consts::PI;
        let want = 0.3 * (pi * x + 0.2).cos() + 0.1 * (2.0 * pi * x + 1.1).cos();
        assert!((f.eval(x) - want).abs() < 1e-12);
    }

    #[test]
    fn difference_kernel_uses_x_minus_xi() {
        let g = make_uniform_grid::<f64>(21).unwrap();
        let lin = Coefficient::Polynomial { coeffs: vec![0.0, 1.0] };
        let f = render_difference_kernel(&lin, "f", g).unwrap();
        assert!((f.value(10, 4) - (g.node(10) - g.node(4))).abs() < 1e-12);
    }
}
