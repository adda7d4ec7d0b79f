//! Time-domain solvers for the three closed-loop plant families, plus the
//! trajectory diagnostics (decay-rate fits, Lyapunov derivative checks) and
//! the end-to-end verification pipeline built on top of them.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::field::ScalarField1D;
use crate::grid::UniformGrid;
use crate::scalar::Real;

mod coupled;
mod decay;
mod hyperbolic;
mod lyapunov;
mod reaction_diffusion;
mod verify;

pub use coupled::{simulate_2x2, Coupled2x2Setup, CoupledMonitor};
pub use decay::{estimate_decay_rate, DecayEstimate};
pub use hyperbolic::{simulate_hyperbolic_pide, HyperbolicMonitor, HyperbolicSimSetup};
pub use lyapunov::{lyapunov_derivative_check, LyapunovCheck};
pub use reaction_diffusion::{simulate_reaction_diffusion, ReactionDiffusionSetup};
pub use verify::{
    verify_theorem, Expectation, Family, PerturbationSpec, Scenario, ScenarioPlant,
    VerificationReport,
};

/// Series names recorded by the simulators. Not every simulator fills every
/// series; absent names simply have no entry in the trace map.
pub mod series {
    /// L2 norm of the primary state u.
    pub const L2_U: &str = "l2_u";
    /// H1 norm of the primary state u.
    pub const H1_U: &str = "h1_u";
    /// L2 norm of the counter-convecting state v.
    pub const L2_V: &str = "l2_v";
    /// Sum of the u and v L2 norms.
    pub const L2_SUM: &str = "l2_sum";
    /// L2 norm of the transformed state w.
    pub const L2_W: &str = "l2_w";
    /// Plain L2 energy half-integral of w.
    pub const V1: &str = "v1";
    /// Gradient energy half-integral of w.
    pub const V2: &str = "v2";
    /// Lyapunov functional tracked by the family's stability argument.
    pub const LYAPUNOV: &str = "lyapunov";
    /// Residual of the target-system boundary condition at x = 1.
    pub const TARGET_BOUNDARY: &str = "target_boundary";
    /// Control input applied at the actuated end.
    pub const CONTROL: &str = "control";
    /// State value at x = 0.
    pub const U_LEFT: &str = "u_left";
    /// Counter-convecting state value at x = 0.
    pub const V_LEFT: &str = "v_left";
}

/// Full state at one retained instant.
#[derive(Debug, Clone)]
pub struct StateSnapshot<T: Real> {
    pub u: ScalarField1D<T>,
    pub v: Option<ScalarField1D<T>>,
}

/// Trajectory record produced by the simulators: per-step scalar series keyed
/// by name, plus a thinned set of full state snapshots.
#[derive(Debug, Clone)]
pub struct SimTrace<T: Real> {
    pub times: Vec<T>,
    pub series: BTreeMap<String, Vec<T>>,
    pub snapshot_times: Vec<T>,
    pub snapshots: Vec<StateSnapshot<T>>,
    pub dt: T,
    pub grid: UniformGrid<T>,
}

impl<T: Real> SimTrace<T> {
    fn new(grid: UniformGrid<T>, dt: T, steps: usize) -> Self {
        SimTrace {
            times: Vec::with_capacity(steps + 1),
            series: BTreeMap::new(),
            snapshot_times: Vec::new(),
            snapshots: Vec::new(),
            dt,
            grid,
        }
    }

    fn push(&mut self, name: &str, value: T) {
        self.series
            .entry(name.to_string())
            .or_insert_with(|| Vec::with_capacity(self.times.capacity()))
            .push(value);
    }

    /// Named series, if the simulator recorded it.
    pub fn get(&self, name: &str) -> Option<&[T]> {
        self.series.get(name).map(|v| v.as_slice())
    }

    /// Number of recorded instants.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Keep roughly a hundred snapshots regardless of step count.
fn snapshot_stride(steps: usize) -> usize {
    (steps / 100).max(1)
}

fn push_snapshot<T: Real>(
    trace: &mut SimTrace<T>,
    t: T,
    u: &[T],
    v: Option<&[T]>,
    grid: &UniformGrid<T>,
) {
    trace.snapshot_times.push(t);
    trace.snapshots.push(StateSnapshot {
        u: ScalarField1D::new(grid.clone(), u.to_vec()).expect("snapshot length matches grid"),
        v: v.map(|vv| {
            ScalarField1D::new(grid.clone(), vv.to_vec()).expect("snapshot length matches grid")
        }),
    });
}

/// Shared validation for time-stepping inputs.
fn check_time_inputs<T: Real>(dt: T, horizon: T) -> Result<usize> {
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(Error::invalid("time step must be positive and finite"));
    }
    if !(horizon > T::zero()) || !horizon.is_finite() {
        return Err(Error::invalid("horizon must be positive and finite"));
    }
    let steps_f = (horizon / dt).to_f64().unwrap_or(f64::NAN);
    if !steps_f.is_finite() || steps_f > 50_000_000.0 {
        return Err(Error::invalid("horizon/dt yields an unreasonable step count"));
    }
    Ok(steps_f.round().max(1.0) as usize)
}
