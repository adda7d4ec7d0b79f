//! Discrete verification of Lyapunov decay inequalities along trajectories.

use crate::error::{Error, Result};
use crate::scalar::{real, Real};

use super::SimTrace;

/// Outcome of checking `dV/dt <= -rate V` along a recorded series.
#[derive(Debug, Clone)]
pub struct LyapunovCheck<T: Real> {
    /// Fraction of checked steps satisfying the inequality.
    pub fraction: T,
    /// True when `fraction >= required_fraction`.
    pub pass: bool,
    /// Steps actually checked (startup steps are excluded).
    pub checked: usize,
    /// Steps violating the inequality beyond the tolerance.
    pub violations: usize,
    /// Absolute slack added to the right-hand side: `10 dt max V`.
    pub tol: T,
    /// Rate the inequality was checked against.
    pub required_rate: T,
}

/// Checks the decay inequality `(V_{k+1} - V_k)/dt <= -rate V_k + tol` with
/// forward differences, skipping the first few steps where the scheme's own
/// startup transient still dominates.
///
/// The slack `tol = 10 dt max_k V_k` absorbs the O(dt) bias of the forward
/// difference without masking a genuine rate shortfall.
pub fn lyapunov_derivative_check<T: Real>(
    trace: &SimTrace<T>,
    series_name: &str,
    rate: T,
    required_fraction: T,
) -> Result<LyapunovCheck<T>> {
    let values = trace
        .get(series_name)
        .ok_or_else(|| Error::invalid(format!("trace has no series named {series_name}")))?;
    if values.len() != trace.times.len() {
        return Err(Error::invalid(format!(
            "series {series_name} has {} entries for {} instants",
            values.len(),
            trace.times.len()
        )));
    }
    if !rate.is_finite() || rate < T::zero() {
        return Err(Error::invalid("required rate must be finite and nonnegative"));
    }
    if !(required_fraction >= T::zero() && required_fraction <= T::one()) {
        return Err(Error::invalid("required fraction must lie in [0, 1]"));
    }
    const SKIP: usize = 5;
    if values.len() < SKIP + 3 {
        return Err(Error::invalid(format!(
            "series {series_name} holds {} instants, too few to check",
            values.len()
        )));
    }

    let dt = trace.dt;
    let vmax = values.iter().fold(T::zero(), |a, v| a.max(*v));
    let tol = real::<T>(10.0) * dt * vmax;

    let mut checked = 0usize;
    let mut violations = 0usize;
    for k in SKIP..values.len() - 1 {
        let dv = (values[k + 1] - values[k]) / dt;
        checked += 1;
        if dv > -rate * values[k] + tol {
            violations += 1;
        }
    }
    let fraction =
        T::from_usize(checked - violations).unwrap() / T::from_usize(checked).unwrap();
    Ok(LyapunovCheck {
        fraction,
        pass: fraction >= required_fraction,
        checked,
        violations,
        tol,
        required_rate: rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_uniform_grid;
    use std::collections::BTreeMap;

    fn synthetic(dt: f64, values: Vec<f64>) -> SimTrace<f64> {
        let times: Vec<f64> = (0..values.len()).map(|k| k as f64 * dt).collect();
        let grid = make_uniform_grid(3).unwrap();
        let mut series = BTreeMap::new();
        series.insert("lyapunov".to_string(), values);
        SimTrace {
            times,
            series,
            snapshot_times: vec![],
            snapshots: vec![],
            dt,
            grid,
        }
    }

    #[test]
    fn exact_exponential_passes_its_own_rate() {
        let dt = 1e-3;
        let values: Vec<f64> = (0..2000).map(|k| (-2.0 * k as f64 * dt).exp()).collect();
        let tr = synthetic(dt, values);
        let chk = lyapunov_derivative_check(&tr, "lyapunov", 2.0, 0.95).unwrap();
        assert!(chk.pass);
        assert_eq!(chk.violations, 0);
    }

    #[test]
    fn slow_decay_fails_a_faster_required_rate() {
        let dt = 1e-3;
        let values: Vec<f64> = (0..2000).map(|k| (-0.5 * k as f64 * dt).exp()).collect();
        let tr = synthetic(dt, values);
        let chk = lyapunov_derivative_check(&tr, "lyapunov", 2.0, 0.95).unwrap();
        assert!(!chk.pass);
        assert!(chk.fraction < 0.05, "fraction {}", chk.fraction);
    }

    #[test]
    fn growth_fails_any_positive_rate() {
        let dt = 1e-3;
        let values: Vec<f64> = (0..1000).map(|k| (0.3 * k as f64 * dt).exp()).collect();
        let tr = synthetic(dt, values);
        let chk = lyapunov_derivative_check(&tr, "lyapunov", 0.1, 0.95).unwrap();
        assert!(!chk.pass);
        assert_eq!(chk.fraction, 0.0);
    }

    #[test]
    fn startup_steps_are_excluded() {
        let dt = 1e-3;
        let mut values: Vec<f64> = (0..1000).map(|k| (-1.0 * k as f64 * dt).exp()).collect();
        values[1] = 5.0;
        values[2] = 7.0;
        let tr = synthetic(dt, values);
        let chk = lyapunov_derivative_check(&tr, "lyapunov", 1.0, 0.95).unwrap();
        assert!(chk.pass, "fraction {}", chk.fraction);
        assert_eq!(chk.checked, 1000 - 1 - 5);
    }

    #[test]
    fn rejects_bad_inputs() {
        let tr = synthetic(1e-3, vec![1.0; 100]);
        assert!(lyapunov_derivative_check(&tr, "absent", 1.0, 0.95).is_err());
        assert!(lyapunov_derivative_check(&tr, "lyapunov", -1.0, 0.95).is_err());
        assert!(lyapunov_derivative_check(&tr, "lyapunov", 1.0, 1.5).is_err());
        let short = synthetic(1e-3, vec![1.0; 4]);
        assert!(lyapunov_derivative_check(&short, "lyapunov", 1.0, 0.95).is_err());
    }

    #[test]
    fn constant_series_passes_rate_zero() {
        let tr = synthetic(1e-3, vec![2.5; 200]);
        let chk = lyapunov_derivative_check(&tr, "lyapunov", 0.0, 0.95).unwrap();
        assert!(chk.pass);
        assert_eq!(chk.violations, 0);
    }
}
