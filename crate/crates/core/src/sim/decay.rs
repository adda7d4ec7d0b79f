//! Exponential decay-rate estimation from recorded norm series.

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::SimTrace;

/// Least-squares exponential fit of one trace series over a time window.
#[derive(Debug, Clone)]
pub struct DecayEstimate<T: Real> {
    /// Fitted rate r in `norm(t) ~ e^{-r t}`; positive means decay. Set to
    /// infinity when the series reaches zero inside the window.
    pub rate: T,
    /// Smallest M with `norm(t) <= M e^{-r (t - t0)} norm(t0)` over the
    /// window, t0 the window's first sample.
    pub overshoot_m: T,
    /// R-squared of the log-linear fit; 1 for an exact exponential.
    pub fit_quality: T,
    /// Actual window used (first and last sampled instants).
    pub window: (T, T),
    /// Number of samples in the window.
    pub samples: usize,
    /// True when the series hit zero (or below) inside the window, which a
    /// finite-rate fit cannot represent.
    pub extinct: bool,
}

/// Fits `log norm(t) = a - r t` over `window` and reports the rate, the
/// overshoot constant, and the fit quality.
///
/// A series that reaches exactly zero inside the window (possible for
/// transport-dominated runs) is reported as `extinct` with infinite rate,
/// unit overshoot, and unit fit quality rather than as an error: extinction
/// satisfies any exponential decay guarantee.
pub fn estimate_decay_rate<T: Real>(
    trace: &SimTrace<T>,
    series_name: &str,
    window: (T, T),
) -> Result<DecayEstimate<T>> {
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
    let (t_lo, t_hi) = window;
    if !(t_lo.is_finite() && t_hi.is_finite()) || t_lo >= t_hi {
        return Err(Error::invalid("decay window must be finite with t_lo < t_hi"));
    }

    let mut ts: Vec<T> = Vec::new();
    let mut ys: Vec<T> = Vec::new();
    for (t, y) in trace.times.iter().zip(values.iter()) {
        if *t >= t_lo && *t <= t_hi {
            ts.push(*t);
            ys.push(*y);
        }
    }
    if ts.len() < 4 {
        return Err(Error::invalid(format!(
            "decay window [{t_lo}, {t_hi}] holds {} samples, need at least 4",
            ts.len()
        )));
    }

    let span = (ts[0], ts[ts.len() - 1]);
    if ys.iter().any(|y| !(*y > T::zero())) {
        return Ok(DecayEstimate {
            rate: T::infinity(),
            overshoot_m: T::one(),
            fit_quality: T::one(),
            window: span,
            samples: ts.len(),
            extinct: true,
        });
    }

    let m = T::from_usize(ts.len()).unwrap();
    let logs: Vec<T> = ys.iter().map(|y| y.ln()).collect();
    let mean_t = ts.iter().fold(T::zero(), |a, t| a + *t) / m;
    let mean_l = logs.iter().fold(T::zero(), |a, l| a + *l) / m;
    let mut stt = T::zero();
    let mut stl = T::zero();
    for (t, l) in ts.iter().zip(logs.iter()) {
        let dt = *t - mean_t;
        stt = stt + dt * dt;
        stl = stl + dt * (*l - mean_l);
    }
    if !(stt > T::zero()) {
        return Err(Error::invalid("decay window collapses to a single instant"));
    }
    let slope = stl / stt;
    let rate = -slope;

    let mut ss_res = T::zero();
    let mut ss_tot = T::zero();
    for (t, l) in ts.iter().zip(logs.iter()) {
        let fitted = mean_l + slope * (*t - mean_t);
        let r = *l - fitted;
        ss_res = ss_res + r * r;
        let d = *l - mean_l;
        ss_tot = ss_tot + d * d;
    }
    let fit_quality = if ss_tot > T::zero() {
        (T::one() - ss_res / ss_tot).max(T::zero())
    } else {
        T::one()
    };

    let t0 = ts[0];
    let y0 = ys[0];
    let mut overshoot = T::zero();
    for (t, y) in ts.iter().zip(ys.iter()) {
        let cand = *y * (rate * (*t - t0)).exp() / y0;
        overshoot = overshoot.max(cand);
    }

    Ok(DecayEstimate {
        rate,
        overshoot_m: overshoot,
        fit_quality,
        window: span,
        samples: ts.len(),
        extinct: false,
    })
}
