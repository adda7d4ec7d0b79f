//! Deterministic result emission: trace and kernel CSVs, the fixed-key
//! summary JSON, and the human-readable report.

use backstep_core::field::ScalarField1D;
use backstep_core::kernel::{
    CoupledKernelSolution, HyperbolicKernelSolution, ParabolicGain, ParabolicKernelSolution,
};
use backstep_core::sim::{SimTrace, VerificationReport};

/// Column order for trace CSVs; simulators record a subset of these.
const SERIES_ORDER: [&str; 12] = [
    "l2_u",
    "h1_u",
    "l2_v",
    "l2_sum",
    "l2_w",
    "v1",
    "v2",
    "lyapunov",
    "target_boundary",
    "control",
    "u_left",
    "v_left",
];

/// 17 significant digits, `.` decimal separator.
pub fn csv_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// JSON number; non-finite values have no JSON representation and become null.
pub fn json_num(x: f64) -> String {
    match serde_json::Number::from_f64(x) {
        Some(n) => n.to_string(),
        None => "null".to_string(),
    }
}

pub fn trace_csv(trace: &SimTrace<f64>) -> String {
    let names: Vec<&str> = SERIES_ORDER
        .iter()
        .copied()
        .filter(|s| trace.get(s).is_some())
        .collect();
    let mut out = String::from("time");
    for n in &names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for (k, t) in trace.times.iter().enumerate() {
        out.push_str(&csv_num(*t));
        for n in &names {
            out.push(',');
            out.push_str(&csv_num(trace.get(n).unwrap()[k]));
        }
        out.push('\n');
    }
    out
}

/// Summed channel view: the coupled verdict rides on the joint target, so
/// the summary's `g_sup`/`g_bound` add the two channels when both exist.
fn g_totals(r: &VerificationReport<f64>) -> (f64, f64) {
    match (r.g_sup_v, r.g_bound_v) {
        (Some(gv), Some(bv)) => (r.g_sup + gv, r.g_bound + bv),
        _ => (r.g_sup, r.g_bound),
    }
}

pub fn summary_json(r: &VerificationReport<f64>) -> String {
    let (g_sup, g_bound) = g_totals(r);
    format!(
        concat!(
            "{{\"family\":\"{}\",\"grid_n\":{},\"dt\":{},\"epsilon_star\":{},",
            "\"eps_used\":{},\"kernel_sup\":{},\"kernel_bound\":{},\"g_sup\":{},",
            "\"g_bound\":{},\"guaranteed_rate\":{},\"measured_rate\":{},",
            "\"overshoot_M\":{},\"fit_quality\":{},\"pass\":{}}}\n"
        ),
        r.family.name(),
        r.grid_n,
        json_num(r.dt),
        json_num(r.epsilon_star),
        json_num(r.eps_used),
        json_num(r.kernel_sup),
        json_num(r.kernel_bound),
        json_num(g_sup),
        json_num(g_bound),
        json_num(r.guaranteed_rate),
        json_num(r.measured_rate),
        json_num(r.overshoot_m),
        json_num(r.fit_quality),
        r.pass,
    )
}

pub fn report_text(r: &VerificationReport<f64>) -> String {
    let mut out = String::new();
    let line = |out: &mut String, s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    line(&mut out, format!("family: {}", r.family.name()));
    line(&mut out, format!("grid_n: {}  dt: {:.6e}", r.grid_n, r.dt));
    line(
        &mut out,
        format!(
            "kernel: sup {:.6e} vs bound {:.6e} ({} iterations, residual {:.3e})",
            r.kernel_sup, r.kernel_bound, r.kernel_iterations, r.kernel_residual
        ),
    );
    line(
        &mut out,
        format!("budget: epsilon_star {:.6e}, eps_used {:.6e}", r.epsilon_star, r.eps_used),
    );
    match (r.g_sup_v, r.g_bound_v) {
        (Some(gv), Some(bv)) => {
            line(
                &mut out,
                format!("boundary perturbation u-channel: {:.6e} (separate target {:.6e})", r.g_sup, r.g_bound),
            );
            line(
                &mut out,
                format!("boundary perturbation v-channel: {:.6e} (separate target {:.6e})", gv, bv),
            );
            line(
                &mut out,
                format!("boundary perturbation summed: {:.6e} vs proof cap {:.6e}", r.g_sup + gv, r.g_bound + bv),
            );
        }
        _ => line(
            &mut out,
            format!(
                "boundary perturbation: {:.6e} vs proof cap {:.6e} (|L| = {:.6e})",
                r.g_sup, r.g_bound, r.l_sup
            ),
        ),
    }
    let extinct = if r.extinct { " (finite-time extinction)" } else { "" };
    line(
        &mut out,
        format!(
            "rate on {}: measured {:.6e}{extinct} vs guaranteed {:.6e}, window [{:.3}, {:.3}]",
            r.rate_series, r.measured_rate, r.guaranteed_rate, r.window.0, r.window.1
        ),
    );
    line(
        &mut out,
        format!("overshoot_M: {:.6e}  fit_quality: {:.4}", r.overshoot_m, r.fit_quality),
    );
    line(
        &mut out,
        format!(
            "lyapunov drift: fraction {:.4} at rate {:.6e} over {} steps ({})",
            r.lyapunov.fraction,
            r.lyapunov.required_rate,
            r.lyapunov.checked,
            if r.lyapunov.pass { "ok" } else { "violated" }
        ),
    );
    for n in &r.notes {
        line(&mut out, format!("note: {n}"));
    }
    line(&mut out, format!("verdict: {}", if r.pass { "PASS" } else { "FAIL" }));
    out
}

pub fn hyperbolic_kernel_csv(sol: &HyperbolicKernelSolution<f64>) -> String {
    let grid = sol.kernel.grid();
    let mut out = String::from("x,xi,kernel,inverse\n");
    for i in 0..grid.n() {
        for j in 0..=i {
            out.push_str(&format!(
                "{},{},{},{}\n",
                csv_num(grid.node(i)),
                csv_num(grid.node(j)),
                csv_num(sol.kernel.value(i, j)),
                csv_num(sol.inverse.value(i, j)),
            ));
        }
    }
    out
}

pub fn parabolic_kernel_csv(sol: &ParabolicKernelSolution<f64>) -> String {
    let grid = sol.kernel.grid();
    let mut out = String::from("x,xi,kernel,inverse\n");
    for i in 0..grid.n() {
        for j in 0..=i {
            out.push_str(&format!(
                "{},{},{},{}\n",
                csv_num(grid.node(i)),
                csv_num(grid.node(j)),
                csv_num(sol.kernel.value(i, j)),
                csv_num(sol.inverse.value(i, j)),
            ));
        }
    }
    out
}

pub fn coupled_kernel_csv(sol: &CoupledKernelSolution<f64>) -> String {
    let grid = sol.k_u.grid();
    let mut out = String::from("x,xi,k_u,k_v,l_u,l_v\n");
    for i in 0..grid.n() {
        for j in 0..=i {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                csv_num(grid.node(i)),
                csv_num(grid.node(j)),
                csv_num(sol.k_u.value(i, j)),
                csv_num(sol.k_v.value(i, j)),
                csv_num(sol.l_u.value(i, j)),
                csv_num(sol.l_v.value(i, j)),
            ));
        }
    }
    out
}

fn columns_csv(header: &str, cols: &[&ScalarField1D<f64>]) -> String {
    let grid = cols[0].grid();
    let mut out = String::from(header);
    out.push('\n');
    for i in 0..grid.n() {
        out.push_str(&csv_num(grid.node(i)));
        for c in cols {
            out.push(',');
            out.push_str(&csv_num(c.values()[i]));
        }
        out.push('\n');
    }
    out
}

pub fn hyperbolic_gain_csv(sol: &HyperbolicKernelSolution<f64>) -> String {
    columns_csv("xi,k1", &[&sol.gain_k1])
}

/// Neumann rows repeat the scalar `k11` so the file stays rectangular.
pub fn parabolic_gain_csv(sol: &ParabolicKernelSolution<f64>) -> String {
    match &sol.gain {
        ParabolicGain::Dirichlet { k1 } => columns_csv("xi,k1", &[k1]),
        ParabolicGain::Neumann { k11, k1n } => {
            let grid = k1n.grid();
            let mut out = String::from("xi,k1n,k11\n");
            for i in 0..grid.n() {
                out.push_str(&format!(
                    "{},{},{}\n",
                    csv_num(grid.node(i)),
                    csv_num(k1n.values()[i]),
                    csv_num(*k11),
                ));
            }
            out
        }
    }
}

pub fn coupled_gain_csv(sol: &CoupledKernelSolution<f64>) -> String {
    columns_csv("xi,k_u1,k_v1", &[&sol.gain_ku1, &sol.gain_kv1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_numbers_carry_17_significant_digits() {
        let s = csv_num(std::f64::consts::PI);
        assert_eq!(s, "3.1415926535897931e0");
        assert_eq!(csv_num(-1.0 / 3.0), "-3.3333333333333331e-1");
    }

    #[test]
    fn json_numbers_round_trip_and_null_out_non_finite() {
        let x = 0.1234567890123456789;
        let parsed: f64 = json_num(x).parse().unwrap();
        assert_eq!(parsed, x);
        assert_eq!(json_num(f64::INFINITY), "null");
        assert_eq!(json_num(f64::NAN), "null");
    }
}
