use super::{ratio, EstimateReport};
use crate::error::{Error, Result};
use crate::grid::Trajectory;
use crate::potential::{delta_recovery, dual_field, flb_check, initial_trace};

/// Potential inequality at every `(t0, t1, r0)` triple. Passes iff every triple passes.
/// The largest LHS/RHS ratio over probes with positive RHS is recorded but not asserted.
pub fn check_flb(traj: &Trajectory, triples: &[(f64, f64, f64)]) -> Result<EstimateReport> {
    if triples.is_empty() {
        return Err(Error::InsufficientData("no probe triples".into()));
    }
    let mut report = EstimateReport::new("flb", 1e-8).with_grid(traj.grid());
    let mut ok = true;
    let mut worst_margin = f64::INFINITY;
    let mut worst_ratio = 0.0f64;
    for &(t0, t1, r0) in triples {
        let r = flb_check(traj, t0, t1, r0)?;
        ok &= r.pass;
        worst_margin = worst_margin.min(r.margin);
        if r.rhs > 0.0 {
            worst_ratio = worst_ratio.max(ratio(r.lhs, r.rhs));
        }
        report.lhs.push(r.lhs);
        report.rhs.push(r.rhs);
    }
    report.measure("triples", triples.len() as f64);
    report.measure("min_margin", worst_margin);
    report.measure("max_ratio", worst_ratio);
    report.fitted_constant = Some(worst_ratio);
    report.pass = ok;
    Ok(report)
}

/// `|int Delta G_n f + f(0)|` over the sequence `ns`; passes iff strictly decreasing
/// with the last error at most `tol`.
pub fn check_delta_recovery(
    dim: usize,
    f: impl Fn(f64) -> f64,
    support: f64,
    ns: &[f64],
    tol: f64,
) -> Result<EstimateReport> {
    if ns.len() < 2 {
        return Err(Error::InsufficientData("delta recovery needs two values of n".into()));
    }
    let f0 = f(0.0);
    let mut report = EstimateReport::new("delta_recovery", tol).param("dim", dim as f64).param("support", support);
    for &n in ns {
        let v = delta_recovery(dim, &f, support, n)?;
        report.lhs.push((v + f0).abs());
        report.rhs.push(n);
    }
    let decreasing = report.lhs.windows(2).all(|w| w[1] < w[0]);
    let last = *report.lhs.last().unwrap();
    report.measure("final_error", last);
    report.pass = decreasing && last <= tol;
    Ok(report)
}

/// Cellwise monotonicity of the dual potential between consecutive snapshots, together with
/// its Poisson and time-derivative residuals.
///
/// Passes iff `W(t_{k+1}) - W(t_k) <= tol * max |W|` everywhere.
pub fn check_dual_monotonicity(traj: &Trajectory, tol: f64) -> Result<EstimateReport> {
    let n = traj.snapshots().len();
    if n < 2 {
        return Err(Error::InsufficientData("dual monotonicity needs two snapshots".into()));
    }
    let mut report = EstimateReport::new("dual_monotonicity", tol).with_grid(traj.grid());
    let mut fields = Vec::with_capacity(n);
    for k in 0..n {
        fields.push(dual_field(traj, k, None)?);
    }
    let scale = fields
        .iter()
        .flat_map(|d| d.values.iter())
        .fold(0.0f64, |a, v| a.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let mut worst = f64::NEG_INFINITY;
    for w in fields.windows(2) {
        let inc = w[1].values.iter().zip(&w[0].values).fold(f64::NEG_INFINITY, |a, (x, y)| a.max(x - y));
        worst = worst.max(inc / scale);
        report.lhs.push(inc);
    }
    let poisson = fields.iter().fold(0.0f64, |a, d| a.max(d.poisson_residual));
    let time = fields.iter().filter_map(|d| d.time_residual).fold(0.0f64, f64::max);
    report.measure("max_relative_increase", worst);
    report.measure("poisson_residual", poisson);
    report.measure("time_residual", time);
    report.pass = worst <= tol;
    Ok(report)
}

/// Extrapolated initial trace `lim int phi u(t) rho` against an expected value.
pub fn check_initial_trace(
    traj: &Trajectory,
    phi: impl Fn(f64) -> f64,
    phi_support: f64,
    times: &[f64],
    expected: f64,
    tol: f64,
) -> Result<EstimateReport> {
    let t = initial_trace(traj, phi, phi_support, times)?;
    let mut report = EstimateReport::new("initial_trace", tol)
        .with_grid(traj.grid())
        .param("phi_support", phi_support)
        .param("expected", expected);
    let err = (t.limit - expected).abs() / expected.abs().max(f64::MIN_POSITIVE);
    report.lhs = t.pairings;
    report.rhs = t.times;
    report.fitted_constant = Some(t.limit);
    report.measure("limit", t.limit);
    report.measure("rate_coefficient", t.rate_coefficient);
    report.measure("exponent", t.exponent);
    report.measure("relative_error", err);
    report.pass = err <= tol;
    Ok(report)
}
