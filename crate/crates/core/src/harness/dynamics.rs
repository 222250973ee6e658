use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{regress, EstimateReport};
use crate::error::{Error, Result};
use crate::grid::{Field, RadialGrid, Trajectory};
use crate::oracle::{
    barenblatt_eval, blowup_eval, friendly_giant_solve, BarenblattParams, BlowupParams,
};
use crate::solver::{evolve, BoundaryCondition, StepControl};

/// Relative weighted L1 distance `sum m_i |u_i - v_i| / sum m_i |v_i|`.
pub fn relative_l1(u: &Field, v: &Field) -> Result<f64> {
    let d = u.l1_distance(v)?;
    let norm: f64 = v.values().iter().zip(v.grid().masses()).map(|(x, m)| x.abs() * m).sum();
    Ok(if norm > 0.0 { d / norm } else { d })
}

/// Ordering and L1 contraction for a pair of runs with identical snapshot times.
///
/// `ordering_margin` is `min (v - u) / max(1, sup |v|)` over cells and snapshots and is
/// asserted (against `-order_tol`) only when the initial data are ordered.
/// `expansion` is the largest relative growth of the L1 distance between
/// consecutive snapshots, asserted against `contraction_tol`.
pub fn check_contraction_and_comparison(
    u: &Trajectory,
    v: &Trajectory,
    order_tol: f64,
    contraction_tol: f64,
) -> Result<EstimateReport> {
    let (tu, tv) = (u.times(), v.times());
    if tu.len() != tv.len() || tu.iter().zip(&tv).any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0)) {
        return Err(Error::Mismatch("runs have different snapshot schedules".into()));
    }
    let mut report = EstimateReport::new("contraction_comparison", contraction_tol)
        .with_grid(u.grid())
        .param("order_tol", order_tol);
    let ordered = u.first().values().iter().zip(v.first().values()).all(|(a, b)| a <= b);
    let mut margin = f64::INFINITY;
    let mut distances = Vec::with_capacity(tu.len());
    for (a, b) in u.snapshots().iter().zip(v.snapshots()) {
        let scale = b.sup_norm().max(1.0);
        for (x, y) in a.values().iter().zip(b.values()) {
            margin = margin.min((y - x) / scale);
        }
        distances.push(a.l1_distance(b)?);
    }
    let mut expansion = f64::NEG_INFINITY;
    for w in distances.windows(2) {
        let e = if w[0] > 0.0 { (w[1] - w[0]) / w[0] } else { w[1] };
        expansion = expansion.max(e);
    }
    if distances.len() < 2 {
        expansion = 0.0;
    }
    report.lhs = distances;
    report.measure("ordering_margin", margin);
    report.measure("expansion", expansion);
    report.measure("initially_ordered", if ordered { 1.0 } else { 0.0 });
    let order_ok = !ordered || margin >= -order_tol;
    report.pass = order_ok && expansion <= contraction_tol;
    Ok(report)
}

/// One resolution of a refinement study: a grid and a fixed time step.
#[derive(Debug, Clone)]
pub struct Resolution {
    pub grid: Arc<RadialGrid>,
    pub dt: f64,
}

/// Time-scaling covariance: `lambda_s u(t)` against the run from `lambda_s u_0` over
/// `t / lambda_s^{m-1}`, both with the same fixed step.
///
/// Passes iff the finest discrepancy is at most `tol` and each refinement reduces the
/// discrepancy by at least `min_ratio` (skipped when the discrepancy vanishes).
pub fn check_scaling(
    levels: &[Resolution],
    initial: impl Fn(f64) -> f64,
    horizon: f64,
    factor: f64,
    tol: f64,
    min_ratio: f64,
) -> Result<EstimateReport> {
    if levels.is_empty() {
        return Err(Error::InsufficientData("no resolutions".into()));
    }
    let m = levels[0].grid.params().m();
    if !(factor >= 1.0 && factor < 2f64.powf(1.0 / (m - 1.0))) {
        return Err(Error::InvalidArgument(format!("scaling factor {factor} outside [1, 2^(1/(m-1)))")));
    }
    let mut report = EstimateReport::new("scaling", tol).with_grid(&levels[0].grid).param("factor", factor).param("horizon", horizon);
    for lvl in levels {
        let u0 = Field::from_profile(lvl.grid.clone(), 0.0, &initial)?;
        let control = StepControl::fixed(lvl.dt);
        let u = evolve(&u0, horizon, &BoundaryCondition::ZeroFlux, &control, &[])?;
        let scaled0 = u0.scaled(factor)?;
        let short = horizon / factor.powf(m - 1.0);
        let v = evolve(&scaled0, short, &BoundaryCondition::ZeroFlux, &control, &[])?;
        let target = u.last().scaled(factor)?.with_time(short)?;
        report.lhs.push(relative_l1(v.last(), &target)?);
        report.rhs.push(lvl.dt);
    }
    let errs = report.lhs.clone();
    let mut ok = *errs.last().unwrap() <= tol;
    for (k, w) in errs.windows(2).enumerate() {
        let r = if w[1] > 0.0 { w[0] / w[1] } else { f64::INFINITY };
        report.measure(&format!("reduction_{k}"), r);
        if w[0] > 1e-13 && r < min_ratio {
            ok = false;
        }
    }
    report.pass = ok;
    Ok(report)
}

/// Blow-up times from exact data `kappa r^{(2-gamma)/(m-1)}` with the matching boundary
/// pressure, for every amplitude in the sweep.
///
/// Runs whose oracle time lies beyond `horizon` must finish without blowing up; the
/// others must be detected within `time_tol` (relative), and the log-log slope of the
/// detected times against `kappa` must equal `-(m-1)` within `slope_tol` (relative).
pub fn check_existence_time(
    grid: &Arc<RadialGrid>,
    kappas: &[f64],
    horizon: f64,
    control: &StepControl,
    time_tol: f64,
    slope_tol: f64,
) -> Result<EstimateReport> {
    let p = *grid.params();
    let m = p.m();
    let mut report = EstimateReport::new("existence_time", slope_tol)
        .with_grid(grid)
        .param("horizon", horizon)
        .param("time_tol", time_tol);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut ok = true;
    for &kappa in kappas {
        let bp = BlowupParams::from_amplitude(&p, kappa)?;
        let u0 = Field::from_profile(grid.clone(), 0.0, |r| blowup_eval(&p, &bp, r, 0.0).unwrap_or(0.0))?;
        let bc = BoundaryCondition::PressureDirichlet(bp.boundary_pressure(&p, grid.r_max()));
        let control = StepControl { report_blowup: true, ..*control };
        let traj = evolve(&u0, horizon, &bc, &control, &[])?;
        let detected = traj.blowup_time();
        report.lhs.push(detected.unwrap_or(f64::INFINITY));
        report.rhs.push(bp.t_blowup);
        match detected {
            Some(t) => {
                if bp.t_blowup >= horizon || (t - bp.t_blowup).abs() > time_tol * bp.t_blowup {
                    ok = false;
                }
                xs.push(kappa.ln());
                ys.push(t.ln());
            }
            None => {
                if bp.t_blowup < horizon {
                    ok = false;
                }
                report.note(format!("kappa = {kappa:e}: no blow-up before {horizon}"));
            }
        }
    }
    if xs.len() >= 2 {
        let reg = regress(&xs, &ys)?;
        let err = (reg.slope + (m - 1.0)).abs() / (m - 1.0);
        report.measure("slope_error", err);
        ok &= err <= slope_tol;
        report.regression = Some(reg);
    } else {
        report.note("fewer than two detected blow-ups: sweep too narrow");
        ok = false;
    }
    report.pass = ok;
    Ok(report)
}

/// Barenblatt convergence study: evolve the exact profile from `t0` to `t1` under zero
/// flux at each resolution and compare with the oracle in relative L1.
///
/// Passes iff every successive error ratio is at least `min_ratio`.
pub fn check_barenblatt_convergence(
    levels: &[Resolution],
    c1: f64,
    t0: f64,
    t1: f64,
    min_ratio: f64,
) -> Result<EstimateReport> {
    if levels.len() < 2 {
        return Err(Error::InsufficientData("convergence needs two resolutions".into()));
    }
    let p = *levels[0].grid.params();
    let bp = BarenblattParams::new(&p, c1)?;
    let mut report = EstimateReport::new("barenblatt_convergence", min_ratio)
        .with_grid(&levels[0].grid)
        .param("c1", c1)
        .param("t0", t0)
        .param("t1", t1);
    for lvl in levels {
        let u0 = Field::from_profile(lvl.grid.clone(), t0, |r| barenblatt_eval(&p, &bp, r, t0).unwrap_or(0.0))?;
        let traj = evolve(&u0, t1, &BoundaryCondition::ZeroFlux, &StepControl::fixed(lvl.dt), &[])?;
        let exact = Field::from_profile(lvl.grid.clone(), t1, |r| barenblatt_eval(&p, &bp, r, t1).unwrap_or(0.0))?;
        report.lhs.push(relative_l1(traj.last(), &exact)?);
        report.rhs.push(lvl.grid.len() as f64);
    }
    let mut ok = true;
    let mut worst = f64::INFINITY;
    for w in report.lhs.windows(2) {
        let r = w[0] / w[1];
        worst = worst.min(r);
        ok &= r >= min_ratio;
    }
    report.measure("min_error_ratio", worst);
    report.measure("observed_order", worst.log2());
    report.pass = ok;
    Ok(report)
}

/// Relative mass drift over a zero-flux run of `steps` fixed steps of size `dt`.
pub fn check_mass_conservation(initial: &Field, steps: usize, dt: f64, newton_tol: f64, tol: f64) -> Result<EstimateReport> {
    let control = StepControl {
        newton_tol,
        ..StepControl::fixed(dt)
    };
    let t_end = initial.time() + steps as f64 * dt;
    let schedule: Vec<f64> = (1..10).map(|k| initial.time() + (t_end - initial.time()) * k as f64 / 10.0).collect();
    let traj = evolve(initial, t_end, &BoundaryCondition::ZeroFlux, &control, &schedule)?;
    let m0 = initial.mass();
    let mut report = EstimateReport::new("mass_conservation", tol)
        .with_grid(initial.grid())
        .param("steps", steps as f64)
        .param("dt", dt)
        .param("newton_tol", newton_tol);
    let mut drift = 0.0f64;
    for s in traj.snapshots() {
        let d = (s.mass() - m0).abs() / m0.abs().max(f64::MIN_POSITIVE);
        drift = drift.max(d);
        report.lhs.push(s.mass());
    }
    report.measure("relative_drift", drift);
    report.pass = drift <= tol;
    Ok(report)
}

/// Tracking of the exact blow-up solution with exact boundary pressure.
///
/// Regresses `ln ||u(t)||_inf` on `ln(T - t)` over `gap_window`, expecting slope
/// `-1/(m-1)` within `slope_tol` (relative), and the detected blow-up time within
/// `time_tol` of `T`.
pub fn check_blowup_tracking(
    grid: &Arc<RadialGrid>,
    t_blowup: f64,
    control: &StepControl,
    gap_window: (f64, f64),
    samples: usize,
    slope_tol: f64,
    time_tol: f64,
) -> Result<EstimateReport> {
    let p = *grid.params();
    let bp = BlowupParams::new(&p, t_blowup)?;
    let u0 = Field::from_profile(grid.clone(), 0.0, |r| blowup_eval(&p, &bp, r, 0.0).unwrap_or(0.0))?;
    let bc = BoundaryCondition::PressureDirichlet(bp.boundary_pressure(&p, grid.r_max()));
    let (lo, hi) = gap_window;
    if !(0.0 < lo && lo < hi && hi < t_blowup) || samples < 3 {
        return Err(Error::InvalidArgument(format!("invalid gap window {gap_window:?}")));
    }
    let schedule: Vec<f64> = (0..samples)
        .map(|k| t_blowup - hi * (lo / hi).powf(k as f64 / (samples - 1) as f64))
        .collect();
    let control = StepControl { report_blowup: true, ..*control };
    let traj = evolve(&u0, 2.0 * t_blowup, &bc, &control, &schedule)?;
    let mut report = EstimateReport::new("blowup_tracking", slope_tol)
        .with_grid(grid)
        .param("t_blowup", t_blowup)
        .param("kappa", bp.kappa);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for &t in &schedule {
        let Some(i) = traj.index_at(t) else {
            return Err(Error::InsufficientData(format!("run stopped before t = {t}")));
        };
        let s = &traj.snapshots()[i];
        let exact = Field::from_profile(grid.clone(), t, |r| blowup_eval(&p, &bp, r, t).unwrap_or(0.0))?;
        xs.push((t_blowup - t).ln());
        ys.push(s.sup_norm().ln());
        report.lhs.push(s.sup_norm());
        report.rhs.push(exact.sup_norm());
    }
    let reg = regress(&xs, &ys)?;
    let target = -1.0 / (p.m() - 1.0);
    let slope_err = (reg.slope - target).abs() / target.abs();
    let detected = traj.blowup_time();
    let time_err = detected.map_or(f64::INFINITY, |t| (t - t_blowup).abs() / t_blowup);
    report.measure("slope_error", slope_err);
    report.measure("detected_time", detected.unwrap_or(f64::INFINITY));
    report.measure("time_error", time_err);
    report.regression = Some(reg);
    report.pass = slope_err <= slope_tol && time_err <= time_tol;
    Ok(report)
}

/// Separable solution check: the fixed point from two starts, its residual, and the
/// evolution of `W t0^{-1/(m-1)}` to `2 t0` under homogeneous Dirichlet data at each
/// step size in `dts`, compared with `W (2 t0)^{-1/(m-1)}` in relative L1.
pub fn check_friendly_giant(
    grid: &Arc<RadialGrid>,
    alt_start: &[f64],
    t0: f64,
    dts: &[f64],
    agreement_tol: f64,
    residual_tol: f64,
    min_ratio: f64,
) -> Result<EstimateReport> {
    use crate::oracle::friendly_giant_solve_from;
    let a = friendly_giant_solve(grid, 1e-13, 10_000)?;
    let b = friendly_giant_solve_from(grid, alt_start, 1e-13, 10_000)?;
    let distance = a.values.iter().zip(&b.values).fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()));
    let mut report = EstimateReport::new("friendly_giant", residual_tol).with_grid(grid).param("t0", t0);
    report.measure("start_distance", distance);
    report.measure("residual", a.residual.max(b.residual));
    report.measure("iterations", a.iterations as f64);
    let start = a.separable(grid.clone(), t0)?;
    let exact = a.separable(grid.clone(), 2.0 * t0)?;
    for &dt in dts {
        let traj = evolve(&start, 2.0 * t0, &BoundaryCondition::HomogeneousDirichlet, &StepControl::fixed(dt), &[])?;
        report.lhs.push(relative_l1(traj.last(), &exact)?);
        report.rhs.push(dt);
    }
    let mut ok = distance <= agreement_tol && a.residual <= residual_tol && b.residual <= residual_tol;
    let mut worst = f64::INFINITY;
    for w in report.lhs.windows(2) {
        let r = w[0] / w[1];
        worst = worst.min(r);
        ok &= r >= min_ratio;
    }
    report.measure("min_error_ratio", worst);
    report.pass = ok;
    Ok(report)
}

/// Regression-ready summary of an oracle comparison at several resolutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub cells: usize,
    pub dt: f64,
    pub error: f64,
    /// `log2` of the error ratio to the previous row.
    pub order: Option<f64>,
}

/// Convergence table for the Barenblatt and blow-up oracle comparisons.
pub fn convergence_table(errors: &[(usize, f64, f64)]) -> Vec<ConvergenceRow> {
    errors
        .iter()
        .enumerate()
        .map(|(k, &(cells, dt, error))| ConvergenceRow {
            cells,
            dt,
            error,
            order: (k > 0).then(|| (errors[k - 1].2 / error).log2()),
        })
        .collect()
}

/// Relative L1 error against the blow-up solution at `t_end < T` under exact boundary data.
pub fn blowup_error(grid: &Arc<RadialGrid>, t_blowup: f64, t_end: f64, dt: f64) -> Result<f64> {
    let p = *grid.params();
    let bp = BlowupParams::new(&p, t_blowup)?;
    if !(t_end < t_blowup) {
        return Err(Error::InvalidArgument(format!("t_end = {t_end} must precede T = {t_blowup}")));
    }
    let u0 = Field::from_profile(grid.clone(), 0.0, |r| blowup_eval(&p, &bp, r, 0.0).unwrap_or(0.0))?;
    let bc = BoundaryCondition::PressureDirichlet(bp.boundary_pressure(&p, grid.r_max()));
    let traj = evolve(&u0, t_end, &bc, &StepControl::fixed(dt), &[])?;
    let exact = Field::from_profile(grid.clone(), t_end, |r| blowup_eval(&p, &bp, r, t_end).unwrap_or(0.0))?;
    relative_l1(traj.last(), &exact)
}

/// Relative L1 error against the Barenblatt solution at `t1` from the exact profile at `t0`.
pub fn barenblatt_error(grid: &Arc<RadialGrid>, c1: f64, t0: f64, t1: f64, dt: f64) -> Result<f64> {
    let p = *grid.params();
    let bp = BarenblattParams::new(&p, c1)?;
    let u0 = Field::from_profile(grid.clone(), t0, |r| barenblatt_eval(&p, &bp, r, t0).unwrap_or(0.0))?;
    let traj = evolve(&u0, t1, &BoundaryCondition::ZeroFlux, &StepControl::fixed(dt), &[])?;
    let exact = Field::from_profile(grid.clone(), t1, |r| barenblatt_eval(&p, &bp, r, t1).unwrap_or(0.0))?;
    relative_l1(traj.last(), &exact)
}
