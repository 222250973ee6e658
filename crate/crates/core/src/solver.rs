//! Implicit-Euler finite-volume integrator for `rho u_t = Delta(u^m)` on a ball.
//!
//! Cell `i` balances `m_i (u_i^{n+1} - u_i^n) = dt (F_{i+1/2} - F_{i-1/2})` with
//! `F_{i+1/2} = T_{i+1/2} (p_{i+1} - p_i)` and `p = |u|^{m-1} u`, everything at the new
//! time level. The face at the origin carries no flux; the outer face follows the
//! boundary condition. Each step is a Newton solve with a tridiagonal Jacobian.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, RadialGrid, Trajectory};

/// Floor on `dp/du = m |u|^{m-1}` in the Jacobian.
const SLOPE_FLOOR: f64 = 1e-14;

/// Prescribed boundary pressure `g(t) = u^m(R_max, t)`.
#[derive(Clone)]
pub struct BoundaryPressure(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl BoundaryPressure {
    pub fn new(g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(g))
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.0)(t)
    }
}

impl fmt::Debug for BoundaryPressure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("BoundaryPressure(..)")
    }
}

#[derive(Debug, Clone)]
pub enum BoundaryCondition {
    ZeroFlux,
    /// `u^m = 0` at `R_max`.
    HomogeneousDirichlet,
    /// `u^m = g(t)` at `R_max`.
    PressureDirichlet(BoundaryPressure),
}

impl BoundaryCondition {
    fn pressure(&self, t: f64) -> Option<f64> {
        match self {
            Self::ZeroFlux => None,
            Self::HomogeneousDirichlet => Some(0.0),
            Self::PressureDirichlet(g) => Some(g.eval(t)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepControl {
    pub dt0: f64,
    pub dt_min: f64,
    /// Upper bound for the adaptive step; `None` leaves growth unbounded.
    pub dt_max: Option<f64>,
    pub shrink: f64,
    pub grow: f64,
    /// Tolerance on the scaled residual.
    pub newton_tol: f64,
    pub newton_max: usize,
    pub nonnegative: bool,
    /// Report a collapse of the time step as a blow-up time instead of failing.
    pub report_blowup: bool,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            dt0: 1e-3,
            dt_min: 1e-10,
            dt_max: None,
            shrink: 0.5,
            grow: 1.2,
            newton_tol: 1e-11,
            newton_max: 30,
            nonnegative: true,
            report_blowup: true,
        }
    }
}

impl StepControl {
    /// Constant step `dt` (no growth).
    pub fn fixed(dt: f64) -> Self {
        Self {
            dt0: dt,
            dt_min: dt * 1e-6,
            dt_max: Some(dt),
            grow: 1.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt0 && self.dt0.is_finite()) {
            return bad(format!("need 0 < dt_min <= dt0, got dt_min = {}, dt0 = {}", self.dt_min, self.dt0));
        }
        if let Some(max) = self.dt_max {
            if !(max >= self.dt_min) {
                return bad(format!("dt_max = {max} below dt_min"));
            }
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad(format!("shrink factor must lie in (0, 1), got {}", self.shrink));
        }
        if !(self.grow >= 1.0 && self.grow <= 10.0) {
            return bad(format!("grow factor must lie in [1, 10], got {}", self.grow));
        }
        if !(self.newton_tol > 0.0 && self.newton_tol < 1.0) {
            return bad(format!("newton_tol must lie in (0, 1), got {}", self.newton_tol));
        }
        if self.newton_max == 0 {
            return bad("newton_max must be positive".into());
        }
        Ok(())
    }
}

/// Result of one accepted implicit step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub field: Field,
    /// Mass entering through the outer face during the step.
    pub boundary_inflow: f64,
    /// Boundary pressure used for the dual potential: the prescribed value for
    /// Dirichlet conditions, the outermost cell pressure under zero flux.
    pub boundary_pressure: f64,
    pub newton_iterations: usize,
}

/// Odd power `|u|^{m-1} u`.
#[inline]
pub fn odd_power(u: f64, m: f64) -> f64 {
    u.abs().powf(m - 1.0) * u
}

struct Operator<'a> {
    grid: &'a RadialGrid,
    m: f64,
    faces: Vec<f64>,
    boundary: f64,
}

impl<'a> Operator<'a> {
    fn new(grid: &'a RadialGrid) -> Self {
        let faces = (0..grid.len() - 1).map(|i| grid.face_coefficient(i)).collect();
        Self {
            grid,
            m: grid.params().m(),
            faces,
            boundary: grid.boundary_coefficient(),
        }
    }

    /// Residual, its scale and the outer-face flux.
    fn residual(&self, u: &[f64], old: &[f64], dt: f64, g: Option<f64>, out: &mut [f64]) -> (f64, f64, f64) {
        let n = u.len();
        let masses = self.grid.masses();
        let p: Vec<f64> = u.iter().map(|&v| odd_power(v, self.m)).collect();
        let mut scale: f64 = 0.0;
        for i in 0..n {
            out[i] = masses[i] * (u[i] - old[i]);
            scale = scale.max(masses[i] * old[i].abs()).max(masses[i] * u[i].abs());
        }
        for (i, &t) in self.faces.iter().enumerate() {
            let f = dt * t * (p[i + 1] - p[i]);
            out[i] -= f;
            out[i + 1] += f;
            scale = scale.max(f.abs());
        }
        let outer = match g {
            Some(g) => dt * self.boundary * (g - p[n - 1]),
            None => 0.0,
        };
        out[n - 1] -= outer;
        scale = scale.max(outer.abs());
        let norm = out.iter().fold(0.0f64, |a, r| a.max(r.abs()));
        (norm, scale, outer)
    }

    fn jacobian(&self, u: &[f64], dt: f64, dirichlet: bool) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = u.len();
        let masses = self.grid.masses();
        let slope: Vec<f64> = u
            .iter()
            .map(|&v| (self.m * v.abs().powf(self.m - 1.0)).max(SLOPE_FLOOR))
            .collect();
        let mut lower = vec![0.0; n];
        let mut diag = masses.to_vec();
        let mut upper = vec![0.0; n];
        for (i, &t) in self.faces.iter().enumerate() {
            let c = dt * t;
            diag[i] += c * slope[i];
            upper[i] = -c * slope[i + 1];
            diag[i + 1] += c * slope[i + 1];
            lower[i + 1] = -c * slope[i];
        }
        if dirichlet {
            diag[n - 1] += dt * self.boundary * slope[n - 1];
        }
        (lower, diag, upper)
    }
}

/// Thomas algorithm; `lower[0]` and `upper[n-1]` are ignored. Solves in place.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = rhs.len();
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 || !beta.is_finite() {
        return Err(Error::NewtonDiverged { iterations: 0, residual: f64::NAN });
    }
    rhs[0] /= beta;
    for i in 1..n {
        c[i - 1] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * c[i - 1];
        if beta == 0.0 || !beta.is_finite() {
            return Err(Error::NewtonDiverged { iterations: 0, residual: f64::NAN });
        }
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Ok(())
}

/// One implicit-Euler step of length `dt`.
pub fn step(field: &Field, dt: f64, bc: &BoundaryCondition, control: &StepControl) -> Result<StepOutcome> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let grid = field.grid();
    let t_new = field.time() + dt;
    let g = bc.pressure(t_new);
    if let Some(g) = g {
        if !g.is_finite() {
            return Err(Error::NonFiniteState { time: t_new });
        }
    }
    let op = Operator::new(grid);
    let old = field.values();
    let n = old.len();
    let mut u = old.to_vec();
    let mut res = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial_res = vec![0.0; n];
    let (mut norm, mut scale, mut outer) = op.residual(&u, old, dt, g, &mut res);
    let mut iterations = 0;
    let mut polished = false;
    loop {
        if !norm.is_finite() {
            return Err(Error::NonFiniteState { time: t_new });
        }
        let converged = norm <= control.newton_tol * scale;
        if converged && (polished || norm == 0.0) {
            break;
        }
        if iterations >= control.newton_max {
            if converged {
                break;
            }
            return Err(Error::NewtonDiverged {
                iterations,
                residual: norm / scale.max(f64::MIN_POSITIVE),
            });
        }
        iterations += 1;
        let (lower, diag, upper) = op.jacobian(&u, dt, g.is_some());
        let mut delta: Vec<f64> = res.iter().map(|r| -r).collect();
        solve_tridiagonal(&lower, &diag, &upper, &mut delta)?;
        // damped update
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            for i in 0..n {
                let v = u[i] + alpha * delta[i];
                trial[i] = if control.nonnegative { v.max(0.0) } else { v };
            }
            let (tn, ts, to) = op.residual(&trial, old, dt, g, &mut trial_res);
            if tn.is_finite() && (tn < (1.0 - 1e-4 * alpha) * norm || tn <= control.newton_tol * ts) {
                std::mem::swap(&mut u, &mut trial);
                std::mem::swap(&mut res, &mut trial_res);
                norm = tn;
                scale = ts;
                outer = to;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if converged {
            // one polishing iteration past the tolerance
            polished = true;
            if !accepted {
                break;
            }
            continue;
        }
        if !accepted {
            return Err(Error::NewtonDiverged {
                iterations,
                residual: norm / scale.max(f64::MIN_POSITIVE),
            });
        }
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { time: t_new });
    }
    let boundary_pressure = match g {
        Some(g) => g,
        None => odd_power(u[n - 1], op.m),
    };
    Ok(StepOutcome {
        field: field.with_values(u, t_new)?,
        boundary_inflow: outer,
        boundary_pressure,
        newton_iterations: iterations,
    })
}

/// Adaptive integration from `initial` to `t_end`, recording snapshots at every
/// scheduled time (and at `t_end`).
///
/// A failed step shrinks `dt`; a successful one grows it. When `dt` falls below
/// `dt_min` the run stops: with `report_blowup` the trajectory ends at the last
/// good state and carries that time as the detected blow-up time, otherwise
/// [`Error::StepCollapse`] is returned.
pub fn evolve(
    initial: &Field,
    t_end: f64,
    bc: &BoundaryCondition,
    control: &StepControl,
    schedule: &[f64],
) -> Result<Trajectory> {
    control.validate()?;
    let t0 = initial.time();
    if !(t_end > t0) {
        return Err(Error::InvalidArgument(format!("t_end = {t_end} must exceed the start time {t0}")));
    }
    let mut targets: Vec<f64> = Vec::with_capacity(schedule.len() + 1);
    for &s in schedule {
        if !(s > t0 && s <= t_end) {
            return Err(Error::InvalidArgument(format!("snapshot time {s} outside ({t0}, {t_end}]")));
        }
        if let Some(&last) = targets.last() {
            if !(s > last) {
                return Err(Error::InvalidArgument("snapshot times must be strictly increasing".into()));
            }
        }
        targets.push(s);
    }
    if targets.last().map_or(true, |&l| l < t_end) {
        targets.push(t_end);
    }

    let mut snapshots = vec![initial.clone()];
    let mut ledger = Vec::with_capacity(targets.len());
    let mut pressure = vec![0.0];
    let mut current = initial.clone();
    let mut dt_nominal = control.dt0;
    let mut inflow = 0.0;
    let mut pressure_acc = 0.0;

    for &target in &targets {
        loop {
            let t = current.time();
            let remaining = target - t;
            if remaining <= 1e-14 * target.abs().max(1.0) {
                break;
            }
            let clipped = dt_nominal * (1.0 + 1e-9) >= remaining;
            let dt = if clipped { remaining } else { dt_nominal };
            match step(&current, dt, bc, control) {
                Ok(out) => {
                    inflow += out.boundary_inflow;
                    pressure_acc += dt * out.boundary_pressure;
                    current = if clipped { out.field.with_time(target)? } else { out.field };
                    if !clipped {
                        dt_nominal *= control.grow;
                        if let Some(max) = control.dt_max {
                            dt_nominal = dt_nominal.min(max);
                        }
                    }
                }
                Err(Error::NewtonDiverged { .. }) | Err(Error::NonFiniteState { .. }) => {
                    dt_nominal = dt * control.shrink;
                    if dt_nominal < control.dt_min {
                        if !control.report_blowup {
                            return Err(Error::StepCollapse { time: t, dt_min: control.dt_min });
                        }
                        let last_time = snapshots.last().map(Field::time).unwrap_or(t0);
                        if current.time() > last_time {
                            snapshots.push(current.clone());
                            ledger.push(inflow);
                            pressure.push(pressure_acc);
                        }
                        return Trajectory::new(snapshots, ledger, pressure, Some(current.time()));
                    }
                }
                Err(e) => return Err(e),
            }
        }
        snapshots.push(current.clone());
        ledger.push(inflow);
        pressure.push(pressure_acc);
        inflow = 0.0;
    }
    Trajectory::new(snapshots, ledger, pressure, None)
}

/// `sum_i m_i u_i`.
pub fn discrete_mass(field: &Field) -> f64 {
    field.mass()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grading;
    use crate::params::Params;
    use crate::weights::WeightModel;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn grid(gamma: f64, r_max: f64, k: usize) -> Arc<RadialGrid> {
        let p = Params::new(3, 2.0, gamma).unwrap();
        Arc::new(RadialGrid::new(p, WeightModel::pure_power(gamma).unwrap(), r_max, k, Grading::Uniform).unwrap())
    }

    fn bump(g: &Arc<RadialGrid>, center: f64, width: f64, height: f64) -> Field {
        Field::from_profile(g.clone(), 0.0, |r| height * (1.0 - ((r - center) / width).powi(2)).max(0.0)).unwrap()
    }

    #[test]
    fn thomas_solves() {
        let lower = [0.0, -1.0, -1.0, -1.0];
        let diag = [2.0, 2.0, 2.0, 2.0];
        let upper = [-1.0, -1.0, -1.0, 0.0];
        let mut rhs = [1.0, 0.0, 0.0, 1.0];
        solve_tridiagonal(&lower, &diag, &upper, &mut rhs).unwrap();
        for v in rhs {
            assert_relative_eq!(v, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn constant_state_is_steady() {
        let g = grid(0.0, 1.0, 32);
        let f = Field::constant(g, 0.7, 0.0).unwrap();
        let out = step(&f, 0.1, &BoundaryCondition::ZeroFlux, &StepControl::default()).unwrap();
        for v in out.field.values() {
            assert_relative_eq!(*v, 0.7, epsilon = 1e-13);
        }
        assert_eq!(out.field.time(), 0.1);
    }

    #[test]
    fn zero_field_stays_zero() {
        let g = grid(1.0, 1.0, 16);
        let f = Field::zeros(g, 0.0).unwrap();
        let traj = evolve(&f, 1.0, &BoundaryCondition::ZeroFlux, &StepControl::default(), &[0.5]).unwrap();
        assert_eq!(traj.snapshots().len(), 3);
        assert!(traj.snapshots().iter().all(|s| s.values().iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn schedule_is_hit_exactly() {
        let g = grid(0.0, 2.0, 32);
        let f = bump(&g, 0.0, 1.0, 1.0);
        let control = StepControl { dt0: 0.013, ..StepControl::default() };
        let traj = evolve(&f, 0.5, &BoundaryCondition::ZeroFlux, &control, &[0.1, 0.25]).unwrap();
        assert_eq!(traj.times(), vec![0.0, 0.1, 0.25, 0.5]);
        assert!(evolve(&f, 0.5, &BoundaryCondition::ZeroFlux, &control, &[0.6]).is_err());
        assert!(evolve(&f, 0.5, &BoundaryCondition::ZeroFlux, &control, &[0.3, 0.2]).is_err());
        assert!(evolve(&f, 0.0, &BoundaryCondition::ZeroFlux, &control, &[]).is_err());
    }

    #[test]
    fn zero_flux_conserves_mass() {
        for gamma in [0.0, 1.0, 1.8] {
            let g = grid(gamma, 2.0, 64);
            let f = bump(&g, 0.5, 0.4, 2.0);
            let traj = evolve(&f, 1.0, &BoundaryCondition::ZeroFlux, &StepControl::fixed(0.01), &[0.25, 0.5, 0.75])
                .unwrap();
            let m0 = f.mass();
            for s in traj.snapshots() {
                assert!((s.mass() - m0).abs() <= 1e-10 * m0, "gamma {gamma}: drift {}", s.mass() - m0);
            }
        }
    }

    #[test]
    fn dirichlet_ledger_balances_mass() {
        let g = grid(0.0, 1.0, 64);
        let f = bump(&g, 0.5, 0.5, 1.0);
        let bc = BoundaryCondition::PressureDirichlet(BoundaryPressure::new(|t| 0.5 * (1.0 + t)));
        let traj = evolve(&f, 0.2, &bc, &StepControl::default(), &[0.05, 0.1]).unwrap();
        let snaps = traj.snapshots();
        for (k, flux) in traj.boundary_flux().iter().enumerate() {
            let change = snaps[k + 1].mass() - snaps[k].mass();
            assert!((change - flux).abs() <= 1e-9 * snaps[k + 1].mass(), "{change} vs {flux}");
        }
        let hd = evolve(&f, 0.2, &BoundaryCondition::HomogeneousDirichlet, &StepControl::default(), &[]).unwrap();
        assert!(hd.last().mass() < f.mass());
        assert!(hd.boundary_flux()[0] < 0.0);
    }

    #[test]
    fn blowup_data_collapses_step() {
        let g = grid(0.0, 1.0, 32);
        let f = Field::zeros(g, 0.0).unwrap();
        let bc = BoundaryCondition::PressureDirichlet(BoundaryPressure::new(|t| {
            if t < 0.5 {
                (0.5 - t).powi(-2)
            } else {
                f64::INFINITY
            }
        }));
        let traj = evolve(&f, 1.0, &bc, &StepControl::default(), &[]).unwrap();
        let tb = traj.blowup_time().unwrap();
        assert!(tb <= 0.5 && tb > 0.49, "{tb}");
        let strict = StepControl { report_blowup: false, ..StepControl::default() };
        assert!(matches!(evolve(&f, 1.0, &bc, &strict, &[]), Err(Error::StepCollapse { .. })));
    }

    #[test]
    fn signed_data_uses_odd_power() {
        let g = grid(0.0, 2.0, 64);
        let f = Field::from_profile(g.clone(), 0.0, |r| (3.0 * r).sin()).unwrap();
        let control = StepControl { nonnegative: false, ..StepControl::fixed(0.01) };
        let traj = evolve(&f, 0.2, &BoundaryCondition::ZeroFlux, &control, &[]).unwrap();
        assert!((traj.last().mass() - f.mass()).abs() < 1e-10 * f.values().iter().map(|v| v.abs()).sum::<f64>());
        assert!(traj.last().values().iter().any(|v| *v < 0.0));
        assert!(traj.last().sup_norm() < f.sup_norm());
    }

    #[test]
    fn rejects_bad_control() {
        let bad = StepControl { dt_min: 1.0, dt0: 0.1, ..StepControl::default() };
        assert!(bad.validate().is_err());
        let bad = StepControl { shrink: 1.0, ..StepControl::default() };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn comparison_and_contraction(c1 in 0.0f64..1.5, w1 in 0.2f64..1.0, h1 in 0.1f64..2.0, extra in 0.0f64..1.0,
                                      gamma in 0.0f64..1.5) {
            let g = grid(gamma, 2.0, 48);
            let u0 = bump(&g, c1, w1, h1);
            let v0 = u0.with_values(
                u0.values().iter().zip(g.centers()).map(|(u, r)| u + extra * (-(r * r)).exp()).collect(), 0.0).unwrap();
            let control = StepControl::fixed(0.02);
            let u = evolve(&u0, 0.3, &BoundaryCondition::ZeroFlux, &control, &[0.1, 0.2]).unwrap();
            let v = evolve(&v0, 0.3, &BoundaryCondition::ZeroFlux, &control, &[0.1, 0.2]).unwrap();
            let mut last = f64::INFINITY;
            for (a, b) in u.snapshots().iter().zip(v.snapshots()) {
                let scale = b.sup_norm().max(1.0);
                for (x, y) in a.values().iter().zip(b.values()) {
                    prop_assert!(y - x >= -1e-10 * scale);
                }
                let d = a.l1_distance(b).unwrap();
                prop_assert!(d <= last * (1.0 + 1e-8) + 1e-14);
                last = d;
            }
            for s in u.snapshots() {
                prop_assert!(s.values().iter().all(|x| *x >= -1e-12));
            }
        }
    }
}
