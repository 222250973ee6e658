use std::sync::Arc;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ball_l1, ball_lp, ball_sup, ratio, regress, trapezoid, EstimateReport};
use crate::error::{Error, Result};
use crate::grid::{Field, RadialGrid, Trajectory};

fn snapshot_at<'a>(traj: &'a Trajectory, t: f64, what: &str) -> Result<&'a Field> {
    traj.index_at(t)
        .map(|i| &traj.snapshots()[i])
        .ok_or_else(|| Error::InvalidArgument(format!("{what} time {t} is not a snapshot time")))
}

/// Sup-norm decay `||u(t)||_inf <= K t^{-lambda} ||u_0||_1^{theta lambda}`.
///
/// Regresses `ln ||u(t)||_inf` on `ln t` over the snapshots in `window` and fits
/// `K` as the largest `||u(t)||_inf t^lambda M^{-theta lambda}`. Times are measured
/// from the origin of the time axis.
pub fn check_global_smoothing(traj: &Trajectory, window: (f64, f64), tol: f64) -> Result<EstimateReport> {
    let grid = traj.grid();
    let s = grid.params().scaling();
    let mass = traj.first().values().iter().zip(grid.masses()).map(|(u, m)| u.abs() * m).sum::<f64>();
    let mut report = EstimateReport::new("global_smoothing", tol)
        .with_grid(grid)
        .param("window_start", window.0)
        .param("window_end", window.1);
    report.measure("lambda", s.lambda);
    report.measure("mass", mass);
    if mass == 0.0 {
        report.note("zero data: empty regression");
        report.fitted_constant = Some(0.0);
        report.pass = true;
        return Ok(report);
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut k_fit = 0.0f64;
    for snap in traj.snapshots() {
        let t = snap.time();
        let sup = snap.sup_norm();
        if t > 0.0 {
            k_fit = k_fit.max(sup * t.powf(s.lambda) * mass.powf(-s.theta * s.lambda));
        }
        if t >= window.0 * (1.0 - 1e-12) && t <= window.1 * (1.0 + 1e-12) && sup > 0.0 {
            xs.push(t.ln());
            ys.push(sup.ln());
            report.lhs.push(sup);
            report.rhs.push(t.powf(-s.lambda) * mass.powf(s.theta * s.lambda));
        }
    }
    if xs.len() < 3 {
        return Err(Error::InsufficientData(format!("{} snapshots in the regression window", xs.len())));
    }
    let reg = regress(&xs, &ys)?;
    report.fitted_constant = Some(k_fit);
    report.measure("slope_error", (reg.slope + s.lambda).abs() / s.lambda);
    report.pass = (reg.slope + s.lambda).abs() <= tol * s.lambda;
    report.regression = Some(reg);
    Ok(report)
}

/// Cylinders `Q_bar = B_{2R} x (t1, T*)`, `Q_under = B_R x (t2, T*)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingCylinder {
    pub radius: f64,
    pub t1: f64,
    pub t2: f64,
    pub t_star: f64,
}

/// Local smoothing estimate on a sweep of cylinders.
///
/// LHS is `R^{-(2-gamma)/(m-1)} ||u||_{L^inf(Q_under)}`; the reported RHS is the form valid
/// for every `m > 1`,
/// `(R^{-e} S)^{1+eps} (T* - t1)^{eps/(m-1)} + (t2 - t1)^{-1/(m-1)}` with
/// `S = sup_t int_{B_2R} |u| rho`. For `m < 2` the ratios against
/// `(R^{-e} ||u||_{L^1_rho(Q_bar)})^{1/(2-m)} + (t2 - t1)^{-1/(m-1)}` are recorded as
/// `ratio_sub2_<k>`. The fitted constant is the largest ratio; `spread` is max/min.
/// With `spread_tol`, the check passes only if `spread <= 1 + spread_tol`.
pub fn check_local_smoothing(
    traj: &Trajectory,
    cylinders: &[SmoothingCylinder],
    eps: f64,
    spread_tol: Option<f64>,
) -> Result<EstimateReport> {
    let grid = traj.grid();
    let p = grid.params();
    let (m, a, e) = (p.m(), p.growth_exponent(), p.morrey_exponent());
    if cylinders.is_empty() {
        return Err(Error::InsufficientData("no cylinders".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let mut report = EstimateReport::new("local_smoothing", spread_tol.unwrap_or(f64::INFINITY))
        .with_grid(grid)
        .param("eps", eps);
    let mut sub2 = Vec::new();
    for (k, c) in cylinders.iter().enumerate() {
        if 2.0 * c.radius > grid.r_max() * (1.0 + 1e-12) {
            return Err(Error::OutsideGrid { r: 2.0 * c.radius, r_max: grid.r_max() });
        }
        if !(c.t1 < c.t2 && c.t2 < c.t_star) {
            return Err(Error::InvalidArgument(format!("cylinder times must satisfy t1 < t2 < T*, got {c:?}")));
        }
        for t in [c.t1, c.t2, c.t_star] {
            snapshot_at(traj, t, "cylinder")?;
        }
        let inner = traj.window(c.t2, c.t_star);
        let outer = traj.window(c.t1, c.t_star);
        let sup = inner.iter().fold(0.0f64, |acc, s| acc.max(ball_sup(s, c.radius)));
        let masses: Vec<(f64, f64)> = outer.iter().map(|s| (s.time(), ball_l1(s, 2.0 * c.radius))).collect();
        let s_big = masses.iter().fold(0.0f64, |acc, x| acc.max(x.1));
        let gap = (c.t2 - c.t1).powf(-1.0 / (m - 1.0));
        let lhs = c.radius.powf(-a) * sup;
        let rhs = (c.radius.powf(-e) * s_big).powf(1.0 + eps) * (c.t_star - c.t1).powf(eps / (m - 1.0)) + gap;
        report.lhs.push(lhs);
        report.rhs.push(rhs);
        if m < 2.0 {
            let cyl = trapezoid(&masses);
            let rhs1 = (c.radius.powf(-e) * cyl).powf(1.0 / (2.0 - m)) + gap;
            let r1 = ratio(lhs, rhs1);
            sub2.push(r1);
            report.measure(&format!("ratio_sub2_{k}"), r1);
        }
    }
    let ratios = report.ratios();
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    report.fitted_constant = Some(max);
    let spread = if min > 0.0 { max / min } else if max == 0.0 { 1.0 } else { f64::INFINITY };
    report.measure("spread", spread);
    if !sub2.is_empty() {
        let max1 = sub2.iter().cloned().fold(0.0, f64::max);
        let min1 = sub2.iter().cloned().fold(f64::INFINITY, f64::min);
        report.measure("fitted_sub2", max1);
        report.measure("spread_sub2", if min1 > 0.0 { max1 / min1 } else { 1.0 });
    }
    let finite = ratios.iter().all(|r| r.is_finite());
    report.pass = finite && spread_tol.map_or(true, |tol| spread <= 1.0 + tol);
    Ok(report)
}

/// Initial measure paired with a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialMeasure {
    /// The first snapshot, taken at time zero.
    FirstSnapshot,
    /// A point mass at the origin.
    Dirac(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcSample {
    pub radius: f64,
    pub t: f64,
    pub eps: f64,
    pub delta: f64,
}

/// Growth bound on the initial trace:
/// `mu(B_R) <= C [t^{-1/(m-1)} R^e + t^{(N-gamma)/(2-gamma)} (mean of u rho on B_eps x (t, t+delta))^q]`
/// with `q = 1 + (N-gamma)(m-1)/(2-gamma)`. The fitted constant is the largest ratio.
pub fn check_ac(traj: &Trajectory, initial: InitialMeasure, sweep: &[AcSample]) -> Result<EstimateReport> {
    let grid = traj.grid();
    let p = grid.params();
    let (m, nw, g) = (p.m(), p.weighted_dim(), 2.0 - p.gamma());
    let q = 1.0 + nw * (m - 1.0) / g;
    if sweep.is_empty() {
        return Err(Error::InsufficientData("empty sweep".into()));
    }
    let mut report = EstimateReport::new("aronson_caffarelli", 0.0).with_grid(grid);
    for s in sweep {
        if !(s.radius >= 1.0 && s.eps > 0.0 && s.eps < 1.0 && s.t > 0.0 && s.delta > 0.0) {
            return Err(Error::InvalidArgument(format!("invalid sweep entry {s:?}")));
        }
        let mu = match initial {
            InitialMeasure::FirstSnapshot => {
                if traj.first().time() != 0.0 {
                    return Err(Error::InvalidArgument("first snapshot is not at time zero".into()));
                }
                ball_l1(traj.first(), s.radius.min(grid.r_max()))
            }
            InitialMeasure::Dirac(mass) => mass,
        };
        snapshot_at(traj, s.t, "sweep")?;
        snapshot_at(traj, s.t + s.delta, "sweep")?;
        let samples: Vec<(f64, f64)> = traj
            .window(s.t, s.t + s.delta)
            .iter()
            .map(|f| (f.time(), ball_l1(f, s.eps)))
            .collect();
        let mean = trapezoid(&samples) / (s.delta * p.ball_volume() * s.eps.powf(p.dim() as f64));
        let rhs = s.t.powf(-1.0 / (m - 1.0)) * s.radius.powf(p.morrey_exponent()) + s.t.powf(nw / g) * mean.powf(q);
        report.lhs.push(mu);
        report.rhs.push(rhs);
    }
    let ratios = report.ratios();
    report.fitted_constant = Some(ratios.iter().cloned().fold(0.0, f64::max));
    report.pass = ratios.iter().all(|r| r.is_finite() && *r >= 0.0);
    Ok(report)
}

/// Monotonicity of `t^{m/(m-1)} u^m` per cell between consecutive snapshots.
///
/// Cells whose `u^m` is below `floor` times the snapshot maximum are ignored. The
/// measured quantity is the smallest relative change; the check passes iff it is at
/// least `-tol`.
pub fn check_ab_monotonicity(traj: &Trajectory, tol: f64, floor: f64) -> Result<EstimateReport> {
    let grid = traj.grid();
    let m = grid.params().m();
    let k = m / (m - 1.0);
    let mut report = EstimateReport::new("aronson_benilan", tol).with_grid(grid).param("floor", floor);
    let mut worst = f64::INFINITY;
    let mut worst_at = (f64::NAN, f64::NAN);
    for pair in traj.snapshots().windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if !(a.time() > 0.0) {
            continue;
        }
        let top = a.values().iter().fold(0.0f64, |x, u| x.max(u.abs().powf(m)));
        if top == 0.0 {
            continue;
        }
        for (i, (ua, ub)) in a.values().iter().zip(b.values()).enumerate() {
            let pa = ua.max(0.0).powf(m);
            if pa <= floor * top {
                continue;
            }
            let before = a.time().powf(k) * pa;
            let after = b.time().powf(k) * ub.max(0.0).powf(m);
            let rel = (after - before) / before;
            if rel < worst {
                worst = rel;
                worst_at = (a.time(), grid.centers()[i]);
            }
        }
    }
    if worst.is_infinite() {
        report.note("no cells above the floor");
        worst = 0.0;
    }
    report.measure("worst_relative_change", worst);
    report.measure("worst_time", worst_at.0);
    report.measure("worst_radius", worst_at.1);
    report.pass = worst >= -tol;
    Ok(report)
}

/// `Q_1 = B_{R_1} x (T_1, T*)` inside `Q_0 = B_{R_0} x (T_0, T*)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyCylinders {
    pub r1: f64,
    pub r0: f64,
    pub t0: f64,
    pub t1: f64,
    pub t_star: f64,
}

/// Local energy estimate for exponent `p`; the fitted constant is LHS/RHS.
pub fn check_energy(traj: &Trajectory, cyl: EnergyCylinders, p: f64) -> Result<EstimateReport> {
    let grid = traj.grid();
    let params = grid.params();
    let m = params.m();
    if !(1.0 <= cyl.r1 && cyl.r1 < cyl.r0 && cyl.r0 <= grid.r_max() * (1.0 + 1e-12)) {
        return Err(Error::InvalidArgument(format!("need 1 <= R1 < R0 <= R_max, got {cyl:?}")));
    }
    if !(0.0 < cyl.t0 && cyl.t0 < cyl.t1 && cyl.t1 <= cyl.t_star) {
        return Err(Error::InvalidArgument(format!("need 0 < T0 < T1 <= T*, got {cyl:?}")));
    }
    if !(p > 1.0) {
        return Err(Error::InvalidArgument(format!("need p > 1, got {p}")));
    }
    for t in [cyl.t0, cyl.t1, cyl.t_star] {
        snapshot_at(traj, t, "cylinder")?;
    }
    let exponent = (p + m - 1.0) / 2.0;
    let sup_term = traj
        .window(cyl.t1, cyl.t_star)
        .iter()
        .fold(0.0f64, |a, s| a.max(ball_lp(s, cyl.r1, p)));
    // face gradients on faces strictly inside B_{R_1}
    let gradient: Vec<(f64, f64)> = traj
        .window(cyl.t1, cyl.t_star)
        .iter()
        .map(|s| {
            let v = s.values();
            let total = (0..grid.len() - 1)
                .filter(|&i| grid.edges()[i + 1] <= cyl.r1)
                .map(|i| {
                    let d = v[i + 1].abs().powf(exponent) * v[i + 1].signum() - v[i].abs().powf(exponent) * v[i].signum();
                    grid.face_coefficient(i) * d * d
                })
                .sum::<f64>();
            (s.time(), total)
        })
        .collect();
    let lhs = sup_term + trapezoid(&gradient);
    let weight = (1.0 + cyl.r0).powf(params.gamma()) / (cyl.r0 - cyl.r1).powi(2);
    let integrand: Vec<(f64, f64)> = traj
        .window(cyl.t0, cyl.t_star)
        .iter()
        .map(|s| {
            let value = ball_lp(s, cyl.r0, p) / (cyl.t1 - cyl.t0) + weight * ball_lp(s, cyl.r0, p + m - 1.0);
            (s.time(), value)
        })
        .collect();
    let rhs = trapezoid(&integrand);
    let mut report = EstimateReport::new("energy", 0.0)
        .with_grid(grid)
        .param("p", p)
        .param("r1", cyl.r1)
        .param("r0", cyl.r0)
        .param("t0", cyl.t0)
        .param("t1", cyl.t1)
        .param("t_star", cyl.t_star);
    report.lhs.push(lhs);
    report.rhs.push(rhs);
    let c = ratio(lhs, rhs);
    report.fitted_constant = Some(c);
    report.pass = c.is_finite();
    Ok(report)
}

/// Radial test profile for the Sobolev check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TestProfile {
    Constant(f64),
    /// `sum_j a_j cos(j pi r / R)`.
    Cosine(Vec<f64>),
    /// `h exp(-((r - c)/w)^2)`.
    Bump { height: f64, center: f64, width: f64 },
}

impl TestProfile {
    pub fn eval(&self, r: f64, radius: f64) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::Cosine(a) => a
                .iter()
                .enumerate()
                .map(|(j, c)| c * (j as f64 * std::f64::consts::PI * r / radius).cos())
                .sum(),
            Self::Bump { height, center, width } => height * (-((r - center) / width).powi(2)).exp(),
        }
    }
}

/// Seeded family: a constant, random cosine sums and bumps of random centre and width
/// (width at least `min_width` times the radius).
pub fn sobolev_family(seed: u64, count: usize, min_width: f64) -> Vec<TestProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![TestProfile::Constant(1.0)];
    while out.len() < count {
        if out.len() % 2 == 0 {
            let terms = rng.random_range(1..=6);
            out.push(TestProfile::Cosine((0..terms).map(|_| rng.random_range(-1.0..1.0)).collect()));
        } else {
            let width = min_width * (0.5 / min_width).powf(rng.random::<f64>());
            out.push(TestProfile::Bump {
                height: rng.random_range(0.1..10.0),
                center: rng.random_range(0.0..1.0),
                width,
            });
        }
    }
    out
}

/// `||f||^2_{L^{2*}_rho(B_R)} / (R^{gamma-2} ||f||^2_{L^2_rho(B_R)} + ||grad f||^2_{L^2(B_R)})` for
/// one profile sampled at the cell centres (`B_R` is the whole grid).
pub fn sobolev_ratio(grid: &RadialGrid, f: &[f64]) -> f64 {
    let p = grid.params();
    let q = p.sobolev_exponent();
    let radius = grid.r_max();
    let lq: f64 = f.iter().zip(grid.masses()).map(|(v, m)| v.abs().powf(q) * m).sum::<f64>().powf(2.0 / q);
    let l2: f64 = f.iter().zip(grid.masses()).map(|(v, m)| v * v * m).sum();
    let grad: f64 = (0..grid.len() - 1)
        .map(|i| grid.face_coefficient(i) * (f[i + 1] - f[i]).powi(2))
        .sum();
    ratio(lq, radius.powf(p.gamma() - 2.0) * l2 + grad)
}

/// Weighted Sobolev inequality on every grid (each covering `B_R`, `R >= 1`) over the
/// same profile family. Bump centres are scaled by `R`. The fitted constant is the
/// largest ratio; the check passes iff the family has at least 100 profiles and the
/// per-grid maxima agree within a factor 2.
pub fn check_sobolev(grids: &[Arc<RadialGrid>], family: &[TestProfile]) -> Result<EstimateReport> {
    if family.is_empty() {
        return Err(Error::InsufficientData("empty profile family".into()));
    }
    if grids.is_empty() {
        return Err(Error::InsufficientData("no grids".into()));
    }
    let mut report = EstimateReport::new("sobolev", 2.0)
        .with_grid(&grids[0])
        .param("profiles", family.len() as f64);
    let mut maxima = Vec::new();
    for (k, grid) in grids.iter().enumerate() {
        let radius = grid.r_max();
        if radius < 1.0 {
            return Err(Error::InvalidArgument(format!("Sobolev check needs R >= 1, got {radius}")));
        }
        let mut worst = 0.0f64;
        for prof in family {
            let prof = match prof {
                TestProfile::Bump { height, center, width } => TestProfile::Bump {
                    height: *height,
                    center: center * radius,
                    width: width * radius,
                },
                other => other.clone(),
            };
            let f = grid.sample(|r| prof.eval(r, radius));
            worst = worst.max(sobolev_ratio(grid, &f));
        }
        report.measure(&format!("max_ratio_grid{k}"), worst);
        report.lhs.push(worst);
        maxima.push(worst);
    }
    let max = maxima.iter().cloned().fold(0.0, f64::max);
    let min = maxima.iter().cloned().fold(f64::INFINITY, f64::min);
    report.fitted_constant = Some(max);
    let spread = if min > 0.0 { max / min } else { f64::INFINITY };
    report.measure("spread", spread);
    report.pass = family.len() >= 100 && max.is_finite() && spread < 2.0;
    if family.len() < 100 {
        report.note("family smaller than 100 profiles");
    }
    Ok(report)
}
