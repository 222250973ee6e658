//! Exact solutions for the pure-power weight `rho = r^{-gamma}`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta;

use crate::error::{Error, Result};
use crate::grid::{Field, RadialGrid};
use crate::params::Params;
use crate::potential::{dirichlet_apply, dirichlet_solve_loads};
use crate::quadrature;
use crate::solver::BoundaryPressure;

/// Source-type solution `t^{-lambda} (c1 - c2 t^{-theta lambda} r^{2-gamma})_+^{1/(m-1)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarenblattParams {
    pub c1: f64,
    pub c2: f64,
}

/// `c2 = lambda (m-1) / (m (2-gamma) (N-gamma))`.
pub fn barenblatt_c2(params: &Params) -> f64 {
    let m = params.m();
    params.scaling().lambda * (m - 1.0) / (m * (2.0 - params.gamma()) * params.weighted_dim())
}

impl BarenblattParams {
    pub fn new(params: &Params, c1: f64) -> Result<Self> {
        Self::with_coefficient(c1, barenblatt_c2(params))
    }

    /// Arbitrary `c2`; only the derived value gives a solution.
    pub fn with_coefficient(c1: f64, c2: f64) -> Result<Self> {
        if !(c1 > 0.0 && c1.is_finite() && c2 > 0.0 && c2.is_finite()) {
            return Err(Error::InvalidArgument(format!("need c1, c2 > 0, got {c1}, {c2}")));
        }
        Ok(Self { c1, c2 })
    }

    /// Radius of the support at time `t`.
    pub fn support_radius(&self, params: &Params, t: f64) -> f64 {
        let s = params.scaling();
        (self.c1 / self.c2).powf(1.0 / (2.0 - params.gamma())) * t.powf(s.lambda / params.weighted_dim())
    }

    /// Total weighted mass, in closed form through the Beta function.
    pub fn mass(&self, params: &Params) -> f64 {
        let g = 2.0 - params.gamma();
        let a = params.weighted_dim() / g;
        let b = 1.0 / (params.m() - 1.0) + 1.0;
        let eta = (self.c1 / self.c2).powf(1.0 / g);
        params.sphere_area() * eta.powf(params.weighted_dim()) / g * self.c1.powf(1.0 / (params.m() - 1.0)) * beta(a, b)
    }

    /// Weighted mass at time `t` by direct quadrature of the profile.
    pub fn mass_at(&self, params: &Params, t: f64) -> Result<f64> {
        let rs = self.support_radius(params, t);
        let nw = params.weighted_dim();
        // x = (r/r_s)^{2-gamma}; x = y^4 near the centre and x = 1 - z^4 near the front
        let a = nw / (2.0 - params.gamma());
        let u = |x: f64| barenblatt_eval(params, self, rs * x.powf(1.0 / (2.0 - params.gamma())), t).unwrap_or(0.0);
        let end = 0.5f64.powf(0.25);
        let inner = quadrature::integrate_composite(0.0, end, 32, 32, |y| 4.0 * a * u(y.powi(4)) * y.powf(4.0 * a - 1.0));
        let outer = quadrature::integrate_composite(0.0, end, 32, 32, |z| {
            let x = 1.0 - z.powi(4);
            4.0 * a * u(x) * x.powf(a - 1.0) * z.powi(3)
        });
        let total = rs.powf(nw) * (inner + outer);
        Ok(params.sphere_area() * total / nw)
    }
}

pub fn barenblatt_eval(params: &Params, bp: &BarenblattParams, r: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("Barenblatt profile needs t > 0, got {t}")));
    }
    let s = params.scaling();
    let core = bp.c1 - bp.c2 * t.powf(-s.theta * s.lambda) * r.abs().powf(2.0 - params.gamma());
    Ok(t.powf(-s.lambda) * core.max(0.0).powf(1.0 / (params.m() - 1.0)))
}

/// Maximum of `|rho u_t - Delta(u^m)|` over the samples, with centred differences of step `h`.
pub fn fd_residual(
    params: &Params,
    u: impl Fn(f64, f64) -> f64,
    samples: &[(f64, f64)],
    h: f64,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    let m = params.m();
    let d = params.dim() as f64;
    let p = |r: f64, t: f64| u(r, t).powf(m);
    let mut worst = 0.0f64;
    for &(r, t) in samples {
        if !(r > 2.0 * h && t > 2.0 * h) {
            return Err(Error::InvalidArgument(format!("sample ({r}, {t}) too close to the origin")));
        }
        let rho = r.powf(-params.gamma());
        let ut = (u(r, t + h) - u(r, t - h)) / (2.0 * h);
        let (pm, p0, pp) = (p(r - h, t), p(r, t), p(r + h, t));
        let lap = (pp - 2.0 * p0 + pm) / (h * h) + (d - 1.0) / r * (pp - pm) / (2.0 * h);
        worst = worst.max((rho * ut - lap).abs());
    }
    Ok(worst)
}

/// Finite-difference residual of the Barenblatt profile; samples must keep the
/// stencil away from the free boundary.
pub fn barenblatt_residual(params: &Params, bp: &BarenblattParams, samples: &[(f64, f64)], h: f64) -> Result<f64> {
    for &(r, t) in samples {
        if !(t > 2.0 * h) {
            return Err(Error::InvalidArgument(format!("sample time {t} too small for step {h}")));
        }
        let front = [t - h, t, t + h].map(|s| bp.support_radius(params, s));
        let lo = front.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = front.iter().cloned().fold(0.0, f64::max);
        if r + h >= lo && r - h <= hi {
            return Err(Error::FreeBoundarySample { r, t });
        }
    }
    fd_residual(params, |r, t| barenblatt_eval(params, bp, r, t).unwrap_or(0.0), samples, h)
}

/// Blow-up solution `kappa r^{(2-gamma)/(m-1)} (T - t)^{-1/(m-1)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupParams {
    pub t_blowup: f64,
    pub kappa: f64,
}

/// `kappa*` with `kappa*^{m-1} = (m-1) / (m (2-gamma) [m (2-gamma) + (N-2)(m-1)])`, the
/// amplitude blowing up at `T = 1`.
pub fn blowup_coefficient(params: &Params) -> f64 {
    let m = params.m();
    let g = 2.0 - params.gamma();
    let n = params.dim() as f64;
    ((m - 1.0) / (m * g * (m * g + (n - 2.0) * (m - 1.0)))).powf(1.0 / (m - 1.0))
}

impl BlowupParams {
    pub fn new(params: &Params, t_blowup: f64) -> Result<Self> {
        if !(t_blowup > 0.0 && t_blowup.is_finite()) {
            return Err(Error::InvalidArgument(format!("blow-up time must be positive, got {t_blowup}")));
        }
        let kappa = blowup_coefficient(params) * t_blowup.powf(-1.0 / (params.m() - 1.0));
        Ok(Self { t_blowup, kappa })
    }

    /// Parameters for a given amplitude: `T = (kappa*/kappa)^{m-1}`.
    pub fn from_amplitude(params: &Params, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidArgument(format!("amplitude must be positive, got {kappa}")));
        }
        let t_blowup = (blowup_coefficient(params) / kappa).powf(params.m() - 1.0);
        Ok(Self { t_blowup, kappa })
    }

    /// Exact pressure `u^m(R, t)`, infinite from `T` on.
    pub fn boundary_pressure(&self, params: &Params, radius: f64) -> BoundaryPressure {
        let (m, a, kappa, tb) = (params.m(), params.growth_exponent(), self.kappa, self.t_blowup);
        BoundaryPressure::new(move |t| {
            if t < tb {
                (kappa * radius.powf(a)).powf(m) * (tb - t).powf(-m / (m - 1.0))
            } else {
                f64::INFINITY
            }
        })
    }
}

pub fn blowup_eval(params: &Params, bp: &BlowupParams, r: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0 && t < bp.t_blowup) {
        return Err(Error::InvalidArgument(format!("need 0 <= t < T = {}, got {t}", bp.t_blowup)));
    }
    Ok(bp.kappa * r.abs().powf(params.growth_exponent()) * (bp.t_blowup - t).powf(-1.0 / (params.m() - 1.0)))
}

/// Solution `W >= 0` of `-Delta W^m = rho W/(m-1)` in `B_{R_max}`, `W = 0` on the boundary,
/// on the finite-volume operator of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriendlyGiantProfile {
    /// `W` per cell.
    pub values: Vec<f64>,
    pub iterations: usize,
    /// Relative change of the last iteration.
    pub change: f64,
    /// `max |A W^m - M W/(m-1)| / max |M W/(m-1)|`.
    pub residual: f64,
    /// Whether some iterate had to be clamped at zero.
    pub clamped: bool,
}

impl FriendlyGiantProfile {
    /// Separable solution `W t^{-1/(m-1)}` as a field at time `t > 0`.
    pub fn separable(&self, grid: Arc<RadialGrid>, t: f64) -> Result<Field> {
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("separable solution needs t > 0, got {t}")));
        }
        let m = grid.params().m();
        let scale = t.powf(-1.0 / (m - 1.0));
        Field::new(grid, self.values.iter().map(|w| w * scale).collect(), t)
    }
}

fn giant_loads(grid: &RadialGrid, v: &[f64]) -> Vec<f64> {
    let m = grid.params().m();
    v.iter()
        .zip(grid.masses())
        .map(|(x, mm)| mm * x.max(0.0).powf(1.0 / m) / (m - 1.0))
        .collect()
}

/// Fixed-point iteration `v <- (1/(m-1)) A^{-1} [M v^{1/m}]` from `v = 1`.
pub fn friendly_giant_solve(grid: &RadialGrid, tol: f64, max_iters: usize) -> Result<FriendlyGiantProfile> {
    friendly_giant_solve_from(grid, &vec![1.0; grid.len()], tol, max_iters)
}

/// Fixed-point iteration from the pressure-like start `v0 = W_0^m`.
pub fn friendly_giant_solve_from(
    grid: &RadialGrid,
    v0: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<FriendlyGiantProfile> {
    if v0.len() != grid.len() {
        return Err(Error::Mismatch(format!("start has {} values, grid has {}", v0.len(), grid.len())));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if !v0.iter().any(|x| *x > 0.0) || v0.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("start must be finite with a positive entry".into()));
    }
    let m = grid.params().m();
    let mut clamped = v0.iter().any(|x| *x < 0.0);
    let mut v: Vec<f64> = v0.iter().map(|x| x.max(0.0)).collect();
    let mut change = f64::INFINITY;
    for it in 1..=max_iters {
        let mut next = dirichlet_solve_loads(grid, &giant_loads(grid, &v))?;
        for x in next.iter_mut() {
            if *x < 0.0 {
                clamped = true;
                *x = 0.0;
            }
        }
        let top = next.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        change = next.iter().zip(&v).fold(0.0f64, |a, (x, y)| a.max((x - y).abs())) / top.max(f64::MIN_POSITIVE);
        v = next;
        if change < tol {
            let values: Vec<f64> = v.iter().map(|x| x.powf(1.0 / m)).collect();
            let loads = giant_loads(grid, &v);
            let applied = dirichlet_apply(grid, &v, 0.0)?;
            let scale = loads.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            let residual = applied.iter().zip(&loads).fold(0.0f64, |a, (x, y)| a.max((x - y).abs())) / scale;
            return Ok(FriendlyGiantProfile {
                values,
                iterations: it,
                change,
                residual,
                clamped,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: max_iters,
        change,
    })
}

/// Mass `M` spread with uniform density over the first `k` cells.
pub fn dirac_approx(grid: Arc<RadialGrid>, mass: f64, k: usize) -> Result<Field> {
    if !(mass >= 0.0 && mass.is_finite()) {
        return Err(Error::InvalidArgument(format!("mass must be nonnegative, got {mass}")));
    }
    if k == 0 || k > grid.len() {
        return Err(Error::InvalidArgument(format!("k = {k} must lie in 1..={}", grid.len())));
    }
    let loaded: f64 = grid.masses()[..k].iter().sum();
    let mut values = vec![0.0; grid.len()];
    for v in values.iter_mut().take(k) {
        *v = mass / loaded;
    }
    Field::new(grid, values, 0.0)
}
