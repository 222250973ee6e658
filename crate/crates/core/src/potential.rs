//! Green functions, radial Poisson solves and the dual potential.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, RadialGrid, Trajectory};
use crate::params::{sphere_area, unit_ball_volume};
use crate::quadrature;
use crate::solver::odd_power;

fn check_dim(dim: usize) -> Result<()> {
    if dim < 3 {
        return Err(Error::InvalidArgument(format!("dimension must be >= 3, got {dim}")));
    }
    Ok(())
}

fn green_constant(dim: usize) -> f64 {
    let n = dim as f64;
    1.0 / (n * (n - 2.0) * unit_ball_volume(dim))
}

/// Newtonian kernel `d^{2-N} / (N (N-2) alpha(N))`.
pub fn free_green(dim: usize, dist: f64) -> Result<f64> {
    check_dim(dim)?;
    if !(dist > 0.0) {
        return Err(Error::InvalidArgument(format!("Green function needs a positive distance, got {dist}")));
    }
    Ok(green_constant(dim) * dist.powf(2.0 - dim as f64))
}

/// Mollified kernel `(n^2 / (1 + n^2 d^2))^{(N-2)/2} / (N (N-2) alpha(N))`.
pub fn green_n(dim: usize, dist: f64, n: f64) -> Result<f64> {
    check_dim(dim)?;
    if !(n >= 1.0) {
        return Err(Error::InvalidArgument(format!("approximation index must be >= 1, got {n}")));
    }
    let q = n * n / (1.0 + n * n * dist * dist);
    Ok(green_constant(dim) * q.powf((dim as f64 - 2.0) / 2.0))
}

/// `Delta_x G_n = -(n^N / alpha(N)) (1 + n^2 d^2)^{-(N+2)/2}`.
pub fn green_n_laplacian(dim: usize, dist: f64, n: f64) -> Result<f64> {
    check_dim(dim)?;
    if !(n >= 1.0) {
        return Err(Error::InvalidArgument(format!("approximation index must be >= 1, got {n}")));
    }
    let d = dim as f64;
    let s = n * dist;
    Ok(-n.powf(d) / unit_ball_volume(dim) * (1.0 + s * s).powf(-(d + 2.0) / 2.0))
}

/// `int Delta_x G_n(x, 0) f(|x|) dx` for a radial `f` vanishing beyond `support`.
///
/// After `s = n r` the integrand is `-N (1 + s^2)^{-(N+2)/2} f(s/n) s^{N-1}`, integrated
/// on geometrically growing panels.
pub fn delta_recovery(dim: usize, f: impl Fn(f64) -> f64, support: f64, n: f64) -> Result<f64> {
    check_dim(dim)?;
    if !(n >= 1.0) {
        return Err(Error::InvalidArgument(format!("approximation index must be >= 1, got {n}")));
    }
    if !(support > 0.0 && support.is_finite()) {
        return Err(Error::InvalidArgument(format!("support radius must be positive, got {support}")));
    }
    let scale = (0..=64).map(|k| f(support * k as f64 / 64.0).abs()).fold(0.0, f64::max);
    if f(support).abs() > 1e-12 * scale.max(f64::MIN_POSITIVE) || f(support * 1.5).abs() > 1e-12 * scale {
        return Err(Error::InvalidArgument("profile does not vanish at the quadrature boundary".into()));
    }
    let d = dim as f64;
    let integrand = |s: f64| (1.0 + s * s).powf(-(d + 2.0) / 2.0) * f(s / n) * s.powf(d - 1.0);
    let upper = n * support;
    let mut total = quadrature::integrate_composite(0.0, upper.min(1.0), 4, 32, integrand);
    let mut a = 1.0;
    while a < upper {
        let b = (a * 1.5).min(upper);
        total += quadrature::integrate(a, b, 32, integrand);
        a = b;
    }
    Ok(-d * total)
}

/// Applies the Dirichlet finite-volume operator: `(A w)_i = F_{i-1/2} - F_{i+1/2}`
/// with zero flux at the origin and `w = boundary` beyond `R_max`.
pub fn dirichlet_apply(grid: &RadialGrid, w: &[f64], boundary: f64) -> Result<Vec<f64>> {
    let n = grid.len();
    if w.len() != n {
        return Err(Error::Mismatch(format!("expected {n} values, got {}", w.len())));
    }
    let mut out = vec![0.0; n];
    for i in 0..n - 1 {
        let f = grid.face_coefficient(i) * (w[i + 1] - w[i]);
        out[i] -= f;
        out[i + 1] += f;
    }
    out[n - 1] -= grid.boundary_coefficient() * (boundary - w[n - 1]);
    Ok(out)
}

/// Solves `A w = loads` (loads are cell integrals of the source) with `w = 0` beyond `R_max`.
pub fn dirichlet_solve_loads(grid: &RadialGrid, loads: &[f64]) -> Result<Vec<f64>> {
    let n = grid.len();
    if loads.len() != n {
        return Err(Error::Mismatch(format!("expected {n} loads, got {}", loads.len())));
    }
    if loads.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite source".into()));
    }
    // flux through the outer edge of cell i is minus the enclosed load
    let mut flux = vec![0.0; n];
    let mut acc = 0.0;
    for i in 0..n {
        acc += loads[i];
        flux[i] = -acc;
    }
    let mut w = vec![0.0; n];
    w[n - 1] = -flux[n - 1] / grid.boundary_coefficient();
    for i in (0..n - 1).rev() {
        w[i] = w[i + 1] - flux[i] / grid.face_coefficient(i);
    }
    Ok(w)
}

/// Solves `-Delta w = rhs` in `B_{R_max}` with `w(R_max) = 0`; `rhs` holds one value per cell.
pub fn radial_poisson_dirichlet(grid: &RadialGrid, rhs: &[f64]) -> Result<Vec<f64>> {
    if rhs.len() != grid.len() {
        return Err(Error::Mismatch(format!("expected {} values, got {}", grid.len(), rhs.len())));
    }
    let loads: Vec<f64> = rhs.iter().zip(grid.volumes()).map(|(f, v)| f * v).collect();
    dirichlet_solve_loads(grid, &loads)
}

/// Newtonian potential of the piecewise-constant `rhs` (zero beyond `R_max`) at radius `r`.
pub fn free_potential_at(grid: &RadialGrid, rhs: &[f64], r: f64) -> Result<f64> {
    let dim = grid.dim();
    if rhs.len() != grid.len() {
        return Err(Error::Mismatch(format!("expected {} values, got {}", grid.len(), rhs.len())));
    }
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("potential needs r > 0, got {r}")));
    }
    let d = dim as f64;
    let mut inner = 0.0;
    let mut outer = 0.0;
    for (i, &v) in rhs.iter().enumerate() {
        let (a, b) = (grid.edges()[i], grid.edges()[i + 1]);
        let split = r.clamp(a, b);
        inner += v * (split.powf(d) - a.powf(d)) / d;
        outer += v * (b * b - split * split) / 2.0;
    }
    Ok((r.powf(2.0 - d) * inner + outer) / (d - 2.0))
}

/// Newtonian potential of `rhs` at the cell centres.
pub fn radial_poisson_free(grid: &RadialGrid, rhs: &[f64]) -> Result<Vec<f64>> {
    grid.centers().iter().map(|&r| free_potential_at(grid, rhs, r)).collect()
}

/// `int_cell rho(x) G(x, x0) dx` for every cell, `|x0| = r0`, using the spherical
/// average `max(|x|, r0)^{2-N} / ((N-2) omega)` of the Newtonian kernel.
pub fn green_weights(grid: &RadialGrid, r0: f64) -> Vec<f64> {
    let dim = grid.dim();
    let d = dim as f64;
    let norm = (d - 2.0) * sphere_area(dim);
    let kernel = |s: f64| s.max(r0).powf(2.0 - d);
    (0..grid.len())
        .map(|i| {
            let (a, b) = (grid.edges()[i], grid.edges()[i + 1]);
            let w = grid.weight();
            let total = if r0 > a && r0 < b {
                w.shell_integral(dim, a, r0, kernel) + w.shell_integral(dim, r0, b, kernel)
            } else {
                w.shell_integral(dim, a, b, kernel)
            };
            total / norm
        })
        .collect()
}

/// `int G(x, x0) u(x) rho(x) dx` for a cell field.
pub fn green_integral(field: &Field, r0: f64) -> Result<f64> {
    let grid = field.grid();
    if !(r0 >= 0.0 && r0 <= grid.r_max()) {
        return Err(Error::OutsideGrid { r: r0, r_max: grid.r_max() });
    }
    Ok(green_weights(grid, r0)
        .iter()
        .zip(field.values())
        .map(|(k, u)| k * u)
        .sum())
}

/// The dual potential `W = w - h` at one snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualField {
    pub time: f64,
    /// Dirichlet potential of `u rho`.
    pub w: Vec<f64>,
    /// Boundary correction `int_0^t u^m(R_max, s) ds`.
    pub h: f64,
    pub values: Vec<f64>,
    /// `max |A_h W - M u| / max |M u|`, the discrete `-Delta W = u rho` residual.
    pub poisson_residual: f64,
    /// `max |(W(t') - W(t))/(t' - t) + (u^m(t) + u^m(t'))/2| / max |u^m|` against the
    /// following snapshot, if any.
    pub time_residual: Option<f64>,
}

fn dual_values(field: &Field, h: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid = field.grid();
    let loads: Vec<f64> = field.values().iter().zip(grid.masses()).map(|(u, m)| u * m).collect();
    let w = dirichlet_solve_loads(grid, &loads)?;
    let values = w.iter().map(|x| x - h).collect();
    Ok((w, values))
}

/// Dual potential at snapshot `index`; `history` overrides the trajectory's own
/// record of `int u^m(R_max)`.
pub fn dual_field(trajectory: &Trajectory, index: usize, history: Option<&[f64]>) -> Result<DualField> {
    let snaps = trajectory.snapshots();
    if index >= snaps.len() {
        return Err(Error::InvalidArgument(format!("snapshot index {index} out of range")));
    }
    let hist = history.unwrap_or(trajectory.pressure_integral());
    if hist.len() != snaps.len() {
        return Err(Error::InsufficientData("boundary pressure history does not cover the snapshots".into()));
    }
    let field = &snaps[index];
    let grid = field.grid();
    let m = grid.params().m();
    let h = hist[index];
    let (w, values) = dual_values(field, h)?;

    let loads: Vec<f64> = field.values().iter().zip(grid.masses()).map(|(u, mm)| u * mm).collect();
    let applied = dirichlet_apply(grid, &values, -h)?;
    let scale = loads.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let poisson_residual = if scale > 0.0 {
        applied.iter().zip(&loads).fold(0.0f64, |a, (x, y)| a.max((x - y).abs())) / scale
    } else {
        applied.iter().fold(0.0f64, |a, x| a.max(x.abs()))
    };

    let time_residual = match snaps.get(index + 1) {
        Some(next) => {
            let (_, next_values) = dual_values(next, hist[index + 1])?;
            let dt = next.time() - field.time();
            let mut worst = 0.0f64;
            let mut pscale = 0.0f64;
            for i in 0..values.len() {
                let p = 0.5 * (odd_power(field.values()[i], m) + odd_power(next.values()[i], m));
                pscale = pscale.max(p.abs());
                worst = worst.max(((next_values[i] - values[i]) / dt + p).abs());
            }
            Some(if pscale > 0.0 { worst / pscale } else { worst })
        }
        None => None,
    };

    Ok(DualField {
        time: field.time(),
        w,
        h,
        values,
        poisson_residual,
        time_residual,
    })
}

/// Outcome of one evaluation of the potential inequality
/// `int [u(t0) - u(t1)] G(., x0) rho <= (m-1) t1^{m/(m-1)} t0^{-1/(m-1)} u^m(x0, t1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlbReport {
    pub t0: f64,
    pub t1: f64,
    pub r0: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `(rhs - lhs) / |rhs|`, or the raw difference when `rhs = 0`.
    pub margin: f64,
    pub pass: bool,
}

/// Evaluates the potential inequality with the probe at the centre of the cell containing `r0`.
///
/// Times are measured from the origin of the time axis, which is where the
/// inequality places the (possibly singular) initial datum.
pub fn flb_check(trajectory: &Trajectory, t0: f64, t1: f64, r0: f64) -> Result<FlbReport> {
    let grid = trajectory.grid();
    let k = grid.cell_index(r0)?;
    let probe = grid.centers()[k];
    let (i0, i1) = match (trajectory.index_at(t0), trajectory.index_at(t1)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::InvalidArgument(format!("times {t0}, {t1} are not snapshot times"))),
    };
    if !(t0 > 0.0 && t1 >= t0) {
        return Err(Error::InvalidArgument(format!("need 0 < t0 <= t1, got {t0}, {t1}")));
    }
    let snaps = trajectory.snapshots();
    let (u0, u1) = (&snaps[i0], &snaps[i1]);
    let m = grid.params().m();
    let kernel = green_weights(grid, probe);
    let mut lhs = 0.0;
    let mut size = 0.0;
    for i in 0..grid.len() {
        lhs += kernel[i] * (u0.values()[i] - u1.values()[i]);
        size += kernel[i] * (u0.values()[i].abs() + u1.values()[i].abs());
    }
    let rhs = (m - 1.0) * t1.powf(m / (m - 1.0)) * t0.powf(-1.0 / (m - 1.0)) * odd_power(u1.values()[k], m);
    let margin = if rhs != 0.0 { (rhs - lhs) / rhs.abs() } else { rhs - lhs };
    let pass = lhs <= rhs + 1e-8 * rhs.abs() + 1e-14 * size;
    Ok(FlbReport {
        t0,
        t1,
        r0: probe,
        lhs,
        rhs,
        margin,
        pass,
    })
}

/// Pairings `int phi u(t_k) rho` and their extrapolation to `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub times: Vec<f64>,
    pub pairings: Vec<f64>,
    /// Fitted `a` in `a + b t^{theta lambda}`.
    pub limit: f64,
    pub rate_coefficient: f64,
    pub exponent: f64,
}

/// Pairs a test profile with the snapshots at `times` and fits `a + b t^{theta lambda}`.
pub fn initial_trace(
    trajectory: &Trajectory,
    phi: impl Fn(f64) -> f64,
    phi_support: f64,
    times: &[f64],
) -> Result<TraceReport> {
    let grid = trajectory.grid();
    if phi_support > grid.r_max() * (1.0 + 1e-12) {
        return Err(Error::OutsideGrid { r: phi_support, r_max: grid.r_max() });
    }
    if times.len() < 2 {
        return Err(Error::InsufficientData("trace extrapolation needs at least two times".into()));
    }
    let loads: Vec<f64> = grid
        .project(|r| if r <= phi_support { phi(r) } else { 0.0 })
        .iter()
        .zip(grid.masses())
        .map(|(p, m)| p * m)
        .collect();
    let mut pairings = Vec::with_capacity(times.len());
    for &t in times {
        let idx = trajectory
            .index_at(t)
            .ok_or_else(|| Error::InvalidArgument(format!("time {t} is not a snapshot time")))?;
        let u = trajectory.snapshots()[idx].values();
        pairings.push(u.iter().zip(&loads).map(|(a, b)| a * b).sum());
    }
    let s = grid.params().scaling();
    let exponent = s.theta * s.lambda;
    let xs: Vec<f64> = times.iter().map(|t| t.powf(exponent)).collect();
    let (limit, rate_coefficient) = linear_fit(&xs, &pairings);
    Ok(TraceReport {
        times: times.to_vec(),
        pairings,
        limit,
        rate_coefficient,
        exponent,
    })
}

/// Least-squares `y = a + b x`; returns `(a, b)`.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - b * mx, b)
}
