//! Weighted ball norms, Morrey-type norms, the tail functional, the
//! `L^1(Phi_alpha)` norm, cutoff profiles and the existence time.
//!
//! Suprema over radii are taken over `{r} ∪ {edges > r}`; between edges the
//! ball mass of a piecewise-constant field is smooth and the candidates are
//! what the harness compares across resolutions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::quadrature;

/// Value of a Morrey-type norm and the radius attaining the supremum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MorreyReport {
    pub r: f64,
    pub value: f64,
    pub argmax: f64,
}

/// `(sum_{cells in B_R} |u_i|^p m_i)^(1/p)` with the boundary cell weighted by
/// the part of its mass inside `B_R`.
pub fn weighted_lp_ball(field: &Field, p: f64, radius: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("p must be >= 1, got {p}")));
    }
    let grid = field.grid();
    if radius > grid.r_max() * (1.0 + 1e-12) {
        return Err(Error::OutsideGrid { r: radius, r_max: grid.r_max() });
    }
    let u = field.values();
    let sum: f64 = grid
        .ball_masses(radius)
        .into_iter()
        .map(|(i, m)| u[i].abs().powf(p) * m)
        .sum();
    Ok(sum.powf(1.0 / p))
}

fn radius_candidates(edges: &[f64], r: f64) -> impl Iterator<Item = f64> + '_ {
    std::iter::once(r).chain(edges.iter().copied().filter(move |&e| e > r))
}

/// `sup_{R >= r} R^{-(N-gamma)-(2-gamma)/(m-1)} int_{B_R} |u| rho dx`.
pub fn morrey_1r(field: &Field, r: f64) -> Result<MorreyReport> {
    let grid = field.grid();
    if !(r > 0.0) || r > grid.r_max() {
        return Err(Error::OutsideGrid { r, r_max: grid.r_max() });
    }
    let exponent = grid.params().morrey_exponent();
    let u = field.values();
    let edges = grid.edges();
    // cumulative |u| mass at each edge
    let mut cumulative = Vec::with_capacity(edges.len());
    let mut acc = 0.0;
    cumulative.push(0.0);
    for (ui, mi) in u.iter().zip(grid.masses()) {
        acc += ui.abs() * mi;
        cumulative.push(acc);
    }
    let ball_mass = |radius: f64| -> f64 {
        let k = edges.partition_point(|&e| e <= radius) - 1;
        if k >= u.len() {
            return cumulative[u.len()];
        }
        let partial = if radius > edges[k] {
            u[k].abs() * crate::weights::cell_mass(grid.weight(), edges[k], radius, grid.params())
        } else {
            0.0
        };
        cumulative[k] + partial
    };
    let mut best = MorreyReport { r, value: 0.0, argmax: r };
    for radius in radius_candidates(edges, r) {
        let v = radius.powf(-exponent) * ball_mass(radius);
        if v > best.value {
            best.value = v;
            best.argmax = radius;
        }
    }
    Ok(best)
}

/// `sup_{R >= r} R^{-(2-gamma)/(m-1)} sup_{B_R} |u|`, where `sup_{B_R}` runs over
/// the cells meeting `B_R`.
pub fn morrey_inf_r(field: &Field, r: f64) -> Result<MorreyReport> {
    let grid = field.grid();
    if !(r > 0.0) || r > grid.r_max() {
        return Err(Error::OutsideGrid { r, r_max: grid.r_max() });
    }
    let exponent = grid.params().growth_exponent();
    let edges = grid.edges();
    let u = field.values();
    // running max over cells with left edge < R
    let mut prefix_max = Vec::with_capacity(u.len());
    let mut acc: f64 = 0.0;
    for v in u {
        acc = acc.max(v.abs());
        prefix_max.push(acc);
    }
    let mut best = MorreyReport { r, value: 0.0, argmax: r };
    for radius in radius_candidates(edges, r) {
        let k = edges.partition_point(|&e| e < radius).saturating_sub(1).min(u.len() - 1);
        let v = radius.powf(-exponent) * prefix_max[k];
        if v > best.value {
            best.value = v;
            best.argmax = radius;
        }
    }
    Ok(best)
}

/// Finite-domain stand-in for `ell(mu) = lim_{r -> inf} ||mu||_{1,r}`:
/// the Morrey norm with `r = fraction * R_max`.
pub fn ell_estimate(field: &Field, fraction: f64) -> Result<MorreyReport> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("tail fraction must lie in (0, 1), got {fraction}")));
    }
    let grid = field.grid();
    let r = fraction * grid.r_max();
    let in_window = grid.edges().iter().filter(|&&e| e >= r).count();
    if in_window < 4 {
        return Err(Error::InsufficientData(format!(
            "tail window [{r}, {}] contains {in_window} edges, need 4",
            grid.r_max()
        )));
    }
    morrey_1r(field, r)
}

/// Admissibility threshold `(2-gamma)/(2(m-1)) + (N-gamma)/2` for `alpha`.
pub fn phi_alpha_threshold(params: &crate::params::Params) -> f64 {
    params.growth_exponent() / 2.0 + params.weighted_dim() / 2.0
}

/// `sum_i |u_i| (1 + c_i^2)^(-alpha) m_i`.
pub fn l1_phi_alpha(field: &Field, alpha: f64) -> Result<f64> {
    let grid = field.grid();
    let threshold = phi_alpha_threshold(grid.params());
    if !(alpha > threshold) {
        return Err(Error::InvalidArgument(format!(
            "alpha = {alpha} must exceed {threshold}"
        )));
    }
    Ok(field
        .values()
        .iter()
        .zip(grid.centers())
        .zip(grid.masses())
        .map(|((u, c), m)| u.abs() * (1.0 + c * c).powf(-alpha) * m)
        .sum())
}

/// Critical time `C_1 / value^(m-1)`, infinite for a vanishing norm.
pub fn existence_time(morrey_value: f64, calibration: f64, m: f64) -> Result<f64> {
    if !(morrey_value >= 0.0) {
        return Err(Error::InvalidArgument(format!("negative norm {morrey_value}")));
    }
    if !(calibration > 0.0) {
        return Err(Error::InvalidArgument(format!("calibration must be positive, got {calibration}")));
    }
    if morrey_value == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(calibration / morrey_value.powf(m - 1.0))
}

/// Radial cutoff: one on `B_R`, zero outside `B_{2R}`, quintic smoothstep in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffProfile {
    pub radius: f64,
}

pub fn cutoff_profile(radius: f64) -> Result<CutoffProfile> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidArgument(format!("cutoff radius must be positive, got {radius}")));
    }
    Ok(CutoffProfile { radius })
}

impl CutoffProfile {
    fn ramp(&self, r: f64) -> (f64, f64, f64) {
        let s = ((r - self.radius) / self.radius).clamp(0.0, 1.0);
        let s2 = s * s;
        let value = s2 * s * (10.0 - 15.0 * s + 6.0 * s2);
        let d1 = 30.0 * s2 * (1.0 - s) * (1.0 - s);
        let d2 = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s);
        (value, d1, d2)
    }

    pub fn value(&self, r: f64) -> f64 {
        1.0 - self.ramp(r).0
    }

    /// Radial derivative `phi'(r)`.
    pub fn derivative(&self, r: f64) -> f64 {
        -self.ramp(r).1 / self.radius
    }

    /// `phi'' + (N-1)/r phi'` in `R^N`.
    pub fn laplacian(&self, r: f64, dim: usize) -> f64 {
        let (_, d1, d2) = self.ramp(r);
        let first = -d1 / self.radius;
        let second = -d2 / (self.radius * self.radius);
        if r == 0.0 {
            return 0.0;
        }
        second + (dim as f64 - 1.0) * first / r
    }

    /// `(max |phi'| R, max |Delta phi| R^2)` over `samples` points of `[0, 3R]`.
    pub fn derivative_bounds(&self, dim: usize, samples: usize) -> (f64, f64) {
        let mut g: f64 = 0.0;
        let mut l: f64 = 0.0;
        for k in 0..=samples {
            let r = 3.0 * self.radius * k as f64 / samples as f64;
            g = g.max(self.derivative(r).abs() * self.radius);
            l = l.max(self.laplacian(r, dim).abs() * self.radius * self.radius);
        }
        (g, l)
    }
}

/// Equivalent Morrey norm `sup_{R >= r} R^{-e} int phi_R |u| rho dx`, with the
/// cutoff integral truncated at `R_max`.
pub fn morrey_1r_cutoff(field: &Field, r: f64) -> Result<MorreyReport> {
    let grid = field.grid();
    if !(r > 0.0) || r > grid.r_max() {
        return Err(Error::OutsideGrid { r, r_max: grid.r_max() });
    }
    let exponent = grid.params().morrey_exponent();
    let edges = grid.edges();
    let u = field.values();
    let dim = grid.dim();
    let mut best = MorreyReport { r, value: 0.0, argmax: r };
    for radius in radius_candidates(edges, r) {
        let cutoff = CutoffProfile { radius };
        let mut total = 0.0;
        for i in 0..u.len() {
            let (a, b) = (edges[i], edges[i + 1]);
            if a >= 2.0 * radius || u[i] == 0.0 {
                continue;
            }
            let inner = if b <= radius {
                grid.masses()[i]
            } else {
                grid.weight().shell_integral(dim, a, b.min(2.0 * radius), |s| cutoff.value(s))
            };
            total += u[i].abs() * inner;
        }
        let v = radius.powf(-exponent) * total;
        if v > best.value {
            best.value = v;
            best.argmax = radius;
        }
    }
    Ok(best)
}

/// `int_0^R f(s) s^{N-1} ds` by composite quadrature, for closed-form cross-checks.
pub fn radial_moment(dim: usize, radius: f64, f: impl Fn(f64) -> f64) -> f64 {
    quadrature::integrate_composite(0.0, radius, 64, 16, |s| f(s) * s.powi(dim as i32 - 1))
}
