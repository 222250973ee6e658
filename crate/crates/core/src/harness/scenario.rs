//! Standard initial/boundary configurations used by the checks and the command line.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Field, Grading, RadialGrid};
use crate::oracle::{barenblatt_eval, blowup_eval, dirac_approx, BarenblattParams, BlowupParams};
use crate::params::Params;
use crate::solver::BoundaryCondition;
use crate::weights::WeightModel;

/// Uniform grid on `B_{r_max}` with `cells` shells.
pub fn uniform_grid(params: Params, weight: WeightModel, r_max: f64, cells: usize) -> Result<Arc<RadialGrid>> {
    Ok(Arc::new(RadialGrid::new(params, weight, r_max, cells, Grading::Uniform)?))
}

/// Pure-power grid for `(N, m, gamma)`.
pub fn power_grid(dim: usize, m: f64, gamma: f64, r_max: f64, cells: usize) -> Result<Arc<RadialGrid>> {
    uniform_grid(Params::new(dim, m, gamma)?, WeightModel::pure_power(gamma)?, r_max, cells)
}

/// Barenblatt profile with coefficient `c1` at time `t`, projected onto the grid.
pub fn barenblatt_field(grid: &Arc<RadialGrid>, c1: f64, t: f64) -> Result<Field> {
    let p = *grid.params();
    let bp = BarenblattParams::new(&p, c1)?;
    if bp.support_radius(&p, t) >= grid.r_max() {
        return Err(Error::InvalidArgument(format!("Barenblatt support at t = {t} reaches the boundary")));
    }
    Field::from_profile(grid.clone(), t, |r| barenblatt_eval(&p, &bp, r, t).unwrap_or(0.0))
}

/// Blow-up profile with blow-up time `t_blowup` at time `t`, and the matching boundary data.
pub fn blowup_setup(grid: &Arc<RadialGrid>, t_blowup: f64, t: f64) -> Result<(Field, BoundaryCondition)> {
    let p = *grid.params();
    let bp = BlowupParams::new(&p, t_blowup)?;
    if !(t < t_blowup) {
        return Err(Error::InvalidArgument(format!("start time {t} is not before T = {t_blowup}")));
    }
    let field = Field::from_profile(grid.clone(), t, |r| blowup_eval(&p, &bp, r, t).unwrap_or(0.0))?;
    Ok((field, BoundaryCondition::PressureDirichlet(bp.boundary_pressure(&p, grid.r_max()))))
}

/// Approximate Dirac mass at the origin spread over the first `k` cells, at time 0.
pub fn dirac_field(grid: &Arc<RadialGrid>, mass: f64, k: usize) -> Result<Field> {
    dirac_approx(grid.clone(), mass, k)
}

/// `n` logarithmically spaced times from `t0` to `t1` inclusive.
pub fn log_schedule(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![t1],
        _ => (0..n)
            .map(|k| {
                if k + 1 == n {
                    t1
                } else {
                    t0 * (t1 / t0).powf(k as f64 / (n - 1) as f64)
                }
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn schedule_endpoints() {
        let s = log_schedule(0.1, 10.0, 5);
        assert_eq!(s.len(), 5);
        assert_relative_eq!(s[0], 0.1);
        assert_relative_eq!(s[2], 1.0, max_relative = 1e-14);
        assert_eq!(s[4], 10.0);
        assert!(log_schedule(1.0, 2.0, 0).is_empty());
    }

    #[test]
    fn barenblatt_support_must_fit() {
        let g = power_grid(3, 2.0, 0.0, 4.0, 32).unwrap();
        assert!(barenblatt_field(&g, 0.2, 1.0).is_ok());
        assert!(barenblatt_field(&g, 0.2, 1e4).is_err());
    }
}
