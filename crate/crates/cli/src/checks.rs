//! Dispatch from check names to harness checks.

use std::sync::OnceLock;

use wpme_core::harness::scenario::power_grid;
use wpme_core::harness::*;
use wpme_core::oracle::blowup_coefficient;
use wpme_core::solver::evolve;
use wpme_core::{BoundaryCondition, Field, Trajectory};

use crate::config::{Level, RunConfig, CHECK_NAMES};
use crate::Failure;

/// The configured run, computed at most once and shared between checks.
pub struct Context<'a> {
    pub config: &'a RunConfig,
    run: OnceLock<Result<Trajectory, Failure>>,
}

impl<'a> Context<'a> {
    pub fn new(config: &'a RunConfig) -> Self {
        Self { config, run: OnceLock::new() }
    }

    pub fn trajectory(&self) -> Result<&Trajectory, Failure> {
        self.run.get_or_init(|| solve(self.config)).as_ref().map_err(Clone::clone)
    }
}

/// Evolves the configured initial data through the schedule.
pub fn solve(config: &RunConfig) -> Result<Trajectory, Failure> {
    let grid = config.grid()?;
    let u0 = config.initial_field(&grid)?;
    let bc = config.boundary_condition(&grid)?;
    Ok(evolve(&u0, config.t_end(), &bc, &config.control, &config.schedule.times)?)
}

fn levels(config: &RunConfig, levels: &[Level]) -> Result<Vec<Resolution>, Failure> {
    levels
        .iter()
        .map(|l| Ok(Resolution { grid: config.grid_with(config.grid.r_max, l.cells)?, dt: l.dt }))
        .collect()
}

fn missing(name: &str) -> Failure {
    Failure::Config(format!("checks.{name}: block missing from the configuration"))
}

pub fn run_check(ctx: &Context, name: &str) -> Result<EstimateReport, Failure> {
    let config = ctx.config;
    let checks = &config.checks;
    let report = match name {
        "global_smoothing" => {
            let c = checks.global_smoothing.as_ref().ok_or_else(|| missing(name))?;
            check_global_smoothing(ctx.trajectory()?, (c.window[0], c.window[1]), c.tol)?
        }
        "local_smoothing" => {
            let c = checks.local_smoothing.as_ref().ok_or_else(|| missing(name))?;
            check_local_smoothing(ctx.trajectory()?, &c.cylinders, c.eps, c.spread_tol)?
        }
        "ac" => {
            let c = checks.ac.as_ref().ok_or_else(|| missing(name))?;
            check_ac(ctx.trajectory()?, c.initial, &c.samples)?
        }
        "ab_monotonicity" => {
            let c = checks.ab_monotonicity.as_ref().ok_or_else(|| missing(name))?;
            check_ab_monotonicity(ctx.trajectory()?, c.tol, c.floor)?
        }
        "contraction" => {
            let c = checks.contraction.as_ref().ok_or_else(|| missing(name))?;
            let grid = config.grid()?;
            let u0 = config.initial_field(&grid)?;
            let bump: Vec<f64> = u0
                .values()
                .iter()
                .zip(grid.centers())
                .map(|(u, r)| u + c.height * (-((r - c.center) / c.width).powi(2)).exp())
                .collect();
            let v0 = u0.with_values(bump, u0.time())?;
            let bc = config.boundary_condition(&grid)?;
            let run = |f: &Field| evolve(f, config.t_end(), &bc, &config.control, &config.schedule.times);
            check_contraction_and_comparison(ctx.trajectory()?, &run(&v0)?, c.order_tol, c.contraction_tol)?
        }
        "energy" => {
            let c = checks.energy.as_ref().ok_or_else(|| missing(name))?;
            check_energy(ctx.trajectory()?, c.cylinders, c.p)?
        }
        "sobolev" => {
            let c = checks.sobolev.as_ref().ok_or_else(|| missing(name))?;
            let grids = c
                .radii
                .iter()
                .map(|&r| config.grid_with(r, config.grid.cells))
                .collect::<wpme_core::Result<Vec<_>>>()?;
            check_sobolev(&grids, &sobolev_family(config.seed, c.count, c.min_width))?
        }
        "scaling" => {
            let c = checks.scaling.as_ref().ok_or_else(|| missing(name))?;
            let profile = config.initial_profile()?;
            check_scaling(&levels(config, &c.levels)?, profile, c.horizon, c.factor, c.tol, c.min_ratio)?
        }
        "existence_time" => {
            let c = checks.existence_time.as_ref().ok_or_else(|| missing(name))?;
            let grid = config.grid()?;
            let kstar = blowup_coefficient(grid.params());
            let kappas: Vec<f64> = c.kappa_factors.iter().map(|f| f * kstar).collect();
            check_existence_time(&grid, &kappas, c.horizon, &config.control, c.time_tol, c.slope_tol)?
        }
        "mass_conservation" => {
            let c = checks.mass_conservation.as_ref().ok_or_else(|| missing(name))?;
            let grid = config.grid()?;
            check_mass_conservation(&config.initial_field(&grid)?, c.steps, c.dt, c.newton_tol, c.tol)?
        }
        "flb" => {
            let c = checks.flb.as_ref().ok_or_else(|| missing(name))?;
            let traj = ctx.trajectory()?;
            let triples: Vec<(f64, f64, f64)> = if c.triples.is_empty() {
                let times: Vec<f64> = traj.times().into_iter().filter(|t| *t > 0.0).collect();
                let mut out = Vec::new();
                for (i, &t0) in times.iter().enumerate() {
                    for &t1 in &times[i..] {
                        out.extend(c.radii.iter().map(|&r| (t0, t1, r)));
                    }
                }
                out
            } else {
                c.triples.iter().map(|t| (t[0], t[1], t[2])).collect()
            };
            check_flb(traj, &triples)?
        }
        "delta_recovery" => {
            let c = checks.delta_recovery.as_ref().ok_or_else(|| missing(name))?;
            let s = c.support;
            let bump = move |r: f64| if r < s { (-r * r / (s * s - r * r)).exp() } else { 0.0 };
            check_delta_recovery(config.params.dim(), bump, s, &c.ns, c.tol)?
        }
        "dual_monotonicity" => {
            let c = checks.dual_monotonicity.as_ref().ok_or_else(|| missing(name))?;
            check_dual_monotonicity(ctx.trajectory()?, c.tol)?
        }
        "initial_trace" => {
            let c = checks.initial_trace.as_ref().ok_or_else(|| missing(name))?;
            let s = c.support;
            let phi = move |r: f64| (1.0 - (r / s).powi(2)).max(0.0).powi(2);
            check_initial_trace(ctx.trajectory()?, phi, s, &c.times, c.expected, c.tol)?
        }
        "friendly_giant" => {
            let c = checks.friendly_giant.as_ref().ok_or_else(|| missing(name))?;
            let grid = config.grid()?;
            let r_max = grid.r_max();
            let alt: Vec<f64> = grid.centers().iter().map(|r| 5.0 * (1.0 - (r / r_max).powi(2))).collect();
            check_friendly_giant(&grid, &alt, c.t0, &c.dts, c.agreement_tol, c.residual_tol, c.min_ratio)?
        }
        "blowup_tracking" => {
            let c = checks.blowup_tracking.as_ref().ok_or_else(|| missing(name))?;
            let grid = config.grid()?;
            let window = (c.gap_window[0], c.gap_window[1]);
            check_blowup_tracking(&grid, c.t_blowup, &config.control, window, c.samples, c.slope_tol, c.time_tol)?
        }
        "barenblatt_convergence" => {
            let c = checks.barenblatt_convergence.as_ref().ok_or_else(|| missing(name))?;
            check_barenblatt_convergence(&levels(config, &c.levels)?, c.c1, c.t0, c.t1, c.min_ratio)?
        }
        other => {
            return Err(Failure::Config(format!(
                "unknown check `{other}`; expected one of: {}",
                CHECK_NAMES.join(", ")
            )))
        }
    };
    Ok(report)
}

/// Rows `(study, cells, dt, error, order)` for the Barenblatt and blow-up comparisons.
pub fn convergence_rows(config: &RunConfig) -> Result<Vec<(String, ConvergenceRow)>, Failure> {
    let c = config
        .convergence
        .as_ref()
        .ok_or_else(|| Failure::Config("convergence: block missing from the configuration".into()))?;
    if c.levels.is_empty() {
        return Err(Failure::Config("convergence.levels: at least one resolution is required".into()));
    }
    let p = config.params;
    let mut rows = Vec::new();
    let mut barenblatt = Vec::new();
    let mut blowup = Vec::new();
    for l in &c.levels {
        let grid = power_grid(p.dim(), p.m(), p.gamma(), config.grid.r_max, l.cells)?;
        barenblatt.push((l.cells, l.dt, barenblatt_error(&grid, c.c1, c.barenblatt_t0, c.barenblatt_t1, l.dt)?));
        blowup.push((l.cells, l.dt, blowup_error(&grid, c.t_blowup, c.blowup_t_end, l.dt)?));
    }
    rows.extend(convergence_table(&barenblatt).into_iter().map(|r| ("barenblatt".to_string(), r)));
    rows.extend(convergence_table(&blowup).into_iter().map(|r| ("blowup".to_string(), r)));
    Ok(rows)
}

/// Boundary condition label for the manifest.
pub fn describe_boundary(bc: &BoundaryCondition) -> &'static str {
    match bc {
        BoundaryCondition::ZeroFlux => "zero_flux",
        BoundaryCondition::HomogeneousDirichlet => "homogeneous_dirichlet",
        BoundaryCondition::PressureDirichlet(_) => "pressure_dirichlet",
    }
}
