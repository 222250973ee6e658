//! TOML run configuration and the objects built from it.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use wpme_core::harness::scenario::{barenblatt_field, blowup_setup, dirac_field};
use wpme_core::harness::{AcSample, EnergyCylinders, InitialMeasure, SmoothingCylinder};
use wpme_core::oracle::{barenblatt_eval, blowup_eval, friendly_giant_solve, BarenblattParams, BlowupParams};
use wpme_core::{BoundaryCondition, Field, Grading, Params, RadialGrid, StepControl, WeightModel};

use crate::Failure;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: Params,
    #[serde(default)]
    pub weight: WeightConfig,
    pub grid: GridConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub boundary: BoundaryConfig,
    #[serde(default)]
    pub control: StepControl,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
    #[serde(default)]
    pub convergence: Option<ConvergenceConfig>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("wpme-output")
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightConfig {
    #[default]
    PurePower,
    Perturbed { amplitude: f64, frequency: f64 },
    /// Two-column `r,rho` table without header.
    Tabulated { path: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub r_max: f64,
    pub cells: usize,
    #[serde(default)]
    pub grading: Grading,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    Barenblatt {
        c1: f64,
        #[serde(default = "default_t0")]
        t0: f64,
    },
    Blowup {
        t_blowup: f64,
        #[serde(default)]
        t0: f64,
    },
    Dirac {
        mass: f64,
        k: usize,
    },
    /// CSV with header `r,u`, interpolated linearly at the cell centres.
    Profile {
        path: PathBuf,
        #[serde(default)]
        t0: f64,
    },
    FriendlyGiant {
        #[serde(default = "one")]
        t0: f64,
    },
}

fn default_t0() -> f64 {
    0.1
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryConfig {
    /// Zero flux, except the exact pressure for blow-up data and homogeneous
    /// Dirichlet for friendly-giant data.
    #[default]
    Auto,
    ZeroFlux,
    HomogeneousDirichlet,
    /// Exact boundary pressure of the blow-up solution named in `initial`.
    BlowupPressure,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub times: Vec<f64>,
    /// Final time; defaults to the last snapshot time.
    #[serde(default)]
    pub t_end: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Level {
    pub cells: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub levels: Vec<Level>,
    #[serde(default = "default_c1")]
    pub c1: f64,
    #[serde(default = "default_t0")]
    pub barenblatt_t0: f64,
    #[serde(default = "one")]
    pub barenblatt_t1: f64,
    #[serde(default = "one")]
    pub t_blowup: f64,
    #[serde(default = "default_blowup_end")]
    pub blowup_t_end: f64,
}

fn default_c1() -> f64 {
    0.2
}

fn default_blowup_end() -> f64 {
    0.5
}

/// One optional block per check; `suite` runs the blocks that are present.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksConfig {
    pub global_smoothing: Option<GlobalSmoothingCheck>,
    pub local_smoothing: Option<LocalSmoothingCheck>,
    pub ac: Option<AcCheck>,
    pub ab_monotonicity: Option<AbCheck>,
    pub contraction: Option<ContractionCheck>,
    pub energy: Option<EnergyCheck>,
    pub sobolev: Option<SobolevCheck>,
    pub scaling: Option<ScalingCheck>,
    pub existence_time: Option<ExistenceTimeCheck>,
    pub mass_conservation: Option<MassCheck>,
    pub flb: Option<FlbCheck>,
    pub delta_recovery: Option<DeltaCheck>,
    pub dual_monotonicity: Option<DualCheck>,
    pub initial_trace: Option<TraceCheck>,
    pub friendly_giant: Option<GiantCheck>,
    pub blowup_tracking: Option<BlowupCheck>,
    pub barenblatt_convergence: Option<BarenblattConvergenceCheck>,
}

pub const CHECK_NAMES: [&str; 17] = [
    "global_smoothing",
    "local_smoothing",
    "ac",
    "ab_monotonicity",
    "contraction",
    "energy",
    "sobolev",
    "scaling",
    "existence_time",
    "mass_conservation",
    "flb",
    "delta_recovery",
    "dual_monotonicity",
    "initial_trace",
    "friendly_giant",
    "blowup_tracking",
    "barenblatt_convergence",
];

impl ChecksConfig {
    /// Names of the configured blocks, in a fixed order.
    pub fn configured(&self) -> Vec<&'static str> {
        let present = [
            self.global_smoothing.is_some(),
            self.local_smoothing.is_some(),
            self.ac.is_some(),
            self.ab_monotonicity.is_some(),
            self.contraction.is_some(),
            self.energy.is_some(),
            self.sobolev.is_some(),
            self.scaling.is_some(),
            self.existence_time.is_some(),
            self.mass_conservation.is_some(),
            self.flb.is_some(),
            self.delta_recovery.is_some(),
            self.dual_monotonicity.is_some(),
            self.initial_trace.is_some(),
            self.friendly_giant.is_some(),
            self.blowup_tracking.is_some(),
            self.barenblatt_convergence.is_some(),
        ];
        CHECK_NAMES.iter().zip(present).filter(|(_, p)| *p).map(|(n, _)| *n).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalSmoothingCheck {
    pub window: [f64; 2],
    #[serde(default = "two_percent")]
    pub tol: f64,
}

fn two_percent() -> f64 {
    0.02
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalSmoothingCheck {
    pub cylinders: Vec<SmoothingCylinder>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub spread_tol: Option<f64>,
}

fn default_eps() -> f64 {
    0.1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcCheck {
    pub initial: InitialMeasure,
    pub samples: Vec<AcSample>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbCheck {
    #[serde(default = "ab_tol")]
    pub tol: f64,
    #[serde(default = "ab_floor")]
    pub floor: f64,
}

fn ab_tol() -> f64 {
    1e-6
}

fn ab_floor() -> f64 {
    1e-12
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractionCheck {
    /// The second run starts from `u_0 + height exp(-((r - center)/width)^2)`.
    pub height: f64,
    pub center: f64,
    pub width: f64,
    #[serde(default = "order_tol")]
    pub order_tol: f64,
    #[serde(default = "contraction_tol")]
    pub contraction_tol: f64,
}

fn order_tol() -> f64 {
    1e-10
}

fn contraction_tol() -> f64 {
    1e-8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyCheck {
    pub cylinders: EnergyCylinders,
    #[serde(default = "two")]
    pub p: f64,
}

fn two() -> f64 {
    2.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SobolevCheck {
    /// Ball radii, each discretized with `grid.cells` shells.
    pub radii: Vec<f64>,
    #[serde(default = "sobolev_count")]
    pub count: usize,
    #[serde(default = "sobolev_width")]
    pub min_width: f64,
}

fn sobolev_count() -> usize {
    120
}

fn sobolev_width() -> f64 {
    0.02
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingCheck {
    pub factor: f64,
    pub horizon: f64,
    pub levels: Vec<Level>,
    #[serde(default = "one_percent")]
    pub tol: f64,
    #[serde(default = "halving")]
    pub min_ratio: f64,
}

fn one_percent() -> f64 {
    0.01
}

fn halving() -> f64 {
    1.8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExistenceTimeCheck {
    /// Amplitudes as multiples of the blow-up coefficient.
    pub kappa_factors: Vec<f64>,
    pub horizon: f64,
    #[serde(default = "three_percent")]
    pub time_tol: f64,
    #[serde(default = "five_percent")]
    pub slope_tol: f64,
}

fn three_percent() -> f64 {
    0.03
}

fn five_percent() -> f64 {
    0.05
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassCheck {
    #[serde(default = "mass_steps")]
    pub steps: usize,
    pub dt: f64,
    #[serde(default = "newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "mass_tol")]
    pub tol: f64,
}

fn mass_steps() -> usize {
    1000
}

fn newton_tol() -> f64 {
    1e-11
}

fn mass_tol() -> f64 {
    1e-9
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlbCheck {
    /// Explicit `[t0, t1, r0]` triples; when empty, every pair of snapshot times is
    /// combined with every probe radius.
    #[serde(default)]
    pub triples: Vec<[f64; 3]>,
    #[serde(default = "flb_radii")]
    pub radii: Vec<f64>,
}

fn flb_radii() -> Vec<f64> {
    vec![0.05, 0.4, 1.0]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaCheck {
    #[serde(default = "delta_ns")]
    pub ns: Vec<f64>,
    #[serde(default = "one")]
    pub support: f64,
    #[serde(default = "delta_tol")]
    pub tol: f64,
}

fn delta_ns() -> Vec<f64> {
    vec![16.0, 32.0, 64.0, 128.0, 256.0]
}

fn delta_tol() -> f64 {
    1e-2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualCheck {
    #[serde(default = "contraction_tol")]
    pub tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceCheck {
    /// Test function `(1 - (r/support)^2)^2`.
    pub support: f64,
    pub times: Vec<f64>,
    pub expected: f64,
    #[serde(default = "two_percent")]
    pub tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GiantCheck {
    #[serde(default = "one")]
    pub t0: f64,
    pub dts: Vec<f64>,
    #[serde(default = "giant_agreement")]
    pub agreement_tol: f64,
    #[serde(default = "giant_residual")]
    pub residual_tol: f64,
    #[serde(default = "halving")]
    pub min_ratio: f64,
}

fn giant_agreement() -> f64 {
    1e-8
}

fn giant_residual() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlowupCheck {
    #[serde(default = "one")]
    pub t_blowup: f64,
    pub gap_window: [f64; 2],
    #[serde(default = "blowup_samples")]
    pub samples: usize,
    #[serde(default = "five_percent")]
    pub slope_tol: f64,
    #[serde(default = "three_percent")]
    pub time_tol: f64,
}

fn blowup_samples() -> usize {
    11
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarenblattConvergenceCheck {
    pub levels: Vec<Level>,
    #[serde(default = "default_c1")]
    pub c1: f64,
    #[serde(default = "default_t0")]
    pub t0: f64,
    #[serde(default = "one")]
    pub t1: f64,
    #[serde(default = "halving")]
    pub min_ratio: f64,
}

impl RunConfig {
    /// Reads and validates a configuration; relative data paths are resolved
    /// against the configuration file's directory.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        let mut config: RunConfig =
            toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let WeightConfig::Tabulated { path } = &mut self.weight {
            fix(path);
        }
        if let InitialConfig::Profile { path, .. } = &mut self.initial {
            fix(path);
        }
    }

    pub fn validate(&self) -> Result<(), Failure> {
        let bad = |msg: String| Err(Failure::Config(msg));
        let s = &self.schedule;
        if s.times.is_empty() {
            return bad("schedule.times: at least one snapshot time is required".into());
        }
        if s.times.iter().any(|t| !t.is_finite()) || s.times.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("schedule.times: times must be finite and strictly increasing".into());
        }
        let start = self.start_time();
        if !(s.times[0] > start) {
            return bad(format!("schedule.times: first time {} must exceed the start time {start}", s.times[0]));
        }
        if self.t_end() < *s.times.last().unwrap() {
            return bad("schedule.t_end: precedes the last snapshot time".into());
        }
        if self.grid.cells == 0 || !(self.grid.r_max > 0.0) {
            return bad("grid: need cells > 0 and r_max > 0".into());
        }
        self.control.validate().map_err(|e| Failure::Config(format!("control: {e}")))?;
        if self.boundary == BoundaryConfig::BlowupPressure && !matches!(self.initial, InitialConfig::Blowup { .. }) {
            return bad("boundary: blowup_pressure requires blowup initial data".into());
        }
        self.weight_model().map(|_| ()).map_err(|e| Failure::Config(format!("weight: {e}")))
    }

    pub fn start_time(&self) -> f64 {
        match self.initial {
            InitialConfig::Barenblatt { t0, .. }
            | InitialConfig::Blowup { t0, .. }
            | InitialConfig::Profile { t0, .. }
            | InitialConfig::FriendlyGiant { t0 } => t0,
            InitialConfig::Dirac { .. } => 0.0,
        }
    }

    pub fn t_end(&self) -> f64 {
        self.schedule.t_end.unwrap_or(*self.schedule.times.last().unwrap_or(&0.0))
    }

    pub fn weight_model(&self) -> wpme_core::Result<WeightModel> {
        let gamma = self.params.gamma();
        match &self.weight {
            WeightConfig::PurePower => WeightModel::pure_power(gamma),
            WeightConfig::Perturbed { amplitude, frequency } => {
                WeightModel::perturbed(gamma, *amplitude, *frequency, self.grid.r_max)
            }
            WeightConfig::Tabulated { path } => {
                let file = fs::File::open(path)
                    .map_err(|e| wpme_core::Error::InvalidWeight(format!("{}: {e}", path.display())))?;
                WeightModel::tabulated_from_csv(gamma, file)
            }
        }
    }

    pub fn grid(&self) -> wpme_core::Result<Arc<RadialGrid>> {
        self.grid_with(self.grid.r_max, self.grid.cells)
    }

    pub fn grid_with(&self, r_max: f64, cells: usize) -> wpme_core::Result<Arc<RadialGrid>> {
        Ok(Arc::new(RadialGrid::new(self.params, self.weight_model()?, r_max, cells, self.grid.grading)?))
    }

    pub fn initial_field(&self, grid: &Arc<RadialGrid>) -> Result<Field, Failure> {
        let field = match &self.initial {
            InitialConfig::Barenblatt { c1, t0 } => barenblatt_field(grid, *c1, *t0)?,
            InitialConfig::Blowup { t_blowup, t0 } => blowup_setup(grid, *t_blowup, *t0)?.0,
            InitialConfig::Dirac { mass, k } => dirac_field(grid, *mass, *k)?,
            InitialConfig::Profile { path, t0 } => {
                let table = read_profile(path)?;
                Field::from_profile(grid.clone(), *t0, |r| interpolate(&table, r))?
            }
            InitialConfig::FriendlyGiant { t0 } => {
                let w = friendly_giant_solve(grid, 1e-13, 10_000)?;
                w.separable(grid.clone(), *t0)?
            }
        };
        Ok(field)
    }

    /// Pointwise initial profile, for checks that rebuild the data on other grids.
    pub fn initial_profile(&self) -> Result<Box<dyn Fn(f64) -> f64 + Send + Sync>, Failure> {
        let p = self.params;
        match &self.initial {
            InitialConfig::Barenblatt { c1, t0 } => {
                let bp = BarenblattParams::new(&p, *c1)?;
                let t0 = *t0;
                Ok(Box::new(move |r| barenblatt_eval(&p, &bp, r, t0).unwrap_or(0.0)))
            }
            InitialConfig::Blowup { t_blowup, t0 } => {
                let bp = BlowupParams::new(&p, *t_blowup)?;
                let t0 = *t0;
                Ok(Box::new(move |r| blowup_eval(&p, &bp, r, t0).unwrap_or(0.0)))
            }
            InitialConfig::Profile { path, .. } => {
                let table = read_profile(path)?;
                Ok(Box::new(move |r| interpolate(&table, r)))
            }
            _ => Err(Failure::Config("initial: this check needs pointwise initial data (barenblatt, blowup or profile)".into())),
        }
    }

    pub fn boundary_condition(&self, grid: &Arc<RadialGrid>) -> Result<BoundaryCondition, Failure> {
        let bc = match (self.boundary, &self.initial) {
            (BoundaryConfig::ZeroFlux, _) => BoundaryCondition::ZeroFlux,
            (BoundaryConfig::HomogeneousDirichlet, _) => BoundaryCondition::HomogeneousDirichlet,
            (BoundaryConfig::Auto | BoundaryConfig::BlowupPressure, InitialConfig::Blowup { t_blowup, .. }) => {
                let bp = BlowupParams::new(&self.params, *t_blowup)?;
                BoundaryCondition::PressureDirichlet(bp.boundary_pressure(&self.params, grid.r_max()))
            }
            (BoundaryConfig::Auto, InitialConfig::FriendlyGiant { .. }) => BoundaryCondition::HomogeneousDirichlet,
            (BoundaryConfig::Auto, _) => BoundaryCondition::ZeroFlux,
            (BoundaryConfig::BlowupPressure, _) => {
                return Err(Failure::Config("boundary: blowup_pressure requires blowup initial data".into()))
            }
        };
        Ok(bc)
    }

    /// JSON rendering of the configuration embedded in every output.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }
}

#[derive(Deserialize)]
struct ProfileRow {
    r: f64,
    u: f64,
}

fn read_profile(path: &Path) -> Result<Vec<(f64, f64)>, Failure> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (line, row) in rdr.deserialize::<ProfileRow>().enumerate() {
        let row = row.map_err(|e| Failure::Config(format!("{}: row {}: {e}", path.display(), line + 2)))?;
        rows.push((row.r, row.u));
    }
    if rows.is_empty() || rows.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Failure::Config(format!("{}: need increasing radii", path.display())));
    }
    Ok(rows)
}

/// Linear interpolation, constant beyond the table ends.
fn interpolate(table: &[(f64, f64)], r: f64) -> f64 {
    let k = table.partition_point(|(x, _)| *x <= r);
    if k == 0 {
        return table[0].1;
    }
    if k == table.len() {
        return table[k - 1].1;
    }
    let ((x0, y0), (x1, y1)) = (table[k - 1], table[k]);
    y0 + (y1 - y0) * (r - x0) / (x1 - x0)
}
