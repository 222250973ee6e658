//! Cell-centred radial meshes, field snapshots and trajectories.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Params;
use crate::weights::{cell_mass, WeightModel};

/// Smallest accepted cell count.
pub const MIN_CELLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Grading {
    #[default]
    Uniform,
    /// Consecutive widths grow by `ratio`.
    Geometric { ratio: f64 },
}

/// Partition `0 = r_0 < r_1 < ... < r_K = R_max` of the ball `B_{R_max}` into shells.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    params: Params,
    weight: WeightModel,
    edges: Vec<f64>,
    centers: Vec<f64>,
    volumes: Vec<f64>,
    masses: Vec<f64>,
}

impl RadialGrid {
    pub fn new(
        params: Params,
        weight: WeightModel,
        r_max: f64,
        cells: usize,
        grading: Grading,
    ) -> Result<Self> {
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::InvalidGrid(format!("R_max must be positive, got {r_max}")));
        }
        if cells < MIN_CELLS {
            return Err(Error::InvalidGrid(format!("need at least {MIN_CELLS} cells, got {cells}")));
        }
        let edges = match grading {
            Grading::Uniform => (0..=cells).map(|i| r_max * i as f64 / cells as f64).collect::<Vec<_>>(),
            Grading::Geometric { ratio } => {
                if !(ratio > 1.0 && ratio.is_finite()) {
                    return Err(Error::InvalidGrid(format!("geometric ratio must exceed 1, got {ratio}")));
                }
                let first = r_max * (ratio - 1.0) / (ratio.powi(cells as i32) - 1.0);
                let mut edges = Vec::with_capacity(cells + 1);
                let (mut r, mut w) = (0.0, first);
                edges.push(0.0);
                for _ in 0..cells {
                    r += w;
                    w *= ratio;
                    edges.push(r);
                }
                edges[cells] = r_max;
                edges
            }
        };
        Self::from_edges(params, weight, edges)
    }

    /// Grid with explicit edges; `edges[0]` must be zero.
    pub fn from_edges(params: Params, weight: WeightModel, edges: Vec<f64>) -> Result<Self> {
        if edges.len() < MIN_CELLS + 1 {
            return Err(Error::InvalidGrid(format!("need at least {MIN_CELLS} cells")));
        }
        if edges[0] != 0.0 {
            return Err(Error::InvalidGrid("first edge must be the origin".into()));
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) || !edges[edges.len() - 1].is_finite() {
            return Err(Error::InvalidGrid("edges must be strictly increasing and finite".into()));
        }
        let dim = params.dim();
        let omega = params.sphere_area();
        let n = dim as f64;
        let centers = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let volumes = edges
            .windows(2)
            .map(|w| omega * (w[1].powi(dim as i32) - w[0].powi(dim as i32)) / n)
            .collect();
        let masses: Vec<f64> = edges
            .windows(2)
            .map(|w| cell_mass(&weight, w[0], w[1], &params))
            .collect();
        if masses.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::InvalidGrid("non-positive weighted cell mass".into()));
        }
        Ok(Self {
            params,
            weight,
            edges,
            centers,
            volumes,
            masses,
        })
    }

    /// Every cell split in two.
    pub fn refined(&self) -> Result<Self> {
        let mut edges = Vec::with_capacity(2 * self.edges.len() - 1);
        for w in self.edges.windows(2) {
            edges.push(w[0]);
            edges.push(0.5 * (w[0] + w[1]));
        }
        edges.push(self.r_max());
        Self::from_edges(self.params, self.weight.clone(), edges)
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn weight(&self) -> &WeightModel {
        &self.weight
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn r_max(&self) -> f64 {
        self.edges[self.edges.len() - 1]
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn width(&self, i: usize) -> f64 {
        self.edges[i + 1] - self.edges[i]
    }

    /// Euclidean volumes of the shells.
    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    /// Weighted masses `int_shell rho dx`.
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Index of the cell containing `r` (the last cell for `r = R_max`).
    pub fn cell_index(&self, r: f64) -> Result<usize> {
        if !(r >= 0.0 && r <= self.r_max()) {
            return Err(Error::OutsideGrid { r, r_max: self.r_max() });
        }
        Ok(self.edges.partition_point(|&e| e <= r).saturating_sub(1).min(self.len() - 1))
    }

    /// Weighted mass of each cell inside `B_R`: `(index, mass)` pairs, the last one
    /// possibly partial.
    pub fn ball_masses(&self, radius: f64) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.len() {
            let (a, b) = (self.edges[i], self.edges[i + 1]);
            if a >= radius {
                break;
            }
            if b <= radius {
                out.push((i, self.masses[i]));
            } else {
                out.push((i, cell_mass(&self.weight, a, radius, &self.params)));
            }
        }
        out
    }

    /// Transmissibility of the interior face between cells `i` and `i + 1`:
    /// `omega r_{i+1}^{N-1} / (c_{i+1} - c_i)`.
    pub fn face_coefficient(&self, i: usize) -> f64 {
        let r = self.edges[i + 1];
        self.params.sphere_area() * r.powi(self.dim() as i32 - 1) / (self.centers[i + 1] - self.centers[i])
    }

    /// Transmissibility of the outer face, using the half-cell distance to `R_max`.
    pub fn boundary_coefficient(&self) -> f64 {
        let r = self.r_max();
        let c = self.centers[self.len() - 1];
        self.params.sphere_area() * r.powi(self.dim() as i32 - 1) / (r - c)
    }

    /// Area of the sphere of radius `r`.
    pub fn face_area(&self, r: f64) -> f64 {
        self.params.sphere_area() * r.powi(self.dim() as i32 - 1)
    }

    /// rho-weighted cell averages of `f`.
    pub fn project(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let (a, b) = (self.edges[i], self.edges[i + 1]);
                self.weight.shell_integral(self.dim(), a, b, &f) / self.masses[i]
            })
            .collect()
    }

    /// Values of `f` at the cell centres.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.centers.iter().map(|&r| f(r)).collect()
    }

    /// `int_{B_R} f rho dx` for a general radial `f`.
    pub fn weighted_integral(&self, radius: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.weight.shell_integral(self.dim(), 0.0, radius.min(self.r_max()), f)
    }
}

/// Value-per-cell snapshot of a solution at a time stamp.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
    time: f64,
}

impl Field {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Mismatch(format!(
                "field has {} values for {} cells",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { time });
        }
        if !(time >= 0.0 && time.is_finite()) {
            return Err(Error::InvalidArgument(format!("time stamp {time} must be finite and >= 0")));
        }
        Ok(Self { grid, values, time })
    }

    pub fn zeros(grid: Arc<RadialGrid>, time: f64) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![0.0; n], time)
    }

    pub fn constant(grid: Arc<RadialGrid>, value: f64, time: f64) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![value; n], time)
    }

    /// rho-weighted cell averages of a radial profile.
    pub fn from_profile(grid: Arc<RadialGrid>, time: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.project(f);
        Self::new(grid, values, time)
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn with_values(&self, values: Vec<f64>, time: f64) -> Result<Self> {
        Self::new(Arc::clone(&self.grid), values, time)
    }

    pub fn with_time(&self, time: f64) -> Result<Self> {
        Self::new(Arc::clone(&self.grid), self.values.clone(), time)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        self.with_values(self.values.iter().map(|v| v * factor).collect(), self.time)
    }

    /// `sum_i m_i u_i`.
    pub fn mass(&self) -> f64 {
        self.values.iter().zip(self.grid.masses()).map(|(u, m)| u * m).sum()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// `sum_i m_i |u_i - v_i|`.
    pub fn l1_distance(&self, other: &Field) -> Result<f64> {
        if self.values.len() != other.values.len() {
            return Err(Error::Mismatch("fields on different grids".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .zip(self.grid.masses())
            .map(|((a, b), m)| (a - b).abs() * m)
            .sum())
    }
}

/// Ordered snapshots of one run, with the boundary bookkeeping needed to close
/// the mass balance and to build the dual potential.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    snapshots: Vec<Field>,
    boundary_flux: Vec<f64>,
    pressure_integral: Vec<f64>,
    blowup_time: Option<f64>,
}

impl Trajectory {
    /// `boundary_flux[k]` is the mass that entered through `|x| = R_max` between
    /// snapshots `k` and `k + 1`; `pressure_integral[k]` is `int_{t_0}^{t_k} u^m(R_max, s) ds`.
    pub fn new(
        snapshots: Vec<Field>,
        boundary_flux: Vec<f64>,
        pressure_integral: Vec<f64>,
        blowup_time: Option<f64>,
    ) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::InsufficientData("trajectory without snapshots".into()));
        }
        if snapshots.windows(2).any(|w| !(w[1].time() > w[0].time())) {
            return Err(Error::InvalidArgument("snapshot times must be strictly increasing".into()));
        }
        if boundary_flux.len() + 1 != snapshots.len() {
            return Err(Error::Mismatch("flux ledger length must be snapshot count - 1".into()));
        }
        if pressure_integral.len() != snapshots.len() {
            return Err(Error::Mismatch("pressure history length must equal snapshot count".into()));
        }
        let grid = snapshots[0].grid();
        if snapshots.iter().any(|s| !Arc::ptr_eq(s.grid(), grid) && **s.grid() != **grid) {
            return Err(Error::Mismatch("snapshots live on different grids".into()));
        }
        Ok(Self {
            snapshots,
            boundary_flux,
            pressure_integral,
            blowup_time,
        })
    }

    /// Snapshots without boundary bookkeeping (exact or synthetic data).
    pub fn from_snapshots(snapshots: Vec<Field>) -> Result<Self> {
        let n = snapshots.len();
        Self::new(snapshots, vec![0.0; n.saturating_sub(1)], vec![0.0; n], None)
    }

    pub fn snapshots(&self) -> &[Field] {
        &self.snapshots
    }

    pub fn boundary_flux(&self) -> &[f64] {
        &self.boundary_flux
    }

    pub fn pressure_integral(&self) -> &[f64] {
        &self.pressure_integral
    }

    pub fn blowup_time(&self) -> Option<f64> {
        self.blowup_time
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        self.snapshots[0].grid()
    }

    pub fn first(&self) -> &Field {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &Field {
        &self.snapshots[self.snapshots.len() - 1]
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(Field::time).collect()
    }

    /// Index of the snapshot whose time matches `t` to a relative `1e-9`.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        self.snapshots
            .iter()
            .position(|s| (s.time() - t).abs() <= 1e-9 * t.abs().max(1e-300))
    }

    /// Snapshots with time stamps in `[t0, t1]`.
    pub fn window(&self, t0: f64, t1: f64) -> Vec<&Field> {
        let eps = 1e-12 * t1.abs().max(1.0);
        self.snapshots
            .iter()
            .filter(|s| s.time() >= t0 - eps && s.time() <= t1 + eps)
            .collect()
    }

    /// Snapshots in reverse time order, re-stamped with the original times.
    /// Used as an injected violation for monotonicity checks.
    pub fn time_reversed(&self) -> Result<Self> {
        let times = self.times();
        let snaps = self
            .snapshots
            .iter()
            .rev()
            .zip(&times)
            .map(|(s, &t)| s.with_time(t))
            .collect::<Result<Vec<_>>>()?;
        Self::from_snapshots(snaps)
    }
}
