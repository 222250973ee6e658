use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde_json::json;
use wpme_core::harness::{ConvergenceRow, EstimateReport};
use wpme_core::Trajectory;

use crate::config::RunConfig;
use crate::Failure;

fn io_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

/// `snap_<index>_<time>.csv` with header `r,u` and 17 significant digits.
pub fn write_snapshots(dir: &Path, traj: &Trajectory) -> Result<Vec<String>, Failure> {
    let mut names = Vec::new();
    for (k, snap) in traj.snapshots().iter().enumerate() {
        let name = format!("snap_{k:04}_{:.6e}.csv", snap.time());
        let path = dir.join(&name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
        w.write_record(["r", "u"]).map_err(|e| io_err(&path, e))?;
        for (r, u) in snap.grid().centers().iter().zip(snap.values()) {
            w.write_record([format!("{r:.16e}"), format!("{u:.16e}")]).map_err(|e| io_err(&path, e))?;
        }
        w.flush().map_err(|e| io_err(&path, e))?;
        names.push(name);
    }
    Ok(names)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), Failure> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_err(path, e))?;
    writeln!(w).map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_manifest(dir: &Path, config: &RunConfig, traj: &Trajectory, files: &[String]) -> Result<(), Failure> {
    let grid = traj.grid();
    let bc = config.boundary_condition(grid)?;
    let snapshots: Vec<_> = traj
        .snapshots()
        .iter()
        .zip(files)
        .enumerate()
        .map(|(k, (s, f))| {
            json!({
                "index": k,
                "time": s.time(),
                "file": f,
                "mass": s.mass(),
                "sup": s.sup_norm(),
                "pressure_integral": traj.pressure_integral()[k],
            })
        })
        .collect();
    let inflow: f64 = traj.boundary_flux().iter().sum();
    let manifest = json!({
        "config": config.to_json(),
        "params": grid.params(),
        "scaling": grid.params().scaling(),
        "weight": grid.weight(),
        "cells": grid.len(),
        "r_max": grid.r_max(),
        "boundary": crate::checks::describe_boundary(&bc),
        "blowup_time": traj.blowup_time(),
        "mass_ledger": {
            "initial": traj.first().mass(),
            "final": traj.last().mass(),
            "boundary_inflow": inflow,
            "boundary_flux": traj.boundary_flux(),
            "imbalance": traj.last().mass() - traj.first().mass() - inflow,
        },
        "snapshots": snapshots,
    });
    write_json(&dir.join("manifest.json"), &manifest)
}

pub fn write_report(path: &Path, config: &RunConfig, report: &EstimateReport) -> Result<(), Failure> {
    write_json(path, &json!({ "config": config.to_json(), "report": report }))
}

pub fn write_suite(path: &Path, config: &RunConfig, reports: &[EstimateReport]) -> Result<(), Failure> {
    let pass = reports.iter().all(|r| r.pass);
    write_json(path, &json!({ "config": config.to_json(), "pass": pass, "reports": reports }))
}

pub fn write_convergence(path: &Path, rows: &[(String, ConvergenceRow)]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(["study", "cells", "dt", "error", "order"]).map_err(|e| io_err(path, e))?;
    for (study, r) in rows {
        let order = r.order.map_or(String::new(), |o| format!("{o:.16e}"));
        w.write_record([study.clone(), r.cells.to_string(), format!("{:.16e}", r.dt), format!("{:.16e}", r.error), order])
            .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}
