//! One experiment: data, inversion, artifacts.
//!
//! Output directory layout:
//!
//! ```text
//! manifest.json        resolved config, seeds, version
//! measurement.csv/json boundary data and its provenance
//! history.csv          iter,J,R_tikhonov,perimeter,J_total,mu_in,rho,step
//! polylines/iter_NNNNN.csv
//! vtk/iter_NNNNN.vtk   when output.vtk_every > 0
//! kernel.csv           x,y,G,Vn at the last iteration
//! mesh.txt             final mesh
//! summary.json
//! ```

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use dotshape::geometry::hausdorff_distance;
use dotshape::io::{
    load_measurement, save_measurement, write_history, write_kernel, write_polyline, write_vtk, MeasurementSidecar,
};
use dotshape::mesh::{build_disk_mesh_seeded, interface_normals};
use dotshape::optimizer::{run_observed, IterationView, Problem, RunResult, StopReason};
use dotshape::synth::{add_noise, generate_measurement, DATA_MESH_SEED};
use dotshape::fem::Measurement;
use dotshape::Polyline;
use serde::{Deserialize, Serialize};

use crate::{CliError, RunConfig};

/// Spacing used to sample the exact interface for the Hausdorff distance.
const REFERENCE_SPACING: f64 = 0.005;

/// Command-line overrides applied on top of a config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub max_iters: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, mut cfg: RunConfig) -> Result<RunConfig, CliError> {
        if let Some(out) = &self.out {
            cfg.output.dir = Some(out.clone());
        }
        if let Some(seed) = self.seed {
            cfg.noise.seed = seed;
        }
        if let Some(n) = self.max_iters {
            cfg.optimizer.max_iters = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub stop: StopReason,
    pub iterations: usize,
    pub final_misfit: f64,
    pub final_total: f64,
    pub mu_in: f64,
    pub mu_in_exact: Option<f64>,
    /// Distance from the final interface to the exact one.
    pub hausdorff: Option<f64>,
    pub min_signed_area: f64,
    pub max_riesz_residual: f64,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    name: &'a str,
    version: &'a str,
    noise_seed: u64,
    mesh_seed: u64,
    data_mesh_seed: u64,
    data: &'a str,
    config: &'a RunConfig,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: Summary,
    pub result: RunResult,
    pub measurement: Measurement,
    pub out_dir: PathBuf,
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Validation(format!("output directory {} is not writable: {e}", dir.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Validation(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Synthesizes or loads the boundary data described by `cfg`.
pub fn measurement_for(cfg: &RunConfig) -> Result<(Measurement, MeasurementSidecar), CliError> {
    if let Some(path) = &cfg.data.file {
        let (mut h, side) = load_measurement(path)?;
        if let Some(mask) = cfg.mask() {
            h.mask = Some(mask);
        }
        return Ok((h, side));
    }
    let exact = cfg.exact.as_ref().ok_or_else(|| CliError::Validation("no exact interface".into()))?;
    let c = cfg.true_coefficients();
    let clean = generate_measurement(cfg.domain.radius, exact, &c, &cfg.source, cfg.mesh.h_fine, cfg.mask())?;
    let h = add_noise(&clean, cfg.noise())?;
    let side = MeasurementSidecar {
        curve: exact.clone(),
        coefficients: c,
        source: cfg.source.clone(),
        h_fine: cfg.mesh.h_fine,
        gamma: cfg.noise.gamma,
        seed: cfg.noise.seed,
        domain_radius: cfg.domain.radius,
        perimeter: h.perimeter,
        mask: h.mask.clone(),
    };
    Ok((h, side))
}

/// Runs `cfg` and writes every artifact into its output directory.
pub fn run_experiment(cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let out = cfg.output_dir();
    create_dir(&out)?;
    if cfg.output.polylines {
        create_dir(&out.join("polylines"))?;
    }
    if cfg.output.vtk_every > 0 {
        create_dir(&out.join("vtk"))?;
    }
    let manifest = Manifest {
        name: &cfg.name,
        version: env!("CARGO_PKG_VERSION"),
        noise_seed: cfg.noise.seed,
        mesh_seed: cfg.mesh.seed,
        data_mesh_seed: DATA_MESH_SEED,
        data: if cfg.data.file.is_some() { "file" } else { "synthesized" },
        config: cfg,
    };
    write_json(&out.join("manifest.json"), &manifest)?;

    let (h, sidecar) = measurement_for(cfg)?;
    save_measurement(&out, "measurement", &h, &sidecar)?;

    let mesh = build_disk_mesh_seeded(cfg.domain.radius, cfg.mesh.h_inv, &cfg.initial, cfg.mesh.seed)?;
    let problem = Problem {
        mesh,
        coefficients: cfg.initial_coefficients(),
        source: cfg.source.clone(),
        measurement: h.clone(),
    };
    let mut io_error: Option<CliError> = None;
    let mut last_kernel: Option<Vec<u8>> = None;
    let result = run_observed(&cfg.optimizer_config(), problem, |view: &IterationView| {
        if io_error.is_some() {
            return;
        }
        if let Err(e) = write_iteration(cfg, &out, view, &mut last_kernel) {
            io_error = Some(e);
        }
    })?;
    if let Some(e) = io_error {
        return Err(e);
    }
    if let Some(k) = last_kernel {
        fs::write(out.join("kernel.csv"), k)?;
    }
    write_history(BufWriter::new(File::create(out.join("history.csv"))?), &result.records)?;
    fs::write(out.join("mesh.txt"), result.mesh.to_text())?;

    let summary = summarize(cfg, &result)?;
    write_json(&out.join("summary.json"), &summary)?;
    Ok(Outcome { summary, result, measurement: h, out_dir: out })
}

fn write_iteration(
    cfg: &RunConfig,
    out: &Path,
    view: &IterationView,
    last_kernel: &mut Option<Vec<u8>>,
) -> Result<(), CliError> {
    let k = view.record.iter;
    if cfg.output.polylines {
        let f = File::create(out.join("polylines").join(format!("iter_{k:05}.csv")))?;
        write_polyline(BufWriter::new(f), &view.record.interface)?;
    }
    if cfg.output.vtk_every > 0 && k % cfg.output.vtk_every == 0 {
        let vx: Vec<f64> = view.field.values.iter().map(|v| v.x).collect();
        let vy: Vec<f64> = view.field.values.iter().map(|v| v.y).collect();
        let f = File::create(out.join("vtk").join(format!("iter_{k:05}.vtk")))?;
        write_vtk(
            BufWriter::new(f),
            view.mesh,
            &[("u", &view.state.values), ("p", &view.adjoint.values), ("Vx", &vx), ("Vy", &vy)],
        )?;
    }
    let normals = interface_normals(view.mesh)?;
    let mut buf = Vec::new();
    write_kernel(&mut buf, view.mesh, &normals, view.kernel, view.field)?;
    *last_kernel = Some(buf);
    Ok(())
}

/// Reference polyline of the exact interface, if known.
pub fn exact_polyline(cfg: &RunConfig) -> Result<Option<Polyline>, CliError> {
    match &cfg.exact {
        Some(c) => Ok(Some(c.sample_by_spacing(REFERENCE_SPACING)?)),
        None => Ok(None),
    }
}

fn summarize(cfg: &RunConfig, result: &RunResult) -> Result<Summary, CliError> {
    let last = result.records.last().ok_or_else(|| CliError::Validation("run produced no iterations".into()))?;
    let hausdorff = exact_polyline(cfg)?.map(|p| hausdorff_distance(&last.interface, &p));
    Ok(Summary {
        name: cfg.name.clone(),
        stop: result.stop.clone(),
        iterations: last.iter,
        final_misfit: last.cost.misfit,
        final_total: last.cost.total,
        mu_in: last.mu_in,
        mu_in_exact: cfg.exact.as_ref().map(|_| cfg.coefficients.mu_in),
        hausdorff,
        min_signed_area: result.records.iter().map(|r| r.min_signed_area).fold(f64::INFINITY, f64::min),
        max_riesz_residual: result.records.iter().map(|r| r.riesz_residual).fold(0.0, f64::max),
    })
}

/// Exit status for a finished run: 3 after a solver failure, 4 after a
/// step failure or a mesh-quality abort, 0 otherwise.
pub fn exit_code(stop: &StopReason) -> i32 {
    match stop {
        StopReason::SolverFailure(_) => 3,
        StopReason::StepFailure(_) | StopReason::MeshQuality(_) => 4,
        _ => 0,
    }
}
