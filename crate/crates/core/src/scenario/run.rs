//! Sweep execution and the on-disk layout of a run.
//!
//! ```text
//! out/
//!   manifest.json      schema, config hash, meshes, per-point status
//!   scenario.toml      resolved configuration
//!   results.csv        one row per sweep point
//!   gamma.csv          x,gamma_x,gamma_y,condition,nu,converged (stationary)
//!   convergence.csv    manufactured-solution errors and orders (mms only)
//!   mesh_<k>.msh       meshes used by the points
//!   points/<id>/       newton.csv, solution.vtk, diagnostics.csv, capture_<step>.vtk
//! ```
//!
//! Nothing time- or host-dependent is written, so identical configurations
//! produce identical files.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mms::{self, Manufactured, MmsErrors};
use super::{Forcing, Geometry, InitialData, Mode, Nu, Scenario, SweepPoint};
use crate::boundary::{build_lifting, BoundarySpec, OutflowKind};
use crate::fem::{self, FESystem, State};
use crate::mesh::{save_mesh, BoundaryTag, MeshStats};
use crate::nonlinear::{energy_identity, newton_solve_homogeneous, newton_solve_nonhomogeneous, NewtonReport};
use crate::output::{save_csv, save_json, save_vtk, sha256_hex, write_atomic, VtkFields};
use crate::postprocess::{field_norms, nonlinear_outflow, solve_stream_function, FieldNorms, StreamDatum};
use crate::timestepper::{default_initial_velocity, run_transient};

pub const MANIFEST_SCHEMA: &str = "cbcflow.run/1";

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    /// Sweep points solved concurrently; 0 picks the core count.
    pub workers: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("mesh for {geometry}: {message}")]
    Mesh { geometry: String, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    /// Stationary solve converged.
    Converged,
    /// Stationary solve stopped without meeting the tolerance.
    Diverged,
    /// Transient run reached the final time.
    Completed,
    /// Transient run stopped at a failing step.
    Incomplete,
    /// The point could not be set up or solved at all.
    Failed,
}

impl PointStatus {
    pub fn is_success(self) -> bool {
        matches!(self, PointStatus::Converged | PointStatus::Completed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonSummary {
    pub iterations: usize,
    pub final_residual: f64,
    pub residuals: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fitted_order: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub continuation: Vec<f64>,
}

impl NewtonSummary {
    fn from_report(r: &NewtonReport) -> Self {
        NewtonSummary {
            iterations: r.iterations,
            final_residual: r.final_residual(),
            residuals: r.residuals.clone(),
            fitted_order: r.fitted_order().filter(|o| o.is_finite()),
            reason: r.reason.as_ref().map(|x| x.to_string()),
            continuation: r.continuation.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureRecord {
    pub step: usize,
    pub t: f64,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransientSummary {
    pub dt: f64,
    pub steps_requested: usize,
    pub steps_taken: usize,
    pub t_reached: f64,
    pub captures: Vec<CaptureRecord>,
    pub max_div_residual: f64,
    pub final_rate: f64,
    pub projected_feet: usize,
    pub max_cfl: f64,
    #[serde(default)]
    pub max_outflow_cfl: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub id: String,
    /// Directory relative to the run root.
    pub dir: String,
    pub condition: OutflowKind,
    pub nu: Nu,
    pub nu_value: f64,
    /// Index into [`RunManifest::meshes`].
    pub mesh: usize,
    pub status: PointStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub newton: Option<NewtonSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transient: Option<TransientSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norms: Option<FieldNorms>,
    /// `|ν a₀(u,u) + a₁(u;u,u) − ⟨f,u⟩| / (1 + |⟨f,u⟩|)` for homogeneous
    /// stationary points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_defect: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mms: Option<MmsErrors>,
    pub files: Vec<String>,
}

impl PointRecord {
    pub fn gamma_abs(&self) -> Option<f64> {
        self.gamma.map(|g| g[0].hypot(g[1]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshRecord {
    pub geometry: Geometry,
    pub constants: serde_json::Value,
    pub stats: MeshStats,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub scenario: String,
    #[serde(default)]
    pub description: String,
    /// SHA-256 of `scenario.toml`.
    pub config_sha256: String,
    pub config: Scenario,
    pub version: String,
    pub meshes: Vec<MeshRecord>,
    pub points: Vec<PointRecord>,
    pub files: Vec<String>,
}

impl RunManifest {
    pub fn all_succeeded(&self) -> bool {
        self.points.iter().all(|p| p.status.is_success())
    }

    pub fn load(dir: &Path) -> Result<RunManifest, String> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("malformed {}: {e}", path.display()))
    }
}

#[derive(Serialize)]
struct ResultRow<'a> {
    id: &'a str,
    condition: &'a str,
    nu: String,
    status: PointStatus,
    iterations: Option<usize>,
    final_residual: Option<f64>,
    gamma_x: Option<f64>,
    gamma_y: Option<f64>,
    gamma_abs: Option<f64>,
    l2_u: Option<f64>,
    v_norm: Option<f64>,
    div_residual: Option<f64>,
    l2_p: Option<f64>,
}

pub(crate) const RESULTS_HEADER: &str =
    "id,condition,nu,status,iterations,final_residual,gamma_x,gamma_y,gamma_abs,l2_u,v_norm,div_residual,l2_p";

/// One row of a plot table for the nonlinear outflow against `x = 1/(10ν)`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GammaRow {
    pub x: f64,
    pub gamma_x: Option<f64>,
    pub gamma_y: Option<f64>,
    pub condition: OutflowKind,
    pub nu: String,
    pub converged: bool,
}

pub const GAMMA_HEADER: &str = "x,gamma_x,gamma_y,condition,nu,converged";

/// Rows of [`GAMMA_HEADER`] for the stationary points, in sweep order.
pub fn gamma_rows(points: &[PointRecord]) -> Vec<GammaRow> {
    points
        .iter()
        .filter(|p| p.newton.is_some())
        .map(|p| GammaRow {
            x: p.nu.plot_x(),
            gamma_x: p.gamma.map(|g| g[0]),
            gamma_y: p.gamma.map(|g| g[1]),
            condition: p.condition,
            nu: p.nu.to_string(),
            converged: p.status == PointStatus::Converged,
        })
        .collect()
}

#[derive(Serialize)]
struct ConvergenceRow {
    condition: OutflowKind,
    n: usize,
    h: f64,
    l2_u: f64,
    h1_u: f64,
    l2_p: f64,
    order_l2_u: Option<f64>,
    order_h1_u: Option<f64>,
    order_l2_p: Option<f64>,
}

const CONVERGENCE_HEADER: &str = "condition,n,h,l2_u,h1_u,l2_p,order_l2_u,order_h1_u,order_l2_p";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

/// Solves every sweep point and writes the run directory. Solver failures
/// are recorded in the manifest; only setup and I/O problems are errors.
pub fn run(scenario: &Scenario, opts: &RunOptions) -> Result<RunManifest, RunError> {
    scenario.validate().map_err(|e| RunError::Invalid(e.to_string()))?;
    let tag = scenario.gamma_tag().ok_or_else(|| RunError::Invalid("unknown gamma tag".into()))?;
    let out = &opts.out;
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let config_toml = scenario.to_toml();
    let config_path = out.join("scenario.toml");
    write_atomic(&config_path, config_toml.as_bytes()).map_err(io_err(&config_path))?;

    let points = scenario.points();
    let mut geometries: Vec<Geometry> = Vec::new();
    for p in &points {
        if !geometries.contains(&p.geometry) {
            geometries.push(p.geometry.clone());
        }
    }
    let mut spaces = Vec::with_capacity(geometries.len());
    let mut meshes = Vec::with_capacity(geometries.len());
    for (k, g) in geometries.iter().enumerate() {
        let mesh = g.build().map_err(|e| RunError::Mesh { geometry: g.name().into(), message: e.to_string() })?;
        let file = format!("mesh_{k}.msh");
        let path = out.join(&file);
        save_mesh(&mesh, &path).map_err(|e| RunError::Mesh { geometry: g.name().into(), message: e.to_string() })?;
        log::info!("mesh {k} ({}): {} nodes, {} triangles", g.name(), mesh.n_nodes(), mesh.n_triangles());
        meshes.push(MeshRecord { geometry: g.clone(), constants: g.constants(), stats: mesh.stats(), file });
        spaces.push(FESystem::new(mesh));
    }

    let workers = if opts.workers == 0 { std::thread::available_parallelism().map_or(1, |n| n.get()) } else { opts.workers };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| RunError::Pool(e.to_string()))?;
    let results: Vec<Result<PointRecord, RunError>> = pool.install(|| {
        points
            .par_iter()
            .map(|p| {
                let k = geometries.iter().position(|g| *g == p.geometry).expect("geometry registered");
                run_point(scenario, p, &spaces[k], k, tag, out)
            })
            .collect()
    });
    let records = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut files = vec!["scenario.toml".to_string(), "results.csv".to_string()];
    files.extend(meshes.iter().map(|m| m.file.clone()));
    let rows: Vec<ResultRow> = records
        .iter()
        .map(|r| ResultRow {
            id: &r.id,
            condition: r.condition.name(),
            nu: r.nu.to_string(),
            status: r.status,
            iterations: r.newton.as_ref().map(|n| n.iterations).or(r.transient.as_ref().map(|t| t.steps_taken)),
            final_residual: r.newton.as_ref().map(|n| n.final_residual),
            gamma_x: r.gamma.map(|g| g[0]),
            gamma_y: r.gamma.map(|g| g[1]),
            gamma_abs: r.gamma_abs(),
            l2_u: r.norms.map(|n| n.l2_u),
            v_norm: r.norms.map(|n| n.v_norm),
            div_residual: r.norms.map(|n| n.div_residual),
            l2_p: r.norms.map(|n| n.l2_p),
        })
        .collect();
    let path = out.join("results.csv");
    save_csv(&path, RESULTS_HEADER, &rows).map_err(io_err(&path))?;

    if scenario.physics.mode == Mode::Stationary {
        let path = out.join("gamma.csv");
        save_csv(&path, GAMMA_HEADER, &gamma_rows(&records)).map_err(io_err(&path))?;
        files.push("gamma.csv".into());
    }
    if scenario.physics.forcing == Forcing::Mms {
        let path = out.join("convergence.csv");
        save_csv(&path, CONVERGENCE_HEADER, &convergence_rows(&records)).map_err(io_err(&path))?;
        files.push("convergence.csv".into());
    }

    let manifest = RunManifest {
        schema: MANIFEST_SCHEMA.into(),
        scenario: scenario.name.clone(),
        description: scenario.description.clone(),
        config_sha256: sha256_hex(config_toml.as_bytes()),
        config: scenario.clone(),
        version: env!("CARGO_PKG_VERSION").into(),
        meshes,
        points: records,
        files,
    };
    let path = out.join("manifest.json");
    save_json(&path, &manifest).map_err(io_err(&path))?;
    Ok(manifest)
}

fn convergence_rows(records: &[PointRecord]) -> Vec<ConvergenceRow> {
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for r in records {
        let Some(e) = &r.mms else { continue };
        let prev = rows.iter().rev().find(|p| p.condition == r.condition);
        let order = |a: f64, b: f64, ha: f64| (a / b).ln() / (ha / e.h).ln();
        let (o1, o2, o3) = match prev {
            Some(p) if r.status == PointStatus::Converged => {
                (Some(order(p.l2_u, e.l2_u, p.h)), Some(order(p.h1_u, e.h1_u, p.h)), Some(order(p.l2_p, e.l2_p, p.h)))
            }
            _ => (None, None, None),
        };
        rows.push(ConvergenceRow {
            condition: r.condition,
            n: e.n,
            h: e.h,
            l2_u: e.l2_u,
            h1_u: e.h1_u,
            l2_p: e.l2_p,
            order_l2_u: o1,
            order_h1_u: o2,
            order_l2_p: o3,
        });
    }
    rows
}

fn save_snapshot(
    path: &Path,
    fes: &FESystem,
    state: &State,
    with_psi: bool,
    title: &str,
) -> Result<(), RunError> {
    let psi = if with_psi {
        match solve_stream_function(fes, &state.u, &StreamDatum::FromFlow) {
            Ok(s) => Some(s.psi),
            Err(e) => {
                log::warn!("{title}: stream function skipped: {e}");
                None
            }
        }
    } else {
        None
    };
    let fields = VtkFields { velocity: &state.u, pressure: &state.p, stream_function: psi.as_deref() };
    save_vtk(path, fes, &fields, title).map_err(io_err(path))
}

fn run_point(
    sc: &Scenario,
    p: &SweepPoint,
    fes: &FESystem,
    mesh: usize,
    tag: BoundaryTag,
    out: &Path,
) -> Result<PointRecord, RunError> {
    let rel = format!("points/{}", p.id);
    let dir = out.join(&rel);
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let mut rec = PointRecord {
        id: p.id.clone(),
        dir: rel,
        condition: p.outflow,
        nu: p.nu,
        nu_value: p.nu.0,
        mesh,
        status: PointStatus::Failed,
        message: None,
        newton: None,
        transient: None,
        gamma: None,
        norms: None,
        energy_defect: None,
        mms: None,
        files: Vec::new(),
    };
    log::info!("{}: start", p.id);
    let spec = BoundarySpec::new(p.outflow, sc.inflow_profile());
    let nu = p.nu.0;
    let title = format!("{} {} nu={}", sc.name, p.outflow, p.nu);
    let final_state = match sc.physics.mode {
        Mode::Stationary => stationary(sc, p, fes, &spec, &dir, &title, &mut rec)?,
        Mode::Transient => transient(sc, fes, &spec, nu, &dir, &title, &mut rec)?,
    };
    if let Some(state) = final_state {
        rec.gamma = nonlinear_outflow(fes, &state.u, tag).ok().map(|r| r.gamma);
        rec.norms = field_norms(fes, &state).ok();
    }
    log::info!("{}: {:?}", p.id, rec.status);
    Ok(rec)
}

fn stationary(
    sc: &Scenario,
    p: &SweepPoint,
    fes: &FESystem,
    spec: &BoundarySpec,
    dir: &Path,
    title: &str,
    rec: &mut PointRecord,
) -> Result<Option<State>, RunError> {
    let nu = p.nu.0;
    let forcing = sc.physics.forcing;
    let manufactured = (forcing == Forcing::Mms).then(|| Manufactured::new(nu));
    let load = match &manufactured {
        Some(m) => mms::manufactured_load(fes, m, p.outflow),
        None => fem::assemble_load(fes, |x| forcing.eval(x, nu)),
    };
    let solved = match &spec.inflow {
        None => newton_solve_homogeneous(fes, spec, nu, &load, &sc.solver).map_err(|e| e.to_string()),
        Some(_) => build_lifting(fes, spec, 0.0)
            .map_err(|e| e.to_string())
            .and_then(|l| newton_solve_nonhomogeneous(fes, spec, nu, &load, &l, &sc.solver).map_err(|e| e.to_string()))
            .map(|(_, phys, rep)| (phys, rep)),
    };
    let (state, report) = match solved {
        Ok(x) => x,
        Err(m) => {
            rec.message = Some(m);
            return Ok(None);
        }
    };
    let path = dir.join("newton.csv");
    write_atomic(&path, report.to_csv().as_bytes()).map_err(io_err(&path))?;
    rec.files.push("newton.csv".into());
    rec.newton = Some(NewtonSummary::from_report(&report));
    if !report.converged {
        rec.status = PointStatus::Diverged;
        rec.message = report.reason.as_ref().map(|r| r.to_string());
        return Ok(None);
    }
    rec.status = PointStatus::Converged;
    if spec.inflow.is_none() {
        let (defect, fu) = energy_identity(fes, nu, &load, p.outflow, &state.u);
        rec.energy_defect = Some(defect.abs() / (1.0 + fu.abs()));
    }
    if let (Some(m), Geometry::UnitSquare { n }) = (&manufactured, &p.geometry) {
        let [l2_u, h1_u, l2_p] = mms::measure_errors(fes, m, &state);
        rec.mms = Some(MmsErrors {
            n: *n,
            h: 1.0 / *n as f64,
            l2_u,
            h1_u,
            l2_p,
            iterations: report.iterations,
            converged: true,
        });
    }
    if sc.output.vtk {
        save_snapshot(&dir.join("solution.vtk"), fes, &state, sc.output.stream_function, title)?;
        rec.files.push("solution.vtk".into());
    }
    Ok(Some(state))
}

fn transient(
    sc: &Scenario,
    fes: &FESystem,
    spec: &BoundarySpec,
    nu: f64,
    dir: &Path,
    title: &str,
    rec: &mut PointRecord,
) -> Result<Option<State>, RunError> {
    let settings = sc.time.as_ref().expect("validated transient scenario has time settings");
    let tcfg = settings.config().map_err(RunError::Invalid)?;
    let u0 = match settings.initial {
        InitialData::Lifting => match default_initial_velocity(fes, spec) {
            Ok(u) => u,
            Err(e) => {
                rec.message = Some(e.to_string());
                return Ok(None);
            }
        },
        InitialData::Zero => vec![0.0; fes.n_u()],
    };
    let forcing = sc.physics.forcing;
    let f = move |x, _t: f64| forcing.eval(x, nu);
    let traj = match run_transient(fes, spec, nu, &f, &u0, &tcfg) {
        Ok(t) => t,
        Err(e) => {
            rec.message = Some(e.to_string());
            return Ok(None);
        }
    };
    let path = dir.join("diagnostics.csv");
    save_csv(&path, DIAGNOSTICS_HEADER, &traj.diagnostics).map_err(io_err(&path))?;
    rec.files.push("diagnostics.csv".into());
    let mut captures = Vec::new();
    for c in &traj.captures {
        let file = format!("capture_{:05}.vtk", c.step);
        if sc.output.vtk {
            save_snapshot(&dir.join(&file), fes, &c.state, sc.output.stream_function, &format!("{title} t={}", c.t))?;
            rec.files.push(file.clone());
        }
        captures.push(CaptureRecord { step: c.step, t: c.t, file });
    }
    let d = &traj.diagnostics;
    rec.transient = Some(TransientSummary {
        dt: tcfg.dt,
        steps_requested: tcfg.n_steps(),
        steps_taken: d.len(),
        t_reached: d.last().map_or(0.0, |s| s.t),
        captures,
        max_div_residual: d.iter().map(|s| s.div_residual).fold(0.0, f64::max),
        final_rate: d.last().map_or(0.0, |s| s.rate),
        projected_feet: d.iter().map(|s| s.projected_feet).sum(),
        max_cfl: d.iter().map(|s| s.cfl).fold(0.0, f64::max),
        max_outflow_cfl: d.iter().map(|s| s.outflow_cfl).fold(0.0, f64::max),
        error: traj.error.clone(),
    });
    rec.status = if traj.complete { PointStatus::Completed } else { PointStatus::Incomplete };
    rec.message = traj.error.clone();
    Ok(Some(traj.last))
}

pub(crate) const DIAGNOSTICS_HEADER: &str = "step,t,div_residual,outflow_flux,l2_u,rate,projected_feet,cfl,outflow_cfl";

