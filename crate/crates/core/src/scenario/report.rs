//! Aggregated, plot-ready tables built from a finished run directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::run::{gamma_rows, RunManifest, GAMMA_HEADER};
use crate::boundary::OutflowKind;
use crate::output::{save_csv, write_atomic};

/// Files written by [`write_report`], relative to the run directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    pub files: Vec<PathBuf>,
    pub points: usize,
    pub failed: usize,
}

#[derive(serde::Serialize)]
struct HistoryRow<'a> {
    id: &'a str,
    condition: OutflowKind,
    nu: String,
    iter: usize,
    residual: f64,
}

#[derive(serde::Serialize)]
struct CaptureRow<'a> {
    id: &'a str,
    condition: OutflowKind,
    nu: String,
    step: usize,
    t: f64,
    file: String,
}

/// Writes
///
/// * `report.csv`: `x,gamma_x,gamma_y,condition,nu,converged` for every
///   stationary point, `x = 1/(10ν)` (zero at `ν = 1`);
/// * `newton_history.csv` and `newton_<condition>.dat`: residual histories;
/// * `gamma_<condition>.dat`: `x |γ| γ_x γ_y` for converged points;
/// * `captures.csv`: step, time and snapshot file of transient captures.
///
/// The `.dat` files are whitespace separated with `#` comments; blocks of
/// the history files are separated by two blank lines so that gnuplot can
/// address them with `index`.
pub fn write_report(dir: &Path) -> Result<ReportSummary, String> {
    let m = RunManifest::load(dir)?;
    let io = |p: &Path, e: std::io::Error| format!("cannot write {}: {e}", p.display());
    let mut files = Vec::new();
    let mut save = |name: String, text: String| -> Result<(), String> {
        let p = dir.join(&name);
        write_atomic(&p, text.as_bytes()).map_err(|e| io(&p, e))?;
        files.push(PathBuf::from(name));
        Ok(())
    };

    let rows = gamma_rows(&m.points);
    let p = dir.join("report.csv");
    save_csv(&p, GAMMA_HEADER, &rows).map_err(|e| io(&p, e))?;
    let mut kinds: Vec<OutflowKind> = Vec::new();
    for r in &m.points {
        if !kinds.contains(&r.condition) {
            kinds.push(r.condition);
        }
    }

    let mut history = Vec::new();
    for kind in &kinds {
        let mut dat = format!("# residual histories, {kind}\n# iter residual\n");
        let mut gamma = format!("# nonlinear outflow, {kind}\n# x |gamma| gamma_x gamma_y nu\n");
        let mut any_newton = false;
        for r in m.points.iter().filter(|r| r.condition == *kind) {
            if let Some(n) = &r.newton {
                any_newton = true;
                let _ = writeln!(dat, "# {} nu={} status={:?}", r.id, r.nu, r.status);
                for (i, res) in n.residuals.iter().enumerate() {
                    let _ = writeln!(dat, "{i} {res:e}");
                    history.push(HistoryRow { id: &r.id, condition: r.condition, nu: r.nu.to_string(), iter: i, residual: *res });
                }
                dat.push_str("\n\n");
            }
            if let (Some(g), true) = (r.gamma, r.newton.is_some() && r.status.is_success()) {
                let _ = writeln!(gamma, "{:e} {:e} {:e} {:e} {}", r.nu.plot_x(), g[0].hypot(g[1]), g[0], g[1], r.nu);
            }
        }
        if any_newton {
            save(format!("newton_{kind}.dat"), dat)?;
            save(format!("gamma_{kind}.dat"), gamma)?;
        }
    }
    if !history.is_empty() {
        let p = dir.join("newton_history.csv");
        save_csv(&p, "id,condition,nu,iter,residual", &history).map_err(|e| io(&p, e))?;
        files.push("newton_history.csv".into());
    }

    let captures: Vec<CaptureRow> = m
        .points
        .iter()
        .filter_map(|r| r.transient.as_ref().map(|t| (r, t)))
        .flat_map(|(r, t)| {
            t.captures.iter().map(move |c| CaptureRow {
                id: &r.id,
                condition: r.condition,
                nu: r.nu.to_string(),
                step: c.step,
                t: c.t,
                file: format!("{}/{}", r.dir, c.file),
            })
        })
        .collect();
    if m.points.iter().any(|r| r.transient.is_some()) {
        let p = dir.join("captures.csv");
        save_csv(&p, "id,condition,nu,step,t,file", &captures).map_err(|e| io(&p, e))?;
        files.push("captures.csv".into());
    }
    files.insert(0, "report.csv".into());
    let failed = m.points.iter().filter(|r| !r.status.is_success()).count();
    Ok(ReportSummary { files, points: m.points.len(), failed })
}
