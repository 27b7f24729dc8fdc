//! Transient channel flow past the cylinder with Lagrange-Galerkin time
//! stepping. Prints the diagnostics every simulated second and writes VTK
//! snapshots at the capture times into the directory given as the first
//! argument (default `cylinder_out`). The mesh and time step are coarse so
//! that the example runs in about a minute.
//!
//! The two do-nothing variants are compared here. The convective condition
//! drives a strong outlet jet at this viscosity, and its semi-implicit
//! outflow term needs `(u·n) Δt / h` on the outlet well below
//! `CBC_OUTFLOW_CFL`, far smaller than this time step allows.

use std::path::PathBuf;

use cbcflow::boundary::{BoundarySpec, InflowProfile, OutflowKind};
use cbcflow::fem::FESystem;
use cbcflow::mesh::generate_cylinder_channel_graded;
use cbcflow::output::{save_vtk, VtkFields};
use cbcflow::timestepper::{default_initial_velocity, run_transient, TimeConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "cylinder_out".into()));
    std::fs::create_dir_all(&out)?;
    let fes = FESystem::new(generate_cylinder_channel_graded(0.08, 0.24)?);
    let tcfg = TimeConfig::new(0.05, 8.0, vec![4.0, 8.0])?;
    for kind in [OutflowKind::Ddn, OutflowKind::Dn] {
        let spec = BoundarySpec::new(kind, Some(InflowProfile::PoiseuilleUnit));
        let u0 = default_initial_velocity(&fes, &spec)?;
        let traj = run_transient(&fes, &spec, 1.0 / 250.0, &|_, _| [0.0, 0.0], &u0, &tcfg)?;
        println!("{kind}\n   t     |u|_L2    outflow flux  div residual  CFL   outflow CFL");
        for d in traj.diagnostics.iter().filter(|d| d.step % 20 == 0) {
            println!(
                "{:>5.2}  {:.5}  {:>11.6}  {:.2e}      {:.2}  {:.3}",
                d.t, d.l2_u, d.outflow_flux, d.div_residual, d.cfl, d.outflow_cfl
            );
        }
        for c in &traj.captures {
            let file = out.join(format!("cylinder_{kind}_t{:02}.vtk", c.t.round() as i64));
            let fields = VtkFields { velocity: &c.state.u, pressure: &c.state.p, stream_function: None };
            save_vtk(&file, &fes, &fields, &format!("cylinder {kind} t={}", c.t))?;
            println!("wrote {}", file.display());
        }
        if let Some(e) = traj.error {
            println!("stopped early: {e}");
        }
    }
    Ok(())
}
