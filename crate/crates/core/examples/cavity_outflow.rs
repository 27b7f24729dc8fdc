//! Stationary flow on the unit square driven by `f = (sin x + sin y, 0)`
//! with an artificial boundary at `x = 0`, solved under each outflow
//! condition. Prints Newton iterations, the nonlinear outflow and the
//! relative distance to the do-nothing solution.

use cbcflow::boundary::{BoundarySpec, OutflowKind};
use cbcflow::fem::{self, FESystem};
use cbcflow::mesh::{generate_unit_square, BoundaryTag};
use cbcflow::nonlinear::{newton_solve_homogeneous, NewtonConfig};
use cbcflow::postprocess::nonlinear_outflow;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fes = FESystem::new(generate_unit_square(32)?);
    let load = fem::assemble_load(&fes, |x| [x[0].sin() + x[1].sin(), 0.0]);
    let mass = fem::assemble_mass(&fes);
    let cfg = NewtonConfig::default();
    for nu in [1.0, 0.1, 0.05, 1.0 / 40.0] {
        let mut dn: Option<Vec<f64>> = None;
        for kind in [OutflowKind::Dn, OutflowKind::Cbc, OutflowKind::Ddn] {
            let spec = BoundarySpec::new(kind, None);
            let (state, rep) = newton_solve_homogeneous(&fes, &spec, nu, &load, &cfg)?;
            let g = nonlinear_outflow(&fes, &state.u, BoundaryTag::OutflowOne)?;
            let diff = match &dn {
                None => 0.0,
                Some(d) => {
                    let e: Vec<f64> = state.u.iter().zip(d).map(|(a, b)| a - b).collect();
                    (mass.bilinear(&e, &e) / mass.bilinear(d, d)).sqrt()
                }
            };
            println!(
                "nu {nu:<7.4} {kind:<4} iterations {:>2} converged {:<5} |gamma| {:.4e}  vs dn {diff:.2e}",
                rep.iterations,
                rep.converged,
                g.magnitude()
            );
            if kind == OutflowKind::Dn {
                dn = Some(state.u);
            }
        }
    }
    Ok(())
}
