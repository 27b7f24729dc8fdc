//! Residual histories of exact Newton from a zero guess and of continuation
//! in the viscosity, with the fitted order of the final iterates.

use cbcflow::boundary::OutflowKind;
use cbcflow::fem::{self, FESystem};
use cbcflow::mesh::generate_unit_square;
use cbcflow::nonlinear::{solve_steady, InitialGuess, NewtonConfig, SteadyProblem};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fes = FESystem::new(generate_unit_square(24)?);
    let load = fem::assemble_load(&fes, |x| [x[0].sin() + x[1].sin(), 0.0]);
    let runs = [
        (0.1, OutflowKind::Cbc, InitialGuess::Zero),
        (0.1, OutflowKind::Dn, InitialGuess::Zero),
        (1.0 / 90.0, OutflowKind::Cbc, InitialGuess::Continuation),
    ];
    for (nu, kind, guess) in runs {
        let prob = SteadyProblem::homogeneous(&fes, nu, kind, load.clone());
        let cfg = NewtonConfig { initial_guess: guess, ..NewtonConfig::default() };
        let (_, rep) = solve_steady(&fes, &prob, &cfg)?;
        println!("nu = {nu:.4}, {kind}, start {guess:?}: converged {} after {} updates", rep.converged, rep.iterations);
        if !rep.continuation.is_empty() {
            let path: Vec<String> = rep.continuation.iter().map(|v| format!("1/{:.0}", 1.0 / v)).collect();
            println!("  continuation path {}", path.join(" -> "));
        }
        for (i, r) in rep.residuals.iter().enumerate() {
            println!("  {i:>2}  {r:.3e}");
        }
        if let Some(o) = rep.fitted_order() {
            println!("  fitted order {o:.2}");
        }
    }
    Ok(())
}
