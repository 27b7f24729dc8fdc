//! Manufactured-solution study: errors and observed orders of the
//! Taylor-Hood pair under each outflow condition.

use cbcflow::boundary::OutflowKind;
use cbcflow::nonlinear::{InitialGuess, NewtonConfig};
use cbcflow::scenario::mms::{mms_errors, observed_orders};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = NewtonConfig { initial_guess: InitialGuess::Zero, ..NewtonConfig::default() };
    for kind in [OutflowKind::Cbc, OutflowKind::Dn, OutflowKind::Ddn] {
        let mut errs = Vec::new();
        for n in [4, 8, 16, 32] {
            errs.push(mms_errors(n, 0.1, kind, &cfg)?.0);
        }
        println!("{kind}");
        println!("   n    L2(u)       H1(u)       L2(p)");
        for e in &errs {
            println!("  {:>2}  {:.3e}  {:.3e}  {:.3e}", e.n, e.l2_u, e.h1_u, e.l2_p);
        }
        for (e, o) in errs[1..].iter().zip(observed_orders(&errs)) {
            println!("  order to n={:>2}: {:.2} {:.2} {:.2}", e.n, o[0], o[1], o[2]);
        }
    }
    Ok(())
}
