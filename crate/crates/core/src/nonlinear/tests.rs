use super::*;
use crate::boundary::{build_lifting, InflowProfile};
use crate::mesh::{generate_bifurcation, generate_unit_square};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn square(n: usize) -> FESystem {
    FESystem::new(generate_unit_square(n).unwrap())
}

fn sin_load(fes: &FESystem) -> Vec<f64> {
    fem::assemble_load(fes, |p| [p[0].sin() + p[1].sin(), 0.0])
}

fn random_state(fes: &FESystem, seed: u64, scale: f64) -> State {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hom = homogeneous_dirichlet(fes);
    let mut x: Vec<f64> = (0..fes.n_total()).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
    for (v, f) in x.iter_mut().zip(&hom) {
        if f.is_some() {
            *v = 0.0;
        }
    }
    State::from_vec(fes, &x)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn fd_slope(eps: &[f64], err: &[f64]) -> f64 {
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Residual Taylor remainder slope for direction `d` at `x`.
fn jacobian_slope(fes: &FESystem, prob: &SteadyProblem, x: &State, d: &State) -> f64 {
    let eps = [1e-2, 1e-3, 1e-4, 1e-5];
    let r0 = residual(fes, prob, x);
    let jd = jacobian(fes, prob, x).matvec(&d.to_vec());
    let errs: Vec<f64> = eps
        .iter()
        .map(|&e| {
            let xe: Vec<f64> = x.to_vec().iter().zip(d.to_vec()).map(|(a, b)| a + e * b).collect();
            let re = residual(fes, prob, &State::from_vec(fes, &xe));
            norm(&(0..re.len()).map(|i| re[i] - r0[i] - e * jd[i]).collect::<Vec<_>>())
        })
        .collect();
    fd_slope(&eps, &errs)
}

#[test]
fn residual_trivial_values() {
    let fes = square(4);
    let zero = State::zeros(&fes);
    let none = vec![0.0; fes.n_u()];
    assert!(residual_eh(&fes, 0.5, &none, OutflowKind::Cbc, &zero).iter().all(|&v| v == 0.0));
    let load = sin_load(&fes);
    let r = residual_eh(&fes, 0.5, &load, OutflowKind::Cbc, &zero);
    for i in 0..fes.n_u() {
        assert_eq!(r[i], -load[i]);
    }
    assert!(r[fes.n_u()..].iter().all(|&v| v == 0.0));
}

#[test]
fn residual_matches_termwise_recomputation() {
    let fes = square(4);
    let load = sin_load(&fes);
    let x = random_state(&fes, 31, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let v: Vec<f64> = (0..fes.n_u()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let q: Vec<f64> = (0..fes.n_p()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nu = 0.3;
    for kind in [OutflowKind::Cbc, OutflowKind::Dn] {
        let r = residual_eh(&fes, nu, &load, kind, &x);
        let a0 = fem::assemble_a0(&fes);
        let b = fem::assemble_b(&fes);
        let expect = nu * a0.bilinear(&v, &x.u)
            + fem::dot(&fem::a1_action(&fes, &x.u, &x.u, kind.gamma1_weight()), &v)
            + fem::dot(&b.matvec(&v), &x.p)
            + fem::dot(&b.matvec(&x.u), &q)
            - fem::dot(&load, &v);
        let got = fem::dot(&r[..fes.n_u()], &v) + fem::dot(&r[fes.n_u()..], &q);
        assert!((got - expect).abs() < 1e-12 * (1.0 + expect.abs()), "{got} vs {expect}");
    }
}

#[test]
fn homogeneous_jacobian_fd_slope() {
    let fes = square(4);
    let load = sin_load(&fes);
    let x = random_state(&fes, 41, 1.0);
    let d = random_state(&fes, 42, 1.0);
    for kind in [OutflowKind::Cbc, OutflowKind::Dn] {
        let prob = SteadyProblem::homogeneous(&fes, 0.1, kind, load.clone());
        let s = jacobian_slope(&fes, &prob, &x, &d);
        assert!(s >= 1.9, "{kind}: slope {s}");
    }
}

#[test]
fn nonhomogeneous_jacobian_fd_slope() {
    let fes = FESystem::new(generate_bifurcation(0.3).unwrap());
    let spec = BoundarySpec::new(OutflowKind::Cbc, Some(InflowProfile::PoiseuilleHalf));
    let lifting = build_lifting(&fes, &spec, 0.0).unwrap();
    let x = random_state(&fes, 43, 0.3);
    let d = random_state(&fes, 44, 1.0);
    for kind in [OutflowKind::Cbc, OutflowKind::Dn] {
        let prob = SteadyProblem::lifted(0.02, kind, vec![0.0; fes.n_u()], &lifting);
        let s = jacobian_slope(&fes, &prob, &x, &d);
        assert!(s >= 1.9, "{kind}: slope {s}");
    }
}

#[test]
fn lifted_residual_equals_physical_form() {
    // E_N(ũ) coincides with the homogeneous-form residual at u = ũ + w₀
    let fes = FESystem::new(generate_bifurcation(0.3).unwrap());
    let spec = BoundarySpec::new(OutflowKind::Cbc, Some(InflowProfile::PoiseuilleHalf));
    let lifting = build_lifting(&fes, &spec, 0.0).unwrap();
    let load = fem::assemble_load(&fes, |p| [p[1], p[0].cos()]);
    let x = random_state(&fes, 45, 0.5);
    for kind in [OutflowKind::Cbc, OutflowKind::Dn, OutflowKind::Ddn] {
        let lifted = residual(&fes, &SteadyProblem::lifted(0.04, kind, load.clone(), &lifting), &x);
        let phys = State { u: x.u.iter().zip(&lifting.w0).map(|(a, b)| a + b).collect(), p: x.p.clone(), t: None };
        let direct = residual(&fes, &SteadyProblem::homogeneous(&fes, 0.04, kind, load.clone()), &phys);
        let scale = norm(&direct).max(1.0);
        for i in 0..fes.n_u() {
            assert!((lifted[i] - direct[i]).abs() < 1e-12 * scale, "{kind} {i}");
        }
        // continuity rows differ by b(w₀, q), which the lifting makes vanish
        for i in fes.n_u()..fes.n_total() {
            assert!((lifted[i] - direct[i]).abs() < 1e-10);
        }
    }
}

#[test]
fn zero_lifting_reduces_to_homogeneous_bitwise() {
    let fes = square(4);
    let load = sin_load(&fes);
    let x = random_state(&fes, 46, 1.0);
    let lifting = Lifting { w0: vec![0.0; fes.n_u()], div_residual: 0.0, t: 0.0 };
    let a = residual(&fes, &SteadyProblem::lifted(0.2, OutflowKind::Cbc, load.clone(), &lifting), &x);
    let b = residual_eh(&fes, 0.2, &load, OutflowKind::Cbc, &x);
    assert_eq!(a, b);
}

#[test]
fn jacobian_at_zero_is_stokes() {
    let fes = square(3);
    let j = jacobian_eh(&fes, 0.7, OutflowKind::Cbc, &State::zeros(&fes));
    let s = crate::boundary::stokes_matrix(&fes, 0.7);
    let x = random_state(&fes, 47, 1.0).to_vec();
    let (a, b) = (j.matvec(&x), s.matvec(&x));
    for i in 0..a.len() {
        assert!((a[i] - b[i]).abs() < 1e-13);
    }
}

#[test]
fn ddn_matrix_equals_dn_when_outflowing() {
    let fes = square(3);
    // u = (-1, 0) leaves through x = 0
    let mut x = State::zeros(&fes);
    x.u = fes.interpolate_velocity(|_| [-1.0, 0.0]);
    let jd = jacobian_eh(&fes, 0.3, OutflowKind::Ddn, &x);
    let jn = jacobian_eh(&fes, 0.3, OutflowKind::Dn, &x);
    let d = random_state(&fes, 48, 1.0).to_vec();
    assert_eq!(jd.matvec(&d), jn.matvec(&d));
}

#[test]
fn zero_forcing_converges_immediately() {
    let fes = square(4);
    let spec = BoundarySpec::new(OutflowKind::Cbc, None);
    let (s, rep) = newton_solve_homogeneous(&fes, &spec, 1.0, &vec![0.0; fes.n_u()], &NewtonConfig::default()).unwrap();
    assert!(rep.converged && rep.iterations <= 1);
    assert!(s.u.iter().all(|&v| v == 0.0));
}

#[test]
fn cbc_newton_converges_quadratically_with_energy_identity() {
    let fes = square(8);
    let load = sin_load(&fes);
    let spec = BoundarySpec::new(OutflowKind::Cbc, None);
    for nu in [1.0, 0.1] {
        let (s, rep) = newton_solve_homogeneous(&fes, &spec, nu, &load, &NewtonConfig::default()).unwrap();
        assert!(rep.converged, "{rep:?}");
        assert!(rep.final_residual() <= 1e-10);
        let (gap, fu) = energy_identity(&fes, nu, &load, OutflowKind::Cbc, &s.u);
        assert!(gap.abs() <= 1e-8 * (1.0 + fu.abs()), "{gap}");
        let div = crate::boundary::divergence_residual(&fes, &s.u).unwrap();
        assert!(div <= 1e-9);
        if nu < 1.0 {
            // the residual drop r_{k+1} / r_k² stays bounded on the tail
            let r = &rep.residuals;
            assert!(r.len() >= 3);
            for k in 1..r.len() - 1 {
                if r[k + 1] > 1e-13 {
                    assert!(r[k + 1] / (r[k] * r[k]) < 1e4, "{r:?}");
                }
            }
        }
    }
}

#[test]
fn energy_bound_under_forcing_scaling() {
    let fes = square(6);
    let spec = BoundarySpec::new(OutflowKind::Cbc, None);
    let base = sin_load(&fes);
    let alphas = [0.125, 0.25, 0.5, 1.0];
    let norms: Vec<f64> = alphas
        .iter()
        .map(|&a| {
            let load: Vec<f64> = base.iter().map(|v| a * v).collect();
            let (s, rep) = newton_solve_homogeneous(&fes, &spec, 1.0, &load, &NewtonConfig::default()).unwrap();
            assert!(rep.converged);
            fes.a0().bilinear(&s.u, &s.u).sqrt()
        })
        .collect();
    let slope = norms[0] / alphas[0];
    for k in 1..alphas.len() {
        assert!(norms[k] > norms[k - 1]);
        assert!(norms[k] <= 1.25 * slope * alphas[k]);
    }
}

#[test]
fn report_serialization() {
    let rep = NewtonReport {
        iterations: 2,
        residuals: vec![1.0, 1e-3, 1e-9],
        converged: true,
        reason: None,
        continuation: vec![],
    };
    assert_eq!(rep.to_csv().lines().count(), 4);
    assert_eq!(rep.to_json_lines().lines().count(), 4);
    assert!((rep.fitted_order().unwrap() - 2.0).abs() < 1e-12);
    let back: NewtonReport = serde_json::from_str(&serde_json::to_string(&rep).unwrap()).unwrap();
    assert_eq!(back, rep);
}

#[test]
fn bifurcation_solves_for_all_outflow_kinds() {
    let fes = FESystem::new(generate_bifurcation(0.2).unwrap());
    let spec = BoundarySpec::new(OutflowKind::Cbc, Some(InflowProfile::PoiseuilleHalf));
    let lifting = build_lifting(&fes, &spec, 0.0).unwrap();
    let load = vec![0.0; fes.n_u()];
    let cfg = NewtonConfig::default();
    let nu = 1.0 / 50.0;
    let (_, cbc, rep) = newton_solve_nonhomogeneous(&fes, &spec, nu, &load, &lifting, &cfg).unwrap();
    assert!(rep.converged, "{rep:?}");
    // trace of the reconstructed velocity equals the profile at P2 nodes
    for s in fes.constrained_nodes(crate::mesh::BoundaryTag::InflowN) {
        let e = InflowProfile::PoiseuilleHalf.eval(fes.node_coord(s), 0.0);
        assert!((cbc.u[fes.velocity_dof(s, 0)] - e[0]).abs() < 1e-14);
    }
    let (_, ddn, rep) = ddn_quasi_newton(&fes, nu, &load, &lifting, &cfg).unwrap();
    assert!(rep.converged, "{rep:?}");
    let r = &rep.residuals;
    for k in 2..r.len() - 1 {
        assert!(r[k + 1] < r[k], "{r:?}");
    }
    let dn_spec = BoundarySpec::new(OutflowKind::Dn, spec.inflow.clone());
    let (_, dn, rep) = newton_solve_nonhomogeneous(&fes, &dn_spec, nu, &load, &lifting, &cfg).unwrap();
    assert!(rep.converged);
    // without backflow the directional term is inactive and DDN equals DN
    let backflow = {
        let mut any = false;
        fem::for_each_edge_point(&fes, crate::mesh::BoundaryTag::OutflowOne, |t, ep| {
            let v = fes.eval_velocity(&ddn.u, t, ep.bary);
            if v[0] * ep.normal[0] + v[1] * ep.normal[1] < 0.0 {
                any = true;
            }
        });
        any
    };
    if !backflow {
        let d = ddn.u.iter().zip(&dn.u).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(d < 1e-8, "{d}");
    }
}

#[test]
fn continuation_reaches_target() {
    let fes = square(6);
    let load = sin_load(&fes);
    let prob = SteadyProblem::homogeneous(&fes, 1.0 / 60.0, OutflowKind::Cbc, load);
    let (_, rep) = continuation(&fes, &prob, &NewtonConfig::default());
    assert!(rep.converged, "{rep:?}");
    assert_eq!(*rep.continuation.last().unwrap(), 1.0 / 60.0);
    assert_eq!(rep.continuation[0], CONTINUATION_START);
}

#[test]
fn stokes_guess_solves_the_linear_problem() {
    let fes = square(4);
    let load = sin_load(&fes);
    let prob = SteadyProblem::homogeneous(&fes, 1.0, OutflowKind::Dn, load.clone());
    let s = stokes_guess(&fes, &prob).unwrap();
    // the Stokes solution is the exact root when convection is dropped
    let mut r = fes.a0().matvec(&s.u);
    let bt = fes.b().transpose_matvec(&s.p);
    let fixed = homogeneous_dirichlet(&fes);
    for i in 0..fes.n_u() {
        r[i] += bt[i] - load[i];
        if fixed[i].is_none() {
            assert!(r[i].abs() < 1e-12);
        }
    }
}

#[test]
fn config_validation() {
    assert!(NewtonConfig::default().validate().is_ok());
    assert!(NewtonConfig { abs_tol: 0.0, ..Default::default() }.validate().is_err());
    assert!(NewtonConfig { damping: 1.5, ..Default::default() }.validate().is_err());
}
