use proptest::prelude::*;

use super::*;
use crate::boundary::{BoundarySpec, InflowProfile, OutflowKind};
use crate::fem::quadrature::gauss_legendre;
use crate::mesh::{generate_bifurcation, generate_unit_square, Mesh};

fn square(n: usize) -> FESystem {
    FESystem::new(generate_unit_square(n).unwrap())
}

/// Unit square with the right wall as the outflow boundary.
fn right_outflow(n: usize) -> FESystem {
    let m: Mesh = generate_unit_square(n).unwrap().retagged(|p, _| {
        if (p[0] - 1.0).abs() < 1e-12 {
            BoundaryTag::OutflowOne
        } else {
            BoundaryTag::WallH
        }
    });
    FESystem::new(m)
}

#[test]
fn split_of_the_normal_component() {
    for s in [-2.5, -1e-300, 0.0, 3.0] {
        assert_eq!(positive_part(s) + negative_part(s), s);
        assert!(positive_part(s) >= 0.0 && negative_part(s) <= 0.0);
    }
}

#[test]
fn inflowing_field_has_no_outflow() {
    // left wall has n = (-1, 0), so u = (1, 0) enters the domain there
    let fes = square(4);
    let u = fes.interpolate_velocity(|_| [1.0, 0.0]);
    let rep = nonlinear_outflow(&fes, &u, BoundaryTag::OutflowOne).unwrap();
    assert_eq!(rep.gamma, [0.0, 0.0]);
    assert!((rep.flux() + 1.0).abs() < 1e-14);
}

#[test]
fn uniform_outflow_through_right_wall() {
    let fes = right_outflow(4);
    let u = fes.interpolate_velocity(|_| [1.0, 0.0]);
    let rep = nonlinear_outflow(&fes, &u, BoundaryTag::OutflowOne).unwrap();
    assert!((rep.gamma[0] - 1.0).abs() < 1e-14 && rep.gamma[1].abs() < 1e-14);
    assert_eq!(rep.edges.len(), 4);
    let sum: f64 = rep.edges.iter().map(|e| e.gamma[0]).sum();
    assert!((sum - rep.gamma[0]).abs() < 1e-15);
}

#[test]
fn missing_tag_is_an_error() {
    let fes = FESystem::new(generate_unit_square(2).unwrap().retagged(|_, _| BoundaryTag::WallH));
    assert!(matches!(
        nonlinear_outflow(&fes, &vec![0.0; fes.n_u()], BoundaryTag::OutflowOne),
        Err(PostError::InvalidArgument(_))
    ));
}

#[test]
fn outflow_converges_to_line_integral() {
    let field = |p: Point| [-(2.0 * std::f64::consts::PI * p[1]).sin() * (1.0 + p[0]), p[1] * p[1]];
    // oracle: composite Gauss on x = 0, n = (-1, 0), breaking at the kink y = 1/2
    let (gx, gw) = gauss_legendre(10);
    let mut oracle = [0.0; 2];
    let m = 400;
    for k in 0..m {
        let (a, b) = (k as f64 / m as f64, (k + 1) as f64 / m as f64);
        for (&x, &w) in gx.iter().zip(&gw) {
            let y = a + (b - a) * 0.5 * (x + 1.0);
            let u = field([0.0, y]);
            let wp = 0.5 * (b - a) * w * (-u[0]).max(0.0);
            oracle[0] += wp * u[0];
            oracle[1] += wp * u[1];
        }
    }
    let errs: Vec<f64> = [4, 8, 16]
        .iter()
        .map(|&n| {
            let fes = square(n);
            let g = nonlinear_outflow(&fes, &fes.interpolate_velocity(field), BoundaryTag::OutflowOne).unwrap().gamma;
            (g[0] - oracle[0]).hypot(g[1] - oracle[1])
        })
        .collect();
    assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
    assert!(errs[2] < 1e-4, "{errs:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn outflow_is_homogeneous_of_degree_two(c in proptest::array::uniform4(-1.0f64..1.0)) {
        let fes = square(3);
        let u = fes.interpolate_velocity(|p| [c[0] + c[1] * p[1], c[2] * p[1] * p[1] + c[3]]);
        let g1 = nonlinear_outflow(&fes, &u, BoundaryTag::OutflowOne).unwrap().gamma;
        for alpha in [2.0, 3.0] {
            let ua: Vec<f64> = u.iter().map(|v| alpha * v).collect();
            let ga = nonlinear_outflow(&fes, &ua, BoundaryTag::OutflowOne).unwrap().gamma;
            for k in 0..2 {
                prop_assert!((ga[k] - alpha * alpha * g1[k]).abs() <= 1e-13 * (1.0 + ga[k].abs()));
            }
        }
    }

    #[test]
    fn stream_function_is_linear(c in proptest::array::uniform6(-1.0f64..1.0)) {
        let fes = square(3);
        let u1 = fes.interpolate_velocity(|p| [c[0] + c[1] * p[0], c[2] * p[1] + c[3] * p[0] * p[1]]);
        let u2 = fes.interpolate_velocity(|p| [c[4] * p[1] * p[1], c[5] * p[0]]);
        let sum: Vec<f64> = u1.iter().zip(&u2).map(|(a, b)| a + b).collect();
        let psi = |u: &[f64]| solve_stream_function(&fes, u, &StreamDatum::FromFlow).unwrap().psi;
        let (p1, p2, p12) = (psi(&u1), psi(&u2), psi(&sum));
        for i in 0..p1.len() {
            prop_assert!((p12[i] - p1[i] - p2[i]).abs() < 1e-11);
        }
    }
}

#[test]
fn zero_velocity_gives_zero_stream_function() {
    let fes = square(4);
    let sf = solve_stream_function(&fes, &vec![0.0; fes.n_u()], &StreamDatum::FromFlow).unwrap();
    assert!(sf.psi.iter().all(|&v| v == 0.0));
}

#[test]
fn manufactured_stream_function_converges_at_third_order() {
    // ψ = sin(x) cos(2y) + x³y: not in P2, so the error is a discretization error
    let psi_ex = |p: Point| p[0].sin() * (2.0 * p[1]).cos() + p[0].powi(3) * p[1];
    let curl = |p: Point| {
        let (x, y) = (p[0], p[1]);
        [-2.0 * x.sin() * (2.0 * y).sin() + x.powi(3), -(x.cos() * (2.0 * y).cos() + 3.0 * x * x * y)]
    };
    let errs: Vec<f64> = [4, 8, 16]
        .iter()
        .map(|&n| {
            let fes = square(n);
            let u = fes.interpolate_velocity(curl);
            let sf = solve_stream_function(&fes, &u, &StreamDatum::explicit(psi_ex)).unwrap();
            let mut e2 = 0.0;
            for t in 0..fes.mesh().n_triangles() {
                for qp in fem::volume_points(&fes, t) {
                    let d = fes.eval_scalar(&sf.psi, t, qp.bary) - psi_ex(fes.point(t, qp.bary));
                    e2 += qp.weight * d * d;
                }
            }
            e2.sqrt()
        })
        .collect();
    for w in errs.windows(2) {
        assert!((w[0] / w[1]).log2() > 2.7, "{errs:?}");
    }
}

#[test]
fn cubic_stream_function_with_quadratic_velocity() {
    // u = curl ψ lies in P2 exactly; ψ is recovered up to the P2 projection error
    let psi_ex = |p: Point| p[0] * p[0] * p[1] - p[1].powi(3) / 3.0 + 0.5 * p[0];
    let curl = |p: Point| [p[0] * p[0] - p[1] * p[1], -(2.0 * p[0] * p[1] + 0.5)];
    let fes = square(8);
    let u = fes.interpolate_velocity(curl);
    let sf = solve_stream_function(&fes, &u, &StreamDatum::explicit(psi_ex)).unwrap();
    let worst = (0..fes.n_scalar()).map(|s| (sf.psi[s] - psi_ex(fes.node_coord(s))).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-4, "{worst}");
}

#[test]
fn no_dirichlet_boundary_is_underdetermined() {
    let fes = FESystem::new(generate_unit_square(2).unwrap().retagged(|_, _| BoundaryTag::OutflowOne));
    assert!(matches!(
        solve_stream_function(&fes, &vec![0.0; fes.n_u()], &StreamDatum::FromFlow),
        Err(PostError::Underdetermined(_))
    ));
}

#[test]
fn channel_datum_follows_inflow_flux() {
    let fes = FESystem::new(generate_bifurcation(0.3).unwrap());
    let spec = BoundarySpec::new(OutflowKind::Dn, Some(InflowProfile::PoiseuilleHalf));
    let w0 = crate::boundary::build_lifting(&fes, &spec, 0.0).unwrap().w0;
    let sf = solve_stream_function(&fes, &w0, &StreamDatum::FromFlow).unwrap();
    // the flux ∫ (1/4 − y²) dy = 1/6 leaves through the outlets before the loop
    // returns along the inlet: lower wall at 0, upper wall at 1/6
    let lower = fes.constrained_nodes(BoundaryTag::WallH).into_iter().find(|&s| {
        let p = fes.node_coord(s);
        p[0] > 1.0 && p[0] < 4.0 && p[1] < 0.0
    });
    let upper = fes.constrained_nodes(BoundaryTag::WallH).into_iter().find(|&s| {
        let p = fes.node_coord(s);
        p[0] > 1.0 && p[0] < 4.0 && p[1] > 0.0
    });
    let (lo, up) = (sf.psi[lower.unwrap()], sf.psi[upper.unwrap()]);
    assert!(lo.abs() < 1e-12, "{lo}");
    assert!((up - 1.0 / 6.0).abs() < 1e-10, "{up}");
    // the symmetric middle wall between the outlets takes the mean value
    let mid = fes
        .constrained_nodes(BoundaryTag::WallH)
        .into_iter()
        .find(|&s| (fes.node_coord(s)[0] - 5.5).abs() < 1e-12 && fes.node_coord(s)[1].abs() < 1e-12)
        .unwrap();
    assert!((sf.psi[mid] - 1.0 / 12.0).abs() < 1e-3, "{}", sf.psi[mid]);
    let frac = tangency_fraction(&fes, &sf.psi, &w0, 0.05, 1e-12);
    assert!(frac >= 0.95, "{frac}");
}

#[test]
fn obstacle_loop_gets_a_free_constant() {
    let fes = FESystem::new(crate::mesh::generate_cylinder_channel(0.1).unwrap());
    let spec = BoundarySpec::new(OutflowKind::Dn, Some(InflowProfile::PoiseuilleUnit));
    let w0 = crate::boundary::build_lifting(&fes, &spec, 0.0).unwrap().w0;
    let sf = solve_stream_function(&fes, &w0, &StreamDatum::FromFlow).unwrap();
    assert_eq!(sf.hole_constants.len(), 1);
    // symmetric flow: the cylinder sits on the middle streamline, (4/3)/2
    assert!((sf.hole_constants[0] - 2.0 / 3.0).abs() < 1e-2, "{:?}", sf.hole_constants);
}

#[test]
fn norms_of_simple_fields() {
    let fes = square(4);
    let z = field_norms(&fes, &State::zeros(&fes)).unwrap();
    assert_eq!(z, FieldNorms { l2_u: 0.0, v_norm: 0.0, div_residual: 0.0, l2_p: 0.0 });
    let s = State { u: fes.interpolate_velocity(|p| [p[0], -p[1]]), p: fes.interpolate_pressure(|_| 1.0), t: None };
    let n = field_norms(&fes, &s).unwrap();
    assert!((n.v_norm * n.v_norm - 4.0).abs() < 1e-12);
    assert!((n.l2_p - 1.0).abs() < 1e-13);
    assert!((n.l2_u * n.l2_u - 2.0 / 3.0).abs() < 1e-13);
    assert!(n.div_residual < 1e-13);
}
