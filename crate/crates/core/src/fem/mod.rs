//! Taylor–Hood P2/P1 spaces, quadrature and form assembly.

mod assemble;
pub mod quadrature;
mod space;

pub use assemble::{
    a1_action, a1_jacobians, add_a0, add_b_blocks, add_boundary_first, add_boundary_second, add_convection_first,
    add_convection_second, add_ddn_boundary, add_mass, assemble_a0, assemble_b, assemble_boundary_load,
    assemble_boundary_mass, assemble_ddn_boundary, assemble_load, assemble_mass, assemble_pressure_mass,
    assemble_scalar_mass, assemble_scalar_stiffness, cbc_boundary_action, cbc_boundary_jacobian, ddn_boundary_action,
    dot,
};
pub(crate) use assemble::{for_each_edge_point, volume_points};
pub use space::{p2_gradients, p2_values, FESystem, State, TriGeom};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_bifurcation, generate_unit_square, BoundaryTag, Location, Point};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Duffy-collapsed 5x5 Gauss rule on the reference triangle, exact for degree 8.
    fn oracle_rule() -> Vec<([f64; 3], f64)> {
        let x = [-0.906179845938664, -0.5384693101056831, 0.0, 0.5384693101056831, 0.906179845938664];
        let w = [0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665, 0.2369268850561891];
        let mut out = Vec::new();
        for i in 0..5 {
            let r = 0.5 * (1.0 + x[i]);
            for j in 0..5 {
                let s = 0.5 * (1.0 - r) * (1.0 + x[j]);
                out.push(([1.0 - r - s, r, s], w[i] * w[j] * (1.0 - r) * 0.25));
            }
        }
        out
    }

    fn oracle_integrate(fes: &FESystem, f: impl Fn(usize, [f64; 3]) -> f64) -> f64 {
        let rule = oracle_rule();
        (0..fes.mesh().n_triangles())
            .map(|t| {
                let a2 = 2.0 * fes.geom(t).area;
                rule.iter().map(|&(l, w)| a2 * w * f(t, l)).sum::<f64>()
            })
            .sum()
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn square(n: usize) -> FESystem {
        FESystem::new(generate_unit_square(n).unwrap())
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let fes = FESystem::new(generate_bifurcation(0.5).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let psi = random_vec(&mut rng, fes.n_scalar());
        let t = 3;
        let l = [0.3, 0.5, 0.2];
        let g = fes.eval_scalar_gradient(&psi, t, l);
        let x = fes.point(t, l);
        let h = 1e-6;
        let at = |p: Point| {
            let b = fes.mesh().barycentric(t, p);
            fes.eval_scalar(&psi, t, b)
        };
        let fx = (at([x[0] + h, x[1]]) - at([x[0] - h, x[1]])) / (2.0 * h);
        let fy = (at([x[0], x[1] + h]) - at([x[0], x[1] - h])) / (2.0 * h);
        assert!((fx - g[0]).abs() < 1e-7 && (fy - g[1]).abs() < 1e-7);
    }

    #[test]
    fn a0_analytic_values_and_symmetry() {
        let fes = square(4);
        let a0 = assemble_a0(&fes);
        assert!(a0.asymmetry() <= 1e-12);
        let c = fes.interpolate_velocity(|_| [0.7, -0.2]);
        assert!(a0.bilinear(&c, &c).abs() < 1e-12);
        let rot = fes.interpolate_velocity(|p| [-p[1], p[0]]);
        assert!(a0.matvec(&rot).iter().all(|v| v.abs() < 1e-12));
        let u = fes.interpolate_velocity(|p| [p[0], -p[1]]);
        assert!((a0.bilinear(&u, &u) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn a0_matches_over_integration() {
        let fes = FESystem::new(generate_bifurcation(0.4).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u = random_vec(&mut rng, fes.n_u());
        let v = random_vec(&mut rng, fes.n_u());
        let a0 = assemble_a0(&fes);
        let oracle = oracle_integrate(&fes, |t, l| {
            let gu = fes.eval_velocity_gradient(&u, t, l);
            let gv = fes.eval_velocity_gradient(&v, t, l);
            let mut s = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    s += 0.5 * (gu[a][b] + gu[b][a]) * 0.5 * (gv[a][b] + gv[b][a]);
                }
            }
            2.0 * s
        });
        assert!(rel_close(a0.bilinear(&v, &u), oracle, 1e-12));
    }

    #[test]
    fn b_values() {
        let fes = square(4);
        let b = assemble_b(&fes);
        let curl = fes.interpolate_velocity(|p| [p[0] * p[0], -2.0 * p[0] * p[1]]);
        assert!(b.matvec(&curl).iter().all(|v| v.abs() < 1e-12));
        let u = fes.interpolate_velocity(|p| [p[0], 0.0]);
        let one = vec![1.0; fes.n_p()];
        assert!((dot(&one, &b.matvec(&u)) + 1.0).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = random_vec(&mut rng, fes.n_u());
        let q = random_vec(&mut rng, fes.n_p());
        let oracle = oracle_integrate(&fes, |t, l| {
            let g = fes.eval_velocity_gradient(&u, t, l);
            -fes.eval_pressure(&q, t, l) * (g[0][0] + g[1][1])
        });
        assert!(rel_close(dot(&q, &b.matvec(&u)), oracle, 1e-12));
    }

    #[test]
    fn mass_properties() {
        let fes = FESystem::new(generate_bifurcation(0.4).unwrap());
        let m = assemble_mass(&fes);
        let n_s = fes.n_scalar();
        let mut ones_x = vec![0.0; fes.n_u()];
        ones_x[..n_s].iter_mut().for_each(|v| *v = 1.0);
        assert!((m.bilinear(&ones_x, &ones_x) - fes.mesh().area()).abs() < 1e-10);
        let all = vec![1.0; fes.n_u()];
        assert!((m.bilinear(&all, &all) - 2.0 * fes.mesh().area()).abs() < 1e-10);

        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let u = random_vec(&mut rng, fes.n_u());
        let v = random_vec(&mut rng, fes.n_u());
        let oracle = oracle_integrate(&fes, |t, l| {
            let a = fes.eval_velocity(&u, t, l);
            let b = fes.eval_velocity(&v, t, l);
            a[0] * b[0] + a[1] * b[1]
        });
        assert!(rel_close(m.bilinear(&v, &u), oracle, 1e-12));
    }

    #[test]
    fn mass_is_positive_definite() {
        let fes = square(2);
        let mut a = assemble_mass(&fes).to_dense();
        let n = a.len();
        for k in 0..n {
            assert!(a[k][k] > 0.0, "Cholesky breakdown at {k}");
            let d = a[k][k].sqrt();
            for i in k..n {
                a[i][k] /= d;
            }
            for j in k + 1..n {
                for i in j..n {
                    a[i][j] -= a[i][k] * a[j][k];
                }
            }
        }
    }

    #[test]
    fn load_values() {
        let fes = square(8);
        assert!(assemble_load(&fes, |_| [0.0, 0.0]).iter().all(|&v| v == 0.0));
        let ones = fes.interpolate_velocity(|_| [1.0, 0.0]);
        let l = assemble_load(&fes, |_| [1.0, 0.0]);
        assert!((dot(&l, &ones) - 1.0).abs() < 1e-12);
        let l = assemble_load(&fes, |p| [p[0].sin() + p[1].sin(), 0.0]);
        let exact = 2.0 * (1.0 - 1f64.cos());
        assert!((dot(&l, &ones) - exact).abs() < 1e-10);
    }

    #[test]
    fn a1_jacobian_identities() {
        let fes = square(3);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let u = random_vec(&mut rng, fes.n_u());
        let d = random_vec(&mut rng, fes.n_u());
        for kappa in [0.0, 1.0] {
            let (j1, j2) = a1_jacobians(&fes, &u, kappa);
            let act = a1_action(&fes, &u, &u, kappa);
            let sum: Vec<f64> = j1.matvec(&u).iter().zip(j2.matvec(&u)).map(|(a, b)| a + b).collect();
            for i in 0..fes.n_u() {
                assert!((sum[i] - 2.0 * act[i]).abs() < 1e-12 * (1.0 + act[i].abs()));
            }
            let first = a1_action(&fes, &d, &u, kappa);
            let jd = j1.matvec(&d);
            for i in 0..fes.n_u() {
                assert!((first[i] - jd[i]).abs() < 1e-12);
            }
            let second = a1_action(&fes, &u, &d, kappa);
            let jd = j2.matvec(&d);
            for i in 0..fes.n_u() {
                assert!((second[i] - jd[i]).abs() < 1e-12);
            }
        }
        let (z1, z2) = a1_jacobians(&fes, &vec![0.0; fes.n_u()], 1.0);
        assert_eq!(z1.max_abs(), 0.0);
        assert_eq!(z2.max_abs(), 0.0);
        assert!(a1_action(&fes, &vec![0.0; fes.n_u()], &u, 1.0).iter().all(|&v| v == 0.0));
    }

    /// Least-squares slope of log(err) against log(eps).
    pub(crate) fn fd_slope(eps: &[f64], err: &[f64]) -> f64 {
        let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
        let ys: Vec<f64> = err.iter().map(|e| e.ln()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        sxy / sxx
    }

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn convection_and_boundary_jacobians_pass_fd_slope() {
        let fes = square(3);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let u = random_vec(&mut rng, fes.n_u());
        let d = random_vec(&mut rng, fes.n_u());
        let eps = [1e-2, 1e-3, 1e-4, 1e-5];
        let (j1, j2) = a1_jacobians(&fes, &u, 1.0);
        let jb = cbc_boundary_jacobian(&fes, &u);
        let f0 = a1_action(&fes, &u, &u, 1.0);
        let b0 = cbc_boundary_action(&fes, &u);
        let mut e1 = Vec::new();
        let mut e2 = Vec::new();
        for &e in &eps {
            let up: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + e * b).collect();
            let f1 = a1_action(&fes, &up, &up, 1.0);
            let jd: Vec<f64> = j1.matvec(&d).iter().zip(j2.matvec(&d)).map(|(a, b)| a + b).collect();
            e1.push(norm(&(0..f0.len()).map(|i| f1[i] - f0[i] - e * jd[i]).collect::<Vec<_>>()));
            let b1 = cbc_boundary_action(&fes, &up);
            let jbd = jb.matvec(&d);
            e2.push(norm(&(0..b0.len()).map(|i| b1[i] - b0[i] - e * jbd[i]).collect::<Vec<_>>()));
        }
        assert!(fd_slope(&eps, &e1) >= 1.9, "{e1:?}");
        assert!(fd_slope(&eps, &e2) >= 1.9, "{e2:?}");
    }

    #[test]
    fn cbc_boundary_action_on_left_wall() {
        let fes = square(4);
        let u = fes.interpolate_velocity(|_| [1.0, 0.0]);
        let r = cbc_boundary_action(&fes, &u);
        assert!((dot(&r, &u) + 0.5).abs() < 1e-13);
        let tangential = fes.interpolate_velocity(|_| [0.0, 1.0]);
        assert!(cbc_boundary_action(&fes, &tangential).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn ddn_boundary_sign_bookkeeping() {
        let fes = square(4);
        let outflowing = fes.interpolate_velocity(|_| [-1.0, 0.0]);
        assert_eq!(assemble_ddn_boundary(&fes, &outflowing).max_abs(), 0.0);
        let backflow = fes.interpolate_velocity(|_| [1.0, 0.0]);
        let m = assemble_ddn_boundary(&fes, &backflow);
        let bm = assemble_boundary_mass(&fes, BoundaryTag::OutflowOne);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let x = random_vec(&mut rng, fes.n_u());
        let (a, b) = (m.matvec(&x), bm.matvec(&x));
        for i in 0..x.len() {
            assert!((a[i] - 0.5 * b[i]).abs() < 1e-14);
        }
        // boundary mass against a direct edge quadrature of v·v on x = 0
        let y2 = fes.interpolate_velocity(|p| [p[1], 0.0]);
        assert!((bm.bilinear(&y2, &y2) - 1.0 / 3.0).abs() < 1e-14);
    }

    /// Unit square whose no-slip part is only the bottom wall; the other
    /// three sides form the outflow boundary.
    fn bottom_wall_square(n: usize) -> FESystem {
        let m = generate_unit_square(n).unwrap().retagged(|mid, _| {
            if mid[1].abs() < 1e-12 { BoundaryTag::WallH } else { BoundaryTag::OutflowOne }
        });
        FESystem::new(m)
    }

    /// `w = curl ψ` for `ψ = y (c0 + c1 x + c2 y + c3 x² + c4 xy + c5 y²)`, a
    /// cubic vanishing on the bottom wall, so `w·n = 0` there.
    fn curl_cubic(c: &[f64; 6]) -> impl Fn(Point) -> [f64; 2] + '_ {
        move |p: Point| {
            let (x, y) = (p[0], p[1]);
            let q = c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y;
            let qx = c[1] + 2.0 * c[3] * x + c[4] * y;
            let qy = c[2] + c[4] * x + 2.0 * c[5] * y;
            [q + y * qy, -y * qx]
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn trilinear_antisymmetry(
            c in proptest::array::uniform6(-1.0f64..1.0),
            seed in 0u64..1000,
        ) {
            let fes = bottom_wall_square(3);
            let w = fes.interpolate_velocity(curl_cubic(&c));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_vec(&mut rng, fes.n_u());
            let v = random_vec(&mut rng, fes.n_u());
            let auv = dot(&a1_action(&fes, &w, &u, 1.0), &v);
            let avu = dot(&a1_action(&fes, &w, &v, 1.0), &u);
            let auu = dot(&a1_action(&fes, &w, &u, 1.0), &u);
            let scale = 1.0 + auv.abs();
            prop_assert!((auv + avu).abs() <= 1e-10 * scale);
            prop_assert!(auu.abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn p2_reproduces_cubic_stream_curl() {
        // curl of a cubic is quadratic, hence exactly representable
        let fes = square(3);
        let c = [0.3, -0.2, 0.5, 0.1, -0.4, 0.7];
        let f = curl_cubic(&c);
        let w = fes.interpolate_velocity(&f);
        let Location::Inside { triangle, bary } = fes.mesh().locate_point([0.37, 0.61], None) else { panic!() };
        let v = fes.eval_velocity(&w, triangle, bary);
        let e = f([0.37, 0.61]);
        assert!((v[0] - e[0]).abs() < 1e-13 && (v[1] - e[1]).abs() < 1e-13);
        let b = assemble_b(&fes);
        assert!(b.matvec(&w).iter().all(|x| x.abs() < 1e-12));
    }
}
