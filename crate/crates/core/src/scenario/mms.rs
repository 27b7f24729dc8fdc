//! Manufactured solution on the unit square with the convective outflow
//! condition on the left wall.
//!
//! `u = curl ψ` with `ψ = A(x) B(y)`, `A = (1 − x)² eˣ`, `B = y²(1 − y)²`,
//! so `u` vanishes on the bottom, top and right walls and is divergence
//! free. The pressure is `p = cos(πx) sin(πy)`. The forcing is
//! `f = −νΔu + ∇p + (u·∇)u` and the left wall carries the traction
//! `g = σ(u,p)n − ½(u·n)u` with `σ = 2νD(u) − pI`, so that the convective
//! condition holds up to the prescribed `g`.

use std::f64::consts::PI;

use crate::boundary::{BoundarySpec, OutflowKind};
use crate::fem::{self, FESystem, State};
use crate::mesh::{generate_unit_square, BoundaryTag, MeshError, Point};
use crate::nonlinear::{newton_solve_homogeneous, NewtonConfig, NewtonReport, SolveError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Manufactured {
    pub nu: f64,
}

/// `[A, A', A'', A''']`.
fn a_derivs(x: f64) -> [f64; 4] {
    let e = x.exp();
    [(1.0 - x).powi(2) * e, e * (x * x - 1.0), e * (x * x + 2.0 * x - 1.0), e * (x * x + 4.0 * x + 1.0)]
}

/// `[B, B', B'', B''']`.
fn b_derivs(y: f64) -> [f64; 4] {
    [
        y * y * (1.0 - y).powi(2),
        2.0 * y - 6.0 * y * y + 4.0 * y.powi(3),
        2.0 - 12.0 * y + 12.0 * y * y,
        -12.0 + 24.0 * y,
    ]
}

impl Manufactured {
    pub fn new(nu: f64) -> Self {
        Manufactured { nu }
    }

    pub fn stream_function(&self, p: Point) -> f64 {
        a_derivs(p[0])[0] * b_derivs(p[1])[0]
    }

    pub fn velocity(&self, p: Point) -> [f64; 2] {
        let (a, b) = (a_derivs(p[0]), b_derivs(p[1]));
        [a[0] * b[1], -a[1] * b[0]]
    }

    /// `g[c][d] = ∂_d u_c`.
    pub fn gradient(&self, p: Point) -> [[f64; 2]; 2] {
        let (a, b) = (a_derivs(p[0]), b_derivs(p[1]));
        [[a[1] * b[1], a[0] * b[2]], [-a[2] * b[0], -a[1] * b[1]]]
    }

    pub fn pressure(&self, p: Point) -> f64 {
        (PI * p[0]).cos() * (PI * p[1]).sin()
    }

    pub fn forcing(&self, p: Point) -> [f64; 2] {
        let (a, b) = (a_derivs(p[0]), b_derivs(p[1]));
        let lap = [a[2] * b[1] + a[0] * b[3], -a[3] * b[0] - a[1] * b[2]];
        let gp = [-PI * (PI * p[0]).sin() * (PI * p[1]).sin(), PI * (PI * p[0]).cos() * (PI * p[1]).cos()];
        let u = self.velocity(p);
        let g = self.gradient(p);
        let conv = [g[0][0] * u[0] + g[0][1] * u[1], g[1][0] * u[0] + g[1][1] * u[1]];
        [-self.nu * lap[0] + gp[0] + conv[0], -self.nu * lap[1] + gp[1] + conv[1]]
    }

    /// Traction `σn − ½(u·n)u` on the left wall, `n = (−1, 0)`.
    pub fn outflow_traction(&self, p: Point) -> [f64; 2] {
        self.traction(p, OutflowKind::Cbc)
    }

    /// Left-wall datum `g` such that the exact pair satisfies the outflow
    /// condition of `kind` with `g` added: `σn − ½(u·n)u` for the convective
    /// condition, `σn` for do-nothing and `σn − ½(u·n)₋u` for the directional
    /// variant.
    pub fn traction(&self, p: Point, kind: OutflowKind) -> [f64; 2] {
        let g = self.gradient(p);
        let u = self.velocity(p);
        let pr = self.pressure(p);
        let sigma = [
            [2.0 * self.nu * g[0][0] - pr, self.nu * (g[0][1] + g[1][0])],
            [self.nu * (g[0][1] + g[1][0]), 2.0 * self.nu * g[1][1] - pr],
        ];
        let un = -u[0];
        let w = match kind {
            OutflowKind::Cbc => un,
            OutflowKind::Dn => 0.0,
            OutflowKind::Ddn => un.min(0.0),
        };
        [-sigma[0][0] - 0.5 * w * u[0], -sigma[1][0] - 0.5 * w * u[1]]
    }
}

/// Discretization errors of one manufactured run.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MmsErrors {
    pub n: usize,
    pub h: f64,
    pub l2_u: f64,
    pub h1_u: f64,
    pub l2_p: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum MmsError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Load vector of the manufactured problem: volume forcing plus the
/// left-wall datum.
pub fn manufactured_load(fes: &FESystem, m: &Manufactured, kind: OutflowKind) -> Vec<f64> {
    let mut load = fem::assemble_load(fes, |x| m.forcing(x));
    let g = fem::assemble_boundary_load(fes, BoundaryTag::OutflowOne, |x| m.traction(x, kind));
    load.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    load
}

/// Solves the manufactured problem on the `n × n` unit square and measures
/// the velocity L² and H¹-seminorm errors and the pressure L² error.
pub fn mms_errors(n: usize, nu: f64, kind: OutflowKind, cfg: &NewtonConfig) -> Result<(MmsErrors, NewtonReport), MmsError> {
    let fes = FESystem::new(generate_unit_square(n)?);
    let m = Manufactured::new(nu);
    let load = manufactured_load(&fes, &m, kind);
    let (state, report) = newton_solve_homogeneous(&fes, &BoundarySpec::new(kind, None), nu, &load, cfg)?;
    let [l2_u, h1_u, l2_p] = measure_errors(&fes, &m, &state);
    let errs = MmsErrors { n, h: 1.0 / n as f64, l2_u, h1_u, l2_p, iterations: report.iterations, converged: report.converged };
    Ok((errs, report))
}

/// Velocity L², velocity H¹-seminorm and pressure L² errors of `state`
/// against the exact solution.
pub fn measure_errors(fes: &FESystem, m: &Manufactured, state: &State) -> [f64; 3] {
    let (mut e_u, mut e_g, mut e_p) = (0.0, 0.0, 0.0);
    for t in 0..fes.mesh().n_triangles() {
        for qp in fem::volume_points(fes, t) {
            let x = fes.point(t, qp.bary);
            let (u, g, p) = (m.velocity(x), m.gradient(x), m.pressure(x));
            let uh = fes.eval_velocity(&state.u, t, qp.bary);
            let gh = fes.eval_velocity_gradient(&state.u, t, qp.bary);
            let ph = fes.eval_pressure(&state.p, t, qp.bary);
            e_u += qp.weight * ((uh[0] - u[0]).powi(2) + (uh[1] - u[1]).powi(2));
            for c in 0..2 {
                for d in 0..2 {
                    e_g += qp.weight * (gh[c][d] - g[c][d]).powi(2);
                }
            }
            e_p += qp.weight * (ph - p).powi(2);
        }
    }
    [e_u.sqrt(), e_g.sqrt(), e_p.sqrt()]
}

/// Observed orders `log(e_k/e_{k+1}) / log(h_k/h_{k+1})` for consecutive
/// refinements, as `[l2_u, h1_u, l2_p]` triples.
pub fn observed_orders(errs: &[MmsErrors]) -> Vec<[f64; 3]> {
    errs.windows(2)
        .map(|w| {
            let r = (w[0].h / w[1].h).ln();
            [
                (w[0].l2_u / w[1].l2_u).ln() / r,
                (w[0].h1_u / w[1].h1_u).ln() / r,
                (w[0].l2_p / w[1].l2_p).ln() / r,
            ]
        })
        .collect()
}
