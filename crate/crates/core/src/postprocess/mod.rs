//! Derived quantities: the nonlinear outflow functional, the stream function
//! and field norms.

use std::sync::Arc;

use crate::boundary::divergence_residual;
use crate::fem::quadrature::edge_gauss4;
use crate::fem::{self, FESystem, State};
use crate::linalg::{lu_solve, LinalgError, Triplets};
use crate::mesh::{BoundaryTag, Point};

#[cfg(test)]
mod tests;

#[derive(Debug, thiserror::Error)]
pub enum PostError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("stream function is underdetermined: {0}")]
    Underdetermined(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// `max(s, 0)`.
pub fn positive_part(s: f64) -> f64 {
    s.max(0.0)
}

/// `min(s, 0)`.
pub fn negative_part(s: f64) -> f64 {
    s.min(0.0)
}

/// Contribution of one boundary edge to the outflow functional.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct EdgeOutflow {
    pub nodes: [usize; 2],
    /// `∫_e u·n ds`.
    pub flux: f64,
    /// `∫_e (u·n)₊ u ds`.
    pub gamma: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct OutflowReport {
    pub gamma: [f64; 2],
    pub tag: String,
    pub edges: Vec<EdgeOutflow>,
}

impl OutflowReport {
    pub fn magnitude(&self) -> f64 {
        self.gamma[0].hypot(self.gamma[1])
    }

    /// Net flux `∫ u·n ds` through the tagged boundary.
    pub fn flux(&self) -> f64 {
        self.edges.iter().map(|e| e.flux).sum()
    }
}

/// `γ(u) = ∫_tag (u·n)₊ u ds`.
pub fn nonlinear_outflow(fes: &FESystem, u: &[f64], tag: BoundaryTag) -> Result<OutflowReport, PostError> {
    let mesh = fes.mesh();
    if !mesh.has_tag(tag) {
        return Err(PostError::InvalidArgument(format!("mesh has no boundary edges tagged {tag}")));
    }
    let rule = edge_gauss4();
    let mut edges = Vec::new();
    let mut gamma = [0.0; 2];
    for b in mesh.edges_with_tag(tag) {
        let (n, len) = mesh.edge_normal(b);
        let tri = mesh.triangles()[b.triangle];
        let la = tri.iter().position(|&v| v == b.nodes[0]).expect("edge node in owner");
        let lb = tri.iter().position(|&v| v == b.nodes[1]).expect("edge node in owner");
        let mut e = EdgeOutflow { nodes: b.nodes, flux: 0.0, gamma: [0.0; 2] };
        for (&s, &w) in rule.points.iter().zip(&rule.weights) {
            let mut l = [0.0; 3];
            l[la] = 1.0 - s;
            l[lb] = s;
            let v = fes.eval_velocity(u, b.triangle, l);
            let un = v[0] * n[0] + v[1] * n[1];
            let wp = w * len * positive_part(un);
            e.flux += w * len * un;
            e.gamma[0] += wp * v[0];
            e.gamma[1] += wp * v[1];
        }
        gamma[0] += e.gamma[0];
        gamma[1] += e.gamma[1];
        edges.push(e);
    }
    Ok(OutflowReport { gamma, tag: tag.token().to_string(), edges })
}

/// Boundary values of the stream function on `Γ₀` (walls and inflow).
#[derive(Clone)]
pub enum StreamDatum {
    /// Integrate `u·n` along each boundary loop, starting from zero at the
    /// node minimizing `x + y`. Walls get the constant left over from the
    /// integrated inflow, and every further loop (an obstacle) gets one free
    /// constant determined by the solve.
    FromFlow,
    /// Prescribed values at the Dirichlet nodes.
    Explicit(Arc<dyn Fn(Point) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for StreamDatum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.describe())
    }
}

impl StreamDatum {
    pub fn explicit(g: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        StreamDatum::Explicit(Arc::new(g))
    }

    pub fn describe(&self) -> &'static str {
        match self {
            StreamDatum::FromFlow => "integrated boundary flux, zero at the lower-left boundary node",
            StreamDatum::Explicit(_) => "explicit boundary function",
        }
    }
}

#[derive(Debug, Clone)]
pub struct StreamFunction {
    /// Scalar P2 coefficients.
    pub psi: Vec<f64>,
    pub datum: String,
    /// Values taken on obstacle loops, in loop order.
    pub hole_constants: Vec<f64>,
}

/// How a scalar node enters the stream-function solve.
#[derive(Debug, Clone, Copy)]
enum Role {
    Free(usize),
    Fixed(f64),
    /// `ψ = c_k + offset` with `c_k` the unknown of an obstacle loop.
    Hole { unknown: usize, offset: f64 },
}

/// Cumulative `∫ u·n ds` at every vertex and edge midpoint of each boundary
/// loop, in loop order.
fn loop_integrals(fes: &FESystem, u: &[f64]) -> Vec<Vec<(usize, f64)>> {
    let mesh = fes.mesh();
    let n_v = mesh.n_nodes();
    let rule = edge_gauss4();
    let mut out = Vec::new();
    for lp in mesh.boundary_loops() {
        let mut acc = 0.0;
        let mut vals = Vec::with_capacity(2 * lp.len());
        for &ei in &lp {
            let b = &mesh.boundary_edges()[ei];
            let (n, len) = mesh.edge_normal(b);
            let tri = mesh.triangles()[b.triangle];
            let la = tri.iter().position(|&v| v == b.nodes[0]).expect("edge node in owner");
            let lb = tri.iter().position(|&v| v == b.nodes[1]).expect("edge node in owner");
            let flux_on = |s0: f64, s1: f64| -> f64 {
                rule.points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&r, &w)| {
                        let s = s0 + (s1 - s0) * r;
                        let mut l = [0.0; 3];
                        l[la] = 1.0 - s;
                        l[lb] = s;
                        let v = fes.eval_velocity(u, b.triangle, l);
                        w * (s1 - s0) * len * (v[0] * n[0] + v[1] * n[1])
                    })
                    .sum()
            };
            vals.push((b.nodes[0], acc));
            let half = flux_on(0.0, 0.5);
            vals.push((n_v + b.edge, acc + half));
            acc += half + flux_on(0.5, 1.0);
        }
        out.push(vals);
    }
    out
}

/// Solves `∫ ∇ψ·∇φ = ∫ u·curl φ` for all `φ` vanishing on `Γ₀`, with
/// `curl φ = (∂φ/∂y, −∂φ/∂x)`, so that `u ≈ curl ψ`. The condition on the
/// outflow boundary is natural.
pub fn solve_stream_function(fes: &FESystem, u: &[f64], datum: &StreamDatum) -> Result<StreamFunction, PostError> {
    let n_s = fes.n_scalar();
    if u.len() != fes.n_u() {
        return Err(PostError::InvalidArgument(format!("velocity has length {}, expected {}", u.len(), fes.n_u())));
    }
    if (0..n_s).all(|s| fes.node_tag(s).is_none()) {
        return Err(PostError::Underdetermined("no Dirichlet boundary to anchor the stream function".into()));
    }
    let mut role = vec![Role::Free(usize::MAX); n_s];
    let mut n_holes = 0;
    match datum {
        StreamDatum::Explicit(g) => {
            for (s, r) in role.iter_mut().enumerate() {
                if fes.node_tag(s).is_some() {
                    *r = Role::Fixed(g(fes.node_coord(s)));
                }
            }
        }
        StreamDatum::FromFlow => {
            for (k, vals) in loop_integrals(fes, u).into_iter().enumerate() {
                let hole = k > 0 && vals.iter().any(|&(s, _)| fes.node_tag(s).is_some());
                for (s, v) in vals {
                    if fes.node_tag(s).is_some() {
                        role[s] = if k == 0 {
                            Role::Fixed(v)
                        } else if hole {
                            Role::Hole { unknown: n_holes, offset: v }
                        } else {
                            Role::Free(usize::MAX)
                        };
                    }
                }
                if hole {
                    n_holes += 1;
                }
            }
        }
    }
    let mut n_free = 0;
    for r in role.iter_mut() {
        if let Role::Free(i) = r {
            *i = n_free;
            n_free += 1;
        }
    }
    for r in role.iter_mut() {
        if let Role::Hole { unknown, .. } = r {
            *unknown += n_free;
        }
    }
    let n = n_free + n_holes;

    let k = fem::assemble_scalar_stiffness(fes);
    let rhs_full = curl_load(fes, u);
    let mut rhs = vec![0.0; n];
    let mut trips = Triplets::with_capacity(n, n, k.nnz());
    // row i of the reduced system tests with φ_i, or with the sum of the
    // basis functions of an obstacle loop
    for i in 0..n_s {
        let ri = match role[i] {
            Role::Fixed(_) => continue,
            Role::Free(r) => r,
            Role::Hole { unknown, .. } => unknown,
        };
        rhs[ri] += rhs_full[i];
        let (cols, vals) = k.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            match role[j] {
                Role::Fixed(g) => rhs[ri] -= v * g,
                Role::Free(c) => trips.push(ri, c, v),
                Role::Hole { unknown, offset } => {
                    trips.push(ri, unknown, v);
                    rhs[ri] -= v * offset;
                }
            }
        }
    }
    let x = if n > 0 { lu_solve(&trips.build()?, &rhs)? } else { Vec::new() };
    let psi = role
        .iter()
        .map(|r| match *r {
            Role::Fixed(g) => g,
            Role::Free(i) => x[i],
            Role::Hole { unknown, offset } => x[unknown] + offset,
        })
        .collect();
    Ok(StreamFunction {
        psi,
        datum: datum.describe().to_string(),
        hole_constants: (0..n_holes).map(|h| x[n_free + h]).collect(),
    })
}

/// `φ_i ↦ ∫ u·curl φ_i` over the scalar P2 basis.
fn curl_load(fes: &FESystem, u: &[f64]) -> Vec<f64> {
    let mut r = vec![0.0; fes.n_scalar()];
    for t in 0..fes.mesh().n_triangles() {
        let s = fes.scalar_dofs(t);
        for qp in fem::volume_points(fes, t) {
            let v = fes.eval_velocity(u, t, qp.bary);
            for i in 0..6 {
                r[s[i]] += qp.weight * (v[0] * qp.dphi[i][1] - v[1] * qp.dphi[i][0]);
            }
        }
    }
    r
}

/// Fraction of volume quadrature points where
/// `|∇ψ·u| / (|∇ψ||u| + eps) <= threshold`.
pub fn tangency_fraction(fes: &FESystem, psi: &[f64], u: &[f64], threshold: f64, eps: f64) -> f64 {
    let (mut good, mut total) = (0usize, 0usize);
    for t in 0..fes.mesh().n_triangles() {
        for qp in fem::volume_points(fes, t) {
            let g = fes.eval_scalar_gradient(psi, t, qp.bary);
            let v = fes.eval_velocity(u, t, qp.bary);
            let ratio = (g[0] * v[0] + g[1] * v[1]).abs() / (g[0].hypot(g[1]) * v[0].hypot(v[1]) + eps);
            total += 1;
            if ratio <= threshold {
                good += 1;
            }
        }
    }
    good as f64 / total.max(1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FieldNorms {
    pub l2_u: f64,
    /// `a₀(u, u)^{1/2} = (2∫ D(u):D(u))^{1/2}`.
    pub v_norm: f64,
    /// `sup_q |b(u, q)| / ‖q‖`.
    pub div_residual: f64,
    pub l2_p: f64,
}

pub fn field_norms(fes: &FESystem, state: &State) -> Result<FieldNorms, PostError> {
    let u = &state.u;
    let l2_u = fem::assemble_mass(fes).bilinear(u, u).max(0.0).sqrt();
    let v_norm = fes.a0().bilinear(u, u).max(0.0).sqrt();
    let l2_p = fem::assemble_pressure_mass(fes).bilinear(&state.p, &state.p).max(0.0).sqrt();
    Ok(FieldNorms { l2_u, v_norm, div_residual: divergence_residual(fes, u)?, l2_p })
}
