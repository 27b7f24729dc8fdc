//! Assembly of the Taylor–Hood forms.
//!
//! Every local block is pushed in full, including numerically zero entries,
//! so matrices that depend on a state have a sparsity pattern fixed by the
//! mesh alone. This lets a symbolic factorization be reused across Newton
//! iterations and time steps.

use super::quadrature::{edge_gauss4, triangle_deg6};
use super::space::{p2_gradients, p2_values, FESystem};
use crate::linalg::{SparseMatrix, Triplets};
use crate::mesh::{BoundaryTag, Point};

type Local = [[f64; 12]; 12];

/// Quadrature data at a volume point.
pub(crate) struct VolumePoint {
    pub weight: f64,
    pub bary: [f64; 3],
    pub phi: [f64; 6],
    pub dphi: [[f64; 2]; 6],
}

/// Quadrature data at a boundary point.
pub(crate) struct EdgePoint {
    pub weight: f64,
    pub bary: [f64; 3],
    pub phi: [f64; 6],
    pub normal: Point,
    pub x: Point,
}

pub(crate) fn volume_points(fes: &FESystem, t: usize) -> impl Iterator<Item = VolumePoint> + '_ {
    let rule = triangle_deg6();
    let g = fes.geom(t);
    rule.points.iter().zip(&rule.weights).map(move |(&l, &w)| VolumePoint {
        weight: 2.0 * g.area * w,
        bary: l,
        phi: p2_values(l),
        dphi: p2_gradients(l, &g.grad_lambda),
    })
}

/// Walks the edge quadrature points of every boundary edge carrying `tag`,
/// passing the owning triangle.
pub(crate) fn for_each_edge_point(fes: &FESystem, tag: BoundaryTag, mut f: impl FnMut(usize, &EdgePoint)) {
    let mesh = fes.mesh();
    let rule = edge_gauss4();
    for b in mesh.edges_with_tag(tag) {
        let (normal, len) = mesh.edge_normal(b);
        let tri = mesh.triangles()[b.triangle];
        let la = tri.iter().position(|&v| v == b.nodes[0]).expect("edge node in owner");
        let lb = tri.iter().position(|&v| v == b.nodes[1]).expect("edge node in owner");
        let (p, q) = (mesh.nodes()[b.nodes[0]], mesh.nodes()[b.nodes[1]]);
        for (&s, &w) in rule.points.iter().zip(&rule.weights) {
            let mut l = [0.0; 3];
            l[la] = 1.0 - s;
            l[lb] = s;
            let x = [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])];
            f(b.triangle, &EdgePoint { weight: w * len, bary: l, phi: p2_values(l), normal, x });
        }
    }
}

fn local_dofs(fes: &FESystem, t: usize) -> [usize; 12] {
    let s = fes.scalar_dofs(t);
    std::array::from_fn(|k| fes.velocity_dof(s[k % 6], k / 6))
}

fn push_local(trips: &mut Triplets, dofs: &[usize; 12], k: &Local, scale: f64, offset: usize) {
    for a in 0..12 {
        for b in 0..12 {
            trips.push(offset + dofs[a], offset + dofs[b], scale * k[a][b]);
        }
    }
}

/// Velocity value and gradient of coefficient vector `u` at a quadrature point.
#[inline]
fn velocity_at(u: &[f64], n_s: usize, dofs: &[usize; 6], phi: &[f64; 6]) -> [f64; 2] {
    let mut v = [0.0; 2];
    for i in 0..6 {
        v[0] += phi[i] * u[dofs[i]];
        v[1] += phi[i] * u[n_s + dofs[i]];
    }
    v
}

#[inline]
fn gradient_at(u: &[f64], n_s: usize, dofs: &[usize; 6], dphi: &[[f64; 2]; 6]) -> [[f64; 2]; 2] {
    let mut g = [[0.0; 2]; 2];
    for i in 0..6 {
        for c in 0..2 {
            let a = u[c * n_s + dofs[i]];
            g[c][0] += a * dphi[i][0];
            g[c][1] += a * dphi[i][1];
        }
    }
    g
}

/// `scale * a₀` added into `trips` with row/column offset `offset`.
pub fn add_a0(fes: &FESystem, trips: &mut Triplets, scale: f64, offset: usize) {
    for t in 0..fes.mesh().n_triangles() {
        let mut k: Local = [[0.0; 12]; 12];
        for qp in volume_points(fes, t) {
            let d = &qp.dphi;
            for i in 0..6 {
                for j in 0..6 {
                    let dot = d[i][0] * d[j][0] + d[i][1] * d[j][1];
                    for c in 0..2 {
                        for e in 0..2 {
                            let mut v = d[j][c] * d[i][e];
                            if c == e {
                                v += dot;
                            }
                            k[c * 6 + i][e * 6 + j] += qp.weight * v;
                        }
                    }
                }
            }
        }
        push_local(trips, &local_dofs(fes, t), &k, scale, offset);
    }
}

/// Matrix of `a₀(u, v) = 2∫ D(u):D(v)`.
pub fn assemble_a0(fes: &FESystem) -> SparseMatrix {
    let mut trips = Triplets::with_capacity(fes.n_u(), fes.n_u(), 144 * fes.mesh().n_triangles());
    add_a0(fes, &mut trips, 1.0, 0);
    trips.build().expect("a0 indices in range")
}

/// Adds `scale * B` at `(row0, 0)` and `scale * B^T` at `(0, row0)`, where
/// `B[k, (j,d)] = -∫ ψ_k ∂_d φ_j` is the matrix of `b(u, q) = -∫ q div u`.
pub fn add_b_blocks(fes: &FESystem, trips: &mut Triplets, scale: f64, row0: usize) {
    let tris = fes.mesh().triangles();
    for t in 0..tris.len() {
        let dofs = local_dofs(fes, t);
        let vert = tris[t];
        let mut k = [[0.0; 12]; 3];
        for qp in volume_points(fes, t) {
            for (a, kr) in k.iter_mut().enumerate() {
                let psi = qp.bary[a];
                for j in 0..6 {
                    for d in 0..2 {
                        kr[d * 6 + j] -= qp.weight * psi * qp.dphi[j][d];
                    }
                }
            }
        }
        for a in 0..3 {
            for b in 0..12 {
                trips.push(row0 + vert[a], dofs[b], scale * k[a][b]);
                trips.push(dofs[b], row0 + vert[a], scale * k[a][b]);
            }
        }
    }
}

/// `n_p × n_u` matrix of `b(u, q)`.
pub fn assemble_b(fes: &FESystem) -> SparseMatrix {
    let tris = fes.mesh().triangles();
    let mut trips = Triplets::with_capacity(fes.n_p(), fes.n_u(), 36 * tris.len());
    for t in 0..tris.len() {
        let dofs = local_dofs(fes, t);
        let vert = tris[t];
        for qp in volume_points(fes, t) {
            for a in 0..3 {
                for j in 0..6 {
                    for d in 0..2 {
                        trips.push(vert[a], dofs[d * 6 + j], -qp.weight * qp.bary[a] * qp.dphi[j][d]);
                    }
                }
            }
        }
    }
    trips.build().expect("b indices in range")
}

/// Scalar P2 mass matrix (`n_s × n_s`).
pub fn assemble_scalar_mass(fes: &FESystem) -> SparseMatrix {
    let n_s = fes.n_scalar();
    let mut trips = Triplets::with_capacity(n_s, n_s, 36 * fes.mesh().n_triangles());
    for t in 0..fes.mesh().n_triangles() {
        let s = fes.scalar_dofs(t);
        let mut k = [[0.0; 6]; 6];
        for qp in volume_points(fes, t) {
            for i in 0..6 {
                for j in 0..6 {
                    k[i][j] += qp.weight * qp.phi[i] * qp.phi[j];
                }
            }
        }
        for i in 0..6 {
            for j in 0..6 {
                trips.push(s[i], s[j], k[i][j]);
            }
        }
    }
    trips.build().expect("mass indices in range")
}

/// Scalar P2 stiffness matrix `∫ ∇φ_j · ∇φ_i`.
pub fn assemble_scalar_stiffness(fes: &FESystem) -> SparseMatrix {
    let n_s = fes.n_scalar();
    let mut trips = Triplets::with_capacity(n_s, n_s, 36 * fes.mesh().n_triangles());
    for t in 0..fes.mesh().n_triangles() {
        let s = fes.scalar_dofs(t);
        let mut k = [[0.0; 6]; 6];
        for qp in volume_points(fes, t) {
            let d = &qp.dphi;
            for i in 0..6 {
                for j in 0..6 {
                    k[i][j] += qp.weight * (d[i][0] * d[j][0] + d[i][1] * d[j][1]);
                }
            }
        }
        for i in 0..6 {
            for j in 0..6 {
                trips.push(s[i], s[j], k[i][j]);
            }
        }
    }
    trips.build().expect("stiffness indices in range")
}

/// Vector mass matrix: the scalar mass on each component block.
pub fn add_mass(fes: &FESystem, trips: &mut Triplets, scale: f64, offset: usize) {
    for t in 0..fes.mesh().n_triangles() {
        let mut k: Local = [[0.0; 12]; 12];
        for qp in volume_points(fes, t) {
            for i in 0..6 {
                for j in 0..6 {
                    let v = qp.weight * qp.phi[i] * qp.phi[j];
                    k[i][j] += v;
                    k[6 + i][6 + j] += v;
                }
            }
        }
        push_local(trips, &local_dofs(fes, t), &k, scale, offset);
    }
}

pub fn assemble_mass(fes: &FESystem) -> SparseMatrix {
    let mut trips = Triplets::with_capacity(fes.n_u(), fes.n_u(), 144 * fes.mesh().n_triangles());
    add_mass(fes, &mut trips, 1.0, 0);
    trips.build().expect("mass indices in range")
}

/// P1 pressure mass matrix (`n_p × n_p`).
pub fn assemble_pressure_mass(fes: &FESystem) -> SparseMatrix {
    let tris = fes.mesh().triangles();
    let mut trips = Triplets::with_capacity(fes.n_p(), fes.n_p(), 9 * tris.len());
    for (t, v) in tris.iter().enumerate() {
        let area = fes.geom(t).area;
        for a in 0..3 {
            for b in 0..3 {
                let m = if a == b { area / 6.0 } else { area / 12.0 };
                trips.push(v[a], v[b], m);
            }
        }
    }
    trips.build().expect("pressure mass indices in range")
}

/// Load vector `v ↦ ∫ f·v`.
pub fn assemble_load(fes: &FESystem, f: impl Fn(Point) -> [f64; 2]) -> Vec<f64> {
    let mut r = vec![0.0; fes.n_u()];
    for t in 0..fes.mesh().n_triangles() {
        let dofs = local_dofs(fes, t);
        for qp in volume_points(fes, t) {
            let fx = f(fes.point(t, qp.bary));
            for i in 0..6 {
                r[dofs[i]] += qp.weight * fx[0] * qp.phi[i];
                r[dofs[6 + i]] += qp.weight * fx[1] * qp.phi[i];
            }
        }
    }
    r
}

/// Boundary load `v ↦ ∫_tag g·v ds`.
pub fn assemble_boundary_load(fes: &FESystem, tag: BoundaryTag, g: impl Fn(Point) -> [f64; 2]) -> Vec<f64> {
    let mut r = vec![0.0; fes.n_u()];
    for_each_edge_point(fes, tag, |t, ep| {
        let dofs = local_dofs(fes, t);
        let gx = g(ep.x);
        for i in 0..6 {
            r[dofs[i]] += ep.weight * gx[0] * ep.phi[i];
            r[dofs[6 + i]] += ep.weight * gx[1] * ep.phi[i];
        }
    });
    r
}

/// Vector boundary mass `∫_tag δu·v ds`.
pub fn assemble_boundary_mass(fes: &FESystem, tag: BoundaryTag) -> SparseMatrix {
    let mut trips = Triplets::new(fes.n_u(), fes.n_u());
    for_each_edge_point(fes, tag, |t, ep| {
        let dofs = local_dofs(fes, t);
        let mut k: Local = [[0.0; 12]; 12];
        for i in 0..6 {
            for j in 0..6 {
                let v = ep.weight * ep.phi[i] * ep.phi[j];
                k[i][j] = v;
                k[6 + i][6 + j] = v;
            }
        }
        push_local(&mut trips, &dofs, &k, 1.0, 0);
    });
    trips.build().expect("boundary mass indices in range")
}

/// Vector `r` with `r·v = a₁(w; u, v)`, where
/// `a₁(w; u, v) = ∫ (w·∇)u·v − κ/2 ∫_Γ₁ (w·n)(u·v)` and `κ = gamma1_weight`.
pub fn a1_action(fes: &FESystem, w: &[f64], u: &[f64], gamma1_weight: f64) -> Vec<f64> {
    let n_s = fes.n_scalar();
    let mut r = vec![0.0; fes.n_u()];
    for t in 0..fes.mesh().n_triangles() {
        let s = fes.scalar_dofs(t);
        for qp in volume_points(fes, t) {
            let wq = velocity_at(w, n_s, &s, &qp.phi);
            let g = gradient_at(u, n_s, &s, &qp.dphi);
            for c in 0..2 {
                let conv = wq[0] * g[c][0] + wq[1] * g[c][1];
                for i in 0..6 {
                    r[c * n_s + s[i]] += qp.weight * conv * qp.phi[i];
                }
            }
        }
    }
    if gamma1_weight != 0.0 {
        for_each_edge_point(fes, BoundaryTag::OutflowOne, |t, ep| {
            let s = fes.scalar_dofs(t);
            let wq = velocity_at(w, n_s, &s, &ep.phi);
            let uq = velocity_at(u, n_s, &s, &ep.phi);
            let wn = wq[0] * ep.normal[0] + wq[1] * ep.normal[1];
            let coef = -0.5 * gamma1_weight * ep.weight * wn;
            for i in 0..6 {
                r[s[i]] += coef * uq[0] * ep.phi[i];
                r[n_s + s[i]] += coef * uq[1] * ep.phi[i];
            }
        });
    }
    r
}

/// Adds `scale ×` the matrix of `δ ↦ ∫ (δ·∇)u·v` (first convection slot).
pub fn add_convection_first(fes: &FESystem, u: &[f64], trips: &mut Triplets, scale: f64) {
    let n_s = fes.n_scalar();
    for t in 0..fes.mesh().n_triangles() {
        let s = fes.scalar_dofs(t);
        let mut k: Local = [[0.0; 12]; 12];
        for qp in volume_points(fes, t) {
            let g = gradient_at(u, n_s, &s, &qp.dphi);
            for i in 0..6 {
                for j in 0..6 {
                    let pp = qp.weight * qp.phi[i] * qp.phi[j];
                    for c in 0..2 {
                        for d in 0..2 {
                            k[c * 6 + i][d * 6 + j] += pp * g[c][d];
                        }
                    }
                }
            }
        }
        push_local(trips, &local_dofs(fes, t), &k, scale, 0);
    }
}

/// Adds `scale ×` the matrix of `δ ↦ ∫ (w·∇)δ·v` (second convection slot).
pub fn add_convection_second(fes: &FESystem, w: &[f64], trips: &mut Triplets, scale: f64) {
    let n_s = fes.n_scalar();
    for t in 0..fes.mesh().n_triangles() {
        let s = fes.scalar_dofs(t);
        let mut k: Local = [[0.0; 12]; 12];
        for qp in volume_points(fes, t) {
            let wq = velocity_at(w, n_s, &s, &qp.phi);
            for j in 0..6 {
                let adv = qp.weight * (wq[0] * qp.dphi[j][0] + wq[1] * qp.dphi[j][1]);
                for i in 0..6 {
                    let v = adv * qp.phi[i];
                    k[i][j] += v;
                    k[6 + i][6 + j] += v;
                }
            }
        }
        push_local(trips, &local_dofs(fes, t), &k, scale, 0);
    }
}

/// Adds `scale ×` the matrix of `δ ↦ ∫_Γ₁ (δ·n)(u·v) ds`.
pub fn add_boundary_first(fes: &FESystem, u: &[f64], trips: &mut Triplets, scale: f64) {
    let n_s = fes.n_scalar();
    for_each_edge_point(fes, BoundaryTag::OutflowOne, |t, ep| {
        let s = fes.scalar_dofs(t);
        let uq = velocity_at(u, n_s, &s, &ep.phi);
        let mut k: Local = [[0.0; 12]; 12];
        for i in 0..6 {
            for j in 0..6 {
                let pp = ep.weight * ep.phi[i] * ep.phi[j];
                for c in 0..2 {
                    for d in 0..2 {
                        k[c * 6 + i][d * 6 + j] = pp * ep.normal[d] * uq[c];
                    }
                }
            }
        }
        push_local(trips, &local_dofs(fes, t), &k, scale, 0);
    });
}

/// Adds `scale ×` the matrix of `δ ↦ ∫_Γ₁ ρ(w·n)(δ·v) ds` with the
/// pointwise weight `ρ(w·n)` supplied by `weight_fn`.
fn add_boundary_second_with(
    fes: &FESystem,
    w: &[f64],
    trips: &mut Triplets,
    scale: f64,
    weight_fn: impl Fn(f64) -> f64,
) {
    let n_s = fes.n_scalar();
    for_each_edge_point(fes, BoundaryTag::OutflowOne, |t, ep| {
        let s = fes.scalar_dofs(t);
        let wq = velocity_at(w, n_s, &s, &ep.phi);
        let wn = weight_fn(wq[0] * ep.normal[0] + wq[1] * ep.normal[1]);
        let mut k: Local = [[0.0; 12]; 12];
        for i in 0..6 {
            for j in 0..6 {
                let v = ep.weight * wn * ep.phi[i] * ep.phi[j];
                k[i][j] = v;
                k[6 + i][6 + j] = v;
            }
        }
        push_local(trips, &local_dofs(fes, t), &k, scale, 0);
    });
}

/// Adds `scale ×` the matrix of `δ ↦ ∫_Γ₁ (w·n)(δ·v) ds`.
pub fn add_boundary_second(fes: &FESystem, w: &[f64], trips: &mut Triplets, scale: f64) {
    add_boundary_second_with(fes, w, trips, scale, |s| s);
}

/// Adds `scale ×` the matrix of `δ ↦ -½ ∫_Γ₁ (u_prev·n)₋ (δ·v) ds`.
pub fn add_ddn_boundary(fes: &FESystem, u_prev: &[f64], trips: &mut Triplets, scale: f64) {
    add_boundary_second_with(fes, u_prev, trips, -0.5 * scale, |s| s.min(0.0));
}

/// Both slot linearizations of `a₁`: `J₁ δ = a₁(δ; u, ·)` and `J₂ δ = a₁(u; δ, ·)`.
pub fn a1_jacobians(fes: &FESystem, u: &[f64], gamma1_weight: f64) -> (SparseMatrix, SparseMatrix) {
    let n = fes.n_u();
    let mut j1 = Triplets::new(n, n);
    add_convection_first(fes, u, &mut j1, 1.0);
    let mut j2 = Triplets::new(n, n);
    add_convection_second(fes, u, &mut j2, 1.0);
    if gamma1_weight != 0.0 {
        add_boundary_first(fes, u, &mut j1, -0.5 * gamma1_weight);
        add_boundary_second(fes, u, &mut j2, -0.5 * gamma1_weight);
    }
    (j1.build().expect("indices in range"), j2.build().expect("indices in range"))
}

/// Vector of `v ↦ ½ ∫_Γ₁ (u·n)(u·v) ds`, the boundary part of `a₁(u; u, v)` up to sign.
pub fn cbc_boundary_action(fes: &FESystem, u: &[f64]) -> Vec<f64> {
    boundary_action(fes, u, |s| 0.5 * s)
}

/// Matrix of `δ ↦ ½ ∫_Γ₁ [(δ·n)(u·v) + (u·n)(δ·v)] ds`.
pub fn cbc_boundary_jacobian(fes: &FESystem, u: &[f64]) -> SparseMatrix {
    let mut trips = Triplets::new(fes.n_u(), fes.n_u());
    add_boundary_first(fes, u, &mut trips, 0.5);
    add_boundary_second(fes, u, &mut trips, 0.5);
    trips.build().expect("indices in range")
}

/// Vector of `v ↦ -½ ∫_Γ₁ (u·n)₋ (u·v) ds`, the directional do-nothing term.
pub fn ddn_boundary_action(fes: &FESystem, u: &[f64]) -> Vec<f64> {
    boundary_action(fes, u, |s| -0.5 * s.min(0.0))
}

/// Matrix of `δ ↦ -½ ∫_Γ₁ (u_prev·n)₋ (δ·v) ds`.
pub fn assemble_ddn_boundary(fes: &FESystem, u_prev: &[f64]) -> SparseMatrix {
    let mut trips = Triplets::new(fes.n_u(), fes.n_u());
    add_ddn_boundary(fes, u_prev, &mut trips, 1.0);
    trips.build().expect("indices in range")
}

fn boundary_action(fes: &FESystem, u: &[f64], weight_fn: impl Fn(f64) -> f64) -> Vec<f64> {
    let n_s = fes.n_scalar();
    let mut r = vec![0.0; fes.n_u()];
    for_each_edge_point(fes, BoundaryTag::OutflowOne, |t, ep| {
        let s = fes.scalar_dofs(t);
        let uq = velocity_at(u, n_s, &s, &ep.phi);
        let coef = ep.weight * weight_fn(uq[0] * ep.normal[0] + uq[1] * ep.normal[1]);
        for i in 0..6 {
            r[s[i]] += coef * uq[0] * ep.phi[i];
            r[n_s + s[i]] += coef * uq[1] * ep.phi[i];
        }
    });
    r
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
