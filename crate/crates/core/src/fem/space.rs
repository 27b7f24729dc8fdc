use std::sync::OnceLock;

use crate::linalg::SparseMatrix;
use crate::mesh::{BoundaryTag, Mesh, Point, LOCAL_EDGES};

/// Affine triangle geometry: area and the constant gradients of the
/// barycentric coordinates.
#[derive(Debug, Clone, Copy)]
pub struct TriGeom {
    pub area: f64,
    pub grad_lambda: [[f64; 2]; 3],
}

impl TriGeom {
    pub fn new([a, b, c]: [Point; 3]) -> Self {
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let g1 = [(c[1] - a[1]) / det, -(c[0] - a[0]) / det];
        let g2 = [-(b[1] - a[1]) / det, (b[0] - a[0]) / det];
        TriGeom { area: 0.5 * det, grad_lambda: [[-g1[0] - g2[0], -g1[1] - g2[1]], g1, g2] }
    }
}

/// P2 shape function values at barycentric point `l`.
#[inline]
pub fn p2_values(l: [f64; 3]) -> [f64; 6] {
    let mut v = [0.0; 6];
    for i in 0..3 {
        v[i] = l[i] * (2.0 * l[i] - 1.0);
    }
    for (k, [a, b]) in LOCAL_EDGES.iter().enumerate() {
        v[3 + k] = 4.0 * l[*a] * l[*b];
    }
    v
}

/// P2 shape function gradients at barycentric point `l`.
#[inline]
pub fn p2_gradients(l: [f64; 3], g: &[[f64; 2]; 3]) -> [[f64; 2]; 6] {
    let mut d = [[0.0; 2]; 6];
    for i in 0..3 {
        let s = 4.0 * l[i] - 1.0;
        d[i] = [s * g[i][0], s * g[i][1]];
    }
    for (k, &[a, b]) in LOCAL_EDGES.iter().enumerate() {
        d[3 + k] = [
            4.0 * (l[a] * g[b][0] + l[b] * g[a][0]),
            4.0 * (l[a] * g[b][1] + l[b] * g[a][1]),
        ];
    }
    d
}

/// Taylor–Hood P2/P1 discretization on a triangle mesh.
///
/// Scalar P2 nodes are the mesh vertices followed by the edge midpoints.
/// Velocity unknowns are component blocked: `[u_x (n_s), u_y (n_s)]`.
/// Pressure unknowns are the vertex values.
#[derive(Debug, Clone)]
pub struct FESystem {
    mesh: Mesh,
    geom: Vec<TriGeom>,
    /// Scalar nodes owned by a Dirichlet tag; walls win at shared corners.
    node_tag: Vec<Option<BoundaryTag>>,
    a0: OnceLock<SparseMatrix>,
    b: OnceLock<SparseMatrix>,
}

impl FESystem {
    pub fn new(mesh: Mesh) -> Self {
        let geom = (0..mesh.n_triangles()).map(|t| TriGeom::new(mesh.vertices(t))).collect();
        let n_v = mesh.n_nodes();
        let mut node_tag: Vec<Option<BoundaryTag>> = vec![None; n_v + mesh.n_edges()];
        let mut claim = |s: usize, tag: BoundaryTag| {
            node_tag[s] = match (node_tag[s], tag) {
                (Some(BoundaryTag::WallH), _) | (_, BoundaryTag::WallH) => Some(BoundaryTag::WallH),
                _ => Some(tag),
            }
        };
        for b in mesh.boundary_edges() {
            if b.tag.is_dirichlet() {
                claim(b.nodes[0], b.tag);
                claim(b.nodes[1], b.tag);
                claim(n_v + b.edge, b.tag);
            }
        }
        FESystem { mesh, geom, node_tag, a0: OnceLock::new(), b: OnceLock::new() }
    }

    /// Cached matrix of `a₀`.
    pub fn a0(&self) -> &SparseMatrix {
        self.a0.get_or_init(|| super::assemble_a0(self))
    }

    /// Cached `n_p × n_u` matrix of `b`.
    pub fn b(&self) -> &SparseMatrix {
        self.b.get_or_init(|| super::assemble_b(self))
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn geom(&self, t: usize) -> &TriGeom {
        &self.geom[t]
    }

    /// Number of scalar P2 nodes.
    pub fn n_scalar(&self) -> usize {
        self.mesh.n_nodes() + self.mesh.n_edges()
    }

    pub fn n_u(&self) -> usize {
        2 * self.n_scalar()
    }

    pub fn n_p(&self) -> usize {
        self.mesh.n_nodes()
    }

    pub fn n_total(&self) -> usize {
        self.n_u() + self.n_p()
    }

    /// Scalar P2 node indices of triangle `t`: three vertices, then the
    /// midpoints of local edges 0, 1, 2.
    #[inline]
    pub fn scalar_dofs(&self, t: usize) -> [usize; 6] {
        let v = self.mesh.triangles()[t];
        let e = self.mesh.triangle_edges(t);
        let n_v = self.mesh.n_nodes();
        [v[0], v[1], v[2], n_v + e[0], n_v + e[1], n_v + e[2]]
    }

    /// Velocity unknown for scalar node `s` and component `c`.
    #[inline]
    pub fn velocity_dof(&self, s: usize, c: usize) -> usize {
        c * self.n_scalar() + s
    }

    /// Coordinates of scalar P2 node `s`.
    pub fn node_coord(&self, s: usize) -> Point {
        let n_v = self.mesh.n_nodes();
        if s < n_v {
            self.mesh.nodes()[s]
        } else {
            let [a, b] = self.mesh.edges()[s - n_v];
            let (p, q) = (self.mesh.nodes()[a], self.mesh.nodes()[b]);
            [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]
        }
    }

    /// Dirichlet tag that owns scalar node `s`, if any.
    pub fn node_tag(&self, s: usize) -> Option<BoundaryTag> {
        self.node_tag[s]
    }

    /// Scalar nodes constrained by `tag`, ascending.
    pub fn constrained_nodes(&self, tag: BoundaryTag) -> Vec<usize> {
        (0..self.n_scalar()).filter(|&s| self.node_tag[s] == Some(tag)).collect()
    }

    /// Velocity unknowns constrained by `tag` (both components), ascending.
    pub fn constrained_dofs(&self, tag: BoundaryTag) -> Vec<usize> {
        let nodes = self.constrained_nodes(tag);
        let mut dofs: Vec<usize> = nodes.iter().map(|&s| self.velocity_dof(s, 0)).collect();
        dofs.extend(nodes.iter().map(|&s| self.velocity_dof(s, 1)));
        dofs
    }

    /// `true` when the mesh has an outflow boundary.
    pub fn has_outflow(&self) -> bool {
        self.mesh.has_tag(BoundaryTag::OutflowOne)
    }

    /// Physical point of barycentric coordinates `l` in triangle `t`.
    pub fn point(&self, t: usize, l: [f64; 3]) -> Point {
        let [a, b, c] = self.mesh.vertices(t);
        [l[0] * a[0] + l[1] * b[0] + l[2] * c[0], l[0] * a[1] + l[1] * b[1] + l[2] * c[1]]
    }

    /// P2 interpolant of a vector field.
    pub fn interpolate_velocity(&self, f: impl Fn(Point) -> [f64; 2]) -> Vec<f64> {
        let n_s = self.n_scalar();
        let mut u = vec![0.0; 2 * n_s];
        for s in 0..n_s {
            let v = f(self.node_coord(s));
            u[s] = v[0];
            u[n_s + s] = v[1];
        }
        u
    }

    /// P2 interpolant of a scalar field.
    pub fn interpolate_scalar(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        (0..self.n_scalar()).map(|s| f(self.node_coord(s))).collect()
    }

    /// P1 interpolant of a pressure field.
    pub fn interpolate_pressure(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        self.mesh.nodes().iter().map(|&p| f(p)).collect()
    }

    /// Velocity at barycentric point `l` of triangle `t`.
    pub fn eval_velocity(&self, u: &[f64], t: usize, l: [f64; 3]) -> [f64; 2] {
        let n_s = self.n_scalar();
        let phi = p2_values(l);
        let dofs = self.scalar_dofs(t);
        let mut v = [0.0; 2];
        for i in 0..6 {
            v[0] += phi[i] * u[dofs[i]];
            v[1] += phi[i] * u[n_s + dofs[i]];
        }
        v
    }

    /// Velocity gradient `[[du_x/dx, du_x/dy], [du_y/dx, du_y/dy]]`.
    pub fn eval_velocity_gradient(&self, u: &[f64], t: usize, l: [f64; 3]) -> [[f64; 2]; 2] {
        let n_s = self.n_scalar();
        let d = p2_gradients(l, &self.geom[t].grad_lambda);
        let dofs = self.scalar_dofs(t);
        let mut g = [[0.0; 2]; 2];
        for i in 0..6 {
            for c in 0..2 {
                let coef = u[c * n_s + dofs[i]];
                g[c][0] += coef * d[i][0];
                g[c][1] += coef * d[i][1];
            }
        }
        g
    }

    /// Scalar P2 field at a barycentric point.
    pub fn eval_scalar(&self, psi: &[f64], t: usize, l: [f64; 3]) -> f64 {
        let phi = p2_values(l);
        let dofs = self.scalar_dofs(t);
        (0..6).map(|i| phi[i] * psi[dofs[i]]).sum()
    }

    pub fn eval_scalar_gradient(&self, psi: &[f64], t: usize, l: [f64; 3]) -> [f64; 2] {
        let d = p2_gradients(l, &self.geom[t].grad_lambda);
        let dofs = self.scalar_dofs(t);
        let mut g = [0.0; 2];
        for i in 0..6 {
            g[0] += psi[dofs[i]] * d[i][0];
            g[1] += psi[dofs[i]] * d[i][1];
        }
        g
    }

    /// P1 pressure at a barycentric point.
    pub fn eval_pressure(&self, p: &[f64], t: usize, l: [f64; 3]) -> f64 {
        let v = self.mesh.triangles()[t];
        l[0] * p[v[0]] + l[1] * p[v[1]] + l[2] * p[v[2]]
    }

    /// Velocity at an arbitrary point, or `None` outside the mesh.
    pub fn velocity_at(&self, u: &[f64], x: Point, hint: Option<usize>) -> Option<[f64; 2]> {
        match self.mesh.locate_point(x, hint) {
            crate::mesh::Location::Inside { triangle, bary } => Some(self.eval_velocity(u, triangle, bary)),
            crate::mesh::Location::Outside => None,
        }
    }
}

/// Discrete velocity/pressure pair.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub t: Option<f64>,
}

impl State {
    pub fn zeros(fes: &FESystem) -> Self {
        State { u: vec![0.0; fes.n_u()], p: vec![0.0; fes.n_p()], t: None }
    }

    /// Concatenated `[u, p]` vector.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.u.clone();
        v.extend_from_slice(&self.p);
        v
    }

    pub fn from_vec(fes: &FESystem, x: &[f64]) -> Self {
        assert_eq!(x.len(), fes.n_total(), "state vector length");
        State { u: x[..fes.n_u()].to_vec(), p: x[fes.n_u()..].to_vec(), t: None }
    }
}
