//! Conforming triangulations with tagged boundary segments.
//!
//! A [`Mesh`] is immutable once built. Construction validates orientation,
//! conformity and boundary coverage, and derives the edge table together with
//! triangle adjacency used by point location.

mod generate;
mod io;
mod locate;

pub use generate::{
    generate_bifurcation, generate_cylinder_channel, generate_cylinder_channel_graded, generate_unit_square,
    BIFURCATION_WALL,
    CYLINDER_RADIUS,
};
pub use io::{load_mesh, parse_mesh, save_mesh, write_mesh};
pub use locate::Location;

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

pub type Point = [f64; 2];

/// Which part of the boundary an edge belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    /// Homogeneous Dirichlet walls (no-slip), including obstacles.
    WallH,
    /// Inflow boundary carrying Dirichlet data.
    InflowN,
    /// Artificial outflow boundary.
    OutflowOne,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 3] = [BoundaryTag::WallH, BoundaryTag::InflowN, BoundaryTag::OutflowOne];

    /// Token used in the ASCII mesh format.
    pub fn token(self) -> &'static str {
        match self {
            BoundaryTag::WallH => "H",
            BoundaryTag::InflowN => "N",
            BoundaryTag::OutflowOne => "OUT",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        match s {
            "H" => Some(BoundaryTag::WallH),
            "N" => Some(BoundaryTag::InflowN),
            "OUT" => Some(BoundaryTag::OutflowOne),
            _ => None,
        }
    }

    /// Dirichlet part of the boundary (walls and inflow).
    pub fn is_dirichlet(self) -> bool {
        !matches!(self, BoundaryTag::OutflowOne)
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("triangle {triangle} has non-positive signed area {area:e}")]
    NegativeArea { triangle: usize, area: f64 },
    #[error("triangle {triangle} references node {node} but the mesh has {n_nodes} nodes")]
    NodeOutOfRange { triangle: usize, node: usize, n_nodes: usize },
    #[error("edge ({0}, {1}) is shared by more than two triangles")]
    NonManifoldEdge(usize, usize),
    #[error("boundary edge ({0}, {1}) is not an edge of exactly one triangle")]
    BadBoundaryEdge(usize, usize),
    #[error("boundary edge ({0}, {1}) is listed more than once")]
    DuplicateBoundaryEdge(usize, usize),
    #[error("edge ({0}, {1}) lies on the boundary but carries no tag")]
    UntaggedBoundary(usize, usize),
    #[error("mesh generation failed: {0}")]
    Generation(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A tagged boundary edge. `nodes` is ordered so that the domain lies to the
/// left, i.e. boundary loops run counterclockwise around the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
    /// Global edge index in the edge table.
    pub edge: usize,
    /// Owning triangle.
    pub triangle: usize,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEdge>,
    /// Edge endpoints with `e[0] < e[1]`.
    edges: Vec<[usize; 2]>,
    /// Per triangle, global edge index of local edge `k` (opposite vertex `k`).
    tri_edges: Vec<[usize; 3]>,
    /// Per triangle, neighbor across local edge `k`.
    neighbors: Vec<[Option<usize>; 3]>,
    edge_triangles: Vec<[Option<usize>; 2]>,
}

/// Local edge `k` of a triangle joins these two local vertices.
pub const LOCAL_EDGES: [[usize; 2]; 3] = [[1, 2], [2, 0], [0, 1]];

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl Mesh {
    /// Builds a mesh from raw arrays, validating every invariant.
    ///
    /// Boundary edges may be given in either orientation; they are stored
    /// with the domain on their left.
    pub fn new(
        nodes: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<(usize, usize, BoundaryTag)>,
    ) -> Result<Self, MeshError> {
        let n_nodes = nodes.len();
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= n_nodes {
                    return Err(MeshError::NodeOutOfRange { triangle: t, node: v, n_nodes });
                }
            }
            let area = signed_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
            if !(area > 0.0) {
                return Err(MeshError::NegativeArea { triangle: t, area });
            }
        }

        let mut edge_index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_triangles: Vec<[Option<usize>; 2]> = Vec::new();
        let mut tri_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut local = [0usize; 3];
            for (k, [a, b]) in LOCAL_EDGES.iter().enumerate() {
                let (i, j) = (tri[*a], tri[*b]);
                let key = [i.min(j), i.max(j)];
                let e = *edge_index.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edge_triangles.push([None, None]);
                    edges.len() - 1
                });
                let slot = &mut edge_triangles[e];
                if slot[0].is_none() {
                    slot[0] = Some(t);
                } else if slot[1].is_none() {
                    slot[1] = Some(t);
                } else {
                    return Err(MeshError::NonManifoldEdge(key[0], key[1]));
                }
                local[k] = e;
            }
            tri_edges.push(local);
        }

        let neighbors = tri_edges
            .iter()
            .enumerate()
            .map(|(t, le)| {
                let mut nb = [None; 3];
                for k in 0..3 {
                    let [a, b] = edge_triangles[le[k]];
                    nb[k] = if a == Some(t) { b } else { a };
                }
                nb
            })
            .collect();

        let mut seen = vec![false; edges.len()];
        let mut boundary = Vec::with_capacity(boundary_edges.len());
        for (i, j, tag) in boundary_edges {
            let key = [i.min(j), i.max(j)];
            let e = match edge_index.get(&key) {
                Some(&e) if edge_triangles[e][1].is_none() => e,
                _ => return Err(MeshError::BadBoundaryEdge(i, j)),
            };
            if seen[e] {
                return Err(MeshError::DuplicateBoundaryEdge(i, j));
            }
            seen[e] = true;
            let t = edge_triangles[e][0].expect("edge has an owner");
            let tri = triangles[t];
            let third = tri.iter().copied().find(|&v| v != i && v != j).expect("third vertex");
            let nodes_ccw = if signed_area(nodes[i], nodes[j], nodes[third]) > 0.0 { [i, j] } else { [j, i] };
            boundary.push(BoundaryEdge { nodes: nodes_ccw, tag, edge: e, triangle: t });
        }
        for (e, owners) in edge_triangles.iter().enumerate() {
            if owners[1].is_none() && !seen[e] {
                return Err(MeshError::UntaggedBoundary(edges[e][0], edges[e][1]));
            }
        }

        Ok(Mesh { nodes, triangles, boundary, edges, tri_edges, neighbors, edge_triangles })
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.tri_edges[t]
    }

    pub fn neighbors(&self, t: usize) -> [Option<usize>; 3] {
        self.neighbors[t]
    }

    pub fn edge_triangles(&self, e: usize) -> [Option<usize>; 2] {
        self.edge_triangles[e]
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.vertices(t);
        signed_area(a, b, c)
    }

    pub fn area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        let mut min = f64::INFINITY;
        for t in 0..self.n_triangles() {
            let p = self.vertices(t);
            for i in 0..3 {
                let a = p[i];
                let b = p[(i + 1) % 3];
                let c = p[(i + 2) % 3];
                let u = [b[0] - a[0], b[1] - a[1]];
                let v = [c[0] - a[0], c[1] - a[1]];
                let cos = (u[0] * v[0] + u[1] * v[1]) / (u[0].hypot(u[1]) * v[0].hypot(v[1]));
                min = min.min(cos.clamp(-1.0, 1.0).acos().to_degrees());
            }
        }
        min
    }

    /// Shortest edge length.
    pub fn min_edge_length(&self) -> f64 {
        self.edges
            .iter()
            .map(|&[a, b]| dist(self.nodes[a], self.nodes[b]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_edge_length(&self) -> f64 {
        self.edges.iter().map(|&[a, b]| dist(self.nodes[a], self.nodes[b])).fold(0.0, f64::max)
    }

    /// Boundary edges carrying `tag`.
    pub fn edges_with_tag(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryEdge> + '_ {
        self.boundary.iter().filter(move |b| b.tag == tag)
    }

    pub fn has_tag(&self, tag: BoundaryTag) -> bool {
        self.boundary.iter().any(|b| b.tag == tag)
    }

    /// Outward unit normal and length of a boundary edge.
    pub fn edge_normal(&self, b: &BoundaryEdge) -> (Point, f64) {
        let p = self.nodes[b.nodes[0]];
        let q = self.nodes[b.nodes[1]];
        let len = dist(p, q);
        // counterclockwise traversal: outward normal is the tangent rotated clockwise
        ([(q[1] - p[1]) / len, -(q[0] - p[0]) / len], len)
    }

    /// Returns a copy of this mesh with boundary tags reassigned by `f`,
    /// which receives the edge midpoint and its current tag.
    pub fn retagged(&self, f: impl Fn(Point, BoundaryTag) -> BoundaryTag) -> Mesh {
        let mut m = self.clone();
        for b in &mut m.boundary {
            let p = m.nodes[b.nodes[0]];
            let q = m.nodes[b.nodes[1]];
            b.tag = f([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])], b.tag);
        }
        m
    }

    /// Counterclockwise-with-domain-on-the-left boundary loops as sequences of
    /// indices into [`Mesh::boundary_edges`]. The first loop contains the
    /// boundary node minimizing `x + y` and starts at that node.
    pub fn boundary_loops(&self) -> Vec<Vec<usize>> {
        let mut by_start: HashMap<usize, usize> = HashMap::new();
        for (i, b) in self.boundary.iter().enumerate() {
            by_start.insert(b.nodes[0], i);
        }
        let anchor = self
            .boundary
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                let pa = self.nodes[a.nodes[0]];
                let pb = self.nodes[b.nodes[0]];
                (pa[0] + pa[1]).total_cmp(&(pb[0] + pb[1])).then(pa[0].total_cmp(&pb[0]))
            })
            .map(|(i, _)| i);
        let mut used = vec![false; self.boundary.len()];
        let mut loops = Vec::new();
        let starts = anchor.into_iter().chain(0..self.boundary.len());
        for s in starts {
            if used[s] {
                continue;
            }
            let mut lp = Vec::new();
            let mut cur = s;
            while !used[cur] {
                used[cur] = true;
                lp.push(cur);
                match by_start.get(&self.boundary[cur].nodes[1]) {
                    Some(&next) => cur = next,
                    None => break,
                }
            }
            loops.push(lp);
        }
        loops
    }

    /// Closest point of the boundary to `x`.
    pub fn nearest_boundary_point(&self, x: Point) -> Point {
        let mut best = x;
        let mut best_d = f64::INFINITY;
        for b in &self.boundary {
            let p = self.nodes[b.nodes[0]];
            let q = self.nodes[b.nodes[1]];
            let d = [q[0] - p[0], q[1] - p[1]];
            let len2 = d[0] * d[0] + d[1] * d[1];
            let s = (((x[0] - p[0]) * d[0] + (x[1] - p[1]) * d[1]) / len2).clamp(0.0, 1.0);
            let c = [p[0] + s * d[0], p[1] + s * d[1]];
            let dd = dist(c, x);
            if dd < best_d {
                best_d = dd;
                best = c;
            }
        }
        best
    }
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Summary statistics reported by the CLI and run manifests.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize, PartialEq)]
pub struct MeshStats {
    pub n_nodes: usize,
    pub n_triangles: usize,
    pub n_edges: usize,
    pub n_boundary_edges: usize,
    pub area: f64,
    pub min_angle_deg: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub edges_per_tag: [usize; 3],
}

impl Mesh {
    pub fn stats(&self) -> MeshStats {
        let mut per_tag = [0; 3];
        for b in &self.boundary {
            per_tag[b.tag as usize] += 1;
        }
        MeshStats {
            n_nodes: self.n_nodes(),
            n_triangles: self.n_triangles(),
            n_edges: self.n_edges(),
            n_boundary_edges: self.boundary.len(),
            area: self.area(),
            min_angle_deg: self.min_angle_deg(),
            h_min: self.min_edge_length(),
            h_max: self.max_edge_length(),
            edges_per_tag: per_tag,
        }
    }
}
