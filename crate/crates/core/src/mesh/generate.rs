use std::collections::{HashMap, HashSet};

use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};

use super::{dist, BoundaryTag, Mesh, MeshError, Point, LOCAL_EDGES};

/// Cylinder radius of the flow-past-obstacle channel.
pub const CYLINDER_RADIUS: f64 = 0.15;

/// Counterclockwise wall polyline of the symmetric Y-shaped channel. Each
/// entry is a vertex followed by the tag of the segment leaving it.
///
/// The inlet is `x = 0, |y| <= 1/2`; the two outlets join `(6, -1.5)` to
/// `(6.5, -1)` and `(6.5, 1)` to `(6, 1.5)`, i.e. `y = ±(x - 7.5)` for
/// `6 <= x <= 6.5`.
pub const BIFURCATION_WALL: [(Point, BoundaryTag); 9] = [
    ([0.0, -0.5], BoundaryTag::WallH),
    ([5.0, -0.5], BoundaryTag::WallH),
    ([6.0, -1.5], BoundaryTag::OutflowOne),
    ([6.5, -1.0], BoundaryTag::WallH),
    ([5.5, 0.0], BoundaryTag::WallH),
    ([6.5, 1.0], BoundaryTag::OutflowOne),
    ([6.0, 1.5], BoundaryTag::WallH),
    ([5.0, 0.5], BoundaryTag::WallH),
    ([0.0, 0.5], BoundaryTag::InflowN),
];

/// Structured mesh of `[0,1]^2` with `n` cells per side, each split along
/// its rising diagonal. The left wall is the outflow boundary; the other
/// walls are no-slip.
pub fn generate_unit_square(n: usize) -> Result<Mesh, MeshError> {
    if n < 2 {
        return Err(MeshError::InvalidArgument(format!("unit square needs n >= 2, got {n}")));
    }
    let m = n + 1;
    let id = |i: usize, j: usize| j * m + i;
    let mut nodes = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..m {
            nodes.push([i as f64 / n as f64, j as f64 / n as f64]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    let mut boundary = Vec::with_capacity(4 * n);
    for i in 0..n {
        boundary.push((id(i, 0), id(i + 1, 0), BoundaryTag::WallH));
        boundary.push((id(n, i), id(n, i + 1), BoundaryTag::WallH));
        boundary.push((id(i + 1, n), id(i, n), BoundaryTag::WallH));
        boundary.push((id(0, i + 1), id(0, i), BoundaryTag::OutflowOne));
    }
    Mesh::new(nodes, triangles, boundary)
}

/// Unstructured mesh of the Y-shaped bifurcation channel with target edge
/// length `h`.
pub fn generate_bifurcation(h: f64) -> Result<Mesh, MeshError> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(MeshError::InvalidArgument(format!("edge length must be positive, got {h}")));
    }
    let segments = closed_polyline(&BIFURCATION_WALL);
    let outer = split_loop(&segments, h);
    refine_domain(&[outer], &segments, h, None)
}

/// Unstructured mesh of `[-1.5, 6] x [-1, 1]` minus the disk of radius
/// [`CYLINDER_RADIUS`] about the origin. The circle is resolved with spacing
/// `h`; the far field uses `3h`.
pub fn generate_cylinder_channel(h: f64) -> Result<Mesh, MeshError> {
    generate_cylinder_channel_graded(h, 3.0 * h)
}

pub fn generate_cylinder_channel_graded(h_near: f64, h_far: f64) -> Result<Mesh, MeshError> {
    let r = CYLINDER_RADIUS;
    if !(h_near > 0.0) || h_near >= r {
        return Err(MeshError::InvalidArgument(format!(
            "cylinder mesh needs 0 < h < {r}, got {h_near}"
        )));
    }
    if !(h_far >= h_near) {
        return Err(MeshError::InvalidArgument(format!("far-field size {h_far} below {h_near}")));
    }
    let rect = [
        ([-1.5, -1.0], BoundaryTag::WallH),
        ([6.0, -1.0], BoundaryTag::OutflowOne),
        ([6.0, 1.0], BoundaryTag::WallH),
        ([-1.5, 1.0], BoundaryTag::InflowN),
    ];
    let mut segments = closed_polyline(&rect);
    let outer = split_loop(&segments, h_far);

    let n_circle = (2.0 * std::f64::consts::PI * r / h_near).ceil() as usize;
    let circle: Vec<Point> = (0..n_circle)
        .map(|k| {
            let t = -2.0 * std::f64::consts::PI * k as f64 / n_circle as f64;
            [r * t.cos(), r * t.sin()]
        })
        .collect();
    for k in 0..n_circle {
        segments.push(Segment { a: circle[k], b: circle[(k + 1) % n_circle], tag: BoundaryTag::WallH, circle: true });
    }
    refine_domain(&[outer, circle], &segments, h_far, Some(r))
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: Point,
    b: Point,
    tag: BoundaryTag,
    circle: bool,
}

impl Segment {
    fn distance(&self, p: Point) -> f64 {
        let d = [self.b[0] - self.a[0], self.b[1] - self.a[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        let s = (((p[0] - self.a[0]) * d[0] + (p[1] - self.a[1]) * d[1]) / len2).clamp(0.0, 1.0);
        dist(p, [self.a[0] + s * d[0], self.a[1] + s * d[1]])
    }
}

fn closed_polyline(vertices: &[(Point, BoundaryTag)]) -> Vec<Segment> {
    (0..vertices.len())
        .map(|k| Segment {
            a: vertices[k].0,
            b: vertices[(k + 1) % vertices.len()].0,
            tag: vertices[k].1,
            circle: false,
        })
        .collect()
}

/// Subdivides each segment into equal pieces no longer than `h`.
fn split_loop(segments: &[Segment], h: f64) -> Vec<Point> {
    let mut pts = Vec::new();
    for s in segments {
        let pieces = (dist(s.a, s.b) / h).ceil().max(1.0) as usize;
        for k in 0..pieces {
            let t = k as f64 / pieces as f64;
            pts.push([s.a[0] + t * (s.b[0] - s.a[0]), s.a[1] + t * (s.b[1] - s.a[1])]);
        }
    }
    pts
}

fn refine_domain(
    loops: &[Vec<Point>],
    segments: &[Segment],
    h: f64,
    circle_radius: Option<f64>,
) -> Result<Mesh, MeshError> {
    let gen_err = |e: spade::InsertionError| MeshError::Generation(format!("{e:?}"));
    let mut cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::new();
    for lp in loops {
        cdt.add_constraint_edges(lp.iter().map(|p| Point2::new(p[0], p[1])), true).map_err(gen_err)?;
    }
    let max_area = 3f64.sqrt() / 4.0 * h * h;
    let vertex_budget = (50.0 * total_area_bound(loops) / max_area) as usize + 10_000;
    let result = cdt.refine(
        RefinementParameters::<f64>::new()
            .with_angle_limit(AngleLimit::from_deg(30.0))
            .with_max_allowed_area(max_area)
            .with_max_additional_vertices(vertex_budget)
            .exclude_outer_faces(true),
    );
    if !result.refinement_complete {
        return Err(MeshError::Generation(format!("refinement did not finish for h = {h}")));
    }
    let excluded: HashSet<_> = result.excluded_faces.iter().copied().collect();

    let raw_nodes: Vec<Point> = cdt.vertices().map(|v| [v.position().x, v.position().y]).collect();
    let mut remap: HashMap<usize, usize> = HashMap::new();
    let mut nodes = Vec::new();
    let mut triangles = Vec::new();
    for face in cdt.inner_faces() {
        if excluded.contains(&face.fix()) {
            continue;
        }
        let mut tri = [0usize; 3];
        for (k, v) in face.vertices().iter().enumerate() {
            let raw = v.fix().index();
            tri[k] = *remap.entry(raw).or_insert_with(|| {
                nodes.push(raw_nodes[raw]);
                nodes.len() - 1
            });
        }
        triangles.push(tri);
    }

    // Tag each boundary edge by the input segment carrying it.
    let mut count: HashMap<[usize; 2], usize> = HashMap::new();
    for tri in &triangles {
        for [a, b] in LOCAL_EDGES {
            let key = [tri[a].min(tri[b]), tri[a].max(tri[b])];
            *count.entry(key).or_insert(0) += 1;
        }
    }
    let mut boundary = Vec::new();
    let mut on_circle = HashSet::new();
    for tri in &triangles {
        for [a, b] in LOCAL_EDGES {
            let key = [tri[a].min(tri[b]), tri[a].max(tri[b])];
            if count[&key] != 1 {
                continue;
            }
            let p = nodes[tri[a]];
            let q = nodes[tri[b]];
            let mid = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
            let seg = segments
                .iter()
                .min_by(|s, t| s.distance(mid).total_cmp(&t.distance(mid)))
                .expect("segments");
            if seg.circle {
                on_circle.insert(tri[a]);
                on_circle.insert(tri[b]);
            }
            boundary.push((tri[a], tri[b], seg.tag));
        }
    }
    boundary.sort_by_key(|&(a, b, _)| (a.min(b), a.max(b)));

    // Vertices inserted on circle chords are pushed back onto the circle.
    if let Some(r) = circle_radius {
        for &v in &on_circle {
            let p = nodes[v];
            let rho = p[0].hypot(p[1]);
            if rho > 0.0 {
                nodes[v] = [p[0] * r / rho, p[1] * r / rho];
            }
        }
    }
    for tri in &mut triangles {
        let [a, b, c] = [nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]];
        if (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]) < 0.0 {
            tri.swap(1, 2);
        }
    }
    Mesh::new(nodes, triangles, boundary)
}

fn total_area_bound(loops: &[Vec<Point>]) -> f64 {
    let lp = &loops[0];
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in lp {
        xmin = xmin.min(p[0]);
        xmax = xmax.max(p[0]);
        ymin = ymin.min(p[1]);
        ymax = ymax.max(p[1]);
    }
    (xmax - xmin) * (ymax - ymin)
}
