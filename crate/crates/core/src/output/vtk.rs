//! Legacy ASCII VTK unstructured grids of quadratic triangles.
//!
//! Points are the scalar P2 nodes (vertices, then edge midpoints). Each
//! triangle is a `VTK_QUADRATIC_TRIANGLE` (cell type 22) listing its vertices
//! followed by the midpoints of edges (0,1), (1,2), (2,0). Point data holds
//! the velocity padded to three components, the pressure (the P1 field
//! evaluated at midpoints is the mean of the edge end values) and optionally
//! the stream function.

use std::fmt::Write as _;
use std::path::Path;

use crate::fem::FESystem;

const QUADRATIC_TRIANGLE: u8 = 22;

/// Nodal fields of one snapshot.
pub struct VtkFields<'a> {
    pub velocity: &'a [f64],
    pub pressure: &'a [f64],
    pub stream_function: Option<&'a [f64]>,
}

pub fn write_vtk(fes: &FESystem, fields: &VtkFields<'_>, title: &str) -> String {
    let mesh = fes.mesh();
    let n_s = fes.n_scalar();
    let n_v = mesh.n_nodes();
    let n_t = mesh.n_triangles();
    let mut s = String::with_capacity(120 * n_s);
    s.push_str("# vtk DataFile Version 3.0\n");
    // the title line may not contain newlines
    s.push_str(&title.replace(['\n', '\r'], " "));
    s.push_str("\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {n_s} double");
    for k in 0..n_s {
        let p = fes.node_coord(k);
        let _ = writeln!(s, "{:e} {:e} 0", p[0], p[1]);
    }
    let _ = writeln!(s, "CELLS {n_t} {}", 7 * n_t);
    for t in 0..n_t {
        let d = fes.scalar_dofs(t);
        let _ = writeln!(s, "6 {} {} {} {} {} {}", d[0], d[1], d[2], d[5], d[3], d[4]);
    }
    let _ = writeln!(s, "CELL_TYPES {n_t}");
    for _ in 0..n_t {
        let _ = writeln!(s, "{QUADRATIC_TRIANGLE}");
    }
    let _ = writeln!(s, "POINT_DATA {n_s}");
    s.push_str("VECTORS velocity double\n");
    for k in 0..n_s {
        let _ = writeln!(s, "{:e} {:e} 0", fields.velocity[k], fields.velocity[n_s + k]);
    }
    s.push_str("SCALARS pressure double 1\nLOOKUP_TABLE default\n");
    for k in 0..n_s {
        let p = if k < n_v {
            fields.pressure[k]
        } else {
            let [a, b] = mesh.edges()[k - n_v];
            0.5 * (fields.pressure[a] + fields.pressure[b])
        };
        let _ = writeln!(s, "{p:e}");
    }
    if let Some(psi) = fields.stream_function {
        s.push_str("SCALARS stream_function double 1\nLOOKUP_TABLE default\n");
        for v in psi {
            let _ = writeln!(s, "{v:e}");
        }
    }
    s
}

pub fn save_vtk(path: &Path, fes: &FESystem, fields: &VtkFields<'_>, title: &str) -> std::io::Result<()> {
    super::write_atomic(path, write_vtk(fes, fields, title).as_bytes())
}
