use super::{Mesh, Point};

/// Result of a point-location query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Location {
    Inside { triangle: usize, bary: [f64; 3] },
    Outside,
}

impl Location {
    pub fn is_inside(&self) -> bool {
        matches!(self, Location::Inside { .. })
    }
}

/// Containment slack in barycentric units.
const CONTAIN_TOL: f64 = 1e-12;
/// A walk result is accepted directly only when the point is this far inside.
const INTERIOR_TOL: f64 = 1e-10;

impl Mesh {
    /// Barycentric coordinates of `x` with respect to triangle `t`.
    pub fn barycentric(&self, t: usize, x: Point) -> [f64; 3] {
        let [a, b, c] = self.vertices(t);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((x[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (x[1] - a[1])) / det;
        let l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (x[0] - a[0]) * (b[1] - a[1])) / det;
        [1.0 - l1 - l2, l1, l2]
    }

    /// Locates `x` by walking from `hint` across the edge with the most
    /// negative barycentric coordinate. Points on shared edges or vertices
    /// resolve to the lowest containing triangle index, deferring to the
    /// exhaustive scan when the walk ends near an edge or gets stuck.
    pub fn locate_point(&self, x: Point, hint: Option<usize>) -> Location {
        let n = self.n_triangles();
        if n == 0 {
            return Location::Outside;
        }
        let mut t = hint.filter(|&h| h < n).unwrap_or(0);
        let max_steps = 4 * (n as f64).sqrt() as usize + 64;
        for _ in 0..max_steps {
            let bary = self.barycentric(t, x);
            let (kmin, lmin) = bary
                .iter()
                .copied()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("three coordinates");
            if lmin > INTERIOR_TOL {
                return Location::Inside { triangle: t, bary: clamp_bary(bary) };
            }
            if lmin >= -CONTAIN_TOL {
                break;
            }
            match self.neighbors(t)[kmin] {
                Some(next) => t = next,
                None => break,
            }
        }
        self.locate_exhaustive(x)
    }

    /// Reference point location: the first triangle, by index, that contains `x`.
    pub fn locate_exhaustive(&self, x: Point) -> Location {
        for t in 0..self.n_triangles() {
            let bary = self.barycentric(t, x);
            if bary.iter().all(|&l| l >= -CONTAIN_TOL) {
                return Location::Inside { triangle: t, bary: clamp_bary(bary) };
            }
        }
        Location::Outside
    }
}

fn clamp_bary(b: [f64; 3]) -> [f64; 3] {
    let c = [b[0].clamp(0.0, 1.0), b[1].clamp(0.0, 1.0), b[2].clamp(0.0, 1.0)];
    let s = c[0] + c[1] + c[2];
    [c[0] / s, c[1] / s, c[2] / s]
}
