//! Quadrature on the reference triangle and the unit interval.

use std::sync::OnceLock;

/// Quadrature rule on the reference triangle. Points are barycentric and the
/// weights sum to the reference area 1/2.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// Total polynomial degree integrated exactly.
    pub degree: usize,
}

/// Quadrature rule on [0, 1]; weights sum to 1.
#[derive(Debug, Clone)]
pub struct EdgeRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl TriangleRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Twelve-point symmetric rule exact for degree 6 (Dunavant).
pub fn triangle_deg6() -> &'static TriangleRule {
    static RULE: OnceLock<TriangleRule> = OnceLock::new();
    RULE.get_or_init(|| {
        let mut points = Vec::with_capacity(12);
        let mut weights = Vec::with_capacity(12);
        let mut orbit3 = |a: f64, b: f64, w: f64| {
            for p in [[a, b, b], [b, a, b], [b, b, a]] {
                points.push(p);
                weights.push(0.5 * w);
            }
        };
        orbit3(0.501426509658179, 0.249286745170910, 0.116786275726379);
        orbit3(0.873821971016996, 0.063089014491502, 0.050844906370207);
        let (a, b, c) = (0.053145049844817, 0.310352451033784, 0.636502499121399);
        for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
            points.push(p);
            weights.push(0.5 * 0.082851075618374);
        }
        TriangleRule { points, weights, degree: 6 }
    })
}

/// Gauss–Legendre nodes and weights on [-1, 1], by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss_legendre needs at least one point");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            // P_1' = 1 everywhere, the iteration above degenerates at z = 0
            return (vec![0.0], vec![2.0]);
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Four-point Gauss rule on [0, 1], exact for degree 7.
pub fn edge_gauss4() -> &'static EdgeRule {
    static RULE: OnceLock<EdgeRule> = OnceLock::new();
    RULE.get_or_init(|| edge_gauss(4))
}

pub fn edge_gauss(n: usize) -> EdgeRule {
    let (x, w) = gauss_legendre(n);
    EdgeRule {
        points: x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
        weights: w.iter().map(|v| 0.5 * v).collect(),
        degree: 2 * n - 1,
    }
}

/// Collapsed (Duffy) tensor Gauss rule with `n` points per direction,
/// exact for degree `2n - 2`. Used for error norms of non-polynomial fields.
pub fn triangle_collapsed(n: usize) -> TriangleRule {
    let (x, w) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (a, wa) in x.iter().zip(&w) {
        let r = 0.5 * (1.0 + a);
        for (b, wb) in x.iter().zip(&w) {
            let s = 0.5 * (1.0 - r) * (1.0 + b);
            points.push([1.0 - r - s, r, s]);
            weights.push(wa * wb * (1.0 - r) * 0.25);
        }
    }
    TriangleRule { points, weights, degree: 2 * n - 2 }
}
