use std::fmt::Write as _;
use std::path::Path;

use super::LinalgError;

/// Compressed sparse row matrix with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Accumulates `(row, col, value)` entries; duplicates are summed on build.
#[derive(Debug, Clone)]
pub struct Triplets {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Triplets { nrows, ncols, entries: Vec::new() }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Triplets { nrows, ncols, entries: Vec::with_capacity(cap) }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        self.entries.push((row, col, value));
    }

    /// Adds `scale * m` with its top-left corner at `(row0, col0)`.
    pub fn add_matrix(&mut self, m: &SparseMatrix, row0: usize, col0: usize, scale: f64) {
        for i in 0..m.nrows {
            for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                self.entries.push((row0 + i, col0 + m.col_idx[k], scale * m.values[k]));
            }
        }
    }

    /// Adds `scale * m^T` with its top-left corner at `(row0, col0)`.
    pub fn add_transpose(&mut self, m: &SparseMatrix, row0: usize, col0: usize, scale: f64) {
        for i in 0..m.nrows {
            for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                self.entries.push((row0 + m.col_idx[k], col0 + i, scale * m.values[k]));
            }
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn build(self) -> Result<SparseMatrix, LinalgError> {
        SparseMatrix::from_triplets(self.nrows, self.ncols, &self.entries)
    }
}

impl SparseMatrix {
    /// Canonical CSR from triplets: rows bucketed, columns sorted, duplicates summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, LinalgError> {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(LinalgError::InvalidArgument(format!(
                    "entry ({r}, {c}) outside a {nrows}x{ncols} matrix"
                )));
            }
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            let k = next[r];
            cols[k] = c;
            vals[k] = v;
            next[r] += 1;
        }

        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for i in 0..nrows {
            scratch.clear();
            scratch.extend((counts[i]..counts[i + 1]).map(|k| (cols[k], vals[k])));
            // stable sort keeps summation order fixed for identical input
            scratch.sort_by_key(|&(c, _)| c);
            let mut iter = scratch.iter().copied();
            if let Some((mut c0, mut acc)) = iter.next() {
                for (c, v) in iter {
                    if c == c0 {
                        acc += v;
                    } else {
                        col_idx.push(c0);
                        values.push(acc);
                        c0 = c;
                        acc = v;
                    }
                }
                col_idx.push(c0);
                values.push(acc);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(SparseMatrix { nrows, ncols, row_ptr, col_idx, values })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseMatrix { nrows, ncols, row_ptr: vec![0; nrows + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map(|k| vals[k]).unwrap_or(0.0)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "matvec: input length");
        assert_eq!(y.len(), self.nrows, "matvec: output length");
        for i in 0..self.nrows {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
    }

    /// `y = A^T x`.
    pub fn transpose_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows, "transpose_matvec: input length");
        let mut y = vec![0.0; self.ncols];
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[k]] += self.values[k] * x[i];
            }
        }
        y
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut t = Triplets::with_capacity(self.ncols, self.nrows, self.nnz());
        t.add_transpose(self, 0, 0, 1.0);
        t.build().expect("transpose indices are in range")
    }

    /// `self + scale * other`, on the union of both patterns.
    pub fn add(&self, other: &SparseMatrix, scale: f64) -> Result<SparseMatrix, LinalgError> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(LinalgError::InvalidArgument(format!(
                "cannot add {}x{} and {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let mut col_idx = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut values = Vec::with_capacity(col_idx.capacity());
        row_ptr.push(0);
        for i in 0..self.nrows {
            let (c1, v1) = self.row(i);
            let (c2, v2) = other.row(i);
            let (mut a, mut b) = (0, 0);
            while a < c1.len() || b < c2.len() {
                let take_a = b == c2.len() || (a < c1.len() && c1[a] <= c2[b]);
                let take_b = a == c1.len() || (b < c2.len() && c2[b] <= c1[a]);
                let (c, v) = match (take_a, take_b) {
                    (true, true) => (c1[a], v1[a] + scale * v2[b]),
                    (true, false) => (c1[a], v1[a]),
                    _ => (c2[b], scale * v2[b]),
                };
                a += take_a as usize;
                b += take_b as usize;
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(SparseMatrix { nrows: self.nrows, ncols: self.ncols, row_ptr, col_idx, values })
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        self.matvec(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                d[i][self.col_idx[k]] += self.values[k];
            }
        }
        d
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        let mut max: f64 = 0.0;
        for i in 0..self.nrows {
            let (c1, v1) = self.row(i);
            let (c2, v2) = t.row(i);
            let (mut a, mut b) = (0, 0);
            while a < c1.len() || b < c2.len() {
                let d = match (c1.get(a), c2.get(b)) {
                    (Some(&x), Some(&y)) if x == y => {
                        a += 1;
                        b += 1;
                        v1[a - 1] - v2[b - 1]
                    }
                    (Some(&x), Some(&y)) if x < y => {
                        a += 1;
                        v1[a - 1]
                    }
                    (Some(_), None) => {
                        a += 1;
                        v1[a - 1]
                    }
                    _ => {
                        b += 1;
                        v2[b - 1]
                    }
                };
                max = max.max(d.abs());
            }
        }
        max
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Writes the matrix in MatrixMarket coordinate format (1-based).
    pub fn write_matrix_market(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut s = String::with_capacity(32 * self.nnz() + 64);
        s.push_str("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(s, "{} {} {}", self.nrows, self.ncols, self.nnz());
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let _ = writeln!(s, "{} {} {:e}", i + 1, self.col_idx[k] + 1, self.values[k]);
            }
        }
        crate::output::write_atomic(path.as_ref(), s.as_bytes())
    }
}
