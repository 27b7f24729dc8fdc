//! Sparse matrices and direct solves.

mod lu;
mod sparse;

pub use lu::{lu_solve, CachedLu, LuFactor, LuSymbolic, RESIDUAL_TOL};
pub use sparse::{SparseMatrix, Triplets};

#[derive(Debug, thiserror::Error)]
pub enum LinalgError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("matrix is singular{}", match .row { Some(r) => format!(" (no usable pivot at row {r})"), None => String::new() })]
    Singular { row: Option<usize> },
    #[error("non-finite values: {0}")]
    NonFinite(String),
    #[error("sparse backend failure: {0}")]
    Backend(String),
}

/// Symmetric elimination of prescribed unknowns.
///
/// `fixed[i]` is `Some(g)` when unknown `i` is prescribed. Returns the matrix
/// with those rows and columns replaced by the identity and the right-hand side
/// with `A_ij g_j` moved over, so the solution satisfies `x_i = g` exactly.
pub fn eliminate(
    a: &SparseMatrix,
    b: &[f64],
    fixed: &[Option<f64>],
) -> Result<(SparseMatrix, Vec<f64>), LinalgError> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n || fixed.len() != n {
        return Err(LinalgError::InvalidArgument("eliminate: dimension mismatch".into()));
    }
    let mut rhs = b.to_vec();
    let mut trips = Triplets::with_capacity(n, n, a.nnz());
    for i in 0..n {
        if let Some(g) = fixed[i] {
            trips.push(i, i, 1.0);
            rhs[i] = g;
            continue;
        }
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            match fixed[j] {
                Some(g) => rhs[i] -= v * g,
                None => trips.push(i, j, v),
            }
        }
    }
    Ok((trips.build()?, rhs))
}
