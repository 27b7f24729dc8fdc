use faer::linalg::solvers::Solve;
use faer::sparse::linalg::LuError;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::Mat;

use super::{LinalgError, SparseMatrix};

/// Relative residual accepted after refinement.
pub const RESIDUAL_TOL: f64 = 1e-10;
const REFINEMENT_STEPS: usize = 3;

/// Column-major copy of a CSR matrix, as faer wants it.
fn to_faer(a: &SparseMatrix) -> SparseColMat<usize, f64> {
    // the CSR arrays of A^T are exactly the CSC arrays of A
    let t = a.transpose();
    let symbolic = SymbolicSparseColMat::new_checked(
        a.nrows(),
        a.ncols(),
        t.row_ptr().to_vec(),
        None,
        t.col_idx().to_vec(),
    );
    SparseColMat::new(symbolic, t.values().to_vec())
}

fn map_err(e: LuError) -> LinalgError {
    match e {
        LuError::SymbolicSingular { index } => LinalgError::Singular { row: Some(index) },
        LuError::Generic(g) => LinalgError::Backend(format!("{g:?}")),
    }
}

/// Sparsity analysis that can be shared across matrices with one pattern.
#[derive(Debug, Clone)]
pub struct LuSymbolic {
    inner: SymbolicLu<usize>,
    nrows: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl LuSymbolic {
    pub fn analyze(a: &SparseMatrix) -> Result<Self, LinalgError> {
        check_square(a)?;
        let fa = to_faer(a);
        let inner = SymbolicLu::try_new(fa.symbolic()).map_err(|e| LinalgError::Backend(format!("{e:?}")))?;
        Ok(LuSymbolic {
            inner,
            nrows: a.nrows(),
            row_ptr: a.row_ptr().to_vec(),
            col_idx: a.col_idx().to_vec(),
        })
    }

    pub fn matches(&self, a: &SparseMatrix) -> bool {
        a.nrows() == self.nrows && a.row_ptr() == self.row_ptr && a.col_idx() == self.col_idx
    }
}

/// LU factors of a square sparse matrix with partial pivoting.
#[derive(Debug, Clone)]
pub struct LuFactor {
    lu: Lu<usize, f64>,
    a: SparseMatrix,
}

fn check_square(a: &SparseMatrix) -> Result<(), LinalgError> {
    if a.nrows() != a.ncols() {
        return Err(LinalgError::InvalidArgument(format!(
            "matrix must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

impl LuFactor {
    pub fn new(a: &SparseMatrix) -> Result<Self, LinalgError> {
        let sym = LuSymbolic::analyze(a)?;
        Self::with_symbolic(&sym, a)
    }

    /// Numeric factorization reusing a previous analysis of the same pattern.
    pub fn with_symbolic(sym: &LuSymbolic, a: &SparseMatrix) -> Result<Self, LinalgError> {
        check_square(a)?;
        if !sym.matches(a) {
            return Err(LinalgError::InvalidArgument("sparsity pattern differs from the analysis".into()));
        }
        if let Some(k) = a.values().iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite(format!("matrix entry {k} is not finite")));
        }
        let fa = to_faer(a);
        let lu = Lu::try_new_with_symbolic(sym.inner.clone(), fa.as_ref()).map_err(map_err)?;
        Ok(LuFactor { lu, a: a.clone() })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    fn raw_solve(&self, b: &[f64]) -> Vec<f64> {
        let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        let x = self.lu.solve(&rhs);
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }

    /// Solves `A x = b` with a few steps of iterative refinement, checking
    /// `|b - A x| <= tol * (|A| |x| + |b|)` in the max norm.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let n = self.n();
        if b.len() != n {
            return Err(LinalgError::InvalidArgument(format!("rhs has length {}, expected {n}", b.len())));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite("right-hand side is not finite".into()));
        }
        let mut x = self.raw_solve(b);
        if let Some(row) = x.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::Singular { row: Some(row) });
        }
        let anorm = self.a.max_abs();
        let bnorm = max_abs(b);
        let mut rel = f64::INFINITY;
        for step in 0..=REFINEMENT_STEPS {
            let ax = self.a.matvec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            let scale = anorm * max_abs(&x) + bnorm;
            rel = if scale > 0.0 { max_abs(&r) / scale } else { 0.0 };
            if rel <= 1e-15 || step == REFINEMENT_STEPS {
                break;
            }
            let dx = self.raw_solve(&r);
            if dx.iter().any(|v| !v.is_finite()) {
                break;
            }
            for (xi, d) in x.iter_mut().zip(&dx) {
                *xi += d;
            }
        }
        if !(rel <= RESIDUAL_TOL) {
            // a tiny pivot survived elimination: treat as numerically singular
            return Err(LinalgError::Singular { row: None });
        }
        Ok(x)
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Factorizes a sequence of matrices, redoing the symbolic analysis only
/// when the sparsity pattern changes.
#[derive(Debug, Default)]
pub struct CachedLu {
    symbolic: Option<LuSymbolic>,
    analyses: usize,
}

impl CachedLu {
    pub fn factor(&mut self, a: &SparseMatrix) -> Result<LuFactor, LinalgError> {
        match &self.symbolic {
            Some(s) if s.matches(a) => LuFactor::with_symbolic(s, a),
            _ => {
                let s = LuSymbolic::analyze(a)?;
                self.analyses += 1;
                let f = LuFactor::with_symbolic(&s, a);
                self.symbolic = Some(s);
                f
            }
        }
    }

    /// Number of symbolic analyses performed so far.
    pub fn analyses(&self) -> usize {
        self.analyses
    }
}

/// One-shot factor and solve.
pub fn lu_solve(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    LuFactor::new(a)?.solve(b)
}
