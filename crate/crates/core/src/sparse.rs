//! Coordinate-format sparse matrices and a retained sparse LU factorization.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

/// A sparse matrix assembled from (row, col, value) entries.
///
/// Duplicate entries are summed. Assembly code pushes the same entry sequence
/// for a given network so the sparsity pattern is stable across evaluations,
/// zeros included.
#[derive(Debug, Clone, PartialEq)]
pub struct Triplets {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, entries: Vec::new() }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self { nrows, ncols, entries: Vec::with_capacity(cap) }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, val: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, val));
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for &(r, c, v) in &self.entries {
            out[r][c] += v;
        }
        out
    }

    /// `self * x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        y
    }

    /// `selfᵀ * x`
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for &(r, c, v) in &self.entries {
            y[c] += v * x[r];
        }
        y
    }

    /// Indices of rows that have no non-zero entry.
    pub fn empty_rows(&self) -> Vec<usize> {
        let mut has = vec![false; self.nrows];
        for &(r, _, v) in &self.entries {
            if v != 0.0 {
                has[r] = true;
            }
        }
        (0..self.nrows).filter(|&r| !has[r]).collect()
    }

    /// Indices of columns that have no non-zero entry.
    pub fn empty_cols(&self) -> Vec<usize> {
        let mut has = vec![false; self.ncols];
        for &(_, c, v) in &self.entries {
            if v != 0.0 {
                has[c] = true;
            }
        }
        (0..self.ncols).filter(|&c| !has[c]).collect()
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>, LinearSolveError> {
        let trip: Vec<Triplet<usize, usize, f64>> =
            self.entries.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trip)
            .map_err(|e| LinearSolveError::Assembly(format!("{e:?}")))
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum LinearSolveError {
    #[error("sparse assembly failed: {0}")]
    Assembly(String),
    #[error("matrix is singular")]
    Singular,
}

/// Symbolic analysis cache keyed on the sparsity pattern of the last matrix.
#[derive(Debug, Default, Clone)]
pub struct SymbolicCache {
    pattern: Option<(Vec<usize>, Vec<usize>)>,
    symbolic: Option<SymbolicLu<usize>>,
}

/// LU factors of a square sparse matrix, kept for repeated (transposed) solves.
#[derive(Debug, Clone)]
pub struct LuFactor {
    lu: Lu<usize, f64>,
    n: usize,
}

impl LuFactor {
    pub fn factor(mat: &Triplets) -> Result<Self, LinearSolveError> {
        Self::factor_cached(mat, &mut SymbolicCache::default())
    }

    pub fn factor_cached(mat: &Triplets, cache: &mut SymbolicCache) -> Result<Self, LinearSolveError> {
        assert_eq!(mat.nrows, mat.ncols, "LU needs a square matrix");
        let csc = mat.to_faer()?;
        let sym = csc.symbolic();
        let pattern_matches = cache
            .pattern
            .as_ref()
            .is_some_and(|(cp, ri)| cp.as_slice() == sym.col_ptr() && ri.as_slice() == sym.row_idx());
        if !pattern_matches || cache.symbolic.is_none() {
            let symbolic = SymbolicLu::try_new(sym).map_err(|e| LinearSolveError::Assembly(format!("{e:?}")))?;
            cache.pattern = Some((sym.col_ptr().to_vec(), sym.row_idx().to_vec()));
            cache.symbolic = Some(symbolic);
        }
        let symbolic = cache.symbolic.clone().expect("symbolic factorization cached");
        let lu = Lu::try_new_with_symbolic(symbolic, csc.as_ref()).map_err(|_| LinearSolveError::Singular)?;
        Ok(Self { lu, n: mat.nrows })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinearSolveError> {
        let mut rhs = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_in_place(rhs.as_mut());
        collect_finite(&rhs, self.n)
    }

    /// Solves `Aᵀ x = b` with the same factors.
    pub fn solve_transpose(&self, b: &[f64]) -> Result<Vec<f64>, LinearSolveError> {
        let mut rhs = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_transpose_in_place(rhs.as_mut());
        collect_finite(&rhs, self.n)
    }
}

fn collect_finite(m: &Mat<f64>, n: usize) -> Result<Vec<f64>, LinearSolveError> {
    let out: Vec<f64> = (0..n).map(|i| m[(i, 0)]).collect();
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(LinearSolveError::Singular)
    }
}
