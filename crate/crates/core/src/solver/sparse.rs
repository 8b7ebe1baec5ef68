//! Compressed-row sparse matrices and a direct LU solver.
//!
//! The factorization itself is delegated to faer's sparse LU with partial
//! pivoting; this module owns the storage format, assembly from triplets and
//! the error reporting.

use faer::prelude::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Coordinate-format accumulator; duplicate entries are summed on build.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        TripletBuilder {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        TripletBuilder {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn build(self) -> SparseMatrix {
        SparseMatrix::from_triplets(self.nrows, self.ncols, self.entries)
    }
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    /// Explicit zeros are kept so that sparsity patterns are stable.
    pub fn from_triplets(nrows: usize, ncols: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
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

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut entries = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), ncols);
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        Self::from_triplets(nrows, ncols, entries)
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

    /// Iterator over `(col, value)` of one row.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// `y = Aᵀ x`.
    pub fn mul_vec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (r, &xr) in x.iter().enumerate() {
            for (c, v) in self.row(r) {
                y[c] += v * xr;
            }
        }
        y
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut entries = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                entries.push((c, r, v));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, entries)
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut entries = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.nrows {
            entries.extend(self.row(r).map(|(c, v)| (r, c, v)));
            entries.extend(other.row(r).map(|(c, v)| (r, c, alpha * v)));
        }
        Self::from_triplets(self.nrows, self.ncols, entries)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Dense row-major copy.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] = v;
            }
        }
        out
    }
}

/// A reusable LU factorization of a square sparse matrix.
pub struct LuFactorization {
    n: usize,
    lu: Lu<usize, f64>,
}

impl std::fmt::Debug for LuFactorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LuFactorization").field("n", &self.n).finish()
    }
}

fn to_faer(a: &SparseMatrix) -> Result<SparseColMat<usize, f64>> {
    if a.nrows != a.ncols {
        return Err(Error::DimensionMismatch {
            expected: a.nrows,
            got: a.ncols,
        });
    }
    let triplets: Vec<Triplet<usize, usize, f64>> = (0..a.nrows)
        .flat_map(|r| a.row(r).map(move |(c, v)| Triplet::new(r, c, v)))
        .collect();
    SparseColMat::<usize, f64>::try_new_from_triplets(a.nrows, a.ncols, &triplets)
        .map_err(|e| Error::Config(format!("sparse matrix construction failed: {e:?}")))
}

fn lu_error(e: LuError) -> Error {
    match e {
        LuError::SymbolicSingular { index } => Error::SingularMatrix { row: index },
        other => Error::Config(format!("sparse LU failed: {other:?}")),
    }
}

impl LuFactorization {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        let csc = to_faer(a)?;
        let lu = csc.sp_lu().map_err(lu_error)?;
        Ok(LuFactorization { n: a.nrows, lu })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: rhs.len(),
            });
        }
        let b = Mat::<f64>::from_fn(self.n, 1, |i, _| rhs[i]);
        let x = self.lu.solve(&b);
        let out: Vec<f64> = (0..self.n).map(|i| x[(i, 0)]).collect();
        if let Some(row) = out.iter().position(|v| !v.is_finite()) {
            return Err(Error::SingularMatrix { row });
        }
        Ok(out)
    }
}

/// LU factorizations of a sequence of matrices sharing one sparsity
/// pattern; the fill-reducing ordering is computed once.
#[derive(Default)]
pub struct LuCache {
    pattern: Option<(Vec<usize>, Vec<usize>, SymbolicLu<usize>)>,
}

impl std::fmt::Debug for LuCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LuCache").field("cached", &self.pattern.is_some()).finish()
    }
}

impl LuCache {
    pub fn new() -> Self {
        LuCache::default()
    }

    pub fn factorize(&mut self, a: &SparseMatrix) -> Result<LuFactorization> {
        let csc = to_faer(a)?;
        let hit = matches!(&self.pattern, Some((rp, ci, _)) if *rp == a.row_ptr && *ci == a.col_idx);
        if !hit {
            let symbolic = SymbolicLu::try_new(csc.symbolic()).map_err(|e| Error::Config(format!("sparse LU failed: {e:?}")))?;
            self.pattern = Some((a.row_ptr.clone(), a.col_idx.clone(), symbolic));
        }
        let symbolic = self.pattern.as_ref().map(|p| p.2.clone()).unwrap();
        let lu = Lu::try_new_with_symbolic(symbolic, csc.as_ref()).map_err(lu_error)?;
        Ok(LuFactorization { n: a.nrows, lu })
    }
}

/// Solves `A x = b` and checks `‖A x − b‖ ≤ 1e-10 (1 + ‖b‖)`.
pub fn lu_solve(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let x = LuFactorization::new(a)?.solve(b)?;
    let r = a.mul_vec(&x);
    let mut worst = (0usize, 0.0f64);
    let mut rn = 0.0;
    for (i, (ri, bi)) in r.iter().zip(b).enumerate() {
        let d = (ri - bi).abs();
        rn += d * d;
        if d > worst.1 {
            worst = (i, d);
        }
    }
    if rn.sqrt() > 1e-10 * (1.0 + norm2(b)) {
        return Err(Error::SingularMatrix { row: worst.0 });
    }
    Ok(x)
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}
