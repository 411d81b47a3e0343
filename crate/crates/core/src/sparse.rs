//! Compressed-row matrices on a structurally symmetric pattern, plus a thin
//! wrapper around faer's sparse LU that reuses the symbolic analysis.

use std::sync::Arc;

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};

use crate::error::{Error, Result};
use crate::mesh::Triangulation;

/// Structurally symmetric sparsity pattern with sorted column indices.
#[derive(Debug)]
pub struct SparsityPattern {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    /// `transpose[p]` is the storage slot of entry `(j, i)` when slot `p` holds `(i, j)`.
    transpose: Vec<usize>,
}

impl SparsityPattern {
    /// Builds a pattern from per-row column lists; the lists are symmetrised,
    /// sorted and deduplicated, and the diagonal is always present.
    pub fn from_rows(mut rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let snapshot: Vec<Vec<usize>> = rows.clone();
        for (i, cols) in snapshot.iter().enumerate() {
            for &j in cols {
                rows[j].push(i);
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for (i, cols) in rows.iter_mut().enumerate() {
            cols.push(i);
            cols.sort_unstable();
            cols.dedup();
            col_idx.extend_from_slice(cols);
            row_ptr.push(col_idx.len());
        }
        let mut pattern = SparsityPattern {
            n,
            row_ptr,
            col_idx,
            transpose: Vec::new(),
        };
        let mut transpose = vec![0; pattern.col_idx.len()];
        for i in 0..n {
            for p in pattern.row_ptr[i]..pattern.row_ptr[i + 1] {
                let j = pattern.col_idx[p];
                transpose[p] = pattern.find(j, i).expect("pattern is symmetric");
            }
        }
        pattern.transpose = transpose;
        pattern
    }

    /// Vertex-adjacency pattern of a mesh (one row per vertex).
    pub fn from_mesh(mesh: &Triangulation) -> Self {
        Self::from_rows(mesh.vertex_neighbors())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    pub fn col(&self, p: usize) -> usize {
        self.col_idx[p]
    }

    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row(i);
        self.col_idx[r.clone()].binary_search(&j).ok().map(|k| r.start + k)
    }
}

#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pattern: Arc<SparsityPattern>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        CsrMatrix { pattern, values }
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn dim(&self) -> usize {
        self.pattern.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.find(i, j).map_or(0.0, |p| self.values[p])
    }

    /// Adds `v` at `(i, j)`; panics if the entry is outside the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let p = self
            .pattern
            .find(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside sparsity pattern"));
        self.values[p] += v;
    }

    pub fn set_identity_row(&mut self, i: usize) {
        for p in self.pattern.row(i) {
            self.values[p] = if self.pattern.col_idx[p] == i { 1.0 } else { 0.0 };
        }
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.dim()) {
            let mut s = 0.0;
            for p in self.pattern.row(i) {
                s += self.values[p] * x[self.pattern.col_idx[p]];
            }
            *yi = s;
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut d = vec![vec![0.0; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            for p in self.pattern.row(i) {
                row[self.pattern.col_idx[p]] = self.values[p];
            }
        }
        d
    }

    /// `a * self + b * other` on the shared pattern.
    pub fn combine(&self, a: f64, other: &CsrMatrix, b: f64) -> CsrMatrix {
        debug_assert!(Arc::ptr_eq(&self.pattern, &other.pattern));
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        CsrMatrix {
            pattern: self.pattern.clone(),
            values,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Reusable LU solver for matrices sharing one pattern.
///
/// Matrices are stored row-wise; since the pattern is symmetric the CSC
/// structure of `A` coincides with the CSR structure, and values are moved
/// through the transpose map.
pub struct SparseLu {
    pattern: Arc<SparsityPattern>,
    symbolic_csc: SymbolicSparseColMat<usize>,
    symbolic_lu: SymbolicLu<usize>,
    numeric: Option<Lu<usize, f64>>,
}

impl SparseLu {
    pub fn new(pattern: Arc<SparsityPattern>) -> Result<Self> {
        let n = pattern.n;
        let symbolic_csc =
            SymbolicSparseColMat::new_checked(n, n, pattern.row_ptr.clone(), None, pattern.col_idx.clone());
        let symbolic_lu = SymbolicLu::try_new(symbolic_csc.rb()).map_err(|e| Error::Factorization(format!("{e:?}")))?;
        Ok(SparseLu {
            pattern,
            symbolic_csc,
            symbolic_lu,
            numeric: None,
        })
    }

    pub fn factorize(&mut self, a: &CsrMatrix) -> Result<()> {
        debug_assert!(Arc::ptr_eq(&self.pattern, &a.pattern));
        let mut csc = vec![0.0; a.values.len()];
        for (p, &v) in a.values.iter().enumerate() {
            csc[self.pattern.transpose[p]] = v;
        }
        let mat = SparseColMat::new(self.symbolic_csc.clone(), csc);
        let lu = Lu::try_new_with_symbolic(self.symbolic_lu.clone(), mat.rb())
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        self.numeric = Some(lu);
        Ok(())
    }

    /// Solves in place; `factorize` must have been called.
    pub fn solve(&self, rhs: &mut [f64]) -> Result<()> {
        let lu = self
            .numeric
            .as_ref()
            .ok_or_else(|| Error::Factorization("solve before factorize".into()))?;
        let mut b = Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        lu.solve_in_place(b.as_mut());
        for (i, r) in rhs.iter_mut().enumerate() {
            *r = b[(i, 0)];
        }
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Factorization("singular or ill-conditioned system".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> CsrMatrix {
        let rows = (0..n).map(|i| if i + 1 < n { vec![i + 1] } else { vec![] }).collect();
        let pat = Arc::new(SparsityPattern::from_rows(rows));
        let mut a = CsrMatrix::zeros(pat);
        for i in 0..n {
            a.add(i, i, 4.0);
            if i + 1 < n {
                a.add(i, i + 1, -1.0);
                a.add(i + 1, i, -2.0);
            }
        }
        a
    }

    #[test]
    fn lu_solves_nonsymmetric_system() {
        let a = tridiag(7);
        let x: Vec<f64> = (0..7).map(|i| i as f64 - 2.5).collect();
        let mut b = vec![0.0; 7];
        a.mul_vec(&x, &mut b);
        let mut lu = SparseLu::new(a.pattern().clone()).unwrap();
        lu.factorize(&a).unwrap();
        lu.solve(&mut b).unwrap();
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn transpose_map_round_trips() {
        let a = tridiag(5);
        let pat = a.pattern();
        for i in 0..5 {
            for p in pat.row(i) {
                let q = pat.transpose[p];
                assert_eq!(pat.transpose[q], p);
                assert_eq!(pat.col(q), i);
            }
        }
    }
}
