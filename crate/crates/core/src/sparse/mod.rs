//! Compressed sparse row storage and the operations the solvers are built on.
//!
//! A [`SparseMatrix`] is immutable after construction and upholds, for its
//! whole lifetime:
//!
//! * `row_offsets` has length `nrows + 1`, starts at 0, is nondecreasing and
//!   ends at `nnz`;
//! * column indices are strictly ascending within each row (hence unique) and
//!   smaller than `ncols`;
//! * all values are finite.
//!
//! Shapes of operands are checked on entry; violations are reported as
//! [`Error`] values rather than panics.

mod block;
mod dense;
mod matrix_market;

pub use block::{BlockLayout, BlockOrdering};
pub use dense::DenseFactorization;
pub use matrix_market::{
    read_matrix_market, read_matrix_market_file, read_vector, read_vector_file,
    write_matrix_market, write_matrix_market_file, write_vector, write_vector_file,
};

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Rows below this size are multiplied serially; rayon overhead dominates
/// otherwise.
const SPMV_PAR_MIN_ROWS: usize = 512;

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from raw CSR arrays, validating every invariant.
    pub fn from_csr(
        nrows: usize,
        ncols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != nrows + 1 {
            return Err(Error::InvalidStructure(format!(
                "row_offsets has length {}, expected {}",
                row_offsets.len(),
                nrows + 1
            )));
        }
        if row_offsets[0] != 0 {
            return Err(Error::InvalidStructure(
                "row_offsets must start at 0".into(),
            ));
        }
        if *row_offsets.last().unwrap() != col_indices.len() {
            return Err(Error::InvalidStructure(format!(
                "row_offsets ends at {}, but there are {} column indices",
                row_offsets.last().unwrap(),
                col_indices.len()
            )));
        }
        if col_indices.len() != values.len() {
            return Err(Error::InvalidStructure(format!(
                "{} column indices but {} values",
                col_indices.len(),
                values.len()
            )));
        }
        for i in 0..nrows {
            let (start, end) = (row_offsets[i], row_offsets[i + 1]);
            if end < start {
                return Err(Error::InvalidStructure(format!(
                    "row_offsets decreases at row {i}"
                )));
            }
            let mut prev: Option<usize> = None;
            for &j in &col_indices[start..end] {
                if j >= ncols {
                    return Err(Error::InvalidStructure(format!(
                        "column index {j} out of range in row {i}"
                    )));
                }
                if let Some(p) = prev {
                    if j <= p {
                        return Err(Error::InvalidStructure(format!(
                            "row {i} columns not strictly ascending at index {j}"
                        )));
                    }
                }
                prev = Some(j);
            }
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidStructure(format!("non-finite value {v}")));
        }
        Ok(Self {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Builds a matrix from `(row, col, value)` triplets in any order.
    ///
    /// Duplicate `(row, col)` pairs are rejected; assembly paths that need to
    /// sum contributions must do so before calling this.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut counts = vec![0usize; nrows + 1];
        for &(i, j, _) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::InvalidStructure(format!(
                    "entry ({i}, {j}) outside a {nrows}x{ncols} matrix"
                )));
            }
            counts[i + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let row_offsets = counts;
        let nnz = triplets.len();
        let mut col_indices = vec![0usize; nnz];
        let mut values = vec![0.0; nnz];
        let mut next = row_offsets.clone();
        for &(i, j, v) in triplets {
            let k = next[i];
            col_indices[k] = j;
            values[k] = v;
            next[i] += 1;
        }
        // Sort each row by column and reject duplicates.
        for i in 0..nrows {
            let (start, end) = (row_offsets[i], row_offsets[i + 1]);
            let mut entries: Vec<(usize, f64)> = col_indices[start..end]
                .iter()
                .copied()
                .zip(values[start..end].iter().copied())
                .collect();
            entries.sort_unstable_by_key(|&(j, _)| j);
            for w in entries.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::InvalidStructure(format!(
                        "duplicate entry at ({i}, {})",
                        w[0].0
                    )));
                }
            }
            for (k, (j, v)) in entries.into_iter().enumerate() {
                col_indices[start + k] = j;
                values[start + k] = v;
            }
        }
        Self::from_csr(nrows, ncols, row_offsets, col_indices, values)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (start, end) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[start..end], &self.values[start..end])
    }

    /// Raw CSR views: row offsets, column indices, values.
    pub fn csr_parts(&self) -> (&[usize], &[usize], &[f64]) {
        (&self.row_offsets, &self.col_indices, &self.values)
    }

    /// Copy of the matrix with the same pattern and new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::DimensionMismatch {
                expected: self.values.len(),
                found: values.len(),
                context: "pattern-preserving value update",
            });
        }
        Self::from_csr(
            self.nrows,
            self.ncols,
            self.row_offsets.clone(),
            self.col_indices.clone(),
            values,
        )
    }

    /// Value at `(i, j)`, or `None` for a structural zero.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).ok().map(|k| vals[k])
    }

    /// Diagonal entries, with 0.0 where the diagonal is structurally absent.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i).unwrap_or(0.0))
            .collect()
    }

    /// y = A x. Parallelizes over rows for large matrices; each row is an
    /// independent sequential accumulation, so the result does not depend on
    /// the thread count.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.ncols {
            return Err(Error::DimensionMismatch {
                expected: self.ncols,
                found: x.len(),
                context: "spmv input",
            });
        }
        if y.len() != self.nrows {
            return Err(Error::DimensionMismatch {
                expected: self.nrows,
                found: y.len(),
                context: "spmv output",
            });
        }
        let row_product = |i: usize| -> f64 {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (j, v) in cols.iter().zip(vals) {
                acc += v * x[*j];
            }
            acc
        };
        if self.nrows >= SPMV_PAR_MIN_ROWS && rayon::current_num_threads() > 1 {
            y.par_iter_mut()
                .enumerate()
                .for_each(|(i, yi)| *yi = row_product(i));
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = row_product(i);
            }
        }
        Ok(())
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.nrows];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    /// r = b - A x.
    pub fn residual_into(&self, b: &[f64], x: &[f64], r: &mut [f64]) -> Result<()> {
        if b.len() != self.nrows {
            return Err(Error::DimensionMismatch {
                expected: self.nrows,
                found: b.len(),
                context: "residual rhs",
            });
        }
        self.spmv_into(x, r)?;
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        Ok(())
    }

    /// Transpose with values carried along.
    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.col_indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let row_offsets = counts;
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        let mut next = row_offsets.clone();
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (j, v) in cols.iter().zip(vals) {
                let k = next[*j];
                col_indices[k] = i;
                values[k] = *v;
                next[*j] += 1;
            }
        }
        // Rows of the result are filled in ascending source-row order, so the
        // column indices come out sorted.
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Entrywise sum. Patterns are merged; coincident entries are added.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::DimensionMismatch {
                expected: self.nrows,
                found: other.nrows,
                context: "matrix sum",
            });
        }
        let mut row_offsets = Vec::with_capacity(self.nrows + 1);
        let mut col_indices = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        row_offsets.push(0);
        for i in 0..self.nrows {
            let (ca, va) = self.row(i);
            let (cb, vb) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ca.len() || q < cb.len() {
                let ja = ca.get(p).copied().unwrap_or(usize::MAX);
                let jb = cb.get(q).copied().unwrap_or(usize::MAX);
                if ja < jb {
                    col_indices.push(ja);
                    values.push(va[p]);
                    p += 1;
                } else if jb < ja {
                    col_indices.push(jb);
                    values.push(vb[q]);
                    q += 1;
                } else {
                    col_indices.push(ja);
                    values.push(va[p] + vb[q]);
                    p += 1;
                    q += 1;
                }
            }
            row_offsets.push(col_indices.len());
        }
        Ok(Self {
            nrows: self.nrows,
            ncols: self.ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Symmetric renumbering: entry `(i, j)` moves to `(perm[i], perm[j])`.
    ///
    /// Applying [`inverse_permutation`] of `perm` afterwards recovers the
    /// original matrix exactly.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::InvalidStructure(
                "symmetric permutation needs a square matrix".into(),
            ));
        }
        validate_permutation(perm, self.nrows)?;
        let mut triplet_rows = vec![Vec::new(); self.nrows];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (j, v) in cols.iter().zip(vals) {
                triplet_rows[perm[i]].push((perm[*j], *v));
            }
        }
        let mut row_offsets = Vec::with_capacity(self.nrows + 1);
        let mut col_indices = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        row_offsets.push(0);
        for row in &mut triplet_rows {
            row.sort_unstable_by_key(|&(j, _)| j);
            for &(j, v) in row.iter() {
                col_indices.push(j);
                values.push(v);
            }
            row_offsets.push(col_indices.len());
        }
        Ok(Self {
            nrows: self.nrows,
            ncols: self.ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// The square submatrix `A[idx, idx]` with rows and columns renumbered by
    /// their position in `idx`. Indices must be distinct and in range, but may
    /// appear in any order.
    pub fn principal_submatrix(&self, idx: &[usize]) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::InvalidStructure(
                "principal submatrix needs a square matrix".into(),
            ));
        }
        let mut position = vec![usize::MAX; self.nrows];
        for (k, &i) in idx.iter().enumerate() {
            if i >= self.nrows {
                return Err(Error::InvalidStructure(format!(
                    "submatrix index {i} out of range"
                )));
            }
            if position[i] != usize::MAX {
                return Err(Error::InvalidStructure(format!(
                    "submatrix index {i} repeated"
                )));
            }
            position[i] = k;
        }
        let mut row_offsets = Vec::with_capacity(idx.len() + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        let mut entries: Vec<(usize, f64)> = Vec::new();
        for &i in idx {
            entries.clear();
            let (cols, vals) = self.row(i);
            for (j, v) in cols.iter().zip(vals) {
                if position[*j] != usize::MAX {
                    entries.push((position[*j], *v));
                }
            }
            entries.sort_unstable_by_key(|&(j, _)| j);
            for &(j, v) in &entries {
                col_indices.push(j);
                values.push(v);
            }
            row_offsets.push(col_indices.len());
        }
        Ok(Self {
            nrows: idx.len(),
            ncols: idx.len(),
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Row-major dense copy. Intended for small matrices and test oracles.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.nrows * self.ncols];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (j, v) in cols.iter().zip(vals) {
                dense[i * self.ncols + j] = *v;
            }
        }
        dense
    }
}

/// Checks that `perm` is a permutation of `0..n`.
pub fn validate_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::NotAPermutation { n });
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::NotAPermutation { n });
        }
        seen[p] = true;
    }
    Ok(())
}

/// y[perm[i]] = x[i].
pub fn permute_vec(x: &[f64], perm: &[usize]) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for (i, &p) in perm.iter().enumerate() {
        y[p] = x[i];
    }
    y
}

pub fn inverse_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0usize; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

/// Euclidean norm, accumulated sequentially so it is reproducible.
pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Dot product, accumulated sequentially so it is reproducible.
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}
