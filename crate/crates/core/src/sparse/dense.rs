//! Dense LU with partial pivoting, used for coarsest-level solves and small
//! pivot blocks.

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Packed LU factors of a small dense matrix: `P A = L U` with unit lower
/// triangle stored below the diagonal of `lu` and `U` on and above it.
#[derive(Clone, Debug)]
pub struct DenseFactorization {
    n: usize,
    lu: Vec<f64>,
    swaps: Vec<usize>,
}

impl DenseFactorization {
    /// Factorizes a row-major dense matrix. `data.len()` must be `n * n`.
    pub fn from_dense(n: usize, mut data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: data.len(),
                context: "dense factorization input",
            });
        }
        let mut swaps = vec![0usize; n];
        for k in 0..n {
            let mut p = k;
            let mut best = data[k * n + k].abs();
            for i in k + 1..n {
                let cand = data[i * n + k].abs();
                if cand > best {
                    best = cand;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(Error::SingularMatrix { step: k });
            }
            swaps[k] = p;
            if p != k {
                for j in 0..n {
                    data.swap(k * n + j, p * n + j);
                }
            }
            let pivot = data[k * n + k];
            for i in k + 1..n {
                let l = data[i * n + k] / pivot;
                data[i * n + k] = l;
                for j in k + 1..n {
                    data[i * n + j] -= l * data[k * n + j];
                }
            }
        }
        Ok(Self { n, lu: data, swaps })
    }

    /// Gathers a square sparse matrix into dense form and factorizes it.
    pub fn of(a: &SparseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::InvalidStructure(
                "dense factorization needs a square matrix".into(),
            ));
        }
        Self::from_dense(a.nrows(), a.to_dense())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) -> Result<()> {
        let n = self.n;
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: x.len(),
                context: "dense solve rhs",
            });
        }
        for k in 0..n {
            x.swap(k, self.swaps[k]);
        }
        for i in 1..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[i * n + j] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.lu[i * n + j] * x[j];
            }
            x[i] = acc / self.lu[i * n + i];
        }
        Ok(())
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    /// Explicit inverse, row-major. Used where a factor is applied many times
    /// with dense matrix-vector products.
    pub fn inverse(&self) -> Vec<f64> {
        let n = self.n;
        let mut inv = vec![0.0; n * n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            col.iter_mut().for_each(|v| *v = 0.0);
            col[j] = 1.0;
            self.solve_in_place(&mut col).expect("length matches");
            for i in 0..n {
                inv[i * n + j] = col[i];
            }
        }
        inv
    }
}
