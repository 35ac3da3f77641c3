//! Block Gauss-Seidel relaxation over cell blocks.
//!
//! Sweeps the cells in order; each visit solves the cell's dense diagonal
//! block against the residual of the current iterate. Applications start from
//! a zero guess, so the map from right-hand side to result is linear, as a
//! preconditioner stage must be.

use crate::error::{Error, Result};
use crate::sparse::{BlockLayout, DenseFactorization, SparseMatrix};

#[derive(Clone, Debug)]
pub struct BlockGaussSeidel {
    a: SparseMatrix,
    layout: BlockLayout,
    diag: Vec<DenseFactorization>,
    sweeps: usize,
}

impl BlockGaussSeidel {
    /// Factors the diagonal blocks of `a` under the cell blocking of `layout`.
    pub fn setup(a: SparseMatrix, layout: &BlockLayout, sweeps: usize) -> Result<Self> {
        if !a.is_square() || a.nrows() != layout.nrows() {
            return Err(Error::InvalidLayout(format!(
                "layout describes {} rows, matrix has {}",
                layout.nrows(),
                a.nrows()
            )));
        }
        if sweeps == 0 {
            return Err(Error::InvalidConfig(
                "block Gauss-Seidel needs at least one sweep".into(),
            ));
        }
        let bs = layout.block_size();
        let mut diag = Vec::with_capacity(layout.ncells());
        let mut block = vec![0.0; bs * bs];
        for cell in 0..layout.ncells() {
            block.iter_mut().for_each(|v| *v = 0.0);
            for li in 0..bs {
                let i = layout.dof(cell, li);
                let (cols, vals) = a.row(i);
                for (j, v) in cols.iter().zip(vals) {
                    if layout.cell_of(*j) == cell {
                        block[li * bs + layout.local_of(*j)] = *v;
                    }
                }
            }
            let f = DenseFactorization::from_dense(bs, block.clone())
                .map_err(|_| Error::SingularPivotBlock { cell })?;
            diag.push(f);
        }
        Ok(Self {
            a,
            layout: *layout,
            diag,
            sweeps,
        })
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    /// w = relaxation of `A w = r` from a zero initial guess.
    pub fn apply_into(&self, r: &[f64], w: &mut [f64]) -> Result<()> {
        let n = self.layout.nrows();
        if r.len() != n || w.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: if r.len() != n { r.len() } else { w.len() },
                context: "block relaxation apply",
            });
        }
        w.iter_mut().for_each(|v| *v = 0.0);
        let bs = self.layout.block_size();
        let mut rhs = vec![0.0; bs];
        for _ in 0..self.sweeps {
            for cell in 0..self.layout.ncells() {
                for li in 0..bs {
                    let i = self.layout.dof(cell, li);
                    let (cols, vals) = self.a.row(i);
                    let mut acc = r[i];
                    for (j, v) in cols.iter().zip(vals) {
                        if self.layout.cell_of(*j) != cell {
                            acc -= v * w[*j];
                        }
                    }
                    rhs[li] = acc;
                }
                self.diag[cell]
                    .solve_in_place(&mut rhs)
                    .expect("block size matches");
                for li in 0..bs {
                    w[self.layout.dof(cell, li)] = rhs[li];
                }
            }
        }
        Ok(())
    }

    pub fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        let mut w = vec![0.0; self.layout.nrows()];
        self.apply_into(r, &mut w)?;
        Ok(w)
    }
}
