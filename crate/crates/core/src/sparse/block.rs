//! Block layout descriptions for systems with several unknowns per cell.
//!
//! The matrix itself stays scalar CSR; a [`BlockLayout`] records how scalar
//! rows map to (cell, local unknown) pairs. Local unknown 0 is the pressure-like
//! primary variable; the remaining `block_size - 1` locals are the secondary
//! (concentration-like) unknowns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How scalar unknowns of a block system are numbered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockOrdering {
    /// All unknowns of cell 0, then all unknowns of cell 1, and so on.
    CellInterleaved,
    /// All cells' unknown 0, then all cells' unknown 1, and so on.
    VariableSegregated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockLayout {
    ncells: usize,
    block_size: usize,
    ordering: BlockOrdering,
}

impl BlockLayout {
    pub fn new(ncells: usize, block_size: usize, ordering: BlockOrdering) -> Result<Self> {
        if block_size == 0 {
            return Err(Error::InvalidLayout("block size must be at least 1".into()));
        }
        Ok(Self {
            ncells,
            block_size,
            ordering,
        })
    }

    pub fn ncells(&self) -> usize {
        self.ncells
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn ordering(&self) -> BlockOrdering {
        self.ordering
    }

    /// Total number of scalar unknowns.
    pub fn nrows(&self) -> usize {
        self.ncells * self.block_size
    }

    /// Scalar index of local unknown `local` in `cell`.
    pub fn dof(&self, cell: usize, local: usize) -> usize {
        debug_assert!(cell < self.ncells && local < self.block_size);
        match self.ordering {
            BlockOrdering::CellInterleaved => cell * self.block_size + local,
            BlockOrdering::VariableSegregated => local * self.ncells + cell,
        }
    }

    pub fn cell_of(&self, dof: usize) -> usize {
        match self.ordering {
            BlockOrdering::CellInterleaved => dof / self.block_size,
            BlockOrdering::VariableSegregated => dof % self.ncells,
        }
    }

    pub fn local_of(&self, dof: usize) -> usize {
        match self.ordering {
            BlockOrdering::CellInterleaved => dof % self.block_size,
            BlockOrdering::VariableSegregated => dof / self.ncells,
        }
    }

    /// The same cells and unknowns under a different ordering.
    pub fn with_ordering(&self, ordering: BlockOrdering) -> Self {
        Self { ordering, ..*self }
    }

    /// Permutation `perm` such that a matrix in this layout becomes a matrix
    /// in `target` ordering under [`SparseMatrix::permute`]: the unknown
    /// stored at scalar index `d` here lands at `perm[d]` there.
    ///
    /// [`SparseMatrix::permute`]: crate::sparse::SparseMatrix::permute
    pub fn permutation_to(&self, target: BlockOrdering) -> Vec<usize> {
        let other = self.with_ordering(target);
        let mut perm = vec![0usize; self.nrows()];
        for cell in 0..self.ncells {
            for local in 0..self.block_size {
                perm[self.dof(cell, local)] = other.dof(cell, local);
            }
        }
        perm
    }

    /// Scalar indices of every cell's unknown 0, in cell order.
    pub fn pressure_indices(&self) -> Vec<usize> {
        (0..self.ncells).map(|c| self.dof(c, 0)).collect()
    }

    /// Scalar indices of the secondary unknowns, cell-major: cell 0's locals
    /// 1..block_size, then cell 1's, and so on. Empty when `block_size == 1`.
    pub fn secondary_indices(&self) -> Vec<usize> {
        let mut idx = Vec::with_capacity(self.ncells * (self.block_size - 1));
        for cell in 0..self.ncells {
            for local in 1..self.block_size {
                idx.push(self.dof(cell, local));
            }
        }
        idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::{inverse_permutation, SparseMatrix};

    #[test]
    fn dof_round_trips_in_both_orderings() {
        for ordering in [
            BlockOrdering::CellInterleaved,
            BlockOrdering::VariableSegregated,
        ] {
            let layout = BlockLayout::new(5, 3, ordering).unwrap();
            for cell in 0..5 {
                for local in 0..3 {
                    let d = layout.dof(cell, local);
                    assert_eq!(layout.cell_of(d), cell);
                    assert_eq!(layout.local_of(d), local);
                }
            }
        }
    }

    #[test]
    fn interleaved_puts_pressure_first_in_each_cell() {
        let layout = BlockLayout::new(4, 2, BlockOrdering::CellInterleaved).unwrap();
        assert_eq!(layout.pressure_indices(), vec![0, 2, 4, 6]);
        assert_eq!(layout.secondary_indices(), vec![1, 3, 5, 7]);
    }

    #[test]
    fn segregated_puts_all_pressures_first() {
        let layout = BlockLayout::new(4, 2, BlockOrdering::VariableSegregated).unwrap();
        assert_eq!(layout.pressure_indices(), vec![0, 1, 2, 3]);
        assert_eq!(layout.secondary_indices(), vec![4, 5, 6, 7]);
    }

    #[test]
    fn ordering_permutations_are_inverse_pairs() {
        let interleaved = BlockLayout::new(3, 3, BlockOrdering::CellInterleaved).unwrap();
        let to_seg = interleaved.permutation_to(BlockOrdering::VariableSegregated);
        let back = interleaved
            .with_ordering(BlockOrdering::VariableSegregated)
            .permutation_to(BlockOrdering::CellInterleaved);
        assert_eq!(back, inverse_permutation(&to_seg));
    }

    #[test]
    fn permutation_carries_matrix_between_orderings() {
        // Diagonal matrix whose entries encode (cell, local) so any misplaced
        // unknown is visible.
        let layout = BlockLayout::new(3, 2, BlockOrdering::CellInterleaved).unwrap();
        let n = layout.nrows();
        let triplets: Vec<(usize, usize, f64)> = (0..3)
            .flat_map(|cell| {
                (0..2).map(move |local| {
                    let d = layout.dof(cell, local);
                    (d, d, (10 * cell + local) as f64)
                })
            })
            .collect();
        let a = SparseMatrix::from_triplets(n, n, &triplets).unwrap();
        let perm = layout.permutation_to(BlockOrdering::VariableSegregated);
        let seg = a.permute(&perm).unwrap();
        let seg_layout = layout.with_ordering(BlockOrdering::VariableSegregated);
        for cell in 0..3 {
            for local in 0..2 {
                let d = seg_layout.dof(cell, local);
                assert_eq!(seg.get(d, d), Some((10 * cell + local) as f64));
            }
        }
    }
}
