//! Stationary smoothers.
//!
//! Pointwise sweeps come in three flavors: weighted Jacobi, Gauss-Seidel in a
//! caller-chosen row order, and a multi-color Gauss-Seidel that updates the
//! rows of each independent group in parallel. Because rows in one group never
//! couple, the multi-color sweep computes exactly the same values as a
//! sequential Gauss-Seidel visiting the groups' rows in order, bit for bit
//! and for every thread count.
//!
//! Block-granular smoothers for multi-unknown cells live in the submodules:
//! [`BlockIlu`] (zero-fill block ILU) and [`BlockGaussSeidel`].

mod bgs;
mod bilu;

pub use bgs::BlockGaussSeidel;
pub use bilu::BlockIlu;

use rayon::prelude::*;

use crate::coloring::ColoringPlan;
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Groups below this size are swept serially; rayon overhead dominates
/// otherwise.
const PAR_MIN_GROUP: usize = 64;

/// New value for row `i` given the current iterate: solves row `i` for its
/// own unknown. Every sweep variant funnels through this one accumulation so
/// their arithmetic is identical.
#[inline]
fn row_solve(a: &SparseMatrix, x: &[f64], b: &[f64], i: usize) -> f64 {
    let (cols, vals) = a.row(i);
    let mut acc = b[i];
    let mut diag = 0.0;
    for (j, v) in cols.iter().zip(vals) {
        if *j == i {
            diag = *v;
        } else {
            acc -= v * x[*j];
        }
    }
    acc / diag
}

fn check_square_system(a: &SparseMatrix, x: &[f64], b: &[f64]) -> Result<()> {
    if !a.is_square() {
        return Err(Error::InvalidStructure(
            "smoothers need a square matrix".into(),
        ));
    }
    if x.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: x.len(),
            context: "smoother iterate",
        });
    }
    if b.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.len(),
            context: "smoother rhs",
        });
    }
    for i in 0..a.nrows() {
        if a.get(i, i).unwrap_or(0.0) == 0.0 {
            return Err(Error::ZeroDiagonal { row: i });
        }
    }
    Ok(())
}

/// Weighted Jacobi: `x += damping * D^-1 (b - A x)`, repeated `sweeps` times.
/// `damping = 1.0` is the classical update. Rows are independent within a
/// sweep, so the loop parallelizes without affecting the result.
pub fn jacobi_sweep_damped(
    a: &SparseMatrix,
    x: &mut [f64],
    b: &[f64],
    sweeps: usize,
    damping: f64,
) -> Result<()> {
    check_square_system(a, x, b)?;
    let n = a.nrows();
    let mut prev = x.to_vec();
    for _ in 0..sweeps {
        let update = |i: usize| -> f64 {
            let target = row_solve(a, &prev, b, i);
            if damping == 1.0 {
                target
            } else {
                (1.0 - damping) * prev[i] + damping * target
            }
        };
        if n >= PAR_MIN_GROUP && rayon::current_num_threads() > 1 {
            x.par_iter_mut()
                .enumerate()
                .for_each(|(i, xi)| *xi = update(i));
        } else {
            for (i, xi) in x.iter_mut().enumerate() {
                *xi = update(i);
            }
        }
        prev.copy_from_slice(x);
    }
    Ok(())
}

pub fn jacobi_sweep(a: &SparseMatrix, x: &mut [f64], b: &[f64], sweeps: usize) -> Result<()> {
    jacobi_sweep_damped(a, x, b, sweeps, 1.0)
}

fn gs_sweep_seq(
    a: &SparseMatrix,
    x: &mut [f64],
    b: &[f64],
    order: &[usize],
    sweeps: usize,
    reversed: bool,
) {
    for _ in 0..sweeps {
        if reversed {
            for &i in order.iter().rev() {
                x[i] = row_solve(a, x, b, i);
            }
        } else {
            for &i in order {
                x[i] = row_solve(a, x, b, i);
            }
        }
    }
}

/// Gauss-Seidel visiting rows in the given order, each update seeing all
/// earlier ones. `order` must be a permutation of the row indices.
pub fn gs_sweep_ordered(
    a: &SparseMatrix,
    x: &mut [f64],
    b: &[f64],
    order: &[usize],
    sweeps: usize,
) -> Result<()> {
    check_square_system(a, x, b)?;
    crate::sparse::validate_permutation(order, a.nrows())?;
    gs_sweep_seq(a, x, b, order, sweeps, false);
    Ok(())
}

/// Gauss-Seidel in natural row order.
pub fn gs_sweep_natural(a: &SparseMatrix, x: &mut [f64], b: &[f64], sweeps: usize) -> Result<()> {
    check_square_system(a, x, b)?;
    let order: Vec<usize> = (0..a.nrows()).collect();
    gs_sweep_seq(a, x, b, &order, sweeps, false);
    Ok(())
}

/// Checks that `plan` fits `a`: same dimension and no coupling between rows
/// of one group.
fn check_plan(a: &SparseMatrix, plan: &ColoringPlan) -> Result<()> {
    if plan.n() != a.nrows() {
        return Err(Error::InvalidPlan(format!(
            "plan covers {} vertices, matrix has {} rows",
            plan.n(),
            a.nrows()
        )));
    }
    for i in 0..a.nrows() {
        let (cols, _) = a.row(i);
        for &j in cols {
            if j != i && plan.group_of(i) == plan.group_of(j) {
                return Err(Error::InvalidPlan(format!(
                    "rows {i} and {j} are coupled but share group {}",
                    plan.group_of(i)
                )));
            }
        }
    }
    Ok(())
}

fn pgs_sweep_inner(
    a: &SparseMatrix,
    x: &mut [f64],
    b: &[f64],
    plan: &ColoringPlan,
    sweeps: usize,
    reversed: bool,
) {
    let mut group_order: Vec<usize> = (0..plan.num_groups()).collect();
    if reversed {
        group_order.reverse();
    }
    let mut fresh: Vec<f64> = Vec::new();
    for _ in 0..sweeps {
        for &g in &group_order {
            let group = plan.group(g);
            // Rows of one group never read each other, so their updates may
            // be computed from the same snapshot in any order.
            let snapshot: &[f64] = x;
            if group.len() >= PAR_MIN_GROUP && rayon::current_num_threads() > 1 {
                group
                    .par_iter()
                    .map(|&i| row_solve(a, snapshot, b, i))
                    .collect_into_vec(&mut fresh);
            } else {
                fresh.clear();
                fresh.extend(group.iter().map(|&i| row_solve(a, snapshot, b, i)));
            }
            for (k, &i) in group.iter().enumerate() {
                x[i] = fresh[k];
            }
        }
    }
}

/// Multi-color Gauss-Seidel: sweeps the groups of `plan` in order, updating
/// the rows of each group in parallel. Identical to [`gs_sweep_ordered`] with
/// [`ColoringPlan::color_order`] for every thread count.
pub fn pgs_mc_sweep(
    a: &SparseMatrix,
    x: &mut [f64],
    b: &[f64],
    plan: &ColoringPlan,
    sweeps: usize,
) -> Result<()> {
    check_square_system(a, x, b)?;
    check_plan(a, plan)?;
    pgs_sweep_inner(a, x, b, plan, sweeps, false);
    Ok(())
}

/// A configured smoother, ready to apply to systems of a fixed dimension.
#[derive(Clone, Debug)]
pub enum Smoother {
    Jacobi { sweeps: usize, damping: f64 },
    GsNatural { sweeps: usize },
    GsOrdered { sweeps: usize, order: Vec<usize> },
    MultiColor { sweeps: usize, plan: ColoringPlan },
}

impl Smoother {
    pub fn apply(&self, a: &SparseMatrix, x: &mut [f64], b: &[f64]) -> Result<()> {
        match self {
            Smoother::Jacobi { sweeps, damping } => jacobi_sweep_damped(a, x, b, *sweeps, *damping),
            Smoother::GsNatural { sweeps } => gs_sweep_natural(a, x, b, *sweeps),
            Smoother::GsOrdered { sweeps, order } => gs_sweep_ordered(a, x, b, order, *sweeps),
            Smoother::MultiColor { sweeps, plan } => pgs_mc_sweep(a, x, b, plan, *sweeps),
        }
    }

    /// The same smoother with its visit order mirrored, so a pre/post pair
    /// around a coarse correction forms a symmetric application.
    pub fn apply_mirrored(&self, a: &SparseMatrix, x: &mut [f64], b: &[f64]) -> Result<()> {
        match self {
            Smoother::Jacobi { sweeps, damping } => jacobi_sweep_damped(a, x, b, *sweeps, *damping),
            Smoother::GsNatural { sweeps } => {
                check_square_system(a, x, b)?;
                let order: Vec<usize> = (0..a.nrows()).collect();
                gs_sweep_seq(a, x, b, &order, *sweeps, true);
                Ok(())
            }
            Smoother::GsOrdered { sweeps, order } => {
                check_square_system(a, x, b)?;
                crate::sparse::validate_permutation(order, a.nrows())?;
                gs_sweep_seq(a, x, b, order, *sweeps, true);
                Ok(())
            }
            Smoother::MultiColor { sweeps, plan } => {
                check_square_system(a, x, b)?;
                check_plan(a, plan)?;
                pgs_sweep_inner(a, x, b, plan, *sweeps, true);
                Ok(())
            }
        }
    }

    /// Number of independent groups, for plans that have them.
    pub fn num_groups(&self) -> Option<usize> {
        match self {
            Smoother::MultiColor { plan, .. } => Some(plan.num_groups()),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coloring::color_matrix;
    use crate::parallel::with_threads;

    fn two_by_two() -> SparseMatrix {
        SparseMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)])
            .unwrap()
    }

    /// Random pattern, strictly diagonally dominant, seeded.
    fn dominant_random(n: usize, extra_per_row: usize, seed: u64) -> SparseMatrix {
        let mut state = seed.max(1);
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        let mut triplets = Vec::new();
        let mut row_sums = vec![0.0; n];
        for i in 0..n {
            let mut used = vec![i];
            for _ in 0..extra_per_row {
                let j = (next() % n as u64) as usize;
                if !used.contains(&j) {
                    used.push(j);
                    let v = (next() % 2000) as f64 / 1000.0 - 1.0;
                    triplets.push((i, j, v));
                    row_sums[i] += v.abs();
                }
            }
        }
        for i in 0..n {
            triplets.push((i, i, row_sums[i] + 1.0));
        }
        SparseMatrix::from_triplets(n, n, &triplets).unwrap()
    }

    #[test]
    fn jacobi_hand_example() {
        let a = two_by_two();
        let mut x = vec![0.0, 0.0];
        jacobi_sweep(&a, &mut x, &[3.0, 3.0], 1).unwrap();
        assert_eq!(x, vec![1.5, 1.5]);
        jacobi_sweep(&a, &mut x, &[3.0, 3.0], 1).unwrap();
        assert_eq!(x, vec![0.75, 0.75]);
    }

    #[test]
    fn gs_hand_example() {
        let a = two_by_two();
        let mut x = vec![0.0, 0.0];
        gs_sweep_natural(&a, &mut x, &[3.0, 3.0], 1).unwrap();
        assert_eq!(x, vec![1.5, 0.75]);

        let mut y = vec![0.0, 0.0];
        gs_sweep_ordered(&a, &mut y, &[3.0, 3.0], &[1, 0], 1).unwrap();
        assert_eq!(y, vec![0.75, 1.5]);
    }

    #[test]
    fn damped_jacobi_interpolates() {
        let a = two_by_two();
        let mut x = vec![0.0, 0.0];
        jacobi_sweep_damped(&a, &mut x, &[3.0, 3.0], 1, 0.5).unwrap();
        assert_eq!(x, vec![0.75, 0.75]);
    }

    #[test]
    fn sweeps_converge_on_dominant_system() {
        let a = dominant_random(40, 4, 7);
        let x_true: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.spmv(&x_true).unwrap();
        for smoother in [
            Smoother::Jacobi {
                sweeps: 200,
                damping: 1.0,
            },
            Smoother::GsNatural { sweeps: 100 },
        ] {
            let mut x = vec![0.0; 40];
            smoother.apply(&a, &mut x, &b).unwrap();
            let err: f64 = x
                .iter()
                .zip(&x_true)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-8, "{smoother:?} error {err}");
        }
    }

    #[test]
    fn rejects_zero_diagonal() {
        let a =
            SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let mut x = vec![0.0; 2];
        let err = gs_sweep_natural(&a, &mut x, &[1.0, 1.0], 1);
        assert!(matches!(err, Err(Error::ZeroDiagonal { row: 1 })));
    }

    #[test]
    fn rejects_non_permutation_order() {
        let a = two_by_two();
        let mut x = vec![0.0; 2];
        assert!(gs_sweep_ordered(&a, &mut x, &[1.0, 1.0], &[0, 0], 1).is_err());
    }

    #[test]
    fn multicolor_matches_sequential_color_order_bitwise() {
        for seed in [3u64, 11, 42] {
            let a = dominant_random(120, 5, seed);
            let plan = color_matrix(&a).unwrap();
            let b: Vec<f64> = (0..120).map(|i| ((i * 7 % 13) as f64) - 6.0).collect();

            let mut x_seq = vec![0.0; 120];
            gs_sweep_ordered(&a, &mut x_seq, &b, &plan.color_order(), 10).unwrap();

            for threads in [1usize, 4, 8] {
                let mut x_par = vec![0.0; 120];
                with_threads(threads, || pgs_mc_sweep(&a, &mut x_par, &b, &plan, 10)).unwrap();
                assert_eq!(x_par, x_seq, "threads = {threads}");
            }
        }
    }

    #[test]
    fn multicolor_rejects_plan_for_other_matrix() {
        let a = dominant_random(30, 3, 5);
        let plan = color_matrix(&a).unwrap();
        let other = dominant_random(30, 6, 9);
        let mut x = vec![0.0; 30];
        let result = pgs_mc_sweep(&other, &mut x, &vec![1.0; 30], &plan, 1);
        assert!(matches!(result, Err(Error::InvalidPlan(_))));
    }

    #[test]
    fn mirrored_sweeps_reverse_the_visit_order() {
        let a = two_by_two();
        let b = [3.0, 3.0];
        let mut x = vec![0.0, 0.0];
        Smoother::GsNatural { sweeps: 1 }
            .apply_mirrored(&a, &mut x, &b)
            .unwrap();
        assert_eq!(x, vec![0.75, 1.5]);

        let plan = color_matrix(&a).unwrap();
        let mut y = vec![0.0, 0.0];
        let smoother = Smoother::MultiColor { sweeps: 1, plan };
        smoother.apply_mirrored(&a, &mut y, &b).unwrap();
        // Two singleton groups; mirrored order visits row 1 first.
        assert_eq!(y, vec![0.75, 1.5]);
    }
}
