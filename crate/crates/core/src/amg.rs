//! Aggregation-based algebraic multigrid.
//!
//! Coarsening is unsmoothed pairwise aggregation: vertices of the symmetrized
//! matrix are greedily matched with their strongest remaining neighbor, and
//! the coarse operator is the Galerkin product for the piecewise-constant
//! transfer defined by the aggregates. The V-cycle smooths with any of the
//! point smoothers in [`crate::smoothers`], applying the sweep order forward
//! before coarse correction and mirrored after it so the cycle stays
//! symmetric for symmetric operators.
//!
//! Setup is deterministic: selection order, partner choice, and tie-breaking
//! depend only on the matrix, never on thread count.

use serde::Serialize;

use crate::coloring::color_matrix;
use crate::error::{Error, Result};
use crate::krylov::Preconditioner;
use crate::smoothers::Smoother;
use crate::sparse::{DenseFactorization, SparseMatrix};

/// Assignment of fine rows to coarse aggregates.
#[derive(Clone, Debug)]
pub struct AggregationMap {
    n_fine: usize,
    n_coarse: usize,
    aggregate_of: Vec<usize>,
}

impl AggregationMap {
    pub fn n_fine(&self) -> usize {
        self.n_fine
    }

    pub fn n_coarse(&self) -> usize {
        self.n_coarse
    }

    /// Coarse aggregate owning fine row `i`.
    pub fn aggregate_of(&self, i: usize) -> usize {
        self.aggregate_of[i]
    }

    pub fn assignments(&self) -> &[usize] {
        &self.aggregate_of
    }

    /// Composes `self` (fine -> mid) with `next` (mid -> coarse).
    pub fn compose(&self, next: &AggregationMap) -> Result<AggregationMap> {
        if next.n_fine != self.n_coarse {
            return Err(Error::DimensionMismatch {
                expected: self.n_coarse,
                found: next.n_fine,
                context: "aggregation composition",
            });
        }
        Ok(AggregationMap {
            n_fine: self.n_fine,
            n_coarse: next.n_coarse,
            aggregate_of: self
                .aggregate_of
                .iter()
                .map(|&mid| next.aggregate_of[mid])
                .collect(),
        })
    }

    /// Restriction: coarse value is the sum over the aggregate's members.
    pub fn restrict_into(&self, fine: &[f64], coarse: &mut [f64]) {
        debug_assert_eq!(fine.len(), self.n_fine);
        debug_assert_eq!(coarse.len(), self.n_coarse);
        coarse.fill(0.0);
        for (i, &ag) in self.aggregate_of.iter().enumerate() {
            coarse[ag] += fine[i];
        }
    }

    /// Prolongation (added in place): every member inherits its aggregate's value.
    pub fn prolong_add(&self, coarse: &[f64], fine: &mut [f64]) {
        debug_assert_eq!(fine.len(), self.n_fine);
        debug_assert_eq!(coarse.len(), self.n_coarse);
        for (i, &ag) in self.aggregate_of.iter().enumerate() {
            fine[i] += coarse[ag];
        }
    }
}

/// Greedy pairwise matching on the symmetrized matrix `T = A + A^T`.
///
/// Vertices are visited by fewest unaggregated neighbors first (ties to the
/// lowest index). Each visit pairs the vertex with its strongest unaggregated
/// neighbor: negative couplings are preferred, ranked by `-t_ij / 2`; when a
/// vertex has only nonnegative couplings left, the largest `|t_ij| / 2` wins.
/// Equal strengths resolve to the lowest column index. A vertex with no
/// unaggregated neighbors becomes a singleton aggregate.
pub fn pairwise_aggregate(a: &SparseMatrix) -> Result<AggregationMap> {
    if !a.is_square() {
        return Err(Error::InvalidStructure(
            "aggregation needs a square matrix".into(),
        ));
    }
    let n = a.nrows();
    let t = a.add(&a.transpose())?;

    // Off-diagonal adjacency of T, with values for the strength measure.
    let mut nbr_offsets = Vec::with_capacity(n + 1);
    let mut nbr_cols = Vec::new();
    let mut nbr_vals = Vec::new();
    nbr_offsets.push(0);
    for i in 0..n {
        let (cols, vals) = t.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if j != i {
                nbr_cols.push(j);
                nbr_vals.push(v);
            }
        }
        nbr_offsets.push(nbr_cols.len());
    }
    let neighbors = |i: usize| {
        let (s, e) = (nbr_offsets[i], nbr_offsets[i + 1]);
        nbr_cols[s..e].iter().zip(&nbr_vals[s..e])
    };

    const UNASSIGNED: usize = usize::MAX;
    let mut aggregate_of = vec![UNASSIGNED; n];
    let mut unagg_count: Vec<usize> = (0..n)
        .map(|i| nbr_offsets[i + 1] - nbr_offsets[i])
        .collect();
    let mut queue: std::collections::BTreeSet<(usize, usize)> =
        (0..n).map(|i| (unagg_count[i], i)).collect();

    let mut n_coarse = 0usize;
    while let Some(&(count, i)) = queue.iter().next() {
        queue.remove(&(count, i));
        debug_assert_eq!(aggregate_of[i], UNASSIGNED);

        // Strongest unaggregated neighbor; ascending column order means a
        // strict comparison keeps the lowest index on ties.
        let mut best: Option<(usize, f64, bool)> = None; // (col, strength, negative)
        for (&j, &tij) in neighbors(i) {
            if aggregate_of[j] != UNASSIGNED {
                continue;
            }
            let negative = tij < 0.0;
            let strength = if negative {
                -tij / 2.0
            } else {
                tij.abs() / 2.0
            };
            let better = match best {
                None => true,
                Some((_, bs, bneg)) => (negative && !bneg) || (negative == bneg && strength > bs),
            };
            if better {
                best = Some((j, strength, negative));
            }
        }

        let members: &[usize] = match best {
            Some((j, _, _)) => {
                queue.remove(&(unagg_count[j], j));
                aggregate_of[i] = n_coarse;
                aggregate_of[j] = n_coarse;
                &[i, j][..]
            }
            None => {
                aggregate_of[i] = n_coarse;
                &[i][..]
            }
        };
        let pair = members.to_vec();
        n_coarse += 1;

        for &v in &pair {
            for (&k, _) in neighbors(v) {
                if aggregate_of[k] == UNASSIGNED {
                    queue.remove(&(unagg_count[k], k));
                    unagg_count[k] -= 1;
                    queue.insert((unagg_count[k], k));
                }
            }
        }
    }

    Ok(AggregationMap {
        n_fine: n,
        n_coarse,
        aggregate_of,
    })
}

/// Galerkin coarse operator for piecewise-constant transfers:
/// `(A_c)_{IJ} = sum over i in I, j in J of a_ij`.
pub fn galerkin_coarsen(a: &SparseMatrix, map: &AggregationMap) -> Result<SparseMatrix> {
    if a.nrows() != map.n_fine || a.ncols() != map.n_fine {
        return Err(Error::DimensionMismatch {
            expected: map.n_fine,
            found: a.nrows(),
            context: "galerkin coarsening",
        });
    }
    let nc = map.n_coarse;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); nc];
    for (i, &ag) in map.aggregate_of.iter().enumerate() {
        members[ag].push(i);
    }

    let mut offsets = Vec::with_capacity(nc + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    offsets.push(0);
    let mut pos_of = vec![usize::MAX; nc];
    let mut row_cols: Vec<usize> = Vec::new();
    let mut row_vals: Vec<f64> = Vec::new();
    for coarse_row in members.iter() {
        row_cols.clear();
        row_vals.clear();
        for &i in coarse_row {
            let (acols, avals) = a.row(i);
            for (&j, &v) in acols.iter().zip(avals) {
                let jc = map.aggregate_of[j];
                if pos_of[jc] == usize::MAX {
                    pos_of[jc] = row_cols.len();
                    row_cols.push(jc);
                    row_vals.push(v);
                } else {
                    row_vals[pos_of[jc]] += v;
                }
            }
        }
        let mut order: Vec<usize> = (0..row_cols.len()).collect();
        order.sort_unstable_by_key(|&p| row_cols[p]);
        for &p in &order {
            cols.push(row_cols[p]);
            vals.push(row_vals[p]);
        }
        offsets.push(cols.len());
        for &c in &row_cols {
            pos_of[c] = usize::MAX;
        }
    }
    SparseMatrix::from_csr(nc, nc, offsets, cols, vals)
}

/// Point smoother family used on every level above the coarsest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SmootherKind {
    /// Damped Jacobi.
    Jacobi,
    /// Gauss-Seidel in natural row order.
    GsNatural,
    /// Sequential Gauss-Seidel in the group-major order of the coloring plan.
    GsColorOrder,
    /// Parallel multi-color Gauss-Seidel (bit-identical to `GsColorOrder`).
    MultiColor,
}

#[derive(Clone, Copy, Debug)]
pub struct AmgParams {
    pub smoother: SmootherKind,
    /// Sweeps before and after each coarse correction.
    pub smoothing_sweeps: usize,
    /// Damping factor when `smoother` is Jacobi.
    pub jacobi_damping: f64,
    /// Coarsening stops once a level has at most this many rows.
    pub coarsest_max_dof: usize,
    /// Hard cap on the number of levels, the coarsest included.
    pub max_levels: usize,
    /// Run two pairwise passes per level (aggregates of up to four rows).
    pub double_pairwise: bool,
}

impl Default for AmgParams {
    fn default() -> Self {
        Self {
            smoother: SmootherKind::MultiColor,
            smoothing_sweeps: 1,
            jacobi_damping: 0.7,
            coarsest_max_dof: 100,
            max_levels: 20,
            double_pairwise: false,
        }
    }
}

impl AmgParams {
    fn validate(&self) -> Result<()> {
        if self.smoothing_sweeps == 0 {
            return Err(Error::InvalidConfig(
                "smoothing sweeps must be at least 1".into(),
            ));
        }
        if !(self.jacobi_damping > 0.0 && self.jacobi_damping.is_finite()) {
            return Err(Error::InvalidConfig(
                "jacobi damping must be positive and finite".into(),
            ));
        }
        if self.coarsest_max_dof == 0 {
            return Err(Error::InvalidConfig(
                "coarsest size bound must be at least 1".into(),
            ));
        }
        if self.max_levels == 0 {
            return Err(Error::InvalidConfig("level cap must be at least 1".into()));
        }
        Ok(())
    }
}

struct AmgLevel {
    a: SparseMatrix,
    smoother: Smoother,
    map: AggregationMap,
}

/// Multigrid hierarchy applying one V-cycle per call.
pub struct AmgHierarchy {
    levels: Vec<AmgLevel>,
    coarse_a: SparseMatrix,
    coarse_solver: DenseFactorization,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelSummary {
    pub n: usize,
    pub nnz: usize,
    /// Number of color groups when the level smooths in color order.
    pub color_groups: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct HierarchySummary {
    pub levels: Vec<LevelSummary>,
    pub coarsest_n: usize,
}

fn build_smoother(a: &SparseMatrix, params: &AmgParams) -> Result<Smoother> {
    let sweeps = params.smoothing_sweeps;
    Ok(match params.smoother {
        SmootherKind::Jacobi => Smoother::Jacobi {
            sweeps,
            damping: params.jacobi_damping,
        },
        SmootherKind::GsNatural => Smoother::GsNatural { sweeps },
        SmootherKind::GsColorOrder => {
            let plan = color_matrix(a)?;
            Smoother::GsOrdered {
                sweeps,
                order: plan.color_order(),
            }
        }
        SmootherKind::MultiColor => Smoother::MultiColor {
            sweeps,
            plan: color_matrix(a)?,
        },
    })
}

impl AmgHierarchy {
    /// Builds the hierarchy by repeated pairwise coarsening of `a`.
    ///
    /// Coarsening stops at `coarsest_max_dof` rows, at the level cap, or when
    /// a pass would shrink the matrix by less than ten percent; the last
    /// matrix is factorized densely.
    pub fn setup(a: &SparseMatrix, params: &AmgParams) -> Result<Self> {
        params.validate()?;
        if !a.is_square() {
            return Err(Error::InvalidStructure(
                "multigrid needs a square matrix".into(),
            ));
        }
        let mut levels = Vec::new();
        let mut current = a.clone();
        loop {
            if current.nrows() <= params.coarsest_max_dof || levels.len() + 2 > params.max_levels {
                break;
            }
            let mut map = pairwise_aggregate(&current)?;
            let mut coarse = galerkin_coarsen(&current, &map)?;
            if params.double_pairwise && map.n_coarse > params.coarsest_max_dof {
                let second = pairwise_aggregate(&coarse)?;
                coarse = galerkin_coarsen(&coarse, &second)?;
                map = map.compose(&second)?;
            }
            if 10 * map.n_coarse > 9 * current.nrows() {
                break; // coarsening stalled; solve this level directly
            }
            let smoother = build_smoother(&current, params)?;
            levels.push(AmgLevel {
                a: current,
                smoother,
                map,
            });
            current = coarse;
        }
        let coarse_solver = DenseFactorization::of(&current)?;
        Ok(Self {
            levels,
            coarse_a: current,
            coarse_solver,
        })
    }

    /// Number of levels, the coarsest included.
    pub fn num_levels(&self) -> usize {
        self.levels.len() + 1
    }

    pub fn finest_dim(&self) -> usize {
        self.levels
            .first()
            .map_or(self.coarse_a.nrows(), |l| l.a.nrows())
    }

    /// Coloring plan of the finest level, when its smoother has one.
    pub fn finest_plan(&self) -> Option<&crate::coloring::ColoringPlan> {
        match self.levels.first().map(|l| &l.smoother) {
            Some(Smoother::MultiColor { plan, .. }) => Some(plan),
            _ => None,
        }
    }

    pub fn summary(&self) -> HierarchySummary {
        let mut levels: Vec<LevelSummary> = self
            .levels
            .iter()
            .map(|l| LevelSummary {
                n: l.a.nrows(),
                nnz: l.a.nnz(),
                color_groups: l.smoother.num_groups(),
            })
            .collect();
        levels.push(LevelSummary {
            n: self.coarse_a.nrows(),
            nnz: self.coarse_a.nnz(),
            color_groups: None,
        });
        HierarchySummary {
            levels,
            coarsest_n: self.coarse_a.nrows(),
        }
    }

    fn cycle(&self, level: usize, r: &[f64], x: &mut [f64]) -> Result<()> {
        if level == self.levels.len() {
            x.copy_from_slice(r);
            return self.coarse_solver.solve_in_place(x);
        }
        let lv = &self.levels[level];
        lv.smoother.apply(&lv.a, x, r)?;
        let mut rho = vec![0.0; lv.a.nrows()];
        lv.a.residual_into(r, x, &mut rho)?;
        let mut rc = vec![0.0; lv.map.n_coarse];
        lv.map.restrict_into(&rho, &mut rc);
        let mut ec = vec![0.0; lv.map.n_coarse];
        self.cycle(level + 1, &rc, &mut ec)?;
        lv.map.prolong_add(&ec, x);
        lv.smoother.apply_mirrored(&lv.a, x, r)
    }
}

impl Preconditioner for AmgHierarchy {
    fn dim(&self) -> usize {
        self.finest_dim()
    }

    fn apply_into(&self, r: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.dim();
        if r.len() != n || out.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: r.len(),
                context: "multigrid cycle",
            });
        }
        out.fill(0.0);
        self.cycle(0, r, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::poisson_2d;
    use crate::sparse::norm2;

    fn poisson_1d(n: usize) -> SparseMatrix {
        let mut triplets = Vec::new();
        for i in 0..n {
            triplets.push((i, i, 2.0));
            if i > 0 {
                triplets.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                triplets.push((i, i + 1, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, n, &triplets).unwrap()
    }

    #[test]
    fn chain_of_four_pairs_into_adjacent_couples() {
        let a = poisson_1d(4);
        let map = pairwise_aggregate(&a).unwrap();
        assert_eq!(map.assignments(), &[0, 0, 1, 1]);
        assert_eq!(map.n_coarse(), 2);

        let ac = galerkin_coarsen(&a, &map).unwrap();
        assert_eq!(ac.nrows(), 2);
        assert_eq!(ac.get(0, 0), Some(2.0));
        assert_eq!(ac.get(0, 1), Some(-1.0));
        assert_eq!(ac.get(1, 0), Some(-1.0));
        assert_eq!(ac.get(1, 1), Some(2.0));
    }

    #[test]
    fn decoupled_rows_stay_singletons() {
        let a =
            SparseMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0)]).unwrap();
        let map = pairwise_aggregate(&a).unwrap();
        assert_eq!(map.n_coarse(), 3);
        assert_eq!(map.assignments(), &[0, 1, 2]);
    }

    #[test]
    fn negative_couplings_beat_stronger_positive_ones() {
        let a = SparseMatrix::from_triplets(
            4,
            4,
            &[
                (0, 0, 10.0),
                (1, 1, 10.0),
                (2, 2, 10.0),
                (3, 3, 10.0),
                (0, 1, 3.0),
                (1, 0, 3.0),
                (0, 2, -0.5),
                (2, 0, -0.5),
                (1, 3, 3.0),
                (3, 1, 3.0),
            ],
        )
        .unwrap();
        let map = pairwise_aggregate(&a).unwrap();
        // Vertex 0 is visited first (lowest index among equal counts) and must
        // prefer its weak negative coupling to 2 over the strong positive one
        // to 1; the leftovers 1 and 3 then pair through their positive link.
        assert_eq!(map.assignments(), &[0, 1, 0, 1]);
    }

    #[test]
    fn galerkin_product_matches_dense_triple_product() {
        let a = poisson_2d(3, 3);
        let map = pairwise_aggregate(&a).unwrap();
        let ac = galerkin_coarsen(&a, &map).unwrap();

        let n = a.nrows();
        let nc = map.n_coarse();
        let dense = a.to_dense();
        let mut expected = vec![vec![0.0; nc]; nc];
        for i in 0..n {
            for j in 0..n {
                expected[map.aggregate_of(i)][map.aggregate_of(j)] += dense[i * n + j];
            }
        }
        for i in 0..nc {
            for j in 0..nc {
                assert!(
                    (ac.get(i, j).unwrap_or(0.0) - expected[i][j]).abs() <= 1e-12,
                    "mismatch at ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn transfers_sum_and_copy_along_aggregates() {
        let map = AggregationMap {
            n_fine: 4,
            n_coarse: 2,
            aggregate_of: vec![0, 0, 1, 1],
        };
        let mut coarse = vec![0.0; 2];
        map.restrict_into(&[1.0, 2.0, 3.0, 4.0], &mut coarse);
        assert_eq!(coarse, vec![3.0, 7.0]);
        let mut fine = vec![1.0; 4];
        map.prolong_add(&[10.0, 20.0], &mut fine);
        assert_eq!(fine, vec![11.0, 11.0, 21.0, 21.0]);
    }

    #[test]
    fn double_pairwise_coarsens_twice_as_fast() {
        let a = poisson_1d(16);
        let single = AmgHierarchy::setup(
            &a,
            &AmgParams {
                coarsest_max_dof: 4,
                ..Default::default()
            },
        )
        .unwrap();
        let double = AmgHierarchy::setup(
            &a,
            &AmgParams {
                coarsest_max_dof: 4,
                double_pairwise: true,
                ..Default::default()
            },
        )
        .unwrap();
        let first_single = single.summary().levels[1].n;
        let first_double = double.summary().levels[1].n;
        assert_eq!(first_single, 8);
        assert_eq!(first_double, 4);
    }

    #[test]
    fn small_matrices_get_a_direct_solve_only() {
        let a = poisson_1d(6);
        let h = AmgHierarchy::setup(
            &a,
            &AmgParams {
                coarsest_max_dof: 10,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(h.num_levels(), 1);

        let r = vec![1.0, -2.0, 0.5, 3.0, -1.0, 0.25];
        let cycle = h.apply(&r).unwrap();
        let direct = DenseFactorization::of(&a).unwrap().solve(&r).unwrap();
        for (c, d) in cycle.iter().zip(&direct) {
            assert!((c - d).abs() <= 1e-13);
        }
    }

    #[test]
    fn level_sizes_decrease_and_respect_the_bound() {
        let a = poisson_2d(16, 16);
        let params = AmgParams {
            coarsest_max_dof: 20,
            ..Default::default()
        };
        let h = AmgHierarchy::setup(&a, &params).unwrap();
        let summary = h.summary();
        assert!(summary.levels.len() >= 3);
        for pair in summary.levels.windows(2) {
            assert!(pair[1].n < pair[0].n);
        }
        assert!(summary.coarsest_n <= params.coarsest_max_dof);
        assert_eq!(summary.levels.last().unwrap().n, summary.coarsest_n);
        for level in &summary.levels[..summary.levels.len() - 1] {
            assert!(level.color_groups.unwrap() >= 2);
        }
        let json = serde_json::to_string(&summary).unwrap();
        assert!(json.contains("\"levels\""));
        assert!(json.contains("\"coarsest_n\""));
    }

    #[test]
    fn cycle_is_linear_in_the_residual() {
        let a = poisson_2d(8, 8);
        let h = AmgHierarchy::setup(
            &a,
            &AmgParams {
                coarsest_max_dof: 8,
                ..Default::default()
            },
        )
        .unwrap();
        let r1: Vec<f64> = (0..64).map(|i| (i as f64 * 0.3).sin()).collect();
        let r2: Vec<f64> = (0..64).map(|i| (i as f64 * 0.11).cos()).collect();
        let combined: Vec<f64> = r1.iter().zip(&r2).map(|(x, y)| x + 2.0 * y).collect();
        let w1 = h.apply(&r1).unwrap();
        let w2 = h.apply(&r2).unwrap();
        let wc = h.apply(&combined).unwrap();
        let scale = norm2(&wc).max(1.0);
        for i in 0..64 {
            assert!((wc[i] - (w1[i] + 2.0 * w2[i])).abs() <= 1e-11 * scale);
        }
    }

    #[test]
    fn error_propagation_contracts_on_a_grid_laplacian() {
        let a = poisson_2d(16, 16);
        let n = a.nrows();
        for kind in [
            SmootherKind::Jacobi,
            SmootherKind::GsNatural,
            SmootherKind::GsColorOrder,
            SmootherKind::MultiColor,
        ] {
            let h = AmgHierarchy::setup(
                &a,
                &AmgParams {
                    smoother: kind,
                    coarsest_max_dof: 16,
                    ..Default::default()
                },
            )
            .unwrap();
            // Power iteration on the error propagator e -> e - B(A e).
            let mut e: Vec<f64> = (0..n).map(|i| ((i * 7 % 13) as f64) - 6.0).collect();
            let mut ratio = 0.0;
            for _ in 0..25 {
                let ae = a.spmv(&e).unwrap();
                let be = h.apply(&ae).unwrap();
                let next: Vec<f64> = e.iter().zip(&be).map(|(ei, bi)| ei - bi).collect();
                ratio = norm2(&next) / norm2(&e).max(1e-300);
                e = next;
                let scale = norm2(&e);
                if scale > 0.0 {
                    for ei in &mut e {
                        *ei /= scale;
                    }
                }
            }
            assert!(
                ratio < 0.95,
                "cycle with {kind:?} smoothing does not contract: rho ~ {ratio}"
            );
        }
    }

    #[test]
    fn multicolor_cycle_matches_color_order_cycle_bitwise() {
        let a = poisson_2d(12, 12);
        let params_mc = AmgParams {
            smoother: SmootherKind::MultiColor,
            coarsest_max_dof: 12,
            ..Default::default()
        };
        let params_seq = AmgParams {
            smoother: SmootherKind::GsColorOrder,
            ..params_mc
        };
        let h_mc = AmgHierarchy::setup(&a, &params_mc).unwrap();
        let h_seq = AmgHierarchy::setup(&a, &params_seq).unwrap();
        let r: Vec<f64> = (0..144).map(|i| ((i % 19) as f64) - 9.0).collect();
        let w_mc = h_mc.apply(&r).unwrap();
        let w_seq = h_seq.apply(&r).unwrap();
        assert_eq!(w_mc, w_seq);
    }
}
