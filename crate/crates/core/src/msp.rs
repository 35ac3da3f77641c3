//! Multi-stage preconditioning for coupled block systems.
//!
//! One application chains three corrections, each working on the residual
//! left by the previous one:
//!
//! 1. a block Gauss-Seidel pass on the secondary (transported-quantity)
//!    sub-block, skipped when the system has no secondary unknowns;
//! 2. an algebraic multigrid V-cycle on the pressure sub-block;
//! 3. a block ILU(0) relaxation on the full matrix.
//!
//! Writing each stage as a sub-inverse `B` framed by restriction and
//! prolongation, the error propagation of the combination is the product of
//! the single-stage propagations — the whole preconditioner is one linear
//! operator suitable for right-preconditioned GMRES.
//!
//! For sequences of slowly changing systems the expensive stage setup can be
//! reused: [`solve_sequence`] rebuilds the stages only when the previous
//! solve needed more iterations than a threshold `mu` (or when the unknown
//! count changes), and otherwise keeps the stale stage operators while
//! computing the inter-stage residuals with the current matrix.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::amg::{AmgHierarchy, AmgParams};
use crate::error::{Error, Result};
use crate::krylov::{gmres_solve, GmresConfig, Preconditioner};
use crate::problems::NewtonSystem;
use crate::smoothers::{BlockGaussSeidel, BlockIlu};
use crate::sparse::{BlockLayout, BlockOrdering, SparseMatrix};

/// Index maps between the full system and its pressure / secondary parts.
///
/// Restriction picks the sub-vector; prolongation scatters it back, adding.
/// The two index sets partition the unknowns, so the pair of restrictions
/// loses nothing.
#[derive(Clone, Debug)]
pub struct TransferOperators {
    layout: BlockLayout,
    pressure: Vec<usize>,
    secondary: Vec<usize>,
}

impl TransferOperators {
    pub fn new(layout: BlockLayout) -> Self {
        Self {
            pressure: layout.pressure_indices(),
            secondary: layout.secondary_indices(),
            layout,
        }
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn pressure_dofs(&self) -> &[usize] {
        &self.pressure
    }

    pub fn secondary_dofs(&self) -> &[usize] {
        &self.secondary
    }

    /// Layout of the extracted secondary block: the secondary unknowns of one
    /// cell end up contiguous regardless of the source ordering.
    pub fn secondary_layout(&self) -> Result<BlockLayout> {
        BlockLayout::new(
            self.layout.ncells(),
            self.layout.block_size() - 1,
            BlockOrdering::CellInterleaved,
        )
    }

    pub fn restrict_pressure(&self, full: &[f64], sub: &mut [f64]) {
        for (s, &dof) in sub.iter_mut().zip(&self.pressure) {
            *s = full[dof];
        }
    }

    pub fn prolong_add_pressure(&self, sub: &[f64], full: &mut [f64]) {
        for (s, &dof) in sub.iter().zip(&self.pressure) {
            full[dof] += s;
        }
    }

    pub fn restrict_secondary(&self, full: &[f64], sub: &mut [f64]) {
        for (s, &dof) in sub.iter_mut().zip(&self.secondary) {
            *s = full[dof];
        }
    }

    pub fn prolong_add_secondary(&self, sub: &[f64], full: &mut [f64]) {
        for (s, &dof) in sub.iter().zip(&self.secondary) {
            full[dof] += s;
        }
    }

    pub fn extract_pressure_block(&self, a: &SparseMatrix) -> Result<SparseMatrix> {
        a.principal_submatrix(&self.pressure)
    }

    pub fn extract_secondary_block(&self, a: &SparseMatrix) -> Result<SparseMatrix> {
        a.principal_submatrix(&self.secondary)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct MspConfig {
    /// Multigrid settings for the pressure stage.
    pub amg: AmgParams,
    /// Sweeps of the secondary-block Gauss-Seidel stage.
    pub bgs_sweeps: usize,
}

impl Default for MspConfig {
    fn default() -> Self {
        Self {
            amg: AmgParams::default(),
            bgs_sweeps: 1,
        }
    }
}

/// The assembled three-stage preconditioner.
pub struct MspPreconditioner {
    /// Matrix used for inter-stage residuals; swapped on reuse.
    a: SparseMatrix,
    transfers: TransferOperators,
    secondary_stage: Option<BlockGaussSeidel>,
    pressure_stage: AmgHierarchy,
    relaxation_stage: BlockIlu,
    setup_time: Duration,
}

impl MspPreconditioner {
    /// Builds all stage operators from `a`.
    pub fn setup(a: &SparseMatrix, layout: BlockLayout, config: &MspConfig) -> Result<Self> {
        let t0 = Instant::now();
        if !a.is_square() || a.nrows() != layout.nrows() {
            return Err(Error::InvalidLayout(format!(
                "layout describes {} rows, matrix has {}",
                layout.nrows(),
                a.nrows()
            )));
        }
        let transfers = TransferOperators::new(layout);
        let secondary_stage = if layout.block_size() > 1 {
            let ann = transfers.extract_secondary_block(a)?;
            let sub_layout = transfers.secondary_layout()?;
            Some(BlockGaussSeidel::setup(
                ann,
                &sub_layout,
                config.bgs_sweeps,
            )?)
        } else {
            None
        };
        let app = transfers.extract_pressure_block(a)?;
        let pressure_stage = AmgHierarchy::setup(&app, &config.amg)?;
        let relaxation_stage = BlockIlu::setup(a, &layout)?;
        Ok(Self {
            a: a.clone(),
            transfers,
            secondary_stage,
            pressure_stage,
            relaxation_stage,
            setup_time: t0.elapsed(),
        })
    }

    /// Swaps in a new matrix while keeping every stage operator as built.
    /// Inter-stage residuals then reflect the new matrix; the corrections
    /// stay those of the setup-time matrix.
    pub fn update_matrix(&mut self, a: &SparseMatrix) -> Result<()> {
        if a.nrows() != self.a.nrows() || a.ncols() != self.a.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.a.nrows(),
                found: a.nrows(),
                context: "stage reuse across steps",
            });
        }
        self.a = a.clone();
        Ok(())
    }

    pub fn setup_time(&self) -> Duration {
        self.setup_time
    }

    pub fn transfers(&self) -> &TransferOperators {
        &self.transfers
    }

    /// The pressure-stage multigrid hierarchy (for reporting).
    pub fn hierarchy(&self) -> &AmgHierarchy {
        &self.pressure_stage
    }
}

impl Preconditioner for MspPreconditioner {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn apply_into(&self, g: &[f64], w: &mut [f64]) -> Result<()> {
        let n = self.dim();
        if g.len() != n || w.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: g.len(),
                context: "multi-stage application",
            });
        }
        w.fill(0.0);
        let mut r = g.to_vec();

        if let Some(bgs) = &self.secondary_stage {
            let m = self.transfers.secondary.len();
            let mut rn = vec![0.0; m];
            self.transfers.restrict_secondary(&r, &mut rn);
            let mut wn = vec![0.0; m];
            bgs.apply_into(&rn, &mut wn)?;
            self.transfers.prolong_add_secondary(&wn, w);
            self.a.residual_into(g, w, &mut r)?;
        }

        let m = self.transfers.pressure.len();
        let mut rp = vec![0.0; m];
        self.transfers.restrict_pressure(&r, &mut rp);
        let mut wp = vec![0.0; m];
        self.pressure_stage.apply_into(&rp, &mut wp)?;
        self.transfers.prolong_add_pressure(&wp, w);
        self.a.residual_into(g, w, &mut r)?;

        let mut wr = vec![0.0; n];
        self.relaxation_stage.apply_into(&r, &mut wr)?;
        for (wi, d) in w.iter_mut().zip(&wr) {
            *wi += d;
        }
        Ok(())
    }
}

/// When to rebuild the stage operators along a sequence of systems.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SetupPolicy {
    /// Rebuild before every step.
    Always,
    /// Rebuild when the previous step's solve took more than `mu` iterations
    /// (and always on the first step or when the unknown count changes).
    Adaptive { mu: usize },
}

impl SetupPolicy {
    fn stats_mu(&self) -> Option<usize> {
        match self {
            SetupPolicy::Always => None,
            SetupPolicy::Adaptive { mu } => Some(*mu),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SetupDecision {
    Setup,
    Reuse,
}

/// Tracks what the policy needs between steps.
#[derive(Clone, Copy, Debug, Default)]
pub struct AdaptiveState {
    last: Option<(usize, usize)>, // (dimension, iterations)
}

impl AdaptiveState {
    pub fn decide(&self, policy: SetupPolicy, dim: usize) -> SetupDecision {
        match policy {
            SetupPolicy::Always => SetupDecision::Setup,
            SetupPolicy::Adaptive { mu } => match self.last {
                Some((last_dim, last_iterations)) if last_dim == dim && last_iterations <= mu => {
                    SetupDecision::Reuse
                }
                _ => SetupDecision::Setup,
            },
        }
    }

    pub fn record(&mut self, dim: usize, iterations: usize) {
        self.last = Some((dim, iterations));
    }
}

/// Per-step detail kept alongside the aggregate statistics.
#[derive(Clone, Copy, Debug)]
pub struct StepRecord {
    pub step: usize,
    pub rebuilt: bool,
    pub iterations: usize,
    pub final_relative_residual: f64,
}

/// Aggregate statistics of a sequence run. Serializes to exactly the fields
/// shown; the per-step detail stays in memory only.
#[derive(Clone, Debug, Serialize)]
pub struct SequenceStats {
    /// Reuse threshold; absent when every step rebuilt unconditionally.
    pub mu: Option<usize>,
    pub setup_calls: usize,
    /// Fraction of wall time spent building stage operators.
    pub setup_ratio: f64,
    /// Total GMRES iterations over all steps.
    pub iterations: usize,
    pub time_seconds: f64,
    #[serde(skip)]
    pub per_step: Vec<StepRecord>,
}

/// Outcome of [`run_sequence`].
pub struct SequenceRun {
    /// One solution per completed step.
    pub solutions: Vec<Vec<f64>>,
    pub stats: SequenceStats,
    /// First step whose solve exhausted the iteration budget, if any;
    /// later steps are not attempted.
    pub failed_step: Option<usize>,
}

impl SequenceRun {
    pub fn converged(&self) -> bool {
        self.failed_step.is_none()
    }
}

/// Solves the systems of a sequence in order, managing stage setup per the
/// policy. A step that exhausts the iteration budget stops the run but still
/// contributes to the statistics; structural problems (bad layouts, singular
/// blocks) surface as errors.
pub fn run_sequence(
    systems: &[NewtonSystem],
    policy: SetupPolicy,
    msp_config: &MspConfig,
    gmres_config: &GmresConfig,
) -> Result<SequenceRun> {
    let start = Instant::now();
    let mut setup_total = Duration::ZERO;
    let mut state = AdaptiveState::default();
    let mut precond: Option<MspPreconditioner> = None;
    let mut solutions = Vec::with_capacity(systems.len());
    let mut per_step = Vec::with_capacity(systems.len());
    let mut setup_calls = 0usize;
    let mut iterations = 0usize;
    let mut failed_step = None;

    for (step, sys) in systems.iter().enumerate() {
        let decision = state.decide(policy, sys.a.nrows());
        let t0 = Instant::now();
        let rebuilt = decision == SetupDecision::Setup || precond.is_none();
        if rebuilt {
            precond = Some(MspPreconditioner::setup(&sys.a, sys.layout, msp_config)?);
            setup_calls += 1;
        } else if let Some(p) = precond.as_mut() {
            p.update_matrix(&sys.a)?;
        }
        setup_total += t0.elapsed();

        let p = precond.as_ref().expect("preconditioner exists after setup");
        let x0 = vec![0.0; sys.b.len()];
        let (x, stats) = gmres_solve(&sys.a, &sys.b, &x0, p, gmres_config)?;
        state.record(sys.a.nrows(), stats.iterations);
        iterations += stats.iterations;
        per_step.push(StepRecord {
            step,
            rebuilt,
            iterations: stats.iterations,
            final_relative_residual: stats.final_relative_residual,
        });
        if !stats.converged {
            failed_step = Some(step);
            break;
        }
        solutions.push(x);
    }

    let total = start.elapsed();
    let setup_ratio = if total > Duration::ZERO {
        setup_total.as_secs_f64() / total.as_secs_f64()
    } else {
        0.0
    };
    Ok(SequenceRun {
        solutions,
        stats: SequenceStats {
            mu: policy.stats_mu(),
            setup_calls,
            setup_ratio,
            iterations,
            time_seconds: total.as_secs_f64(),
            per_step,
        },
        failed_step,
    })
}

/// Strict variant of [`run_sequence`]: a step that fails to converge becomes
/// an error naming the step.
pub fn solve_sequence(
    systems: &[NewtonSystem],
    policy: SetupPolicy,
    msp_config: &MspConfig,
    gmres_config: &GmresConfig,
) -> Result<(Vec<Vec<f64>>, SequenceStats)> {
    let run = run_sequence(systems, policy, msp_config, gmres_config)?;
    if let Some(step) = run.failed_step {
        let residual = run
            .stats
            .per_step
            .last()
            .map_or(f64::NAN, |s| s.final_relative_residual);
        return Err(Error::StepDidNotConverge { step, residual });
    }
    Ok((run.solutions, run.stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{
        block_jacobian, manufactured_solution, newton_sequence, BlockProblemSpec, GridSpec,
        NewtonSequenceSpec, PermeabilityField,
    };
    use crate::sparse::norm2;

    fn small_spec(nc: usize) -> BlockProblemSpec {
        BlockProblemSpec {
            grid: GridSpec {
                nx: 2,
                ny: 2,
                nz: 1,
                dx: 1.0,
                dy: 1.0,
                dz: 1.0,
                permeability: PermeabilityField::Uniform { value: 1.0 },
                porosity: 0.5,
            },
            n_concentrations: nc,
            dt: 0.1,
            coupling_strength: 1.2,
            dominance_margin: 0.05,
            ordering: BlockOrdering::CellInterleaved,
        }
    }

    fn msp_config() -> MspConfig {
        MspConfig {
            amg: AmgParams {
                coarsest_max_dof: 4,
                ..Default::default()
            },
            bgs_sweeps: 1,
        }
    }

    /// Dense matrix of a linear operator, assembled column by column.
    fn materialize(n: usize, mut op: impl FnMut(&[f64]) -> Vec<f64>) -> Vec<f64> {
        let mut dense = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = op(&e);
            e[j] = 0.0;
            for i in 0..n {
                dense[i * n + j] = col[i];
            }
        }
        dense
    }

    fn matmul(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let aik = a[i * n + k];
                if aik != 0.0 {
                    for j in 0..n {
                        c[i * n + j] += aik * b[k * n + j];
                    }
                }
            }
        }
        c
    }

    fn eye_minus(n: usize, m: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = if i == j { 1.0 } else { 0.0 } - m[i * n + j];
            }
        }
        out
    }

    #[test]
    fn restrictions_partition_the_unknowns() {
        for ordering in [
            BlockOrdering::CellInterleaved,
            BlockOrdering::VariableSegregated,
        ] {
            let layout = BlockLayout::new(5, 3, ordering).unwrap();
            let t = TransferOperators::new(layout);
            let full: Vec<f64> = (0..15).map(|i| i as f64 + 0.5).collect();
            let mut p = vec![0.0; t.pressure_dofs().len()];
            let mut s = vec![0.0; t.secondary_dofs().len()];
            t.restrict_pressure(&full, &mut p);
            t.restrict_secondary(&full, &mut s);
            let mut rebuilt = vec![0.0; 15];
            t.prolong_add_pressure(&p, &mut rebuilt);
            t.prolong_add_secondary(&s, &mut rebuilt);
            assert_eq!(rebuilt, full);
        }
    }

    #[test]
    fn error_propagation_factors_into_the_three_stages() {
        let spec = small_spec(1);
        let (a, layout) = block_jacobian(&spec).unwrap();
        let n = a.nrows();
        let msp = MspPreconditioner::setup(&a, layout, &msp_config()).unwrap();

        // Left side: I - B A for the combined preconditioner.
        let a_dense = a.to_dense();
        let b_dense = materialize(n, |e| msp.apply(e).unwrap());
        let left = eye_minus(n, &matmul(n, &b_dense, &a_dense));

        // Right side: the product of the single-stage propagations, each
        // stage built independently from the same matrix.
        let t = TransferOperators::new(layout);
        let ann = t.extract_secondary_block(&a).unwrap();
        let bgs = BlockGaussSeidel::setup(ann, &t.secondary_layout().unwrap(), 1).unwrap();
        let bn_glob = materialize(n, |r| {
            let mut rn = vec![0.0; t.secondary_dofs().len()];
            t.restrict_secondary(r, &mut rn);
            let wn = bgs.apply(&rn).unwrap();
            let mut w = vec![0.0; n];
            t.prolong_add_secondary(&wn, &mut w);
            w
        });
        let app = t.extract_pressure_block(&a).unwrap();
        let amg = AmgHierarchy::setup(&app, &msp_config().amg).unwrap();
        let bp_glob = materialize(n, |r| {
            let mut rp = vec![0.0; t.pressure_dofs().len()];
            t.restrict_pressure(r, &mut rp);
            let wp = amg.apply(&rp).unwrap();
            let mut w = vec![0.0; n];
            t.prolong_add_pressure(&wp, &mut w);
            w
        });
        let bilu = BlockIlu::setup(&a, &layout).unwrap();
        let r_glob = materialize(n, |r| bilu.apply(r).unwrap());

        let e_n = eye_minus(n, &matmul(n, &bn_glob, &a_dense));
        let e_p = eye_minus(n, &matmul(n, &bp_glob, &a_dense));
        let e_r = eye_minus(n, &matmul(n, &r_glob, &a_dense));
        let right = matmul(n, &e_r, &matmul(n, &e_p, &e_n));

        let scale: f64 = a_dense.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (l, r) in left.iter().zip(&right) {
            assert!((l - r).abs() <= 1e-12 * scale.max(1.0), "{l} vs {r}");
        }
    }

    #[test]
    fn without_secondary_unknowns_only_two_stages_act() {
        let spec = small_spec(0);
        let (a, layout) = block_jacobian(&spec).unwrap();
        let n = a.nrows();
        let msp = MspPreconditioner::setup(&a, layout, &msp_config()).unwrap();

        let a_dense = a.to_dense();
        let b_dense = materialize(n, |e| msp.apply(e).unwrap());
        let left = eye_minus(n, &matmul(n, &b_dense, &a_dense));

        let amg = AmgHierarchy::setup(&a, &msp_config().amg).unwrap();
        let bp = materialize(n, |r| amg.apply(r).unwrap());
        let bilu = BlockIlu::setup(&a, &layout).unwrap();
        let rg = materialize(n, |r| bilu.apply(r).unwrap());
        let right = matmul(
            n,
            &eye_minus(n, &matmul(n, &rg, &a_dense)),
            &eye_minus(n, &matmul(n, &bp, &a_dense)),
        );
        for (l, r) in left.iter().zip(&right) {
            assert!((l - r).abs() <= 1e-12);
        }
    }

    #[test]
    fn reuse_keeps_stage_operators_and_refreshes_residuals() {
        let spec = NewtonSequenceSpec {
            base: small_spec(1),
            steps: 2,
            drift: 0.05,
            seed: 17,
        };
        let systems = newton_sequence(&spec).unwrap();
        let (a0, a1) = (&systems[0].a, &systems[1].a);
        let layout = systems[0].layout;

        let mut reused = MspPreconditioner::setup(a0, layout, &msp_config()).unwrap();
        reused.update_matrix(a1).unwrap();

        // Reference: replicate the stage chain with operators from a0 and
        // residual updates from a1.
        let t = TransferOperators::new(layout);
        let ann = t.extract_secondary_block(a0).unwrap();
        let bgs = BlockGaussSeidel::setup(ann, &t.secondary_layout().unwrap(), 1).unwrap();
        let app = t.extract_pressure_block(a0).unwrap();
        let amg = AmgHierarchy::setup(&app, &msp_config().amg).unwrap();
        let bilu = BlockIlu::setup(a0, &layout).unwrap();

        let n = a0.nrows();
        let g: Vec<f64> = (0..n).map(|i| ((i * 3 % 7) as f64) - 3.0).collect();
        let mut w = vec![0.0; n];
        let mut r = g.clone();
        let mut rn = vec![0.0; t.secondary_dofs().len()];
        t.restrict_secondary(&r, &mut rn);
        let wn = bgs.apply(&rn).unwrap();
        t.prolong_add_secondary(&wn, &mut w);
        a1.residual_into(&g, &w, &mut r).unwrap();
        let mut rp = vec![0.0; t.pressure_dofs().len()];
        t.restrict_pressure(&r, &mut rp);
        let wp = amg.apply(&rp).unwrap();
        t.prolong_add_pressure(&wp, &mut w);
        a1.residual_into(&g, &w, &mut r).unwrap();
        let wr = bilu.apply(&r).unwrap();
        for (wi, d) in w.iter_mut().zip(&wr) {
            *wi += d;
        }

        let got = reused.apply(&g).unwrap();
        let scale = norm2(&w).max(1.0);
        for (gi, wi) in got.iter().zip(&w) {
            assert!((gi - wi).abs() <= 1e-13 * scale);
        }

        // And it must differ from a fresh setup on a1 (the drift is large
        // enough that stale stages are visible).
        let fresh = MspPreconditioner::setup(a1, layout, &msp_config()).unwrap();
        let fresh_w = fresh.apply(&g).unwrap();
        let diff: f64 = got
            .iter()
            .zip(&fresh_w)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(diff > 1e-8, "stale and fresh stages should disagree");
    }

    #[test]
    fn adaptive_state_follows_the_threshold_rules() {
        let policy = SetupPolicy::Adaptive { mu: 10 };
        let mut state = AdaptiveState::default();
        // First step: nothing recorded yet.
        assert_eq!(state.decide(policy, 100), SetupDecision::Setup);
        state.record(100, 4);
        assert_eq!(state.decide(policy, 100), SetupDecision::Reuse);
        state.record(100, 11);
        assert_eq!(state.decide(policy, 100), SetupDecision::Setup);
        state.record(100, 10);
        assert_eq!(state.decide(policy, 100), SetupDecision::Reuse);
        // Dimension change forces a rebuild even after a cheap solve.
        assert_eq!(state.decide(policy, 120), SetupDecision::Setup);

        // Zero threshold reuses only after zero-iteration solves.
        let zero = SetupPolicy::Adaptive { mu: 0 };
        state.record(100, 1);
        assert_eq!(state.decide(zero, 100), SetupDecision::Setup);
        state.record(100, 0);
        assert_eq!(state.decide(zero, 100), SetupDecision::Reuse);

        assert_eq!(
            AdaptiveState::default().decide(SetupPolicy::Always, 5),
            SetupDecision::Setup
        );
    }

    fn sequence(steps: usize, drift: f64) -> Vec<NewtonSystem> {
        newton_sequence(&NewtonSequenceSpec {
            base: small_spec(1),
            steps,
            drift,
            seed: 5,
        })
        .unwrap()
    }

    #[test]
    fn sequence_solutions_are_accurate_and_counted() {
        let systems = sequence(4, 1e-3);
        let gmres = GmresConfig {
            tolerance: 1e-9,
            ..Default::default()
        };
        let (solutions, stats) =
            solve_sequence(&systems, SetupPolicy::Always, &msp_config(), &gmres).unwrap();
        assert_eq!(solutions.len(), 4);
        assert_eq!(stats.setup_calls, 4);
        assert_eq!(stats.mu, None);
        assert_eq!(stats.per_step.len(), 4);
        assert!(stats.iterations >= 4);
        let x_star = manufactured_solution(&small_spec(1)).unwrap();
        for (sys, x) in systems.iter().zip(&solutions) {
            let mut r = vec![0.0; x.len()];
            sys.a.residual_into(&sys.b, x, &mut r).unwrap();
            assert!(norm2(&r) <= 1e-8 * norm2(&sys.b));
            // Well-conditioned system: the iterate is close to the reference.
            let err: f64 = x
                .iter()
                .zip(&x_star)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-5);
        }
    }

    #[test]
    fn zero_threshold_matches_always_bitwise() {
        let systems = sequence(5, 1e-3);
        let gmres = GmresConfig::default();
        let (x_always, s_always) =
            solve_sequence(&systems, SetupPolicy::Always, &msp_config(), &gmres).unwrap();
        let (x_zero, s_zero) = solve_sequence(
            &systems,
            SetupPolicy::Adaptive { mu: 0 },
            &msp_config(),
            &gmres,
        )
        .unwrap();
        assert_eq!(x_always, x_zero);
        assert_eq!(s_always.iterations, s_zero.iterations);
        // Every step here needs at least one iteration, so the zero threshold
        // rebuilds before each one.
        assert_eq!(s_zero.setup_calls, 5);
        assert_eq!(s_zero.mu, Some(0));
    }

    #[test]
    fn infinite_threshold_builds_once() {
        let systems = sequence(5, 1e-3);
        let (_, stats) = solve_sequence(
            &systems,
            SetupPolicy::Adaptive { mu: usize::MAX },
            &msp_config(),
            &GmresConfig::default(),
        )
        .unwrap();
        assert_eq!(stats.setup_calls, 1);
        assert!(stats.per_step[0].rebuilt);
        assert!(stats.per_step[1..].iter().all(|s| !s.rebuilt));
    }

    #[test]
    fn stats_serialize_to_exactly_five_fields() {
        let stats = SequenceStats {
            mu: Some(7),
            setup_calls: 3,
            setup_ratio: 0.25,
            iterations: 40,
            time_seconds: 1.5,
            per_step: vec![StepRecord {
                step: 0,
                rebuilt: true,
                iterations: 40,
                final_relative_residual: 1e-6,
            }],
        };
        let value: serde_json::Value = serde_json::to_value(&stats).unwrap();
        let obj = value.as_object().unwrap();
        let mut keys: Vec<_> = obj.keys().map(String::as_str).collect();
        keys.sort_unstable();
        assert_eq!(
            keys,
            vec![
                "iterations",
                "mu",
                "setup_calls",
                "setup_ratio",
                "time_seconds"
            ]
        );
    }

    #[test]
    fn exhausted_budget_reports_the_step() {
        let systems = sequence(2, 1e-3);
        let gmres = GmresConfig {
            max_iterations: 1,
            tolerance: 1e-14,
            ..Default::default()
        };
        let err = solve_sequence(&systems, SetupPolicy::Always, &msp_config(), &gmres).unwrap_err();
        match err {
            Error::StepDidNotConverge { step, .. } => assert_eq!(step, 0),
            other => panic!("unexpected error: {other}"),
        }
    }
}
