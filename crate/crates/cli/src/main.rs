//! Benchmark harness for the multi-stage solver library.
//!
//! Loads or generates sparse systems, runs the preconditioned solver with a
//! configurable setup-reuse policy, and reports per-run metrics as CSV or
//! JSON. Exit codes: 0 on success, 2 when a solve fails to converge, 3 for
//! input or configuration problems.

use std::fs::File;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mstage::amg::{AmgParams, SmootherKind};
use mstage::coloring::{color_matrix, write_plan};
use mstage::krylov::GmresConfig;
use mstage::msp::{run_sequence, MspConfig, MspPreconditioner, SequenceRun, SetupPolicy};
use mstage::parallel::{current_threads, with_threads};
use mstage::problems::{
    block_jacobian, manufactured_solution, newton_sequence, poisson_2d, BlockProblemSpec, GridSpec,
    NewtonSequenceSpec, NewtonSystem, PermeabilityField,
};
use mstage::sparse::{read_matrix_market_file, read_vector_file, BlockLayout, BlockOrdering};
use mstage::Error;

const EXIT_NONCONVERGENCE: u8 = 2;
const EXIT_INPUT: u8 = 3;

#[derive(Parser)]
#[command(
    name = "mstage",
    version,
    about = "Benchmark harness for multi-stage preconditioned GMRES",
    long_about = "Loads or generates sparse systems, solves them with \
multi-stage preconditioned GMRES, and reports metrics as CSV or JSON.\n\
Flags marked with an environment variable can be overridden from the \
environment (MSTAGE_* prefix) for CI runs."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a system or a sequence of systems and report solver metrics.
    Run(RunArgs),
    /// Solve the same problem once per smoother variant and report one row each.
    CompareSmoothers(CompareArgs),
    /// Generate a problem sequence and write it to disk.
    Export(ExportArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Generator {
    /// Five-point Laplacian on an nx-by-ny grid.
    Poisson2d,
    /// Coupled pressure/transport block system on a structured grid.
    Blockcomp,
    /// Sequence of drifting block systems sharing one sparsity pattern.
    NewtonSeq,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SmootherArg {
    /// Damped point Jacobi.
    Jacobi,
    /// Gauss-Seidel in natural row order.
    Gs,
    /// Parallel multi-color Gauss-Seidel.
    PgsMc,
}

impl SmootherArg {
    fn kind(self) -> SmootherKind {
        match self {
            SmootherArg::Jacobi => SmootherKind::Jacobi,
            SmootherArg::Gs => SmootherKind::GsNatural,
            SmootherArg::PgsMc => SmootherKind::MultiColor,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OrderingArg {
    /// All unknowns of a cell stored together.
    CellInterleaved,
    /// All pressures first, then the other unknowns variable by variable.
    VariableSegregated,
}

impl OrderingArg {
    fn ordering(self) -> BlockOrdering {
        match self {
            OrderingArg::CellInterleaved => BlockOrdering::CellInterleaved,
            OrderingArg::VariableSegregated => BlockOrdering::VariableSegregated,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ReportFormat {
    Csv,
    Json,
}

fn parse_mu(s: &str) -> Result<usize, String> {
    if s.eq_ignore_ascii_case("inf") {
        return Ok(usize::MAX);
    }
    s.parse::<usize>()
        .map_err(|_| format!("expected a nonnegative integer or \"inf\", got {s:?}"))
}

#[derive(Args)]
struct SourceArgs {
    /// Matrix Market file with the system matrix (block size 1).
    #[arg(long, conflicts_with = "gen", value_name = "PATH")]
    matrix: Option<PathBuf>,
    /// Right-hand side for --matrix, one value per line; defaults to all ones.
    #[arg(long, requires = "matrix", value_name = "PATH")]
    rhs: Option<PathBuf>,
    /// Built-in problem generator.
    #[arg(long, value_enum, required_unless_present = "matrix")]
    gen: Option<Generator>,
    /// Grid cells in x.
    #[arg(long, default_value_t = 16)]
    nx: usize,
    /// Grid cells in y.
    #[arg(long, default_value_t = 16)]
    ny: usize,
    /// Grid cells in z (generators blockcomp and newton-seq).
    #[arg(long, default_value_t = 1)]
    nz: usize,
    /// Transported quantities per cell (generators blockcomp and newton-seq).
    #[arg(long, default_value_t = 1)]
    nc: usize,
    /// Implicit time step entering the accumulation terms.
    #[arg(long, default_value_t = 1.0)]
    dt: f64,
    /// Off-block coupling strength in [0, 2).
    #[arg(long, default_value_t = 1.0)]
    coupling: f64,
    /// Extra diagonal mass on transported-quantity rows.
    #[arg(long, default_value_t = 0.0)]
    margin: f64,
    /// Unknown numbering of generated block systems.
    #[arg(long, value_enum, default_value_t = OrderingArg::CellInterleaved)]
    ordering: OrderingArg,
    /// Steps of a newton-seq run.
    #[arg(long, default_value_t = 10)]
    steps: usize,
    /// Relative per-step matrix drift of a newton-seq run.
    #[arg(long, default_value_t = 1e-2)]
    drift: f64,
    /// Seed for the permeability field and the sequence drift.
    #[arg(long, env = "MSTAGE_SEED", default_value_t = 0)]
    seed: u64,
}

impl SourceArgs {
    fn block_spec(&self) -> BlockProblemSpec {
        BlockProblemSpec {
            grid: GridSpec {
                nx: self.nx,
                ny: self.ny,
                nz: self.nz,
                dx: 1.0,
                dy: 1.0,
                dz: 1.0,
                permeability: PermeabilityField::LogNormal {
                    mean_log: 0.0,
                    sigma: 1.0,
                    seed: self.seed,
                },
                porosity: 0.2,
            },
            n_concentrations: self.nc,
            dt: self.dt,
            coupling_strength: self.coupling,
            dominance_margin: self.margin,
            ordering: self.ordering.ordering(),
        }
    }

    fn is_sequence(&self) -> bool {
        matches!(self.gen, Some(Generator::NewtonSeq))
    }

    /// Case label plus the systems to solve, in step order.
    fn build(&self) -> Result<(String, Vec<NewtonSystem>), Error> {
        if let Some(path) = &self.matrix {
            let a = read_matrix_market_file(path)?;
            if !a.is_square() {
                return Err(Error::InvalidStructure(format!(
                    "{} is not square",
                    path.display()
                )));
            }
            let b = match &self.rhs {
                Some(p) => read_vector_file(p)?,
                None => vec![1.0; a.nrows()],
            };
            if b.len() != a.nrows() {
                return Err(Error::DimensionMismatch {
                    expected: a.nrows(),
                    found: b.len(),
                    context: "right-hand side file",
                });
            }
            let layout = BlockLayout::new(a.nrows(), 1, BlockOrdering::CellInterleaved)?;
            let case = format!("matrix:{}", path.display());
            return Ok((case, vec![NewtonSystem { a, b, layout }]));
        }
        match self.gen.expect("clap enforces a source") {
            Generator::Poisson2d => {
                let a = poisson_2d(self.nx, self.ny);
                let b = vec![1.0; a.nrows()];
                let layout = BlockLayout::new(a.nrows(), 1, BlockOrdering::CellInterleaved)?;
                let case = format!("poisson2d-{}x{}", self.nx, self.ny);
                Ok((case, vec![NewtonSystem { a, b, layout }]))
            }
            Generator::Blockcomp => {
                let spec = self.block_spec();
                let (a, layout) = block_jacobian(&spec)?;
                let b = a.spmv(&manufactured_solution(&spec)?)?;
                let case = format!(
                    "blockcomp-{}x{}x{}-nc{}",
                    self.nx, self.ny, self.nz, self.nc
                );
                Ok((case, vec![NewtonSystem { a, b, layout }]))
            }
            Generator::NewtonSeq => {
                let spec = NewtonSequenceSpec {
                    base: self.block_spec(),
                    steps: self.steps,
                    drift: self.drift,
                    seed: self.seed.wrapping_add(1),
                };
                let systems = newton_sequence(&spec)?;
                let case = format!(
                    "newton-seq-{}x{}x{}-nc{}-steps{}",
                    self.nx, self.ny, self.nz, self.nc, self.steps
                );
                Ok((case, systems))
            }
        }
    }
}

#[derive(Args)]
struct SolverArgs {
    /// Setup reuse threshold for sequences: rebuild stages only after a step
    /// needing more than this many iterations. Accepts "inf"; omit to
    /// rebuild before every step.
    #[arg(long, value_parser = parse_mu)]
    mu: Option<usize>,
    /// GMRES restart length.
    #[arg(long, default_value_t = 30)]
    restart: usize,
    /// Total GMRES iteration budget per step.
    #[arg(long, default_value_t = 1000)]
    maxit: usize,
    /// Relative residual tolerance.
    #[arg(long, env = "MSTAGE_TOL", default_value_t = 1e-5)]
    tol: f64,
    /// Multigrid coarsening stops at this many rows.
    #[arg(long, default_value_t = 100)]
    coarsest: usize,
    /// Smoothing sweeps before and after each coarse correction.
    #[arg(long, default_value_t = 1)]
    sweeps: usize,
    /// Coarsen with two pairwise passes per level.
    #[arg(long)]
    double_pairwise: bool,
    /// Worker threads; 0 uses the machine default.
    #[arg(long, env = "MSTAGE_THREADS", default_value_t = 0)]
    threads: usize,
    /// Report format on stdout.
    #[arg(long, value_enum, env = "MSTAGE_REPORT", default_value_t = ReportFormat::Csv)]
    report: ReportFormat,
}

impl SolverArgs {
    fn policy(&self) -> SetupPolicy {
        match self.mu {
            None => SetupPolicy::Always,
            Some(mu) => SetupPolicy::Adaptive { mu },
        }
    }

    fn gmres(&self) -> GmresConfig {
        GmresConfig {
            restart: self.restart,
            max_iterations: self.maxit,
            tolerance: self.tol,
        }
    }

    fn msp(&self, smoother: SmootherKind) -> MspConfig {
        MspConfig {
            amg: AmgParams {
                smoother,
                smoothing_sweeps: self.sweeps,
                coarsest_max_dof: self.coarsest,
                double_pairwise: self.double_pairwise,
                ..Default::default()
            },
            bgs_sweeps: 1,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Multigrid smoother.
    #[arg(long, value_enum, default_value_t = SmootherArg::PgsMc)]
    smoother: SmootherArg,
    /// Write the coloring of the pressure block as "vertex group" lines.
    #[arg(long, value_name = "PATH")]
    dump_coloring: Option<PathBuf>,
    /// Write the multigrid hierarchy summary as JSON.
    #[arg(long, value_name = "PATH")]
    dump_hierarchy: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct ExportArgs {
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// File name stem.
    #[arg(long, default_value = "case")]
    stem: String,
    #[command(flatten)]
    source: SourceArgs,
}

/// One report row. The CSV header lists the fields in this order.
#[derive(Serialize)]
struct ReportRow {
    case: String,
    mu: String,
    setup_calls: usize,
    setup_ratio: f64,
    iterations: usize,
    converged: bool,
    wall_time_seconds: f64,
    threads: usize,
}

const CSV_HEADER: &str =
    "case,mu,setup_calls,setup_ratio,iterations,converged,wall_time_seconds,threads";

fn mu_label(policy: SetupPolicy) -> String {
    match policy {
        SetupPolicy::Always => "always".to_string(),
        SetupPolicy::Adaptive { mu: usize::MAX } => "inf".to_string(),
        SetupPolicy::Adaptive { mu } => mu.to_string(),
    }
}

fn row_from_run(case: &str, policy: SetupPolicy, run: &SequenceRun, threads: usize) -> ReportRow {
    ReportRow {
        case: case.to_string(),
        mu: mu_label(policy),
        setup_calls: run.stats.setup_calls,
        setup_ratio: run.stats.setup_ratio,
        iterations: run.stats.iterations,
        converged: run.converged(),
        wall_time_seconds: run.stats.time_seconds,
        threads,
    }
}

fn print_report(rows: &[ReportRow], format: ReportFormat) {
    match format {
        ReportFormat::Csv => {
            println!("{CSV_HEADER}");
            for r in rows {
                println!(
                    "{},{},{},{:.6},{},{},{:.6},{}",
                    r.case,
                    r.mu,
                    r.setup_calls,
                    r.setup_ratio,
                    r.iterations,
                    r.converged,
                    r.wall_time_seconds,
                    r.threads
                );
            }
        }
        ReportFormat::Json => {
            println!(
                "{}",
                serde_json::to_string_pretty(rows).expect("report rows serialize")
            );
        }
    }
}

enum CliError {
    NonConvergence(String),
    Input(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::StepDidNotConverge { .. } | Error::Breakdown { .. } => {
                CliError::NonConvergence(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

fn write_dumps(
    args: &RunArgs,
    systems: &[NewtonSystem],
    msp_config: &MspConfig,
) -> Result<(), Error> {
    if args.dump_coloring.is_none() && args.dump_hierarchy.is_none() {
        return Ok(());
    }
    let first = &systems[0];
    let precond = MspPreconditioner::setup(&first.a, first.layout, msp_config)?;
    if let Some(path) = &args.dump_hierarchy {
        let file = File::create(path)?;
        serde_json::to_writer_pretty(file, &precond.hierarchy().summary())
            .map_err(|e| Error::InvalidConfig(format!("hierarchy dump failed: {e}")))?;
    }
    if let Some(path) = &args.dump_coloring {
        let app = precond.transfers().extract_pressure_block(&first.a)?;
        let plan = color_matrix(&app)?;
        let mut file = File::create(path)?;
        write_plan(&plan, &mut file)?;
        file.flush()?;
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    if args.solver.mu.is_some() && !args.source.is_sequence() {
        return Err(CliError::Input(
            "--mu configures setup reuse across a sequence; it needs --gen newton-seq".into(),
        ));
    }
    let (case, systems) = args.source.build()?;
    let policy = args.solver.policy();
    let gmres = args.solver.gmres();
    let msp = args.solver.msp(args.smoother.kind());

    let (run, threads) = with_threads(args.solver.threads, || {
        let run = write_dumps(&args, &systems, &msp)
            .and_then(|()| run_sequence(&systems, policy, &msp, &gmres));
        (run, current_threads())
    });
    let run = run?;

    let row = row_from_run(&case, policy, &run, threads);
    print_report(std::slice::from_ref(&row), args.solver.report);
    match run.failed_step {
        Some(step) => Err(CliError::NonConvergence(format!(
            "step {step} did not reach the tolerance within {} iterations",
            gmres.max_iterations
        ))),
        None => Ok(()),
    }
}

fn cmd_compare(args: CompareArgs) -> Result<(), CliError> {
    if args.solver.mu.is_some() && !args.source.is_sequence() {
        return Err(CliError::Input(
            "--mu configures setup reuse across a sequence; it needs --gen newton-seq".into(),
        ));
    }
    let (_, systems) = args.source.build()?;
    let policy = args.solver.policy();
    let gmres = args.solver.gmres();

    let variants = [
        ("jacobi", SmootherKind::Jacobi),
        ("gs-natural", SmootherKind::GsNatural),
        ("gs-color-order", SmootherKind::GsColorOrder),
        ("pgs-mc", SmootherKind::MultiColor),
    ];
    let mut rows = Vec::with_capacity(variants.len());
    let mut failed = false;
    for (label, kind) in variants {
        let msp = args.solver.msp(kind);
        let (run, threads) = with_threads(args.solver.threads, || {
            (
                run_sequence(&systems, policy, &msp, &gmres),
                current_threads(),
            )
        });
        let run = run?;
        failed |= !run.converged();
        rows.push(row_from_run(label, policy, &run, threads));
    }
    print_report(&rows, args.solver.report);
    if failed {
        return Err(CliError::NonConvergence(
            "at least one smoother variant did not converge".into(),
        ));
    }
    Ok(())
}

fn cmd_export(args: ExportArgs) -> Result<(), CliError> {
    if args.source.matrix.is_some() {
        return Err(CliError::Input(
            "export generates systems; it does not accept --matrix".into(),
        ));
    }
    // A blockcomp export is a one-step sequence without drift.
    let (steps, drift) = match args.source.gen {
        Some(Generator::NewtonSeq) => (args.source.steps, args.source.drift),
        Some(Generator::Blockcomp) => (1, 0.0),
        Some(Generator::Poisson2d) | None => {
            return Err(CliError::Input(
                "export supports --gen blockcomp and --gen newton-seq".into(),
            ));
        }
    };
    let spec = NewtonSequenceSpec {
        base: args.source.block_spec(),
        steps,
        drift,
        seed: args.source.seed.wrapping_add(1),
    };
    let paths = mstage::problems::export_sequence(&args.out, &args.stem, &spec)?;
    eprintln!(
        "wrote {} systems and {}",
        paths.matrices.len(),
        paths.manifest.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_INPUT)
            };
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::CompareSmoothers(args) => cmd_compare(args),
        Command::Export(args) => cmd_export(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::NonConvergence(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_NONCONVERGENCE)
        }
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
