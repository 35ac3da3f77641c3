//! Synthetic problem generators.
//!
//! Everything here is deterministic: random fields come from a counter-based
//! generator seeded explicitly, so a spec plus a seed always reproduces the
//! same matrix bit for bit.
//!
//! Three families are provided:
//! - structured-grid pressure systems from a two-point flux approximation
//!   (symmetric M-matrices with an accumulation term on the diagonal),
//! - constant-coefficient Poisson stencils in 2D/3D,
//! - coupled block systems that attach one or more transported-quantity
//!   unknowns to every cell, with adjustable off-block coupling strength,
//!   plus drifting sequences of such systems that mimic consecutive Newton
//!   steps of an implicit time stepper.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{
    write_matrix_market_file, write_vector_file, BlockLayout, BlockOrdering, SparseMatrix,
};

/// Cell permeability field of a structured grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PermeabilityField {
    /// Same value in every cell.
    Uniform { value: f64 },
    /// Independent log-normal values: `exp(mean_log + sigma * z)` with
    /// standard-normal `z` drawn from a seeded stream.
    LogNormal {
        mean_log: f64,
        sigma: f64,
        seed: u64,
    },
}

/// Structured `nx * ny * nz` grid with per-cell permeability and porosity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub permeability: PermeabilityField,
    pub porosity: f64,
}

impl GridSpec {
    /// Uniform-permeability grid with unit spacing and porosity 0.2.
    pub fn uniform(nx: usize, ny: usize, nz: usize) -> Self {
        Self {
            nx,
            ny,
            nz,
            dx: 1.0,
            dy: 1.0,
            dz: 1.0,
            permeability: PermeabilityField::Uniform { value: 1.0 },
            porosity: 0.2,
        }
    }

    pub fn ncells(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn cell_index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + self.nx * (iy + self.ny * iz)
    }

    /// Inverse of [`Self::cell_index`].
    pub fn cell_coords(&self, cell: usize) -> (usize, usize, usize) {
        let ix = cell % self.nx;
        let iy = (cell / self.nx) % self.ny;
        let iz = cell / (self.nx * self.ny);
        (ix, iy, iz)
    }

    fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || self.nz == 0 {
            return Err(Error::InvalidConfig(
                "grid extents must be at least 1".into(),
            ));
        }
        for (name, v) in [("dx", self.dx), ("dy", self.dy), ("dz", self.dz)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive and finite"
                )));
            }
        }
        if !(self.porosity > 0.0 && self.porosity.is_finite()) {
            return Err(Error::InvalidConfig(
                "porosity must be positive and finite".into(),
            ));
        }
        match self.permeability {
            PermeabilityField::Uniform { value } => {
                if !(value > 0.0 && value.is_finite()) {
                    return Err(Error::InvalidConfig(
                        "permeability must be positive and finite".into(),
                    ));
                }
            }
            PermeabilityField::LogNormal {
                mean_log, sigma, ..
            } => {
                if !mean_log.is_finite() || !(sigma >= 0.0 && sigma.is_finite()) {
                    return Err(Error::InvalidConfig(
                        "log-normal permeability needs finite mean and nonnegative sigma".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Per-cell permeability values in cell-index order.
    pub fn permeability_values(&self) -> Vec<f64> {
        let n = self.ncells();
        match self.permeability {
            PermeabilityField::Uniform { value } => vec![value; n],
            PermeabilityField::LogNormal {
                mean_log,
                sigma,
                seed,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..n)
                    .map(|_| {
                        // Box-Muller transform of two uniform draws.
                        let u1: f64 = 1.0 - rng.gen::<f64>();
                        let u2: f64 = rng.gen();
                        let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
                        (mean_log + sigma * z).exp()
                    })
                    .collect()
            }
        }
    }
}

/// One interior face: the two cells it joins and its transmissibility.
struct Face {
    lo: usize,
    hi: usize,
    trans: f64,
}

/// Interior faces with two-point transmissibilities
/// `T = area * k_harmonic / distance`, plus each cell's accumulation term
/// `porosity * cell_volume / dt` and its total face transmissibility.
struct FluxStencil {
    faces: Vec<Face>,
    accumulation: Vec<f64>,
    trans_sum: Vec<f64>,
}

fn flux_stencil(grid: &GridSpec, dt: f64) -> Result<FluxStencil> {
    grid.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidConfig(
            "time step must be positive and finite".into(),
        ));
    }
    let perm = grid.permeability_values();
    let n = grid.ncells();
    let volume = grid.dx * grid.dy * grid.dz;
    let acc = grid.porosity * volume / dt;

    let mut faces = Vec::new();
    let mut trans_sum = vec![0.0; n];
    // (area, distance) per axis; neighbor offset handled by the index math.
    let axes = [
        (grid.dy * grid.dz, grid.dx),
        (grid.dx * grid.dz, grid.dy),
        (grid.dx * grid.dy, grid.dz),
    ];
    for iz in 0..grid.nz {
        for iy in 0..grid.ny {
            for ix in 0..grid.nx {
                let lo = grid.cell_index(ix, iy, iz);
                let neighbors = [
                    (ix + 1 < grid.nx).then(|| grid.cell_index(ix + 1, iy, iz)),
                    (iy + 1 < grid.ny).then(|| grid.cell_index(ix, iy + 1, iz)),
                    (iz + 1 < grid.nz).then(|| grid.cell_index(ix, iy, iz + 1)),
                ];
                for (axis, hi) in neighbors.into_iter().enumerate() {
                    let Some(hi) = hi else { continue };
                    let (area, dist) = axes[axis];
                    let k_harm = 2.0 * perm[lo] * perm[hi] / (perm[lo] + perm[hi]);
                    let trans = area * k_harm / dist;
                    trans_sum[lo] += trans;
                    trans_sum[hi] += trans;
                    faces.push(Face { lo, hi, trans });
                }
            }
        }
    }
    Ok(FluxStencil {
        faces,
        accumulation: vec![acc; n],
        trans_sum,
    })
}

/// Pressure matrix of the grid: two-point fluxes across interior faces and an
/// accumulation term on the diagonal. Symmetric, strictly diagonally
/// dominant, with nonpositive off-diagonal entries.
pub fn tpfa_pressure_matrix(grid: &GridSpec, dt: f64) -> Result<SparseMatrix> {
    let stencil = flux_stencil(grid, dt)?;
    let n = grid.ncells();
    let mut triplets = Vec::with_capacity(n + 2 * stencil.faces.len());
    for i in 0..n {
        triplets.push((i, i, stencil.accumulation[i] + stencil.trans_sum[i]));
    }
    for f in &stencil.faces {
        triplets.push((f.lo, f.hi, -f.trans));
        triplets.push((f.hi, f.lo, -f.trans));
    }
    SparseMatrix::from_triplets(n, n, &triplets)
}

/// Five-point Laplacian on an `nx * ny` grid: 4 on the diagonal, -1 across
/// each interior edge (homogeneous Dirichlet boundary).
pub fn poisson_2d(nx: usize, ny: usize) -> SparseMatrix {
    let n = nx * ny;
    let idx = |ix: usize, iy: usize| ix + nx * iy;
    let mut triplets = Vec::with_capacity(5 * n);
    for iy in 0..ny {
        for ix in 0..nx {
            let i = idx(ix, iy);
            triplets.push((i, i, 4.0));
            if ix + 1 < nx {
                triplets.push((i, idx(ix + 1, iy), -1.0));
                triplets.push((idx(ix + 1, iy), i, -1.0));
            }
            if iy + 1 < ny {
                triplets.push((i, idx(ix, iy + 1), -1.0));
                triplets.push((idx(ix, iy + 1), i, -1.0));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &triplets).expect("stencil triplets are valid")
}

/// Seven-point Laplacian on an `nx * ny * nz` grid: 6 on the diagonal, -1
/// across each interior face (homogeneous Dirichlet boundary).
pub fn poisson_3d(nx: usize, ny: usize, nz: usize) -> SparseMatrix {
    let grid = GridSpec::uniform(nx, ny, nz);
    let n = grid.ncells();
    let mut triplets = Vec::with_capacity(7 * n);
    for iz in 0..nz {
        for iy in 0..ny {
            for ix in 0..nx {
                let i = grid.cell_index(ix, iy, iz);
                triplets.push((i, i, 6.0));
                for j in [
                    (ix + 1 < nx).then(|| grid.cell_index(ix + 1, iy, iz)),
                    (iy + 1 < ny).then(|| grid.cell_index(ix, iy + 1, iz)),
                    (iz + 1 < nz).then(|| grid.cell_index(ix, iy, iz + 1)),
                ]
                .into_iter()
                .flatten()
                {
                    triplets.push((i, j, -1.0));
                    triplets.push((j, i, -1.0));
                }
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &triplets).expect("stencil triplets are valid")
}

/// Coupled block system: every cell carries a pressure unknown plus
/// `n_concentrations` transported quantities.
///
/// The pressure-pressure block is exactly [`tpfa_pressure_matrix`]. The
/// remaining couplings scale with `coupling_strength`; at 0 the variables
/// decouple, and any value below 2 keeps every row strictly diagonally
/// dominant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockProblemSpec {
    pub grid: GridSpec,
    pub n_concentrations: usize,
    pub dt: f64,
    pub coupling_strength: f64,
    /// Extra mass added to transported-quantity diagonals.
    pub dominance_margin: f64,
    pub ordering: BlockOrdering,
}

impl BlockProblemSpec {
    pub fn block_size(&self) -> usize {
        1 + self.n_concentrations
    }

    pub fn layout(&self) -> Result<BlockLayout> {
        BlockLayout::new(self.grid.ncells(), self.block_size(), self.ordering)
    }

    fn validate(&self) -> Result<()> {
        if !(self.coupling_strength >= 0.0 && self.coupling_strength < 2.0) {
            return Err(Error::InvalidConfig(
                "coupling strength must lie in [0, 2) to keep rows diagonally dominant".into(),
            ));
        }
        if !(self.dominance_margin >= 0.0 && self.dominance_margin.is_finite()) {
            return Err(Error::InvalidConfig(
                "dominance margin must be nonnegative and finite".into(),
            ));
        }
        Ok(())
    }
}

/// Per-quantity coupling weights; all positive, fixed by the quantity index.
fn conc_weights(c: usize) -> (f64, f64) {
    let theta = 1.0 / (c + 1) as f64; // neighbor coupling within the quantity
    let eta = 0.5 / (c + 1) as f64; // coupling to pressure
    (theta, eta)
}

/// Assembles the coupled Jacobian and its layout.
///
/// Row structure (with `s = coupling_strength`, `acc` the accumulation term,
/// and `T` the face transmissibilities):
/// - pressure rows: the flux stencil plus `-s * w_c * acc` against each
///   same-cell quantity, with the `w_c` summing to 1/2;
/// - quantity rows: `-s * theta_c * T` against the same quantity in each
///   neighbor, `+s * eta_c * sum(T)` against the own-cell pressure,
///   `-s * eta_c * T` against neighbor pressures, and a diagonal that
///   dominates those terms by `acc + dominance_margin`.
pub fn block_jacobian(spec: &BlockProblemSpec) -> Result<(SparseMatrix, BlockLayout)> {
    spec.validate()?;
    let stencil = flux_stencil(&spec.grid, spec.dt)?;
    let layout = spec.layout()?;
    let ncells = spec.grid.ncells();
    let nc = spec.n_concentrations;
    let s = spec.coupling_strength;

    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();

    // Pressure block: identical arithmetic to the standalone pressure matrix.
    for cell in 0..ncells {
        triplets.push((
            layout.dof(cell, 0),
            layout.dof(cell, 0),
            stencil.accumulation[cell] + stencil.trans_sum[cell],
        ));
    }
    for f in &stencil.faces {
        triplets.push((layout.dof(f.lo, 0), layout.dof(f.hi, 0), -f.trans));
        triplets.push((layout.dof(f.hi, 0), layout.dof(f.lo, 0), -f.trans));
    }

    if nc > 0 {
        // Pressure rows against own-cell quantities: weights sum to 1/2.
        let weight_norm = (nc * (nc + 1)) as f64;
        for cell in 0..ncells {
            let p = layout.dof(cell, 0);
            for c in 0..nc {
                let w = (c + 1) as f64 / weight_norm;
                triplets.push((
                    p,
                    layout.dof(cell, c + 1),
                    -s * w * stencil.accumulation[cell],
                ));
            }
        }
        // Quantity rows.
        for c in 0..nc {
            let (theta, eta) = conc_weights(c);
            for cell in 0..ncells {
                let row = layout.dof(cell, c + 1);
                let diag = s * (theta + 2.0 * eta) * stencil.trans_sum[cell]
                    + stencil.accumulation[cell]
                    + spec.dominance_margin;
                triplets.push((row, row, diag));
                if s > 0.0 {
                    triplets.push((row, layout.dof(cell, 0), s * eta * stencil.trans_sum[cell]));
                }
            }
            if s > 0.0 {
                for f in &stencil.faces {
                    for (me, other) in [(f.lo, f.hi), (f.hi, f.lo)] {
                        let row = layout.dof(me, c + 1);
                        triplets.push((row, layout.dof(other, c + 1), -s * theta * f.trans));
                        triplets.push((row, layout.dof(other, 0), -s * eta * f.trans));
                    }
                }
            }
        }
    }

    let n = layout.nrows();
    Ok((SparseMatrix::from_triplets(n, n, &triplets)?, layout))
}

/// Smooth deterministic reference solution for a block spec: low-frequency
/// trigonometric fields, one phase-shifted copy per unknown.
pub fn manufactured_solution(spec: &BlockProblemSpec) -> Result<Vec<f64>> {
    let layout = spec.layout()?;
    let mut x = vec![0.0; layout.nrows()];
    for cell in 0..spec.grid.ncells() {
        let (ix, iy, iz) = spec.grid.cell_coords(cell);
        let (fx, fy, fz) = (ix as f64, iy as f64, iz as f64);
        x[layout.dof(cell, 0)] = 1.0 + (0.3 * fx + 0.2 * fy + 0.1 * fz).sin();
        for c in 0..spec.n_concentrations {
            let phase = (c + 1) as f64;
            x[layout.dof(cell, c + 1)] =
                0.5 + 0.25 * (0.17 * fx - 0.23 * fy + 0.29 * fz + phase).cos();
        }
    }
    Ok(x)
}

/// One linear system of a drifting sequence.
pub struct NewtonSystem {
    pub a: SparseMatrix,
    pub b: Vec<f64>,
    pub layout: BlockLayout,
}

/// A sequence of systems sharing one sparsity pattern, with entry values
/// drifting multiplicatively from step to step — the shape of consecutive
/// Newton systems in an implicit time stepper.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonSequenceSpec {
    pub base: BlockProblemSpec,
    pub steps: usize,
    /// Relative per-step perturbation bound: each value is scaled by
    /// `1 + drift * u` with `u` uniform in `[-1, 1]`.
    pub drift: f64,
    pub seed: u64,
}

/// Generates the sequence. Every step keeps the pattern of the base Jacobian;
/// right-hand sides are consistent with the step's own matrix and the
/// manufactured solution.
pub fn newton_sequence(spec: &NewtonSequenceSpec) -> Result<Vec<NewtonSystem>> {
    if !(spec.drift >= 0.0 && spec.drift.is_finite()) {
        return Err(Error::InvalidConfig(
            "drift must be nonnegative and finite".into(),
        ));
    }
    let (base, layout) = block_jacobian(&spec.base)?;
    let x_star = manufactured_solution(&spec.base)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut systems = Vec::with_capacity(spec.steps);
    let mut current = base;
    for step in 0..spec.steps {
        if step > 0 {
            let (_, _, values) = current.csr_parts();
            let perturbed: Vec<f64> = values
                .iter()
                .map(|v| {
                    let u: f64 = rng.gen_range(-1.0..=1.0);
                    v * (1.0 + spec.drift * u)
                })
                .collect();
            current = current.with_values(perturbed)?;
        }
        let b = current.spmv(&x_star)?;
        systems.push(NewtonSystem {
            a: current.clone(),
            b,
            layout,
        });
    }
    Ok(systems)
}

/// Sidecar metadata written next to exported systems.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemManifest {
    pub spec: BlockProblemSpec,
    pub steps: usize,
    pub drift: f64,
    pub seed: u64,
}

/// File set produced by [`export_sequence`].
pub struct ExportPaths {
    pub manifest: PathBuf,
    pub matrices: Vec<PathBuf>,
    pub rhs: Vec<PathBuf>,
}

/// Writes every system of a sequence under `dir` as Matrix Market files plus
/// plain-text right-hand sides, with a JSON manifest describing the source.
pub fn export_sequence(dir: &Path, stem: &str, spec: &NewtonSequenceSpec) -> Result<ExportPaths> {
    let systems = newton_sequence(spec)?;
    std::fs::create_dir_all(dir)?;
    let manifest_path = dir.join(format!("{stem}.manifest.json"));
    let manifest = ProblemManifest {
        spec: spec.base,
        steps: spec.steps,
        drift: spec.drift,
        seed: spec.seed,
    };
    let file = std::fs::File::create(&manifest_path)?;
    serde_json::to_writer_pretty(file, &manifest)
        .map_err(|e| Error::InvalidConfig(format!("manifest serialization failed: {e}")))?;

    let mut matrices = Vec::new();
    let mut rhs = Vec::new();
    for (i, sys) in systems.iter().enumerate() {
        let m_path = dir.join(format!("{stem}.step{i:03}.mtx"));
        let b_path = dir.join(format!("{stem}.step{i:03}.rhs.txt"));
        write_matrix_market_file(&sys.a, &m_path)?;
        write_vector_file(&sys.b, &b_path)?;
        matrices.push(m_path);
        rhs.push(b_path);
    }
    Ok(ExportPaths {
        manifest: manifest_path,
        matrices,
        rhs,
    })
}
