// Indexed loops are kept where they mirror the subscripted arithmetic they
// implement (triangular solves, stencil assembly); iterator rewrites would
// obscure the math.
#![allow(clippy::needless_range_loop)]

//! Multi-stage preconditioned Krylov solvers for block-structured sparse systems.
//!
//! The crate is organized bottom-up:
//!
//! * [`sparse`] — CSR storage, permutations, Matrix Market I/O, dense LU fallback,
//!   and block layout descriptions for systems with several unknowns per cell.
//! * [`coloring`] — adjacency-graph construction and greedy multi-coloring that
//!   partitions rows into mutually independent groups.
//! * [`smoothers`] — pointwise Jacobi / Gauss-Seidel sweeps, a parallel multi-color
//!   Gauss-Seidel sweep, and block-granular ILU(0) / block Gauss-Seidel.
//! * [`amg`] — unsmoothed pairwise-aggregation algebraic multigrid with Galerkin
//!   coarsening and V-cycle application.
//! * [`msp`] — a three-stage multiplicative preconditioner (block relaxation on the
//!   non-pressure unknowns, AMG on the pressure sub-system, global block ILU(0))
//!   plus a driver that reuses the setup across a sequence of similar systems.
//! * [`krylov`] — right-preconditioned restarted GMRES.
//! * [`problems`] — two-point flux pressure matrices, synthetic multi-unknown
//!   Jacobians with manufactured right-hand sides, and drifting matrix sequences
//!   that emulate successive linearizations.
//!
//! Parallel sections are written so results are bit-identical for every thread
//! count; see [`parallel`] for how thread pools are selected.

pub mod amg;
pub mod coloring;
pub mod error;
pub mod krylov;
pub mod msp;
pub mod parallel;
pub mod problems;
pub mod smoothers;
pub mod sparse;

pub use error::{Error, Result};
pub use sparse::{BlockLayout, BlockOrdering, DenseFactorization, SparseMatrix};
