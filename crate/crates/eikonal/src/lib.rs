//! Solvers for the Eikonal equation `|∇u(x)| F(x) = 1` on the unit cube,
//! discretized with the first-order upwind scheme on a uniform grid of
//! `(n+1)³` points.
//!
//! All solvers share one local update ([`local_update::solve_local`]) and so
//! agree on the discrete solution to rounding; they differ in the order they
//! visit gridpoints and in how much of that order can run in parallel:
//!
//! - [`serial::solve_fmm`] — fast marching (Dijkstra-like, heap-ordered);
//! - [`serial::solve_fsm`] / [`serial::solve_lsm`] — fast sweeping and its
//!   gated ("locking") variant;
//! - [`heap_cell::solve_hcm`] — heap-cell method: marching over coarse cubic
//!   cells, sweeping inside them;
//! - [`parallel_heap_cell::solve_phcm`] — asynchronous multi-worker heap-cell
//!   method;
//! - [`parallel_sweep::solve_dfsm`] / [`parallel_sweep::solve_dlsm`] —
//!   sweeping with each diagonal plane relaxed concurrently.
//!
//! Values are generic over the floating-point scalar (see [`Scalar`]);
//! `f64` is the default choice for verification work and `f32` halves memory.

pub mod error;
pub mod grid;
pub mod heap_cell;
pub mod local_update;
pub mod parallel_heap_cell;
pub mod parallel_sweep;
pub mod scalar;
pub mod serial;
pub mod stats;

pub use error::ConfigError;
pub use grid::{build_problem, GridGeometry, Problem, ProblemParams, SolverState, SpeedModel};
pub use heap_cell::{solve_hcm, CellDecomposition, CellSolveOptions, CellValueHeuristic};
pub use local_update::{solve_local, upwind_residual, DirectionalMinima};
pub use parallel_heap_cell::solve_phcm;
pub use parallel_sweep::{solve_dfsm, solve_dlsm};
pub use scalar::Scalar;
pub use serial::{solve_fmm, solve_fsm, solve_lsm, SweepDirection};
pub use stats::{SolveOutput, SolveStats, WorkerStats};

/// [`Problem`] over `f64`.
pub type Problem64 = Problem<f64>;
/// [`Problem`] over `f32`.
pub type Problem32 = Problem<f32>;
/// [`SolveOutput`] over `f64`.
pub type SolveOutput64 = SolveOutput<f64>;
/// [`SolveOutput`] over `f32`.
pub type SolveOutput32 = SolveOutput<f32>;
