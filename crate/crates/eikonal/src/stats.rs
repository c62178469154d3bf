//! Work counters reported by every solver.

/// Counters for one worker of a parallel solve (or the single worker of a
/// serial one).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WorkerStats {
    /// Cells removed from a heap by this worker.
    pub heap_removals: u64,
    /// Directional cell-sweeps performed inside `process_cell`.
    pub cell_sweeps: u64,
    /// Gridpoint updates that recomputed a value.
    pub gridpoint_updates: u64,
    /// Updates that lowered a value.
    pub value_changes: u64,
    /// Cells inserted onto a heap by this worker (excludes the initial seeds).
    pub cell_inserts: u64,
    /// Seconds spent inside `process_cell`, i.e. doing sweep work rather than
    /// heap maintenance or spinning.
    pub in_cell_seconds: f64,
}

impl WorkerStats {
    pub fn absorb(&mut self, other: &WorkerStats) {
        self.heap_removals += other.heap_removals;
        self.cell_sweeps += other.cell_sweeps;
        self.gridpoint_updates += other.gridpoint_updates;
        self.value_changes += other.value_changes;
        self.cell_inserts += other.cell_inserts;
        self.in_cell_seconds += other.in_cell_seconds;
    }
}

/// Aggregate counters and timing for one solve.
///
/// Fields that do not apply to a method stay at their default and the helper
/// accessors return `None` for them: sweep methods have no heap removals,
/// the fast marching method performs no sweeps, and only the cell-based
/// methods have `cells`/`avs`/`overhead_fraction`.
#[derive(Clone, Debug, Default)]
pub struct SolveStats {
    /// Wall-clock seconds around the solve loop (state initialization and
    /// problem construction excluded).
    pub wall_seconds: f64,
    /// Full-grid sweeps for the sweeping methods; total cell-sweeps for the
    /// cell methods; 0 for fast marching.
    pub sweeps: u64,
    /// Gridpoint updates that recomputed a value.
    pub gridpoint_updates: u64,
    /// Updates that lowered a value.
    pub value_changes: u64,
    /// Heap removals: accepted gridpoints for fast marching, cell pops for
    /// the cell methods.
    pub heap_removals: u64,
    /// Number of cells J in the decomposition (cell methods only).
    pub cells: u64,
    /// Seconds spent inside `process_cell`, summed over workers.
    pub in_cell_seconds: f64,
    /// Worker count P (1 for the serial methods).
    pub workers: u64,
    /// Heap insertions beyond the initial seeds (cell methods).
    pub cell_inserts: u64,
    /// Per-worker breakdown (parallel heap-cell method only).
    pub per_worker: Vec<WorkerStats>,
}

impl SolveStats {
    /// Average number of directional sweeps per cell, `AvS = sweeps / J`.
    pub fn avs(&self) -> Option<f64> {
        (self.cells > 0).then(|| self.sweeps as f64 / self.cells as f64)
    }

    /// Fraction of total worker time spent outside `process_cell`:
    /// `1 - in_cell_seconds / (wall_seconds * workers)`.
    pub fn overhead_fraction(&self) -> Option<f64> {
        if self.cells == 0 || self.wall_seconds <= 0.0 || self.workers == 0 {
            return None;
        }
        Some(1.0 - self.in_cell_seconds / (self.wall_seconds * self.workers as f64))
    }
}

/// A solver's result: the gridpoint values plus the work counters.
#[derive(Clone, Debug)]
pub struct SolveOutput<S> {
    /// Final value at every gridpoint, in linear-index order.
    pub values: Vec<S>,
    pub stats: SolveStats,
}
