//! Heap-cell method: a two-scale solver that runs fast-marching logic on a
//! coarse grid of cubic cells and locking sweeps inside each cell.
//!
//! The gridpoint box is split into `J = (side/r)³` cells of `r³` gridpoints.
//! Cells carry a tentative value `V^c` and live in a min-heap keyed by it.
//! Popping the least cell, sweeping it to convergence, and pushing the cells
//! downwind of any cross-border improvement yields a causal cell ordering: on
//! a monotone front each cell is popped exactly once, and AvS (sweeps per
//! cell) stays small because incoming fronts mark which sweep orderings to
//! try first.

use std::sync::atomic::{AtomicU32, AtomicU8, Ordering};
use std::time::Instant;

use crate::error::ConfigError;
use crate::grid::{GridGeometry, Problem, SolverState};
use crate::local_update::{DownwindEntry, DownwindSet};
use crate::scalar::{cast, AtomicScalar, Scalar};
use crate::serial::{check_kappa, sweep_box, SweepDirection, SweepMode};
use crate::stats::{SolveOutput, SolveStats};

/// Partition of the gridpoint box into cubic cells of `width³` gridpoints.
///
/// `width` must divide the box side `n + 1`. Cells are themselves indexed
/// lexicographically, innermost axis fastest, like gridpoints.
#[derive(Clone, Copy, Debug)]
pub struct CellDecomposition {
    geom: GridGeometry,
    width: usize,
    per_side: usize,
}

impl CellDecomposition {
    pub fn new(geom: GridGeometry, width: usize) -> Result<Self, ConfigError> {
        let side = geom.side();
        if width == 0 || !side.is_multiple_of(width) {
            return Err(ConfigError::CellWidthMismatch { r: width, side });
        }
        Ok(CellDecomposition {
            geom,
            width,
            per_side: side / width,
        })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geom
    }

    /// Gridpoints per cell side, `r`.
    pub fn cell_width(&self) -> usize {
        self.width
    }

    pub fn cells_per_side(&self) -> usize {
        self.per_side
    }

    /// Total number of cells `J`.
    pub fn cell_count(&self) -> usize {
        self.per_side * self.per_side * self.per_side
    }

    /// Cell containing a gridpoint.
    pub fn cell_of(&self, point: usize) -> usize {
        let (i, j, k) = self.geom.grid_coords(point);
        self.cell_index(i / self.width, j / self.width, k / self.width)
    }

    pub fn cell_index(&self, ci: usize, cj: usize, ck: usize) -> usize {
        ci + self.per_side * (cj + self.per_side * ck)
    }

    pub fn cell_coords(&self, cell: usize) -> [usize; 3] {
        let ci = cell % self.per_side;
        let rest = cell / self.per_side;
        [ci, rest % self.per_side, rest / self.per_side]
    }

    /// Inclusive gridpoint corners `(lo, hi)` of a cell.
    pub fn cell_box(&self, cell: usize) -> ([usize; 3], [usize; 3]) {
        let c = self.cell_coords(cell);
        let lo = c.map(|x| x * self.width);
        let hi = lo.map(|x| x + self.width - 1);
        (lo, hi)
    }

    /// Direction `(axis, ascending)` from one cell to a face-adjacent one.
    pub fn adjacent_direction(&self, from: usize, to: usize) -> (usize, bool) {
        let a = self.cell_coords(from);
        let b = self.cell_coords(to);
        for axis in 0..3 {
            if a[axis] != b[axis] {
                debug_assert!(a[axis].abs_diff(b[axis]) == 1);
                debug_assert!((0..3).all(|o| o == axis || a[o] == b[o]));
                return (axis, b[axis] > a[axis]);
            }
        }
        panic!("cells {from} and {to} are not distinct");
    }
}

/// Sentinel for "not on any heap" in [`CellRecord::owner`].
pub(crate) const NO_HEAP: u32 = u32::MAX;

/// Shared per-cell bookkeeping.
///
/// Everything is atomic so the parallel solver can share records across
/// workers: `value` doubles as the heap key (read lock-free for advisory
/// comparisons), `preferred` is the sweep-direction hint mask, and
/// `owner`/`slot` say which heap holds the cell and where. The latter two are
/// only written while holding the owning heap's lock (trivially true in the
/// serial solver), so they are exact when observed under that lock and
/// advisory otherwise.
pub struct CellRecord<S: Scalar> {
    value: S::Atomic,
    preferred: AtomicU8,
    owner: AtomicU32,
    slot: AtomicU32,
}

impl<S: Scalar> CellRecord<S> {
    pub fn new() -> Self {
        CellRecord {
            value: S::Atomic::new(S::infinity()),
            preferred: AtomicU8::new(0),
            owner: AtomicU32::new(NO_HEAP),
            slot: AtomicU32::new(0),
        }
    }

    /// Current tentative cell value `V^c`.
    pub fn value(&self) -> S {
        self.value.load(Ordering::Relaxed)
    }

    pub(crate) fn store_value(&self, value: S) {
        self.value.store(value, Ordering::Relaxed);
    }

    /// Bitmask over canonical sweep-direction indices to try first.
    pub fn preferred_mask(&self) -> u8 {
        self.preferred.load(Ordering::Relaxed)
    }

    /// Replaces the hint mask: the latest tagging front wins. Accumulating
    /// masks instead would drive cells toward sweeping most directions and
    /// lose the point of the hint.
    pub(crate) fn set_preferred_mask(&self, mask: u8) {
        self.preferred.store(mask, Ordering::Relaxed);
    }

    pub(crate) fn clear_preferred(&self) {
        self.preferred.store(0, Ordering::Relaxed);
    }

    pub(crate) fn owner(&self) -> u32 {
        self.owner.load(Ordering::Relaxed)
    }

    pub fn on_heap(&self) -> bool {
        self.owner() != NO_HEAP
    }

    pub(crate) fn slot(&self) -> u32 {
        self.slot.load(Ordering::Relaxed)
    }
}

impl<S: Scalar> Default for CellRecord<S> {
    fn default() -> Self {
        Self::new()
    }
}

pub(crate) fn new_records<S: Scalar>(count: usize) -> Vec<CellRecord<S>> {
    (0..count).map(|_| CellRecord::new()).collect()
}

/// Merges exit values into the cell records and returns the cells holding at
/// least one exit, ascending.
pub(crate) fn seed_cells<S: Scalar>(
    problem: &Problem<S>,
    decomp: &CellDecomposition,
    records: &[CellRecord<S>],
) -> Vec<u32> {
    let mut seeds: Vec<u32> = Vec::new();
    for &(point, q) in problem.exits() {
        let cell = decomp.cell_of(point);
        if q < records[cell].value() {
            records[cell].store_value(q);
        }
        seeds.push(cell as u32);
    }
    seeds.sort_unstable();
    seeds.dedup();
    seeds
}

/// Binary min-heap of cell ids keyed by the cells' shared `value` fields.
///
/// The keys live in [`CellRecord`]s rather than in the heap, so a key can
/// decrease while the cell sits on the heap; callers must re-establish order
/// via [`CellHeap::sift_up_from`] after lowering a key. Each cell stores its
/// slot, making membership checks and mid-heap repairs O(1) to locate.
pub struct CellHeap {
    id: u32,
    items: Vec<u32>,
}

impl CellHeap {
    pub fn new(id: u32) -> Self {
        CellHeap {
            id,
            items: Vec::new(),
        }
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn peek(&self) -> Option<u32> {
        self.items.first().copied()
    }

    /// Cell stored at a heap slot, if the slot is in range.
    pub fn cell_at(&self, slot: usize) -> Option<u32> {
        self.items.get(slot).copied()
    }

    pub fn push<S: Scalar>(&mut self, records: &[CellRecord<S>], cell: u32) {
        debug_assert_eq!(records[cell as usize].owner(), NO_HEAP);
        let at = self.items.len();
        self.items.push(cell);
        records[cell as usize].owner.store(self.id, Ordering::Relaxed);
        records[cell as usize].slot.store(at as u32, Ordering::Relaxed);
        self.sift_up(records, at);
    }

    pub fn pop_min<S: Scalar>(&mut self, records: &[CellRecord<S>]) -> Option<u32> {
        let top = *self.items.first()?;
        let last = self.items.pop().unwrap();
        records[top as usize].owner.store(NO_HEAP, Ordering::Relaxed);
        if top != last {
            self.items[0] = last;
            records[last as usize].slot.store(0, Ordering::Relaxed);
            self.sift_down(records, 0);
        }
        Some(top)
    }

    /// Restores heap order after the key at `slot` decreased.
    pub fn sift_up_from<S: Scalar>(&mut self, records: &[CellRecord<S>], slot: usize) {
        debug_assert!(slot < self.items.len());
        self.sift_up(records, slot);
    }

    fn key<S: Scalar>(&self, records: &[CellRecord<S>], at: usize) -> S {
        records[self.items[at] as usize].value()
    }

    fn sift_up<S: Scalar>(&mut self, records: &[CellRecord<S>], mut at: usize) {
        while at > 0 {
            let parent = (at - 1) / 2;
            if self.key::<S>(records, at) >= self.key::<S>(records, parent) {
                break;
            }
            self.swap_slots(records, at, parent);
            at = parent;
        }
    }

    fn sift_down<S: Scalar>(&mut self, records: &[CellRecord<S>], mut at: usize) {
        loop {
            let mut least = at;
            for child in [2 * at + 1, 2 * at + 2] {
                if child < self.items.len()
                    && self.key::<S>(records, child) < self.key::<S>(records, least)
                {
                    least = child;
                }
            }
            if least == at {
                break;
            }
            self.swap_slots(records, at, least);
            at = least;
        }
    }

    fn swap_slots<S: Scalar>(&mut self, records: &[CellRecord<S>], a: usize, b: usize) {
        self.items.swap(a, b);
        records[self.items[a] as usize]
            .slot
            .store(a as u32, Ordering::Relaxed);
        records[self.items[b] as usize]
            .slot
            .store(b as u32, Ordering::Relaxed);
    }

    #[cfg(test)]
    fn assert_consistent<S: Scalar>(&self, records: &[CellRecord<S>]) {
        for (at, &cell) in self.items.iter().enumerate() {
            assert_eq!(records[cell as usize].owner(), self.id);
            assert_eq!(records[cell as usize].slot(), at as u32);
            if at > 0 {
                let parent = (at - 1) / 2;
                assert!(
                    self.key::<S>(records, parent) <= self.key::<S>(records, at),
                    "heap order violated between slots {parent} and {at}"
                );
            }
        }
    }
}

/// How a popped cell's heap key is formed from incoming front values.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellValueHeuristic {
    /// Key = least value yet written on the cell's inflow border; reset to
    /// `+∞` when the cell is popped so later fronts re-key it from scratch.
    MinInflow,
    /// Key = largest inflow value plus a half-cell travel-time estimate
    /// `(h^c + h) / (2 F(y_B))` probed just inside the receiving cell; never
    /// reset, so a popped cell keeps its old key until re-tagged.
    Legacy,
}

/// Tuning for the heap-cell solvers.
#[derive(Clone, Copy, Debug)]
pub struct CellSolveOptions<S> {
    /// Gridpoints per cell side, `r`; must divide `n + 1`.
    pub cell_width: usize,
    /// Per-sweep convergence threshold inside a cell (0 = exact).
    pub kappa: S,
    pub heuristic: CellValueHeuristic,
}

impl<S: Scalar> CellSolveOptions<S> {
    pub fn new(cell_width: usize) -> Self {
        CellSolveOptions {
            cell_width,
            kappa: S::zero(),
            heuristic: CellValueHeuristic::MinInflow,
        }
    }
}

/// Mask of the 4 canonical sweep directions whose sign along `axis` matches
/// travel into a cell entered through that face.
pub fn preferred_mask_for(axis: usize, ascending: bool) -> u8 {
    let mut mask = 0u8;
    for d in 0..SweepDirection::COUNT {
        if SweepDirection::canonical(d).is_positive(axis) == ascending {
            mask |= 1 << d;
        }
    }
    mask
}

/// Half-cell travel-time key used by [`CellValueHeuristic::Legacy`]:
/// `max_inflow + (cell_width + spacing) / (2 · speed_at_probe)`.
pub fn legacy_cell_value<S: Scalar>(
    max_inflow: S,
    cell_width: S,
    spacing: S,
    speed_at_probe: S,
) -> S {
    max_inflow + (cell_width + spacing) * cast::<S>(0.5) / speed_at_probe
}

/// Probe position for the legacy key: the center of the face shared with the
/// tagging cell, displaced `(h^c + h)/2` into the receiving cell.
fn legacy_probe_point(
    decomp: &CellDecomposition,
    from: usize,
    axis: usize,
    ascending: bool,
) -> [f64; 3] {
    let h = 1.0 / decomp.geom.n() as f64;
    let r = decomp.width as f64;
    let c = decomp.cell_coords(from);
    let mut p = [0.0f64; 3];
    for a in 0..3 {
        // Center of the cell's gridpoint span along a transverse axis.
        p[a] = ((c[a] as f64 + 0.5) * r - 0.5) * h;
    }
    let face = if ascending {
        (c[axis] as f64 + 1.0) * r - 0.5
    } else {
        c[axis] as f64 * r - 0.5
    };
    let step = (r + 1.0) / 2.0;
    p[axis] = (if ascending { face + step } else { face - step }) * h;
    p
}

/// Heap key proposed for `entry.cell` after processing `from`.
pub fn cell_value_candidate<S: Scalar>(
    heuristic: CellValueHeuristic,
    problem: &Problem<S>,
    decomp: &CellDecomposition,
    from: usize,
    entry: &DownwindEntry<S>,
) -> S {
    match heuristic {
        CellValueHeuristic::MinInflow => entry.min_inflow,
        CellValueHeuristic::Legacy => {
            let (axis, ascending) = decomp.adjacent_direction(from, entry.cell);
            let probe = legacy_probe_point(decomp, from, axis, ascending);
            let speed = problem.speed_model().speed(probe.map(cast::<S>));
            let h = decomp.geom.spacing::<S>();
            let width = cast::<S>(decomp.width as f64) * h;
            legacy_cell_value(entry.max_inflow, width, h, speed)
        }
    }
}

/// Counters from one cell processing.
#[derive(Clone, Copy, Debug, Default)]
pub struct CellProcessOutcome {
    pub sweeps: u64,
    pub recomputed: u64,
    pub changed: u64,
    /// Whether some preferred-direction sweep already met the threshold, so
    /// the full direction cycle never started.
    pub converged_in_preferred: bool,
}

/// Sweeps one cell to convergence: first the preferred directions in
/// canonical order, then — if none of their passes met the threshold — the
/// full canonical cycle from the start, checking after every pass. Cross-cell
/// improvements are recorded in `downwind`. Clears the cell's hint mask.
pub fn process_cell<S: Scalar>(
    state: &SolverState<S>,
    problem: &Problem<S>,
    decomp: &CellDecomposition,
    records: &[CellRecord<S>],
    cell: usize,
    kappa: S,
    downwind: &mut DownwindSet<S>,
) -> CellProcessOutcome {
    let (lo, hi) = decomp.cell_box(cell);
    let mask = records[cell].preferred_mask();
    let mut out = CellProcessOutcome::default();
    let mut sweep = |d: usize, out: &mut CellProcessOutcome| {
        let pass = sweep_box(
            state,
            problem,
            SweepDirection::canonical(d),
            lo,
            hi,
            SweepMode::GatedWithCells(decomp, downwind),
        );
        out.sweeps += 1;
        out.recomputed += pass.recomputed;
        out.changed += pass.changed;
        pass.max_change <= kappa
    };
    let mut converged = false;
    for d in 0..SweepDirection::COUNT {
        if mask & (1 << d) != 0 && sweep(d, &mut out) {
            converged = true;
            break;
        }
    }
    out.converged_in_preferred = converged;
    if !converged {
        'cycle: loop {
            for d in 0..SweepDirection::COUNT {
                if sweep(d, &mut out) {
                    break 'cycle;
                }
            }
        }
    }
    records[cell].clear_preferred();
    out
}

/// Heap-cell method, serial.
pub fn solve_hcm<S: Scalar>(
    problem: &Problem<S>,
    options: &CellSolveOptions<S>,
) -> Result<SolveOutput<S>, ConfigError> {
    check_kappa(options.kappa)?;
    let decomp = CellDecomposition::new(*problem.geometry(), options.cell_width)?;
    let records = new_records::<S>(decomp.cell_count());
    let state = SolverState::new(problem);
    state.activate_exit_neighbors(problem);

    let mut heap = CellHeap::new(0);
    for cell in seed_cells(problem, &decomp, &records) {
        heap.push(&records, cell);
    }

    let mut stats = SolveStats {
        workers: 1,
        cells: decomp.cell_count() as u64,
        ..SolveStats::default()
    };
    let mut downwind = DownwindSet::new();
    let start = Instant::now();
    while let Some(cell) = heap.pop_min(&records) {
        let cell = cell as usize;
        stats.heap_removals += 1;
        if options.heuristic == CellValueHeuristic::MinInflow {
            records[cell].store_value(S::infinity());
        }
        downwind.clear();
        let cell_start = Instant::now();
        let out = process_cell(
            &state,
            problem,
            &decomp,
            &records,
            cell,
            options.kappa,
            &mut downwind,
        );
        stats.in_cell_seconds += cell_start.elapsed().as_secs_f64();
        stats.sweeps += out.sweeps;
        stats.gridpoint_updates += out.recomputed;
        stats.value_changes += out.changed;
        for entry in downwind.iter() {
            let candidate = cell_value_candidate(options.heuristic, problem, &decomp, cell, entry);
            let record = &records[entry.cell];
            if candidate < record.value() {
                record.store_value(candidate);
                if record.on_heap() {
                    heap.sift_up_from(&records, record.slot() as usize);
                }
            }
            // A fresh inflow means the cell must be reprocessed even when the
            // candidate did not lower its key.
            if !record.on_heap() {
                heap.push(&records, entry.cell as u32);
                stats.cell_inserts += 1;
            }
            let (axis, ascending) = decomp.adjacent_direction(cell, entry.cell);
            record.set_preferred_mask(preferred_mask_for(axis, ascending));
        }
    }
    stats.wall_seconds = start.elapsed().as_secs_f64();
    Ok(SolveOutput {
        values: state.values(),
        stats,
    })
}
