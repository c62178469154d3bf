//! Asynchronous parallel heap-cell method.
//!
//! Each worker owns one cell heap and loops: pop the least cell of its own
//! heap, sweep that cell to convergence, then merge keys and insert heap
//! entries for the cells its improvements flowed into. There is no global
//! ordering and no barrier; workers interleave freely and the method relies
//! on two facts for correctness:
//!
//! - gridpoint values only decrease (each gridpoint is written only while
//!   its cell's compute lock is held, and cross-cell readers may see stale
//!   values without harm — at worst they recompute);
//! - a cross-border improvement always re-inserts the receiving cell, so any
//!   update missed because of staleness is redone when that cell is popped
//!   again.
//!
//! Locking discipline: each cell has a *position* mutex (guards its
//! heap-membership fields) and a *compute* mutex (guards its gridpoints
//! during sweeping); each heap has its own mutex. `owner`/`slot` of a cell
//! change only while holding both the affected heap's mutex and the cell's
//! position mutex, so either lock alone makes them stable to read. Heap
//! mutexes are always acquired before position mutexes and never the other
//! way around, which rules out lock cycles.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, MutexGuard};
use std::time::Instant;

use crate::error::ConfigError;
use crate::grid::{Problem, SolverState};
use crate::heap_cell::{
    cell_value_candidate, new_records, preferred_mask_for, process_cell, seed_cells,
    CellDecomposition, CellHeap, CellRecord, CellSolveOptions, CellValueHeuristic, NO_HEAP,
};
use crate::local_update::DownwindSet;
use crate::scalar::Scalar;
use crate::serial::check_kappa;
use crate::stats::{SolveOutput, SolveStats, WorkerStats};

/// Cell pool shared by all workers.
struct SharedCells<S: Scalar> {
    records: Vec<CellRecord<S>>,
    /// Guards each cell's `owner`/`slot` (together with the heap mutexes)
    /// and serializes off-heap key merges against the pop-time key reset.
    position: Vec<Mutex<()>>,
    /// Held while a cell's gridpoints are being swept, so a cell re-popped
    /// by another worker waits instead of racing on the same points.
    compute: Vec<Mutex<()>>,
    heaps: Vec<Mutex<CellHeap>>,
    /// Approximate heap sizes, read without locking to pick insertion
    /// targets; only balance depends on them.
    sizes: Vec<AtomicUsize>,
    /// Cells inserted but not yet fully processed (the insert increments,
    /// the worker decrements after finishing the downwind hand-off). Zero
    /// means no cell is on any heap and no worker can produce one: done.
    active: AtomicUsize,
}

impl<S: Scalar> SharedCells<S> {
    fn new(cells: usize, workers: usize) -> Self {
        SharedCells {
            records: new_records(cells),
            position: (0..cells).map(|_| Mutex::new(())).collect(),
            compute: (0..cells).map(|_| Mutex::new(())).collect(),
            heaps: (0..workers)
                .map(|t| Mutex::new(CellHeap::new(t as u32)))
                .collect(),
            sizes: (0..workers).map(|_| AtomicUsize::new(0)).collect(),
            active: AtomicUsize::new(0),
        }
    }

    /// Merges `candidate` into a cell's key: `V^c ← min(V^c, candidate)`,
    /// repairing heap order when the cell sits on a heap. Retries until the
    /// cell's membership is stable under the locks this path needs.
    fn merge_key(&self, cell: usize, candidate: S) {
        if candidate >= self.records[cell].value() {
            return; // advisory reject; a concurrent reset re-checks below
        }
        loop {
            let owner = self.records[cell].owner();
            if owner == NO_HEAP {
                let _pos = self.position[cell].lock().unwrap();
                if self.records[cell].owner() != NO_HEAP {
                    continue; // inserted before we got the lock
                }
                if candidate < self.records[cell].value() {
                    self.records[cell].store_value(candidate);
                }
                return;
            }
            let mut heap = self.heaps[owner as usize].lock().unwrap();
            if self.records[cell].owner() != owner {
                continue; // popped or migrated before we got the lock
            }
            if candidate < self.records[cell].value() {
                self.records[cell].store_value(candidate);
                heap.sift_up_from(&self.records, self.records[cell].slot() as usize);
            }
            return;
        }
    }

    /// Puts a cell on the least-loaded heap unless it is already on one.
    /// Returns whether an insert happened.
    fn add_cell(&self, cell: usize) -> bool {
        if self.records[cell].owner() != NO_HEAP {
            return false; // advisory; the exact check happens under locks
        }
        let workers = self.heaps.len();
        let mut target = 0;
        let mut smallest = usize::MAX;
        for (j, size) in self.sizes.iter().enumerate() {
            let s = size.load(Ordering::Relaxed);
            if s < smallest {
                smallest = s;
                target = j;
            }
        }
        // Any heap is a valid home; take the first one that yields rather
        // than queue up behind a busy target.
        let mut locked: Option<(usize, MutexGuard<'_, CellHeap>)> = None;
        for attempt in 0..workers {
            let j = (target + attempt) % workers;
            if let Ok(guard) = self.heaps[j].try_lock() {
                locked = Some((j, guard));
                break;
            }
        }
        let (j, mut heap) = locked.unwrap_or_else(|| (target, self.heaps[target].lock().unwrap()));
        let _pos = self.position[cell].lock().unwrap();
        if self.records[cell].owner() != NO_HEAP {
            return false;
        }
        self.active.fetch_add(1, Ordering::SeqCst);
        heap.push(&self.records, cell as u32);
        self.sizes[j].fetch_add(1, Ordering::Relaxed);
        true
    }

    /// Pops the least cell of heap `t`, resetting its key for the restart
    /// heuristic. The position lock serializes the reset against off-heap
    /// merges, so no merge lands between the pop and the reset.
    fn pop_own(&self, t: usize, reset_key: bool) -> Option<usize> {
        let mut heap = self.heaps[t].lock().unwrap();
        let top = heap.peek()? as usize;
        let _pos = self.position[top].lock().unwrap();
        let popped = heap.pop_min(&self.records);
        debug_assert_eq!(popped, Some(top as u32));
        self.sizes[t].fetch_sub(1, Ordering::Relaxed);
        if reset_key {
            self.records[top].store_value(S::infinity());
        }
        Some(top)
    }
}

fn worker_loop<S: Scalar>(
    state: &SolverState<S>,
    problem: &Problem<S>,
    decomp: &CellDecomposition,
    options: &CellSolveOptions<S>,
    shared: &SharedCells<S>,
    t: usize,
) -> WorkerStats {
    let mut stats = WorkerStats::default();
    let mut downwind = DownwindSet::new();
    let reset_key = options.heuristic == CellValueHeuristic::MinInflow;
    loop {
        if shared.active.load(Ordering::SeqCst) == 0 {
            break;
        }
        let Some(cell) = shared.pop_own(t, reset_key) else {
            // Own heap empty but others still work; their hand-offs may
            // yet land here.
            std::thread::yield_now();
            continue;
        };
        stats.heap_removals += 1;
        downwind.clear();
        let cell_start = Instant::now();
        let out = {
            let _compute = shared.compute[cell].lock().unwrap();
            process_cell(
                state,
                problem,
                decomp,
                &shared.records,
                cell,
                options.kappa,
                &mut downwind,
            )
        };
        stats.in_cell_seconds += cell_start.elapsed().as_secs_f64();
        stats.cell_sweeps += out.sweeps;
        stats.gridpoint_updates += out.recomputed;
        stats.value_changes += out.changed;
        for entry in downwind.iter() {
            let candidate = cell_value_candidate(options.heuristic, problem, decomp, cell, entry);
            shared.merge_key(entry.cell, candidate);
            if shared.add_cell(entry.cell) {
                stats.cell_inserts += 1;
            }
            let (axis, ascending) = decomp.adjacent_direction(cell, entry.cell);
            shared.records[entry.cell].set_preferred_mask(preferred_mask_for(axis, ascending));
        }
        // Only now may the pool count this cell as done; decrementing before
        // the hand-off could let every other worker observe zero and exit
        // while inserts are still pending.
        shared.active.fetch_sub(1, Ordering::SeqCst);
    }
    stats
}

/// Heap-cell method over `workers` asynchronous workers. With one worker the
/// schedule, counters and values coincide bitwise with
/// [`crate::heap_cell::solve_hcm`].
pub fn solve_phcm<S: Scalar>(
    problem: &Problem<S>,
    options: &CellSolveOptions<S>,
    workers: usize,
) -> Result<SolveOutput<S>, ConfigError> {
    check_kappa(options.kappa)?;
    if workers == 0 {
        return Err(ConfigError::NoWorkers);
    }
    let decomp = CellDecomposition::new(*problem.geometry(), options.cell_width)?;
    let shared = SharedCells::<S>::new(decomp.cell_count(), workers);
    let state = SolverState::new(problem);
    state.activate_exit_neighbors(problem);

    let seeds = seed_cells(problem, &decomp, &shared.records);
    shared.active.store(seeds.len(), Ordering::SeqCst);
    for (i, &cell) in seeds.iter().enumerate() {
        let t = i % workers;
        shared.heaps[t].lock().unwrap().push(&shared.records, cell);
        shared.sizes[t].fetch_add(1, Ordering::Relaxed);
    }

    let start = Instant::now();
    let per_worker: Vec<WorkerStats> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|t| {
                let state = &state;
                let shared = &shared;
                let decomp = &decomp;
                scope.spawn(move || worker_loop(state, problem, decomp, options, shared, t))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let wall_seconds = start.elapsed().as_secs_f64();

    debug_assert_eq!(shared.active.load(Ordering::SeqCst), 0);
    debug_assert!(shared.heaps.iter().all(|h| h.lock().unwrap().is_empty()));

    let mut stats = SolveStats {
        wall_seconds,
        cells: decomp.cell_count() as u64,
        workers: workers as u64,
        per_worker: per_worker.clone(),
        ..SolveStats::default()
    };
    for w in &per_worker {
        stats.sweeps += w.cell_sweeps;
        stats.gridpoint_updates += w.gridpoint_updates;
        stats.value_changes += w.value_changes;
        stats.heap_removals += w.heap_removals;
        stats.cell_inserts += w.cell_inserts;
        stats.in_cell_seconds += w.in_cell_seconds;
    }
    Ok(SolveOutput {
        values: state.values(),
        stats,
    })
}
