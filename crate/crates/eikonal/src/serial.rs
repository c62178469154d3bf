//! Serial reference solvers: fast sweeping, locking sweeping, fast marching.
//!
//! All three share [`solve_local`] through the update functions, so their
//! final gridpoint values agree to rounding; what differs is the visit
//! schedule and therefore the work counters.

use std::time::Instant;

use crate::error::ConfigError;
use crate::grid::{Problem, SolverState};
use crate::heap_cell::CellDecomposition;
use crate::local_update::{relax_gridpoint, update_gridpoint, DownwindSet};
use crate::scalar::Scalar;
use crate::stats::{SolveOutput, SolveStats};

/// One of the 8 sweep orderings, identified by its sign triple
/// `(s_i, s_j, s_k) ∈ {-1,+1}³`.
///
/// The canonical enumeration is lexicographic with `-1` before `+1`:
/// index 0 is `(-,-,-)`, index 7 is `(+,+,+)`. Solvers that cycle through
/// directions always use this order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SweepDirection(u8);

impl SweepDirection {
    pub const COUNT: usize = 8;

    #[inline]
    pub fn canonical(index: usize) -> Self {
        assert!(index < Self::COUNT);
        SweepDirection(index as u8)
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Whether the sweep ascends along `axis` (0 = i, 1 = j, 2 = k).
    #[inline]
    pub fn is_positive(self, axis: usize) -> bool {
        self.0 & (4 >> axis) != 0
    }

    /// Sign triple as `±1` values.
    #[inline]
    pub fn signs(self) -> [i8; 3] {
        [0, 1, 2].map(|a| if self.is_positive(a) { 1 } else { -1 })
    }

    pub fn all() -> impl Iterator<Item = SweepDirection> {
        (0..Self::COUNT).map(SweepDirection::canonical)
    }
}

/// Counters from one directional pass.
#[derive(Clone, Copy, Debug)]
pub struct SweepOutcome<S> {
    /// Largest single-point decrease seen in the pass (`+∞` when a point
    /// left `+∞`, zero when nothing moved).
    pub max_change: S,
    /// Gridpoint updates that recomputed a value.
    pub recomputed: u64,
    /// Updates that lowered a value.
    pub changed: u64,
}

/// How a sweep treats each visited gridpoint.
pub enum SweepMode<'a, S> {
    /// Unconditional recompute (fast sweeping).
    Plain,
    /// Skip-inactive gated update (locking sweeping).
    Gated,
    /// Gated update that also tags downwind cells (heap-cell processing).
    GatedWithCells(&'a CellDecomposition, &'a mut DownwindSet<S>),
}

/// One directional Gauss–Seidel pass over the gridpoint box `lo..=hi`
/// (inclusive corners), visiting `k` outermost and `i` innermost, each axis
/// ascending or descending per `direction`.
pub fn sweep_box<S: Scalar>(
    state: &SolverState<S>,
    problem: &Problem<S>,
    direction: SweepDirection,
    lo: [usize; 3],
    hi: [usize; 3],
    mut mode: SweepMode<'_, S>,
) -> SweepOutcome<S> {
    let geom = problem.geometry();
    let mut out = SweepOutcome {
        max_change: S::zero(),
        recomputed: 0,
        changed: 0,
    };
    let len = [0, 1, 2].map(|a| hi[a] - lo[a] + 1);
    let pick = |axis: usize, t: usize| {
        if direction.is_positive(axis) {
            lo[axis] + t
        } else {
            hi[axis] - t
        }
    };
    for tz in 0..len[2] {
        let k = pick(2, tz);
        for ty in 0..len[1] {
            let j = pick(1, ty);
            for tx in 0..len[0] {
                let i = pick(0, tx);
                let idx = geom.linear_index(i, j, k);
                let res = match &mut mode {
                    SweepMode::Plain => relax_gridpoint(state, problem, idx),
                    SweepMode::Gated => update_gridpoint(state, problem, idx, None),
                    SweepMode::GatedWithCells(decomp, dn) => {
                        update_gridpoint(state, problem, idx, Some((*decomp, &mut **dn)))
                    }
                };
                if res.recomputed {
                    out.recomputed += 1;
                    if res.decrease > S::zero() {
                        out.changed += 1;
                        if res.decrease > out.max_change {
                            out.max_change = res.decrease;
                        }
                    }
                }
            }
        }
    }
    out
}

/// One full-grid directional pass.
pub fn sweep_once<S: Scalar>(
    state: &SolverState<S>,
    problem: &Problem<S>,
    direction: SweepDirection,
    gated: bool,
) -> SweepOutcome<S> {
    let n = problem.geometry().n();
    let mode = if gated {
        SweepMode::Gated
    } else {
        SweepMode::Plain
    };
    sweep_box(state, problem, direction, [0, 0, 0], [n, n, n], mode)
}

pub(crate) fn check_kappa<S: Scalar>(kappa: S) -> Result<(), ConfigError> {
    if kappa >= S::zero() && kappa.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::InvalidKappa(
            kappa.to_f64().unwrap_or(f64::NAN),
        ))
    }
}

fn solve_by_sweeping<S: Scalar>(
    problem: &Problem<S>,
    kappa: S,
    gated: bool,
) -> Result<SolveOutput<S>, ConfigError> {
    check_kappa(kappa)?;
    let state = SolverState::new(problem);
    if gated {
        state.activate_exit_neighbors(problem);
    }
    let mut stats = SolveStats {
        workers: 1,
        ..SolveStats::default()
    };
    let start = Instant::now();
    let mut d = 0;
    loop {
        let out = sweep_once(&state, problem, SweepDirection::canonical(d), gated);
        stats.sweeps += 1;
        stats.gridpoint_updates += out.recomputed;
        stats.value_changes += out.changed;
        // The pass that detects convergence is counted: the solver cannot
        // know it is converged without paying for that sweep.
        if out.max_change <= kappa {
            break;
        }
        d = (d + 1) % SweepDirection::COUNT;
    }
    stats.wall_seconds = start.elapsed().as_secs_f64();
    Ok(SolveOutput {
        values: state.values(),
        stats,
    })
}

/// Fast sweeping: unconditional Gauss–Seidel passes cycling through the 8
/// canonical orderings until a full pass changes no value by more than
/// `kappa`.
pub fn solve_fsm<S: Scalar>(problem: &Problem<S>, kappa: S) -> Result<SolveOutput<S>, ConfigError> {
    solve_by_sweeping(problem, kappa, false)
}

/// Locking sweeping: like [`solve_fsm`] but each pass recomputes only
/// gridpoints whose active flag is set (a neighbor changed since the last
/// visit). Produces the same values and sweep count as fast sweeping at
/// `kappa = 0`, with far fewer recomputations.
pub fn solve_lsm<S: Scalar>(problem: &Problem<S>, kappa: S) -> Result<SolveOutput<S>, ConfigError> {
    solve_by_sweeping(problem, kappa, true)
}

/// Binary min-heap over gridpoints with position tracking, so a key decrease
/// re-sorts in place instead of inserting duplicates.
struct PointHeap<S> {
    items: Vec<(u32, S)>,
    /// slot of each gridpoint in `items`, `ABSENT` when not enqueued.
    pos: Vec<u32>,
}

const ABSENT: u32 = u32::MAX;

impl<S: Scalar> PointHeap<S> {
    fn new(total: usize) -> Self {
        PointHeap {
            items: Vec::new(),
            pos: vec![ABSENT; total],
        }
    }

    /// Inserts `point` or lowers its key; a raise request is ignored (keys
    /// only ever decrease in Dijkstra-like use).
    fn push_or_decrease(&mut self, point: usize, key: S) {
        let slot = self.pos[point];
        if slot == ABSENT {
            self.items.push((point as u32, key));
            let at = self.items.len() - 1;
            self.pos[point] = at as u32;
            self.sift_up(at);
        } else if key < self.items[slot as usize].1 {
            self.items[slot as usize].1 = key;
            self.sift_up(slot as usize);
        }
    }

    fn pop(&mut self) -> Option<(usize, S)> {
        if self.items.is_empty() {
            return None;
        }
        let (point, key) = self.items.swap_remove(0);
        self.pos[point as usize] = ABSENT;
        if !self.items.is_empty() {
            self.pos[self.items[0].0 as usize] = 0;
            self.sift_down(0);
        }
        Some((point as usize, key))
    }

    fn sift_up(&mut self, mut at: usize) {
        while at > 0 {
            let parent = (at - 1) / 2;
            if self.items[at].1 >= self.items[parent].1 {
                break;
            }
            self.swap_slots(at, parent);
            at = parent;
        }
    }

    fn sift_down(&mut self, mut at: usize) {
        loop {
            let mut smallest = at;
            for child in [2 * at + 1, 2 * at + 2] {
                if child < self.items.len() && self.items[child].1 < self.items[smallest].1 {
                    smallest = child;
                }
            }
            if smallest == at {
                break;
            }
            self.swap_slots(at, smallest);
            at = smallest;
        }
    }

    fn swap_slots(&mut self, a: usize, b: usize) {
        self.items.swap(a, b);
        self.pos[self.items[a].0 as usize] = a as u32;
        self.pos[self.items[b].0 as usize] = b as u32;
    }
}

/// Fast marching: Dijkstra-like single pass.
///
/// Exit gridpoints are pre-accepted; every other point is accepted exactly
/// once, in non-decreasing value order, and its neighbors re-solved on each
/// acceptance. `sweeps` stays 0; `heap_removals` counts acceptances.
pub fn solve_fmm<S: Scalar>(problem: &Problem<S>) -> Result<SolveOutput<S>, ConfigError> {
    let geom = problem.geometry();
    let state = SolverState::new(problem);
    let mut accepted = vec![false; geom.total()];
    for &(idx, _) in problem.exits() {
        accepted[idx] = true;
    }
    let mut heap = PointHeap::new(geom.total());
    let mut stats = SolveStats {
        workers: 1,
        ..SolveStats::default()
    };
    let start = Instant::now();

    let consider = |point: usize, heap: &mut PointHeap<S>, stats: &mut SolveStats| {
        let res = relax_gridpoint(&state, problem, point);
        stats.gridpoint_updates += 1;
        if res.decrease > S::zero() {
            stats.value_changes += 1;
            heap.push_or_decrease(point, state.value(point));
        }
    };

    for &(exit, _) in problem.exits() {
        for nb in geom.neighbors(exit).iter() {
            if !accepted[nb] {
                consider(nb, &mut heap, &mut stats);
            }
        }
    }

    let mut last_key = S::neg_infinity();
    while let Some((point, key)) = heap.pop() {
        debug_assert!(
            key >= last_key,
            "acceptance order must be non-decreasing: {key} after {last_key}"
        );
        last_key = key;
        accepted[point] = true;
        stats.heap_removals += 1;
        for nb in geom.neighbors(point).iter() {
            if !accepted[nb] {
                consider(nb, &mut heap, &mut stats);
            }
        }
    }
    stats.wall_seconds = start.elapsed().as_secs_f64();
    Ok(SolveOutput {
        values: state.values(),
        stats,
    })
}
