//! Parallel sweeping over diagonal planes.
//!
//! For a sweep ordering with signs `s = (s_i, s_j, s_k)`, all gridpoints on
//! the plane `s_i·i + s_j·j + s_k·k = L` are mutually independent: axis
//! neighbors always sit on levels `L ± 1`, never on `L`. Relaxing levels in
//! ascending order therefore reads exactly the values the serial
//! lexicographic sweep would read — current-sweep values from lower levels,
//! previous-sweep values from higher ones — so each pass is bitwise equal to
//! its serial counterpart while every point inside a level can be updated
//! concurrently.

use std::sync::atomic::Ordering;
use std::sync::Barrier;
use std::time::Instant;

use crate::error::ConfigError;
use crate::grid::{GridGeometry, Problem, SolverState};
use crate::local_update::{relax_gridpoint, update_gridpoint};
use crate::scalar::{AtomicScalar, Scalar};
use crate::serial::{check_kappa, SweepDirection};
use crate::stats::{SolveOutput, SolveStats};

/// Inclusive range of plane levels for one sweep direction, upwind first.
pub fn level_range(n: usize, direction: SweepDirection) -> (i64, i64) {
    let n = n as i64;
    let mut lo = 0;
    let mut hi = 0;
    for axis in 0..3 {
        if direction.is_positive(axis) {
            hi += n;
        } else {
            lo -= n;
        }
    }
    (lo, hi)
}

/// Gridpoints on one diagonal plane, in scan order of `(i, j)`.
pub fn plane_points(geom: &GridGeometry, direction: SweepDirection, level: i64) -> Vec<usize> {
    let mut points = Vec::new();
    let n = geom.n();
    for_plane_points(geom, direction, level, 0, n, |p| points.push(p));
    points
}

/// Calls `f` for each plane member whose `i` lies in `i_lo..=i_hi`.
fn for_plane_points(
    geom: &GridGeometry,
    direction: SweepDirection,
    level: i64,
    i_lo: usize,
    i_hi: usize,
    mut f: impl FnMut(usize),
) {
    let n = geom.n() as i64;
    let sign = |axis: usize| -> i64 {
        if direction.is_positive(axis) {
            1
        } else {
            -1
        }
    };
    let (si, sj, sk) = (sign(0), sign(1), sign(2));
    for i in i_lo as i64..=i_hi as i64 {
        for j in 0..=n {
            // Solve s_i·i + s_j·j + s_k·k = level for the third coordinate.
            let k = sk * (level - si * i - sj * j);
            if (0..=n).contains(&k) {
                f(geom.linear_index(i as usize, j as usize, k as usize));
            }
        }
    }
}

fn solve_by_plane_sweeping<S: Scalar>(
    problem: &Problem<S>,
    kappa: S,
    workers: usize,
    gated: bool,
) -> Result<SolveOutput<S>, ConfigError> {
    check_kappa(kappa)?;
    if workers == 0 {
        return Err(ConfigError::NoWorkers);
    }
    let state = SolverState::new(problem);
    if gated {
        state.activate_exit_neighbors(problem);
    }
    let geom = problem.geometry();
    let n = geom.n();
    let side = geom.side();
    let barrier = Barrier::new(workers);
    // One slot per worker for the end-of-sweep reduction; every worker takes
    // the same maximum over all slots and so reaches the same stop decision.
    let max_slots: Vec<S::Atomic> = (0..workers).map(|_| S::Atomic::new(S::zero())).collect();

    let start = Instant::now();
    let per_worker: Vec<(u64, u64, u64)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|t| {
                let state = &state;
                let barrier = &barrier;
                let max_slots = &max_slots;
                // Static band of rows: worker t owns i in band_lo..band_hi.
                let band_lo = t * side / workers;
                let band_hi = (t + 1) * side / workers;
                scope.spawn(move || {
                    let mut sweeps = 0u64;
                    let mut recomputed = 0u64;
                    let mut changed = 0u64;
                    let mut d = 0;
                    loop {
                        let direction = SweepDirection::canonical(d);
                        let mut local_max = S::zero();
                        let (lo, hi) = level_range(n, direction);
                        for level in lo..=hi {
                            if band_lo < band_hi {
                                for_plane_points(
                                    geom,
                                    direction,
                                    level,
                                    band_lo,
                                    band_hi - 1,
                                    |point| {
                                        let res = if gated {
                                            update_gridpoint(state, problem, point, None)
                                        } else {
                                            relax_gridpoint(state, problem, point)
                                        };
                                        if res.recomputed {
                                            recomputed += 1;
                                            if res.decrease > S::zero() {
                                                changed += 1;
                                                if res.decrease > local_max {
                                                    local_max = res.decrease;
                                                }
                                            }
                                        }
                                    },
                                );
                            }
                            barrier.wait();
                        }
                        sweeps += 1;
                        max_slots[t].store(local_max, Ordering::Release);
                        barrier.wait();
                        let mut global_max = S::zero();
                        for slot in max_slots.iter() {
                            let v = slot.load(Ordering::Acquire);
                            if v > global_max {
                                global_max = v;
                            }
                        }
                        // Second wait: nobody may overwrite a slot for the
                        // next sweep before everyone has reduced this one.
                        barrier.wait();
                        if global_max <= kappa {
                            break;
                        }
                        d = (d + 1) % SweepDirection::COUNT;
                    }
                    (sweeps, recomputed, changed)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let wall_seconds = start.elapsed().as_secs_f64();

    let sweeps = per_worker[0].0;
    assert!(
        per_worker.iter().all(|w| w.0 == sweeps),
        "workers must agree on the sweep count"
    );
    let stats = SolveStats {
        wall_seconds,
        sweeps,
        gridpoint_updates: per_worker.iter().map(|w| w.1).sum(),
        value_changes: per_worker.iter().map(|w| w.2).sum(),
        workers: workers as u64,
        ..SolveStats::default()
    };
    Ok(SolveOutput {
        values: state.values(),
        stats,
    })
}

/// Fast sweeping with each diagonal plane relaxed in parallel. Produces
/// bitwise the same values and sweep count as [`crate::serial::solve_fsm`].
pub fn solve_dfsm<S: Scalar>(
    problem: &Problem<S>,
    kappa: S,
    workers: usize,
) -> Result<SolveOutput<S>, ConfigError> {
    solve_by_plane_sweeping(problem, kappa, workers, false)
}

/// Locking sweeping over diagonal planes; the parallel counterpart of
/// [`crate::serial::solve_lsm`].
pub fn solve_dlsm<S: Scalar>(
    problem: &Problem<S>,
    kappa: S,
    workers: usize,
) -> Result<SolveOutput<S>, ConfigError> {
    solve_by_plane_sweeping(problem, kappa, workers, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_problem, ProblemParams};
    use crate::serial::{solve_fsm, solve_lsm, sweep_once};

    #[test]
    fn levels_cover_every_gridpoint_once() {
        let geom = GridGeometry::new(6).unwrap();
        for direction in SweepDirection::all() {
            let (lo, hi) = level_range(geom.n(), direction);
            let mut seen = vec![0u32; geom.total()];
            for level in lo..=hi {
                for p in plane_points(&geom, direction, level) {
                    seen[p] += 1;
                }
            }
            assert!(seen.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn plane_members_are_never_axis_adjacent() {
        let geom = GridGeometry::new(5).unwrap();
        for direction in SweepDirection::all() {
            let (lo, hi) = level_range(geom.n(), direction);
            for level in lo..=hi {
                let members = plane_points(&geom, direction, level);
                for &a in &members {
                    for nb in geom.neighbors(a).iter() {
                        assert!(
                            !members.contains(&nb),
                            "{a} and {nb} share level {level} of {direction:?}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn in_plane_visit_order_cannot_matter() {
        use rand::seq::SliceRandom;
        use rand::{rngs::StdRng, SeedableRng};
        let problem = build_problem::<f64>("sine2", 7, &ProblemParams::default()).unwrap();
        let direction = SweepDirection::canonical(7);
        let (lo, hi) = level_range(problem.geometry().n(), direction);

        let reference = {
            let state = SolverState::new(&problem);
            sweep_once(&state, &problem, direction, false);
            state.values()
        };
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..10 {
            let state = SolverState::new(&problem);
            for level in lo..=hi {
                let mut members = plane_points(problem.geometry(), direction, level);
                members.shuffle(&mut rng);
                for p in members {
                    relax_gridpoint(&state, &problem, p);
                }
            }
            for (a, b) in state.values().iter().zip(&reference) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn plane_parallel_sweeping_is_bitwise_serial() {
        for key in ["constant", "sine2"] {
            let problem = build_problem::<f64>(key, 15, &ProblemParams::default()).unwrap();
            let fsm = solve_fsm(&problem, 0.0).unwrap();
            let lsm = solve_lsm(&problem, 0.0).unwrap();
            for workers in [1, 2, 3, 8] {
                let dfsm = solve_dfsm(&problem, 0.0, workers).unwrap();
                let dlsm = solve_dlsm(&problem, 0.0, workers).unwrap();
                assert_eq!(dfsm.stats.sweeps, fsm.stats.sweeps, "{key} P={workers}");
                assert_eq!(dlsm.stats.sweeps, lsm.stats.sweeps, "{key} P={workers}");
                assert_eq!(
                    dfsm.stats.gridpoint_updates,
                    fsm.stats.gridpoint_updates,
                    "{key} P={workers}"
                );
                for (a, b) in dfsm.values.iter().zip(&fsm.values) {
                    assert_eq!(a.to_bits(), b.to_bits(), "{key} P={workers}");
                }
                for (a, b) in dlsm.values.iter().zip(&lsm.values) {
                    assert_eq!(a.to_bits(), b.to_bits(), "{key} P={workers}");
                }
            }
        }
    }

    #[test]
    fn zero_workers_is_a_config_error() {
        let problem = build_problem::<f64>("constant", 3, &ProblemParams::default()).unwrap();
        assert!(matches!(
            solve_dfsm(&problem, 0.0, 0),
            Err(ConfigError::NoWorkers)
        ));
    }
}
