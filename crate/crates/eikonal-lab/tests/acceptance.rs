//! The acceptance gate: every release criterion of the suite, each reported
//! as one `PASS`/`FAIL` line with the measured numbers. The wall-clock
//! scaling check (criterion 10) is machine-dependent — on a single hardware
//! core no parallel speedup is physically possible — so it prints `WARN`
//! instead of failing the gate.
//!
//! Run `cargo test --test acceptance -- --nocapture` to watch the lines.

use std::time::Instant;

use eikonal::local_update::relax_gridpoint;
use eikonal::{
    build_problem, solve_dfsm, solve_dlsm, solve_fmm, solve_fsm, solve_hcm, solve_lsm,
    solve_phcm, CellSolveOptions, Problem64, ProblemParams, SolverState,
};
use eikonal_lab::{
    convergence_study, max_abs_deviation, verify_equivalence, MethodSpec, PROBLEM_KEYS,
};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;

type Check = Result<String, String>;

fn problem(key: &str, n: usize) -> Result<Problem64, String> {
    build_problem::<f64>(key, n, &ProblemParams::default())
        .map_err(|e| format!("building {key} n={n}: {e}"))
}

fn spec(text: &str) -> MethodSpec {
    MethodSpec::parse(text).expect("valid method spec")
}

/// Criterion 1 — every method computes the same discrete solution on every
/// catalog problem at n ∈ {15, 31}: max-norm pairwise deviation ≤ 1e-12 and
/// discretization residual ≤ 1e-10, all inside a 2-minute budget.
fn cross_solver_equivalence() -> Check {
    let started = Instant::now();
    let specs: Vec<MethodSpec> = [
        "fmm",
        "fsm",
        "lsm",
        "hcm(r=4)",
        "hcm(r=8)",
        "phcm(r=8,P=1)",
        "phcm(r=8,P=2)",
        "phcm(r=8,P=4)",
        "phcm(r=8,P=8)",
        "dfsm(P=4)",
        "dlsm(P=4)",
    ]
    .iter()
    .map(|t| spec(t))
    .collect();
    let mut worst_dev = 0.0f64;
    let mut worst_res = 0.0f64;
    let mut combos = 0;
    for key in PROBLEM_KEYS {
        for n in [15usize, 31] {
            let p = problem(key, n)?;
            let report =
                verify_equivalence(&p, &specs, 1e-12, 1e-10).map_err(|e| e.to_string())?;
            if !report.passed() {
                return Err(format!("{key} n={n}:\n{}", report.render(&p)));
            }
            worst_dev = worst_dev.max(report.max_deviation);
            worst_res = worst_res.max(report.max_residual);
            combos += 1;
        }
    }
    let secs = started.elapsed().as_secs_f64();
    if secs >= 120.0 {
        return Err(format!("took {secs:.1}s, budget is 120s"));
    }
    Ok(format!(
        "{} methods × {combos} problem/size combos: worst deviation {worst_dev:.2e}, \
         worst residual {worst_res:.2e}, {secs:.1}s",
        specs.len()
    ))
}

/// Criterion 2 — fast sweeping needs 9 sweeps (± the confirming-sweep
/// convention) on the constant problem, independent of the grid size.
fn fsm_sweep_count_is_nine_and_size_independent() -> Check {
    let mut counts = Vec::new();
    for n in [63usize, 127] {
        let p = problem("constant", n)?;
        let out = solve_fsm(&p, 0.0).map_err(|e| e.to_string())?;
        counts.push(out.stats.sweeps);
    }
    if counts[0] != counts[1] {
        return Err(format!(
            "sweep count depends on M: {} at n=63 vs {} at n=127",
            counts[0], counts[1]
        ));
    }
    let sweeps = counts[0] as i64;
    if (sweeps - 9).abs() > 1 {
        return Err(format!("{sweeps} sweeps, expected 9 ± 1"));
    }
    Ok(format!("{sweeps} sweeps at both n=63 and n=127"))
}

/// Criterion 3 — on the strictly causal constant problem the serial
/// heap-cell method pops every cell exactly once, for every cell width.
fn hcm_pops_each_cell_exactly_once() -> Check {
    let p = problem("constant", 63)?;
    let mut details = Vec::new();
    for r in [4usize, 8, 16] {
        let out = solve_hcm(&p, &CellSolveOptions::new(r)).map_err(|e| e.to_string())?;
        let j = out.stats.cells;
        if out.stats.heap_removals != j {
            return Err(format!(
                "r={r}: {} heap removals for J={j}",
                out.stats.heap_removals
            ));
        }
        details.push(format!("r={r}: J={j}"));
    }
    Ok(format!("heap removals == J exactly ({})", details.join(", ")))
}

/// Criterion 4 — the average number of directional sweeps per cell stays in
/// the qualitative envelope [3, 7] at desk scale.
fn hcm_average_sweeps_per_cell_in_envelope() -> Check {
    let p = problem("constant", 63)?;
    let mut details = Vec::new();
    for r in [8usize, 16] {
        let out = solve_hcm(&p, &CellSolveOptions::new(r)).map_err(|e| e.to_string())?;
        let avs = out.stats.avs().ok_or("AvS missing from heap-cell stats")?;
        if !(3.0..=7.0).contains(&avs) {
            return Err(format!("r={r}: AvS {avs:.2} outside [3, 7]"));
        }
        details.push(format!("r={r}: AvS {avs:.2}"));
    }
    Ok(details.join(", "))
}

/// Criterion 5 — asynchronous workers may duplicate work but never skip a
/// cell: on the constant problem every run pops between J and 3·J cells.
/// Measured at n=63 (J=512, the same scale as criterion 3); with only a
/// handful of cells per worker the relative inflation is unbounded in
/// principle, so a degenerate J would not test the intended regime.
fn phcm_removals_bounded_on_causal_problem() -> Check {
    let p = problem("constant", 63)?;
    let opts = CellSolveOptions::new(8);
    let mut lo = u64::MAX;
    let mut hi = 0u64;
    let mut j = 0u64;
    for threads in [4usize, 8] {
        for _ in 0..30 {
            let out = solve_phcm(&p, &opts, threads).map_err(|e| e.to_string())?;
            j = out.stats.cells;
            let removals = out.stats.heap_removals;
            if removals < j || removals > 3 * j {
                return Err(format!(
                    "P={threads}: {removals} removals outside [J, 3J] = [{j}, {}]",
                    3 * j
                ));
            }
            lo = lo.min(removals);
            hi = hi.max(removals);
        }
    }
    Ok(format!(
        "60 runs (30 × P∈{{4,8}}, n=63): removals within [{lo}, {hi}] ⊆ [{j}, {}]",
        3 * j
    ))
}

/// Criterion 6 — the asynchronous fixed point is deterministic: every run at
/// every worker count matches serial fast marching within 1e-12.
fn phcm_fixed_point_matches_marching() -> Check {
    let p = problem("sine20", 31)?;
    let reference = solve_fmm(&p).map_err(|e| e.to_string())?.values;
    let opts = CellSolveOptions::new(8);
    let mut worst = 0.0f64;
    for threads in [2usize, 4, 8] {
        for rep in 0..30 {
            let out = solve_phcm(&p, &opts, threads).map_err(|e| e.to_string())?;
            let (dev, at) = max_abs_deviation(&reference, &out.values);
            if dev > 1e-12 {
                return Err(format!(
                    "P={threads} rep {rep}: deviation {dev:e} at gridpoint {at}"
                ));
            }
            worst = worst.max(dev);
        }
    }
    Ok(format!(
        "90 runs (30 × P∈{{2,4,8}}, sine20 n=31): worst deviation from marching {worst:.2e}"
    ))
}

/// Criterion 7 — the diagonal-plane parallel sweeps replicate their serial
/// counterparts' sweep counts exactly, on every catalog problem.
fn plane_parallel_sweep_counts_match_serial() -> Check {
    let mut combos = 0;
    for key in PROBLEM_KEYS {
        for n in [31usize, 63] {
            let p = problem(key, n)?;
            let serial_fsm = solve_fsm(&p, 0.0).map_err(|e| e.to_string())?;
            let parallel_fsm = solve_dfsm(&p, 0.0, 4).map_err(|e| e.to_string())?;
            if serial_fsm.stats.sweeps != parallel_fsm.stats.sweeps {
                return Err(format!(
                    "{key} n={n}: fsm {} sweeps vs dfsm {}",
                    serial_fsm.stats.sweeps, parallel_fsm.stats.sweeps
                ));
            }
            let serial_lsm = solve_lsm(&p, 0.0).map_err(|e| e.to_string())?;
            let parallel_lsm = solve_dlsm(&p, 0.0, 4).map_err(|e| e.to_string())?;
            if serial_lsm.stats.sweeps != parallel_lsm.stats.sweeps {
                return Err(format!(
                    "{key} n={n}: lsm {} sweeps vs dlsm {}",
                    serial_lsm.stats.sweeps, parallel_lsm.stats.sweeps
                ));
            }
            combos += 1;
        }
    }
    Ok(format!(
        "fsm/dfsm and lsm/dlsm sweep counts equal on {combos} problem/size combos"
    ))
}

/// Criterion 8 — points of one diagonal plane never influence each other, so
/// any within-plane update order leaves the identical state, bit for bit.
fn within_plane_update_order_is_immaterial() -> Check {
    let p = problem("constant", 15)?;
    let geom = *p.geometry();
    let side = geom.side();
    // Members of the i+j+k = 22 plane: a large mid-diagonal cross-section.
    let level = 22i64;
    let mut members = Vec::new();
    for i in 0..side {
        for j in 0..side {
            let k = level - i as i64 - j as i64;
            if (0..side as i64).contains(&k) {
                members.push(geom.linear_index(i, j, k as usize));
            }
        }
    }
    // One ascending lexicographic relaxation pass — exactly the (+,+,+)
    // sweep — gives the plane's neighborhood nontrivial upwind data.
    let prepare = || {
        let state = SolverState::new(&p);
        for idx in 0..geom.total() {
            relax_gridpoint(&state, &p, idx);
        }
        state
    };
    let baseline = {
        let state = prepare();
        for &idx in &members {
            relax_gridpoint(&state, &p, idx);
        }
        state.values()
    };
    let mut rng = StdRng::seed_from_u64(2214);
    let mut order = members.clone();
    for trial in 0..100 {
        order.shuffle(&mut rng);
        let state = prepare();
        for &idx in &order {
            relax_gridpoint(&state, &p, idx);
        }
        let values = state.values();
        for (at, (a, b)) in baseline.iter().zip(values.iter()).enumerate() {
            if a.to_bits() != b.to_bits() {
                return Err(format!(
                    "trial {trial}: bitwise mismatch at gridpoint {at}: {a:e} vs {b:e}"
                ));
            }
        }
    }
    Ok(format!(
        "100 random orders over a {}-point diagonal plane: post-plane states bitwise identical",
        members.len()
    ))
}

/// Criterion 9 — first-order convergence on the constant problem: the L∞
/// error shrinks by at least 1.5× per grid doubling.
fn first_order_convergence() -> Check {
    let rows =
        convergence_study(&spec("fmm"), "constant", &[31, 63, 127]).map_err(|e| e.to_string())?;
    let mut details = Vec::new();
    for pair in rows.windows(2) {
        let (coarse, fine) = (&pair[0], &pair[1]);
        if fine.linf_error >= coarse.linf_error {
            return Err(format!(
                "L∞ error did not decrease: {:.3e} (n={}) -> {:.3e} (n={})",
                coarse.linf_error, coarse.n, fine.linf_error, fine.n
            ));
        }
        let ratio = coarse.linf_error / fine.linf_error;
        if ratio < 1.5 {
            return Err(format!(
                "e(n={}) / e(n={}) = {ratio:.3} < 1.5",
                coarse.n, fine.n
            ));
        }
        details.push(format!("e(n={})/e(n={}) = {ratio:.2}", coarse.n, fine.n));
    }
    Ok(details.join(", "))
}

/// Criterion 10 (non-gating) — parallel variants should beat their serial
/// counterparts on wall clock. Physically impossible on one hardware core,
/// hence a warning rather than a failure.
fn wall_clock_scaling_smoke() -> Check {
    let p = problem("constant", 63)?;
    let opts = CellSolveOptions::new(8);
    let median = |mut xs: Vec<f64>| -> f64 {
        xs.sort_by(f64::total_cmp);
        xs[xs.len() / 2]
    };
    let reps = 30usize;
    let mut hcm = Vec::with_capacity(reps);
    let mut phcm = Vec::with_capacity(reps);
    let mut lsm = Vec::with_capacity(reps);
    let mut dlsm = Vec::with_capacity(reps);
    for _ in 0..reps {
        hcm.push(solve_hcm(&p, &opts).map_err(|e| e.to_string())?.stats.wall_seconds);
        phcm.push(
            solve_phcm(&p, &opts, 4)
                .map_err(|e| e.to_string())?
                .stats
                .wall_seconds,
        );
        lsm.push(solve_lsm(&p, 0.0).map_err(|e| e.to_string())?.stats.wall_seconds);
        dlsm.push(
            solve_dlsm(&p, 0.0, 4)
                .map_err(|e| e.to_string())?
                .stats
                .wall_seconds,
        );
    }
    let (mh, mp) = (median(hcm), median(phcm));
    let (ml, md) = (median(lsm), median(dlsm));
    let detail = format!(
        "median wall over {reps} reps at n=63: phcm(P=4) {mp:.4}s vs 0.75×hcm {:.4}s; \
         dlsm(P=4) {md:.4}s vs 0.9×lsm {:.4}s",
        0.75 * mh,
        0.9 * ml
    );
    if mp <= 0.75 * mh && md <= 0.9 * ml {
        Ok(detail)
    } else {
        Err(detail)
    }
}

#[derive(Default)]
struct Gate {
    failures: Vec<String>,
    lines: Vec<String>,
}

impl Gate {
    fn check(&mut self, name: &str, outcome: Check) {
        let line = match outcome {
            Ok(detail) => format!("PASS  {name}: {detail}"),
            Err(detail) => {
                self.failures.push(name.to_string());
                format!("FAIL  {name}: {detail}")
            }
        };
        println!("{line}");
        self.lines.push(line);
    }

    fn warn_only(&mut self, name: &str, outcome: Check) {
        let line = match outcome {
            Ok(detail) => format!("PASS  {name}: {detail}"),
            Err(detail) => format!("WARN  {name} (non-gating): {detail}"),
        };
        println!("{line}");
        self.lines.push(line);
    }
}

#[test]
fn acceptance_criteria() {
    let mut gate = Gate::default();
    gate.check(
        "criterion 1, cross-solver equivalence",
        cross_solver_equivalence(),
    );
    gate.check(
        "criterion 2, constant-problem sweep count",
        fsm_sweep_count_is_nine_and_size_independent(),
    );
    gate.check(
        "criterion 3, one heap removal per cell",
        hcm_pops_each_cell_exactly_once(),
    );
    gate.check(
        "criterion 4, average sweeps per cell",
        hcm_average_sweeps_per_cell_in_envelope(),
    );
    gate.check(
        "criterion 5, bounded asynchronous work inflation",
        phcm_removals_bounded_on_causal_problem(),
    );
    gate.check(
        "criterion 6, deterministic asynchronous fixed point",
        phcm_fixed_point_matches_marching(),
    );
    gate.check(
        "criterion 7, plane-parallel sweep parity",
        plane_parallel_sweep_counts_match_serial(),
    );
    gate.check(
        "criterion 8, within-plane order independence",
        within_plane_update_order_is_immaterial(),
    );
    gate.check(
        "criterion 9, first-order convergence",
        first_order_convergence(),
    );
    gate.warn_only(
        "criterion 10, wall-clock scaling smoke",
        wall_clock_scaling_smoke(),
    );
    assert!(
        gate.failures.is_empty(),
        "failed acceptance criteria: {:?}\n{}",
        gate.failures,
        gate.lines.join("\n")
    );
}
