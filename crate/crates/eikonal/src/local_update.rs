//! The first-order upwind local update shared by every solver.
//!
//! Discretizing `|∇u| F = 1` with one-sided differences gives, at each
//! gridpoint,
//!
//! ```text
//!   Σ_axis ( max(V - m_axis, 0) / h )²  =  1 / f²,
//! ```
//!
//! where `m_axis` is the smaller of the two neighbor values on that axis
//! (`+∞` outside the cube). [`solve_local`] returns the unique solution `Ṽ`
//! of this piecewise-quadratic equation. Every solver calls this one
//! function, and the evaluation order inside it is fixed, so methods that
//! visit gridpoints in different orders still produce bit-identical final
//! values.

use crate::grid::{GridGeometry, Problem, SolverState};
use crate::heap_cell::CellDecomposition;
use crate::scalar::Scalar;

/// Per-axis neighbor minima; `+∞` on axes with no finite neighbor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirectionalMinima<S> {
    pub m: [S; 3],
}

/// Gathers the per-axis minima of the six neighbors of `index`.
#[inline]
pub fn directional_minima<S: Scalar>(
    state: &SolverState<S>,
    geom: &GridGeometry,
    index: usize,
) -> DirectionalMinima<S> {
    let nbs = geom.neighbors(index);
    let mut m = [S::infinity(); 3];
    for (axis, pair) in nbs.per_axis.iter().enumerate() {
        for nb in pair.iter().flatten() {
            let v = state.value(*nb);
            if v < m[axis] {
                m[axis] = v;
            }
        }
    }
    DirectionalMinima { m }
}

/// Solves the upwind discretization for the value at one gridpoint.
///
/// Sorts the finite minima ascending as `m₍₁₎ ≤ … ≤ m₍c₎` and grows the
/// upwind support one minimum at a time: starting from the one-sided value
/// `Ṽ₁ = m₍₁₎ + h/f`, the next minimum joins only while the current value
/// strictly exceeds it, and each included set is re-solved through the
/// `k`-term quadratic `Σ_{i≤k} (Ṽ - m₍ᵢ₎)² = h²/f²` as
/// `Ṽ = (S + √disc)/k` with `S = Σ m₍ᵢ₎` and
/// `disc = S² - k·(Σ m₍ᵢ₎² - h²/f²)`. Returns `+∞` when no axis has a
/// finite neighbor. The returned value is always strictly greater than
/// `m₍₁₎`.
///
/// Excluding a minimum that *ties* the current value (rather than re-solving
/// with it included) matters in floating point: the tie case arises at
/// symmetry seams of a solution, where a neighbor across the seam carries
/// exactly the value being computed. Re-solving with that neighbor included
/// changes the rounding path and can land one ulp lower, which breaks the
/// mirror symmetry of symmetric problems and costs sweep methods extra
/// passes of ulp-sized churn. With the strict-growth rule here, both sides
/// of a seam evaluate the same expression on the same bits.
pub fn solve_local<S: Scalar>(minima: &DirectionalMinima<S>, f: S, h: S) -> S {
    debug_assert!(f > S::zero() && h > S::zero());
    let mut m = minima.m;
    m.sort_by(|a, b| a.partial_cmp(b).expect("minima are never NaN"));
    let finite = m.iter().filter(|v| v.is_finite()).count();
    if finite == 0 {
        return S::infinity();
    }
    let hf2 = (h * h) / (f * f);
    let mut value = m[0] + h / f;
    let mut s = m[0];
    let mut q = m[0] * m[0];
    for k in 2..=finite {
        let mk = m[k - 1];
        if value <= mk {
            break; // mk cannot be upwind of the solution
        }
        s = s + mk;
        q = q + mk * mk;
        let kk = S::from_usize(k).expect("k ≤ 3");
        let disc = s * s - kk * (q - hf2);
        if disc < S::zero() {
            // Inclusion guarantees a real root in exact arithmetic (value >
            // mk implies a positive discriminant); rounding can still nudge
            // a near-tie below zero, and then the previous support is the
            // answer.
            break;
        }
        value = (s + disc.sqrt()) / kk;
    }
    value
}

/// Relative residual of the upwind discretization at a candidate value:
/// `|Σ (max(value - m, 0)/h)² - 1/f²| · f²`.
///
/// This plugs `value` straight into the discretized equation without any
/// upwind-subset selection (terms with `m ≥ value` vanish on their own), so
/// it is an independent check on [`solve_local`] and on whole solutions. An
/// infinite `value` is consistent exactly when every minimum is infinite.
pub fn upwind_residual<S: Scalar>(value: S, minima: &DirectionalMinima<S>, f: S, h: S) -> S {
    if !value.is_finite() {
        return if minima.m.iter().all(|m| !m.is_finite()) {
            S::zero()
        } else {
            S::infinity()
        };
    }
    let mut lhs = S::zero();
    for &m in &minima.m {
        if m < value {
            let d = (value - m) / h;
            lhs = lhs + d * d;
        }
    }
    ((lhs - S::one() / (f * f)) * (f * f)).abs()
}

/// Outcome of one gridpoint update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateResult<S> {
    /// Whether the value was recomputed (the gated update skips inactive
    /// points without recomputing).
    pub recomputed: bool,
    /// `old - new` when the value decreased, zero otherwise (`+∞` when a
    /// previously unknown value became finite).
    pub decrease: S,
}

impl<S: Scalar> UpdateResult<S> {
    #[inline]
    fn skipped() -> Self {
        UpdateResult {
            recomputed: false,
            decrease: S::zero(),
        }
    }

    #[inline]
    pub fn changed(&self) -> bool {
        self.decrease > S::zero()
    }
}

/// Unconditional recompute-and-keep-minimum update (plain sweep step).
///
/// Exit gridpoints are left untouched. No flags are read or written.
#[inline]
pub fn relax_gridpoint<S: Scalar>(
    state: &SolverState<S>,
    problem: &Problem<S>,
    index: usize,
) -> UpdateResult<S> {
    if problem.is_exit(index) {
        return UpdateResult::skipped();
    }
    let geom = problem.geometry();
    let minima = directional_minima(state, geom, index);
    let fresh = solve_local(&minima, problem.speed_at(index), geom.spacing());
    let old = state.value(index);
    if fresh < old {
        state.store_value(index, fresh);
        UpdateResult {
            recomputed: true,
            decrease: old - fresh,
        }
    } else {
        UpdateResult {
            recomputed: true,
            decrease: S::zero(),
        }
    }
}

/// Gated gridpoint update for the label-correcting methods.
///
/// If the point is inactive this does nothing. Otherwise it consumes the
/// flag, recomputes the value, and on a strict decrease writes it back and
/// activates every non-exit neighbor whose value is strictly larger. When a
/// cell decomposition is supplied, an activated neighbor living in a
/// different cell is recorded in `downwind` together with the just-written
/// value (the new inflow for that cell's border).
pub fn update_gridpoint<S: Scalar>(
    state: &SolverState<S>,
    problem: &Problem<S>,
    index: usize,
    mut cells: Option<(&CellDecomposition, &mut DownwindSet<S>)>,
) -> UpdateResult<S> {
    if problem.is_exit(index) || !state.take_active(index) {
        return UpdateResult::skipped();
    }
    let geom = problem.geometry();
    let minima = directional_minima(state, geom, index);
    let fresh = solve_local(&minima, problem.speed_at(index), geom.spacing());
    let old = state.value(index);
    if fresh >= old {
        return UpdateResult {
            recomputed: true,
            decrease: S::zero(),
        };
    }
    state.store_value(index, fresh);
    let home = cells.as_ref().map(|(decomp, _)| decomp.cell_of(index));
    for nb in geom.neighbors(index).iter() {
        if problem.is_exit(nb) || state.value(nb) <= fresh {
            continue;
        }
        state.activate(nb);
        if let Some((decomp, downwind)) = cells.as_mut() {
            let nb_cell = decomp.cell_of(nb);
            if Some(nb_cell) != home {
                downwind.insert(nb_cell, fresh);
            }
        }
    }
    UpdateResult {
        recomputed: true,
        decrease: old - fresh,
    }
}

/// Neighboring cells tagged downwind while processing one cell, with the
/// extrema of the newly written border values flowing into each.
#[derive(Clone, Debug, Default)]
pub struct DownwindSet<S> {
    entries: Vec<DownwindEntry<S>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DownwindEntry<S> {
    pub cell: usize,
    /// Minimum over the new inflow border values (the min-inflow heuristic's
    /// cell-value candidate).
    pub min_inflow: S,
    /// Maximum over the new inflow border values (`V_max` of the legacy
    /// heuristic).
    pub max_inflow: S,
}

impl<S: Scalar> DownwindSet<S> {
    pub fn new() -> Self {
        DownwindSet {
            entries: Vec::new(),
        }
    }

    /// Records that `value` was just written next to `cell`'s border,
    /// merging the running extrema. Entries stay sorted by cell id so
    /// iteration order is deterministic (ascending).
    pub fn insert(&mut self, cell: usize, value: S) {
        match self.entries.binary_search_by_key(&cell, |e| e.cell) {
            Ok(at) => {
                let e = &mut self.entries[at];
                if value < e.min_inflow {
                    e.min_inflow = value;
                }
                if value > e.max_inflow {
                    e.max_inflow = value;
                }
            }
            Err(at) => self.entries.insert(
                at,
                DownwindEntry {
                    cell,
                    min_inflow: value,
                    max_inflow: value,
                },
            ),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Entries in ascending cell-id order.
    pub fn iter(&self) -> impl Iterator<Item = &DownwindEntry<S>> {
        self.entries.iter()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_problem, GridGeometry, ProblemParams, SpeedModel};
    use proptest::prelude::*;

    const INF: f64 = f64::INFINITY;

    fn mk(m: [f64; 3]) -> DirectionalMinima<f64> {
        DirectionalMinima { m }
    }

    /// Independent oracle: scans the admissible interval `[m₍₁₎, m₍₁₎ + h/f]`
    /// for the value minimizing the discretization residual, refining the
    /// grid until the step is below `1e-9` of the interval width.
    fn scan_oracle(m: [f64; 3], f: f64, h: f64) -> f64 {
        let m1 = m.iter().cloned().fold(INF, f64::min);
        assert!(m1.is_finite(), "oracle needs at least one finite minimum");
        let residual = |u: f64| {
            let lhs: f64 = m
                .iter()
                .map(|&mi| {
                    let d = ((u - mi).max(0.0)) / h;
                    d * d
                })
                .sum();
            (lhs - 1.0 / (f * f)).abs()
        };
        let (mut lo, mut hi) = (m1, m1 + h / f);
        let mut best = lo;
        for _ in 0..5 {
            let steps = 1000;
            let step = (hi - lo) / steps as f64;
            let mut best_r = INF;
            for t in 0..=steps {
                let u = lo + step * t as f64;
                let r = residual(u);
                if r < best_r {
                    best_r = r;
                    best = u;
                }
            }
            lo = (best - step).max(m1);
            hi = best + step;
        }
        best
    }

    #[test]
    fn single_axis_update_matches_frozen_value_and_oracle() {
        // The one-sided value 0.3 + h/f = 0.35 does not exceed the second
        // minimum 0.4, so the support stays one-axis (equivalently: the
        // two-term quadratic would have no real root).
        let m = [0.3, 0.4, INF];
        let v = solve_local(&mk(m), 2.0, 0.1);
        assert!((v - 0.35).abs() < 1e-12);
        assert!((v - scan_oracle(m, 2.0, 0.1)).abs() < 1e-9);
        // 0.4 > Ṽ is consistent: the dropped minimum exceeds the solution.
        assert!(m[1] > v);
    }

    #[test]
    fn all_infinite_minima_yield_infinity() {
        assert_eq!(solve_local(&mk([INF, INF, INF]), 1.0, 0.5), INF);
    }

    #[test]
    fn two_term_update_matches_closed_form_and_oracle() {
        let (f, h) = (2.0, 0.1);
        let m = [0.3, 0.32, INF];
        // S = 0.62, Q = 0.1924, disc = S² - 2(Q - h²/f²)
        let disc: f64 = 0.62 * 0.62 - 2.0 * (0.1924 - 0.0025);
        let expected = (0.62 + disc.sqrt()) / 2.0;
        let v = solve_local(&mk(m), f, h);
        assert!((v - expected).abs() < 1e-15);
        assert!((v - scan_oracle(m, f, h)).abs() < 1e-9);
        assert!(v >= m[1]);
    }

    #[test]
    fn three_term_update_is_symmetric_and_matches_oracle() {
        let (f, h) = (1.0, 0.25);
        let m = [1.0, 1.0, 1.0];
        // Ṽ = m + h/(f·√3) for three equal minima.
        let expected = 1.0 + h / 3.0f64.sqrt();
        let v = solve_local(&mk(m), f, h);
        assert!((v - expected).abs() < 1e-12);
        assert!((v - scan_oracle(m, f, h)).abs() < 1e-9);
        // Permutations are bit-identical (sorting happens inside).
        let v2 = solve_local(&mk([1.0, 1.0, 1.0]), f, h);
        assert_eq!(v.to_bits(), v2.to_bits());
    }

    #[test]
    fn residual_vanishes_at_the_returned_value() {
        let cases = [
            ([0.3, 0.4, INF], 2.0, 0.1),
            ([0.0, 0.0, 0.0], 1.0, 1.0 / 63.0),
            ([0.5, 0.52, 0.61], 0.8, 1.0 / 31.0),
            ([2.0, INF, INF], 0.001, 1.0 / 15.0),
        ];
        for (m, f, h) in cases {
            let v = solve_local(&mk(m), f, h);
            let r = upwind_residual(v, &mk(m), f, h);
            assert!(r < 1e-12, "residual {r:e} for {m:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        /// Agreement with the residual-scan oracle on random inputs.
        #[test]
        fn solve_matches_scan_oracle(
            raw in prop::array::uniform3(0.0f64..2.0),
            finite_mask in 1u8..8,
            f in 0.001f64..2.5,
            n in 4usize..=128,
        ) {
            let h = 1.0 / n as f64;
            let mut m = [INF; 3];
            for a in 0..3 {
                if finite_mask & (1 << a) != 0 {
                    m[a] = raw[a];
                }
            }
            let v = solve_local(&mk(m), f, h);
            let o = scan_oracle(m, f, h);
            prop_assert!((v - o).abs() <= 1e-8 * (1.0 + v.abs()),
                "solve {v} vs oracle {o} for {m:?}, f={f}, h={h}");
        }

        /// Monotonicity: raising any minimum never lowers the result, and the
        /// result is always strictly above the smallest minimum.
        #[test]
        fn solve_is_monotone_and_above_m1(
            raw in prop::array::uniform3(0.0f64..2.0),
            finite_mask in 1u8..8,
            bump_axis in 0usize..3,
            bump in 0.0f64..1.0,
            f in 0.001f64..2.5,
            n in 4usize..=128,
        ) {
            let h = 1.0 / n as f64;
            let mut m = [INF; 3];
            for a in 0..3 {
                if finite_mask & (1 << a) != 0 {
                    m[a] = raw[a];
                }
            }
            let v = solve_local(&mk(m), f, h);
            let m1 = m.iter().cloned().fold(INF, f64::min);
            prop_assert!(v > m1);

            let mut bumped = m;
            if bumped[bump_axis].is_finite() {
                bumped[bump_axis] += bump;
            }
            let v2 = solve_local(&mk(bumped), f, h);
            prop_assert!(v2 >= v - 1e-12 * (1.0 + v.abs()),
                "raising a minimum lowered the result: {v} -> {v2}");
        }

        /// Upwind consistency: minima at or above the returned value have no
        /// influence — raising them (even to +∞) reproduces the result
        /// bit-for-bit.
        #[test]
        fn minima_above_the_solution_are_inert(
            raw in prop::array::uniform3(0.0f64..2.0),
            finite_mask in 1u8..8,
            f in 0.001f64..2.5,
            n in 4usize..=128,
        ) {
            let h = 1.0 / n as f64;
            let mut m = [INF; 3];
            for a in 0..3 {
                if finite_mask & (1 << a) != 0 {
                    m[a] = raw[a];
                }
            }
            let v = solve_local(&mk(m), f, h);
            let mut pruned = m;
            let mut dropped = false;
            for entry in &mut pruned {
                if *entry >= v {
                    *entry = INF;
                    dropped = true;
                }
            }
            if dropped {
                let v2 = solve_local(&mk(pruned), f, h);
                prop_assert_eq!(v.to_bits(), v2.to_bits());
            }
        }

        /// The discretization residual at the returned value is at numerical
        /// zero over the whole operating envelope.
        ///
        /// "Numerical zero" is conditioned: the discriminant
        /// `s² - k(q - h²/f²)` cancels down to no less than `h²/f²` (strict
        /// growth keeps the included spread below the root separation), so
        /// its relative error — and hence the residual — is amplified by up
        /// to `(f/h)²·Σm²` machine epsilons when near-tied minima sit at the
        /// inclusion boundary. The acceptance threshold scales accordingly.
        #[test]
        fn residual_property(
            raw in prop::array::uniform3(0.0f64..2.0),
            finite_mask in 1u8..8,
            f in 0.001f64..2.5,
            n in 4usize..=128,
        ) {
            let h = 1.0 / n as f64;
            let mut m = [INF; 3];
            for a in 0..3 {
                if finite_mask & (1 << a) != 0 {
                    m[a] = raw[a];
                }
            }
            let v = solve_local(&mk(m), f, h);
            let msq: f64 = m
                .iter()
                .filter(|x| x.is_finite())
                .map(|x| x * x)
                .sum();
            let fh = f / h;
            let tol = 100.0 * f64::EPSILON * (1.0 + fh * fh * (1.0 + msq));
            let res = upwind_residual(v, &mk(m), f, h);
            prop_assert!(res <= tol, "residual {res:e} over budget {tol:e}");
        }
    }

    #[test]
    fn downwind_set_merges_and_stays_sorted() {
        let mut dn = DownwindSet::new();
        dn.insert(5, 1.0);
        dn.insert(2, 3.0);
        dn.insert(5, 0.5);
        dn.insert(5, 2.0);
        dn.insert(2, 3.5);
        let entries: Vec<_> = dn.iter().cloned().collect();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].cell, 2);
        assert_eq!(entries[0].min_inflow, 3.0);
        assert_eq!(entries[0].max_inflow, 3.5);
        assert_eq!(entries[1].cell, 5);
        assert_eq!(entries[1].min_inflow, 0.5);
        assert_eq!(entries[1].max_inflow, 2.0);
    }

    /// Hand-executed gated update on an n = 3, r = 2 instance: an active
    /// border point drops below three cross-border neighbors, which must be
    /// activated and their cells tagged downwind; same-cell neighbors are
    /// activated without tagging.
    #[test]
    fn gated_update_tags_downwind_cells() {
        let geom = GridGeometry::new(3).unwrap();
        let problem = crate::grid::Problem::new(
            geom,
            SpeedModel::Constant { value: 1.0f64 },
            vec![(geom.linear_index(0, 0, 0), 0.0)],
            "hand",
        )
        .unwrap();
        let decomp = CellDecomposition::new(geom, 2).unwrap();
        let state = crate::grid::SolverState::new(&problem);

        let p = geom.linear_index(1, 1, 1);
        state.store_value(geom.linear_index(0, 1, 1), 0.2);
        state.store_value(geom.linear_index(1, 0, 1), 0.25);
        state.store_value(geom.linear_index(1, 1, 0), 0.3);
        state.activate(p);

        let mut dn = DownwindSet::new();
        let res = update_gridpoint(&state, &problem, p, Some((&decomp, &mut dn)));
        assert!(res.recomputed && res.changed());

        let expected = solve_local(&mk([0.2, 0.25, 0.3]), 1.0, 1.0 / 3.0);
        assert_eq!(state.value(p), expected);
        assert!(!state.is_active(p), "the update consumed the flag");

        // Cross-border neighbors (2,1,1), (1,2,1), (1,1,2) were at +∞: all
        // activated, and their cells (1, 2, 4 in cell-lexicographic order)
        // tagged with the new value as both inflow extrema.
        for (coords, cell) in [
            ((2usize, 1usize, 1usize), 1usize),
            ((1, 2, 1), 2),
            ((1, 1, 2), 4),
        ] {
            let nb = geom.linear_index(coords.0, coords.1, coords.2);
            assert!(state.is_active(nb));
            assert_eq!(decomp.cell_of(nb), cell);
        }
        let cells: Vec<usize> = dn.iter().map(|e| e.cell).collect();
        assert_eq!(cells, vec![1, 2, 4]);
        for e in dn.iter() {
            assert_eq!(e.min_inflow, expected);
            assert_eq!(e.max_inflow, expected);
        }
        // Smaller-valued neighbors were not re-activated.
        assert!(!state.is_active(geom.linear_index(0, 1, 1)));

        // An inactive point is skipped without recomputation.
        let res2 = update_gridpoint(&state, &problem, p, None);
        assert!(!res2.recomputed);

        // A same-cell activation does not tag: update (2,1,1); its improved
        // value activates (3,1,1), which lives in the same cell 1.
        let mut dn2 = DownwindSet::new();
        let res3 = update_gridpoint(
            &state,
            &problem,
            geom.linear_index(2, 1, 1),
            Some((&decomp, &mut dn2)),
        );
        assert!(res3.changed());
        assert!(state.is_active(geom.linear_index(3, 1, 1)));
        let tagged: Vec<usize> = dn2.iter().map(|e| e.cell).collect();
        assert!(
            !tagged.contains(&1),
            "same-cell neighbor must not tag its own cell: {tagged:?}"
        );
    }

    #[test]
    fn exit_points_are_immutable_under_both_updates() {
        let problem = build_problem::<f64>("constant", 3, &ProblemParams::default());
        // n = 3 is odd and ≥ 2: valid centered source.
        let problem = problem.unwrap();
        let state = crate::grid::SolverState::new(&problem);
        let &(exit, q) = &problem.exits()[0];
        state.activate(exit); // even a stray flag must not let an exit move
        let r1 = relax_gridpoint(&state, &problem, exit);
        let r2 = update_gridpoint(&state, &problem, exit, None);
        assert!(!r1.recomputed && !r2.recomputed);
        assert_eq!(state.value(exit), q);
    }
}
