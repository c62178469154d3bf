//! Uniform grid on the unit cube, speed models, and shared solver state.
//!
//! The domain is `[0,1]³` discretized with `n+1` gridpoints per side at
//! spacing `h = 1/n`; gridpoint `(i,j,k)` sits at `(ih, jh, kh)`. Linear
//! indices are lexicographic, `i + (n+1)·j + (n+1)²·k`, so `i` is the
//! contiguous (cache-friendly) axis; solvers rely on this layout being fixed
//! for reproducible sweep traversals.

use std::sync::atomic::{AtomicBool, Ordering};

use crate::error::ConfigError;
use crate::scalar::{cast, AtomicScalar, Scalar};

/// Gridpoint indexing for one `(n+1)³` uniform grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridGeometry {
    n: usize,
}

impl GridGeometry {
    pub fn new(n: usize) -> Result<Self, ConfigError> {
        if n < 2 {
            return Err(ConfigError::GridTooSmall(n));
        }
        Ok(GridGeometry { n })
    }

    /// Number of grid intervals per side (`h = 1/n`).
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Gridpoints per side, `n + 1`.
    #[inline]
    pub fn side(&self) -> usize {
        self.n + 1
    }

    /// Total gridpoint count `M = (n+1)³`.
    #[inline]
    pub fn total(&self) -> usize {
        let s = self.side();
        s * s * s
    }

    /// Grid spacing `h = 1/n`.
    #[inline]
    pub fn spacing<S: Scalar>(&self) -> S {
        cast(1.0 / self.n as f64)
    }

    #[inline]
    pub fn linear_index(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i <= self.n && j <= self.n && k <= self.n);
        let s = self.side();
        i + s * (j + s * k)
    }

    #[inline]
    pub fn grid_coords(&self, index: usize) -> (usize, usize, usize) {
        let s = self.side();
        (index % s, (index / s) % s, index / (s * s))
    }

    /// Physical coordinates of gridpoint `(i,j,k)`.
    #[inline]
    pub fn position<S: Scalar>(&self, i: usize, j: usize, k: usize) -> [S; 3] {
        let h = 1.0 / self.n as f64;
        [
            cast(i as f64 * h),
            cast(j as f64 * h),
            cast(k as f64 * h),
        ]
    }

    /// The up-to-six axis neighbors of a gridpoint, with per-axis presence.
    #[inline]
    pub fn neighbors(&self, index: usize) -> NeighborSet {
        let (i, j, k) = self.grid_coords(index);
        self.neighbors_of(i, j, k)
    }

    #[inline]
    pub fn neighbors_of(&self, i: usize, j: usize, k: usize) -> NeighborSet {
        let s = self.side();
        let idx = i + s * (j + s * k);
        let axis = |coord: usize, stride: usize| -> [Option<usize>; 2] {
            [
                (coord > 0).then(|| idx - stride),
                (coord < self.n).then(|| idx + stride),
            ]
        };
        NeighborSet {
            per_axis: [axis(i, 1), axis(j, s), axis(k, s * s)],
        }
    }
}

/// Axis neighbors of one gridpoint: `per_axis[axis][0]` is the `-` side,
/// `per_axis[axis][1]` the `+` side, `None` outside the cube.
#[derive(Clone, Copy, Debug)]
pub struct NeighborSet {
    pub per_axis: [[Option<usize>; 2]; 3],
}

impl NeighborSet {
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.per_axis.iter().flatten().filter_map(|n| *n)
    }
}

/// Speed field `F(x) > 0` of the Eikonal equation `|∇u| F = 1`.
#[derive(Clone, Debug, PartialEq)]
pub enum SpeedModel<S> {
    /// `F ≡ value`.
    Constant { value: S },
    /// `F = base + amplitude · sin(ωπx) sin(ωπy) sin(ωπz)` with `ω = frequency`.
    SineProduct { base: S, amplitude: S, frequency: S },
    /// `count³` alternating cubes of edge `1/count`; `F = fast` where the cube
    /// coordinate parity is even, `slow` where odd.
    Checkerboard { count: usize, fast: S, slow: S },
    /// Four concentric spherical-shell barriers on `[-1,1]³` (the unit cube is
    /// mapped by `u = 2x - 1`), each pierced by a cylindrical hole on
    /// alternating sides of the `z = 0` plane; `F = slow` inside a barrier,
    /// `1` outside.
    ShellMaze { slow: S, thickness: S, hole_width: S },
}

impl<S: Scalar> SpeedModel<S> {
    /// Evaluates the speed at a physical point (not necessarily a gridpoint).
    pub fn speed(&self, p: [S; 3]) -> S {
        match *self {
            SpeedModel::Constant { value } => value,
            SpeedModel::SineProduct {
                base,
                amplitude,
                frequency,
            } => {
                let pi = cast::<S>(std::f64::consts::PI);
                let w = frequency * pi;
                base + amplitude * (w * p[0]).sin() * (w * p[1]).sin() * (w * p[2]).sin()
            }
            SpeedModel::Checkerboard { count, fast, slow } => {
                let parity: usize = p
                    .iter()
                    .map(|&c| checker_cell(c, count))
                    .sum();
                if parity.is_multiple_of(2) {
                    fast
                } else {
                    slow
                }
            }
            SpeedModel::ShellMaze {
                slow,
                thickness,
                hole_width,
            } => {
                // Map the unit cube onto [-1,1]³.
                let two = cast::<S>(2.0);
                let one = S::one();
                let u = two * p[0] - one;
                let v = two * p[1] - one;
                let w = two * p[2] - one;
                let radius = (u * u + v * v + w * w).sqrt();
                let in_hole = u * u + v * v < hole_width;
                for (m, inner) in [0.3, 0.5, 0.7, 0.9].into_iter().enumerate() {
                    let inner = cast::<S>(inner);
                    if radius > inner && radius < inner + thickness {
                        // Shells 1 and 3 are pierced below the z = 0 plane,
                        // shells 2 and 4 above it.
                        let hole_side = if m % 2 == 0 {
                            w < S::zero()
                        } else {
                            w > S::zero()
                        };
                        if !(in_hole && hole_side) {
                            return slow;
                        }
                    }
                }
                one
            }
        }
    }
}

/// Cube coordinate of `c ∈ [0,1]` on a `count`-cube edge, half-open cubes
/// with the last cube closed at 1.
#[inline]
fn checker_cell<S: Scalar>(c: S, count: usize) -> usize {
    let cell = (c * cast::<S>(count as f64)).floor().to_usize().unwrap_or(0);
    cell.min(count - 1)
}

/// A fully specified instance: grid, speed field, and exit set `Q` with
/// boundary values `q`.
pub struct Problem<S: Scalar> {
    geom: GridGeometry,
    speed_model: SpeedModel<S>,
    /// Speed sampled at every gridpoint (so solvers never re-evaluate trig).
    speeds: Vec<S>,
    exits: Vec<(usize, S)>,
    exit_mask: Vec<bool>,
    name: String,
}

impl<S: Scalar> std::fmt::Debug for Problem<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("n", &self.geom.n())
            .field("exits", &self.exits.len())
            .finish_non_exhaustive()
    }
}

impl<S: Scalar> Problem<S> {
    /// Builds a problem from parts and validates the speed positivity and
    /// exit-set invariants.
    pub fn new(
        geom: GridGeometry,
        speed_model: SpeedModel<S>,
        exits: Vec<(usize, S)>,
        name: impl Into<String>,
    ) -> Result<Self, ConfigError> {
        if exits.is_empty() {
            return Err(ConfigError::NoExits);
        }
        let total = geom.total();
        let mut exit_mask = vec![false; total];
        for &(index, _) in &exits {
            if index >= total {
                return Err(ConfigError::ExitOutOfRange { index, total });
            }
            exit_mask[index] = true;
        }
        let side = geom.side();
        let mut speeds = Vec::with_capacity(total);
        for k in 0..side {
            for j in 0..side {
                for i in 0..side {
                    let f = speed_model.speed(geom.position(i, j, k));
                    if f <= S::zero() || f.is_nan() {
                        return Err(ConfigError::NonPositiveSpeed {
                            index: geom.linear_index(i, j, k),
                            speed: f.to_f64().unwrap_or(f64::NAN),
                        });
                    }
                    speeds.push(f);
                }
            }
        }
        Ok(Problem {
            geom,
            speed_model,
            speeds,
            exits,
            exit_mask,
            name: name.into(),
        })
    }

    #[inline]
    pub fn geometry(&self) -> &GridGeometry {
        &self.geom
    }

    #[inline]
    pub fn speed_model(&self) -> &SpeedModel<S> {
        &self.speed_model
    }

    /// Speed at a gridpoint (precomputed).
    #[inline]
    pub fn speed_at(&self, index: usize) -> S {
        self.speeds[index]
    }

    #[inline]
    pub fn is_exit(&self, index: usize) -> bool {
        self.exit_mask[index]
    }

    #[inline]
    pub fn exits(&self) -> &[(usize, S)] {
        &self.exits
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

/// Optional overrides for the problem catalog.
#[derive(Clone, Debug, Default)]
pub struct ProblemParams {
    /// Cubes per side for `checkerboard` (default 11).
    pub checker_count: Option<usize>,
}

/// Builds a catalog problem with the single centered point source: `q = 0` at
/// the 8 gridpoints whose axis indices are `(n-1)/2` and `(n+1)/2` (`n` odd).
pub fn build_problem<S: Scalar>(
    key: &str,
    n: usize,
    params: &ProblemParams,
) -> Result<Problem<S>, ConfigError> {
    let geom = GridGeometry::new(n)?;
    if n.is_multiple_of(2) {
        return Err(ConfigError::EvenGridSide(n));
    }
    let speed_model = match key {
        "constant" => SpeedModel::Constant { value: S::one() },
        "sine20" => SpeedModel::SineProduct {
            base: S::one(),
            amplitude: cast(0.5),
            frequency: cast(20.0),
        },
        "sine2" => SpeedModel::SineProduct {
            base: S::one(),
            amplitude: cast(0.99),
            frequency: cast(2.0),
        },
        "checkerboard" => {
            let count = params.checker_count.unwrap_or(11);
            if count == 0 {
                return Err(ConfigError::InvalidCheckerCount(count));
            }
            SpeedModel::Checkerboard {
                count,
                fast: cast(2.0),
                slow: S::one(),
            }
        }
        "shellmaze" => SpeedModel::ShellMaze {
            slow: cast(0.001),
            thickness: cast(1.0 / 12.0),
            hole_width: cast(0.1),
        },
        other => return Err(ConfigError::UnknownProblem(other.to_string())),
    };
    let lo = (n - 1) / 2;
    let hi = lo + 1;
    let mut exits = Vec::with_capacity(8);
    for &k in &[lo, hi] {
        for &j in &[lo, hi] {
            for &i in &[lo, hi] {
                exits.push((geom.linear_index(i, j, k), S::zero()));
            }
        }
    }
    exits.sort_unstable_by_key(|&(idx, _)| idx);
    Problem::new(geom, speed_model, exits, key)
}

/// Mutable solve state shared by all solvers: the value field `V` and the
/// active flags used by the label-correcting methods.
///
/// Values are atomics so parallel workers can read across cell borders
/// without locks; on the serial paths the relaxed accesses compile to plain
/// loads and stores. Value stores use release ordering and the activation
/// flag protocol pairs release stores with an acquire swap, so a worker that
/// observes a flag also observes the value write that caused it.
pub struct SolverState<S: Scalar> {
    values: Vec<S::Atomic>,
    active: Vec<AtomicBool>,
}

impl<S: Scalar> SolverState<S> {
    /// State with `V = q` on exits, `+∞` elsewhere, all flags inactive.
    pub fn new(problem: &Problem<S>) -> Self {
        let total = problem.geometry().total();
        let mut values = Vec::with_capacity(total);
        for _ in 0..total {
            values.push(S::Atomic::new(S::infinity()));
        }
        let active = (0..total).map(|_| AtomicBool::new(false)).collect();
        let state: SolverState<S> = SolverState { values, active };
        for &(idx, q) in problem.exits() {
            state.values[idx].store(q, Ordering::Relaxed);
        }
        state
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn value(&self, index: usize) -> S {
        self.values[index].load(Ordering::Relaxed)
    }

    #[inline]
    pub(crate) fn store_value(&self, index: usize, value: S) {
        self.values[index].store(value, Ordering::Release);
    }

    #[inline]
    pub fn is_active(&self, index: usize) -> bool {
        self.active[index].load(Ordering::Relaxed)
    }

    /// Atomically consumes the active flag. The swap (rather than a load and
    /// a separate clear) means a concurrent activation can never be erased
    /// unseen, and acquire ordering makes the activating write visible to the
    /// recomputation that follows.
    #[inline]
    pub(crate) fn take_active(&self, index: usize) -> bool {
        self.active[index].swap(false, Ordering::Acquire)
    }

    #[inline]
    pub(crate) fn activate(&self, index: usize) {
        self.active[index].store(true, Ordering::Release);
    }

    /// Marks active exactly the non-exit neighbors of exit gridpoints (the
    /// label-correcting initialization).
    pub fn activate_exit_neighbors(&self, problem: &Problem<S>) {
        for &(idx, _) in problem.exits() {
            for nb in problem.geometry().neighbors(idx).iter() {
                if !problem.is_exit(nb) {
                    self.activate(nb);
                }
            }
        }
    }

    /// Snapshot of all values.
    pub fn values(&self) -> Vec<S> {
        self.values
            .iter()
            .map(|v| v.load(Ordering::Relaxed))
            .collect()
    }
}
