//! Benchmark, verification and convergence harness for the Eikonal solver
//! suite.
//!
//! Three entry points mirror the three CLI subcommands:
//!
//! * [`run_benchmark`] — run one (method, problem, n) configuration `reps`
//!   times on freshly initialized state, collect counters and wall times,
//!   and write a CSV report with one row per run plus median/min/max
//!   aggregate rows.
//! * [`verify_equivalence`] — solve one problem with several methods, check
//!   that every pair agrees in max norm over finite values, and check the
//!   upwind discretization residual of one designated solution.
//! * [`convergence_study`] — measure the L∞ error against the analytic
//!   arrival time of the constant-speed problem over a list of grid sizes
//!   and report the observed convergence orders.
//!
//! The harness itself is single-threaded: parallel solvers manage their own
//! workers, and only one solve runs at a time so wall-clock numbers are not
//! polluted by sibling solves.

use std::fmt;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, ensure, Context, Result};
use eikonal::{
    build_problem, solve_dfsm, solve_dlsm, solve_fmm, solve_fsm, solve_hcm, solve_lsm,
    solve_phcm, CellSolveOptions, CellValueHeuristic, DirectionalMinima, Problem64,
    ProblemParams, SolveOutput64, SolveStats,
};

/// The frozen CSV header. Columns that do not apply to a method are left
/// empty but never omitted.
pub const CSV_HEADER: &str =
    "method,problem,n,r,P,rep,wall_time_s,sweeps,heap_removals,gridpoint_updates,avs,overhead_frac";

/// Default max-norm tolerance for cross-method agreement.
pub const DEVIATION_TOL: f64 = 1e-12;

/// Default tolerance for the upwind discretization residual of a solution.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Problem keys accepted by the catalog, in canonical order.
pub const PROBLEM_KEYS: [&str; 5] = ["constant", "sine20", "sine2", "checkerboard", "shellmaze"];

/// Solver selector, by CLI key.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Fmm,
    Fsm,
    Lsm,
    Hcm,
    Phcm,
    Dfsm,
    Dlsm,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Fmm,
        Method::Fsm,
        Method::Lsm,
        Method::Hcm,
        Method::Phcm,
        Method::Dfsm,
        Method::Dlsm,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Method::Fmm => "fmm",
            Method::Fsm => "fsm",
            Method::Lsm => "lsm",
            Method::Hcm => "hcm",
            Method::Phcm => "phcm",
            Method::Dfsm => "dfsm",
            Method::Dlsm => "dlsm",
        }
    }

    pub fn parse(text: &str) -> Result<Method> {
        for m in Method::ALL {
            if m.key() == text {
                return Ok(m);
            }
        }
        bail!("unknown method {text:?} (expected fmm|fsm|lsm|hcm|phcm|dfsm|dlsm)")
    }

    /// Heap-cell methods take a cell width `r` and a key heuristic.
    pub fn takes_r(self) -> bool {
        matches!(self, Method::Hcm | Method::Phcm)
    }

    /// Parallel methods take a worker count `P`.
    pub fn takes_threads(self) -> bool {
        matches!(self, Method::Phcm | Method::Dfsm | Method::Dlsm)
    }

    /// Every iterative method takes a sweep-convergence threshold `κ`; fast
    /// marching terminates by heap exhaustion and takes none.
    pub fn takes_kappa(self) -> bool {
        !matches!(self, Method::Fmm)
    }

    /// Methods that count heap removals (gridpoint or cell pops).
    pub fn counts_removals(self) -> bool {
        matches!(self, Method::Fmm | Method::Hcm | Method::Phcm)
    }

    /// Methods whose `sweeps` counter is meaningful.
    pub fn counts_sweeps(self) -> bool {
        !matches!(self, Method::Fmm)
    }
}

/// A fully resolved method invocation: the solver plus its parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MethodSpec {
    pub method: Method,
    /// Gridpoints per cell side (heap-cell methods).
    pub r: usize,
    /// Worker count (parallel methods).
    pub threads: usize,
    /// Sweep-convergence threshold; 0 demands an exactly unchanged sweep.
    pub kappa: f64,
    /// Cell-key heuristic (heap-cell methods).
    pub heuristic: CellValueHeuristic,
}

impl MethodSpec {
    /// A spec with the defaults `r = 8`, `P = 4`, `κ = 0`, min-inflow keys.
    pub fn new(method: Method) -> Self {
        MethodSpec {
            method,
            r: 8,
            threads: 4,
            kappa: 0.0,
            heuristic: CellValueHeuristic::MinInflow,
        }
    }

    /// Parses the compact form `name` or `name(key=value,...)` with keys
    /// `r`, `P`, `kappa` and `heuristic`, e.g. `phcm(r=8,P=4)`. Keys that do
    /// not apply to the method are rejected; omitted keys take the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let (name, args) = match text.find('(') {
            None => (text, None),
            Some(open) => {
                ensure!(
                    text.ends_with(')'),
                    "unbalanced parentheses in method spec {text:?}"
                );
                (&text[..open], Some(&text[open + 1..text.len() - 1]))
            }
        };
        let mut spec = MethodSpec::new(Method::parse(name.trim())?);
        let key = spec.method.key();
        for part in args
            .unwrap_or("")
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
        {
            let (k, v) = part
                .split_once('=')
                .with_context(|| format!("expected key=value in method spec, got {part:?}"))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "r" => {
                    ensure!(spec.method.takes_r(), "method {key} takes no cell width r");
                    spec.r = v.parse().with_context(|| format!("bad r value {v:?}"))?;
                }
                "P" | "p" => {
                    ensure!(
                        spec.method.takes_threads(),
                        "method {key} takes no worker count P"
                    );
                    spec.threads = v.parse().with_context(|| format!("bad P value {v:?}"))?;
                }
                "kappa" => {
                    ensure!(spec.method.takes_kappa(), "method {key} takes no kappa");
                    spec.kappa = v.parse().with_context(|| format!("bad kappa value {v:?}"))?;
                }
                "heuristic" => {
                    ensure!(
                        spec.method.takes_r(),
                        "method {key} takes no cell-key heuristic"
                    );
                    spec.heuristic = parse_heuristic(v)?;
                }
                _ => bail!("unknown key {k:?} in method spec {text:?}"),
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.method.takes_r() {
            ensure!(self.r >= 1, "cell width r must be at least 1");
        }
        if self.method.takes_threads() {
            ensure!(self.threads >= 1, "worker count P must be at least 1");
        }
        ensure!(
            self.kappa >= 0.0 && self.kappa.is_finite(),
            "kappa must be finite and non-negative"
        );
        Ok(())
    }

    /// Runs the solver once on a freshly initialized state.
    pub fn solve(&self, problem: &Problem64) -> Result<SolveOutput64> {
        let out = match self.method {
            Method::Fmm => solve_fmm(problem),
            Method::Fsm => solve_fsm(problem, self.kappa),
            Method::Lsm => solve_lsm(problem, self.kappa),
            Method::Hcm => solve_hcm(problem, &self.cell_options()),
            Method::Phcm => solve_phcm(problem, &self.cell_options(), self.threads),
            Method::Dfsm => solve_dfsm(problem, self.kappa, self.threads),
            Method::Dlsm => solve_dlsm(problem, self.kappa, self.threads),
        };
        Ok(out?)
    }

    fn cell_options(&self) -> CellSolveOptions<f64> {
        CellSolveOptions {
            cell_width: self.r,
            kappa: self.kappa,
            heuristic: self.heuristic,
        }
    }
}

impl fmt::Display for MethodSpec {
    /// Canonical compact form: every applicable parameter is printed except
    /// the defaults `kappa = 0` and the min-inflow heuristic.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.method.takes_r() {
            parts.push(format!("r={}", self.r));
        }
        if self.method.takes_threads() {
            parts.push(format!("P={}", self.threads));
        }
        if self.method.takes_kappa() && self.kappa != 0.0 {
            parts.push(format!("kappa={}", self.kappa));
        }
        if self.method.takes_r() && self.heuristic == CellValueHeuristic::Legacy {
            parts.push("heuristic=legacy".to_string());
        }
        if parts.is_empty() {
            write!(f, "{}", self.method.key())
        } else {
            write!(f, "{}({})", self.method.key(), parts.join(","))
        }
    }
}

pub fn parse_heuristic(text: &str) -> Result<CellValueHeuristic> {
    match text {
        "min-inflow" => Ok(CellValueHeuristic::MinInflow),
        "legacy" => Ok(CellValueHeuristic::Legacy),
        _ => bail!("unknown heuristic {text:?} (expected min-inflow|legacy)"),
    }
}

/// Splits `fmm,phcm(r=8,P=4),lsm` on the commas outside parentheses; empty
/// segments (stray or trailing commas) are dropped.
pub fn split_method_list(text: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut current = String::new();
    for ch in text.chars() {
        match ch {
            '(' => {
                depth += 1;
                current.push(ch);
            }
            ')' => {
                ensure!(depth > 0, "unbalanced ')' in method list {text:?}");
                depth -= 1;
                current.push(ch);
            }
            ',' if depth == 0 => {
                if !current.trim().is_empty() {
                    out.push(current.trim().to_string());
                }
                current.clear();
            }
            _ => current.push(ch),
        }
    }
    ensure!(depth == 0, "unbalanced '(' in method list {text:?}");
    if !current.trim().is_empty() {
        out.push(current.trim().to_string());
    }
    Ok(out)
}

/// One benchmark configuration: a method on a problem, repeated.
#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub spec: MethodSpec,
    pub problem: String,
    pub n: usize,
    pub params: ProblemParams,
    /// Repetition count for the median/min/max aggregates.
    pub reps: usize,
    /// Offset for the `rep` labels, so separate invocations can be
    /// concatenated without colliding rows.
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Also check the first run's discretization residual.
    pub verify: bool,
}

impl BenchConfig {
    pub fn new(spec: MethodSpec, problem: impl Into<String>, n: usize) -> Self {
        BenchConfig {
            spec,
            problem: problem.into(),
            n,
            params: ProblemParams::default(),
            reps: 1,
            seed: 0,
            out: None,
            verify: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.reps >= 1, "reps must be at least 1");
        self.spec.validate()
    }
}

/// One CSV row: a single run or an aggregate over the repetitions. Numeric
/// fields are `None` where the column does not apply to the method.
#[derive(Clone, Debug)]
pub struct BenchRow {
    pub method: String,
    pub problem: String,
    pub n: usize,
    pub r: Option<u64>,
    pub threads: Option<u64>,
    /// Run label (`seed + rep index`) or `median`/`min`/`max`.
    pub rep: String,
    pub wall_time_s: f64,
    pub sweeps: Option<f64>,
    pub heap_removals: Option<f64>,
    pub gridpoint_updates: f64,
    pub avs: Option<f64>,
    pub overhead_frac: Option<f64>,
}

impl BenchRow {
    fn from_stats(config: &BenchConfig, rep: String, stats: &SolveStats) -> Self {
        let spec = &config.spec;
        BenchRow {
            method: spec.method.key().to_string(),
            problem: config.problem.clone(),
            n: config.n,
            r: spec.method.takes_r().then_some(spec.r as u64),
            threads: spec.method.takes_threads().then_some(spec.threads as u64),
            rep,
            wall_time_s: stats.wall_seconds,
            sweeps: spec.method.counts_sweeps().then_some(stats.sweeps as f64),
            heap_removals: spec
                .method
                .counts_removals()
                .then_some(stats.heap_removals as f64),
            gridpoint_updates: stats.gridpoint_updates as f64,
            avs: stats.avs(),
            overhead_frac: stats.overhead_fraction(),
        }
    }

    fn to_csv(&self) -> String {
        let cells = [
            self.method.clone(),
            self.problem.clone(),
            self.n.to_string(),
            self.r.map(|v| v.to_string()).unwrap_or_default(),
            self.threads.map(|v| v.to_string()).unwrap_or_default(),
            self.rep.clone(),
            format_number(self.wall_time_s),
            self.sweeps.map(format_number).unwrap_or_default(),
            self.heap_removals.map(format_number).unwrap_or_default(),
            format_number(self.gridpoint_updates),
            self.avs.map(format_number).unwrap_or_default(),
            self.overhead_frac.map(format_number).unwrap_or_default(),
        ];
        cells.join(",")
    }
}

/// Shortest-roundtrip decimal rendering, without a trailing `.0` on whole
/// numbers so counter columns read as integers.
pub fn format_number(v: f64) -> String {
    if v == v.trunc() && v.abs() < 9.0e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Per-run rows, aggregate rows, and the optional residual check.
#[derive(Clone, Debug)]
pub struct BenchReport {
    pub runs: Vec<BenchRow>,
    pub aggregates: Vec<BenchRow>,
    /// `(max residual, worst gridpoint)` of the first run, when requested.
    pub residual: Option<(f64, usize)>,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in self.runs.iter().chain(self.aggregates.iter()) {
            out.push_str(&row.to_csv());
            out.push('\n');
        }
        out
    }
}

fn median_of(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("aggregates are never NaN"));
    let mid = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[mid]
    } else {
        0.5 * (xs[mid - 1] + xs[mid])
    }
}

fn min_of(xs: &[f64]) -> f64 {
    xs.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn max_of(xs: &[f64]) -> f64 {
    xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// Builds the `median`/`min`/`max` rows over exactly the per-run rows; a
/// column that is empty in the runs stays empty in the aggregates.
pub fn aggregate_rows(runs: &[BenchRow]) -> Vec<BenchRow> {
    assert!(!runs.is_empty());
    let template = &runs[0];
    let column = |get: &dyn Fn(&BenchRow) -> Option<f64>| -> Option<Vec<f64>> {
        runs.iter().map(get).collect()
    };
    let wall: Vec<f64> = runs.iter().map(|r| r.wall_time_s).collect();
    let updates: Vec<f64> = runs.iter().map(|r| r.gridpoint_updates).collect();
    let sweeps = column(&|r: &BenchRow| r.sweeps);
    let removals = column(&|r: &BenchRow| r.heap_removals);
    let avs = column(&|r: &BenchRow| r.avs);
    let overhead = column(&|r: &BenchRow| r.overhead_frac);
    let stat = |name: &str, pick: &dyn Fn(Vec<f64>) -> f64| BenchRow {
        rep: name.to_string(),
        wall_time_s: pick(wall.clone()),
        sweeps: sweeps.clone().map(&pick),
        heap_removals: removals.clone().map(&pick),
        gridpoint_updates: pick(updates.clone()),
        avs: avs.clone().map(&pick),
        overhead_frac: overhead.clone().map(&pick),
        ..template.clone()
    };
    vec![
        stat("median", &median_of),
        stat("min", &|xs| min_of(&xs)),
        stat("max", &|xs| max_of(&xs)),
    ]
}

/// Runs the configured solver `reps` times and writes the CSV report when an
/// output path is configured. Wall time is measured around the solve loop
/// only; problem construction and state initialization are excluded.
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchReport> {
    config.validate()?;
    let problem = build_problem::<f64>(&config.problem, config.n, &config.params)?;
    let mut runs = Vec::with_capacity(config.reps);
    let mut residual = None;
    for rep in 0..config.reps {
        let out = config.spec.solve(&problem)?;
        if config.verify && rep == 0 {
            residual = Some(max_upwind_residual(&problem, &out.values));
        }
        let label = (config.seed + rep as u64).to_string();
        runs.push(BenchRow::from_stats(config, label, &out.stats));
    }
    let aggregates = aggregate_rows(&runs);
    let report = BenchReport {
        runs,
        aggregates,
        residual,
    };
    if let Some(path) = &config.out {
        fs::write(path, report.to_csv())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(report)
}

/// Largest upwind-discretization residual over finite non-exit gridpoints,
/// with the per-axis minima gathered from `values`; returns the worst value
/// and where it occurs. A point that is finite while all its neighbors are
/// infinite yields an infinite residual.
pub fn max_upwind_residual(problem: &Problem64, values: &[f64]) -> (f64, usize) {
    let geom = problem.geometry();
    let h = geom.spacing::<f64>();
    let mut worst = (0.0f64, 0usize);
    for idx in 0..geom.total() {
        if problem.is_exit(idx) || !values[idx].is_finite() {
            continue;
        }
        let mut m = [f64::INFINITY; 3];
        for (axis, pair) in geom.neighbors(idx).per_axis.iter().enumerate() {
            for nb in pair.iter().flatten() {
                m[axis] = m[axis].min(values[*nb]);
            }
        }
        let r = eikonal::upwind_residual(values[idx], &DirectionalMinima { m }, problem.speed_at(idx), h);
        if r > worst.0 {
            worst = (r, idx);
        }
    }
    worst
}

/// Max-norm difference over gridpoints where both values are finite; a point
/// finite in one solution and infinite in the other counts as an infinite
/// deviation. Returns the worst value and where it occurs.
pub fn max_abs_deviation(a: &[f64], b: &[f64]) -> (f64, usize) {
    assert_eq!(a.len(), b.len());
    let mut worst = (0.0f64, 0usize);
    for (idx, (x, y)) in a.iter().zip(b.iter()).enumerate() {
        let d = if x.is_finite() != y.is_finite() {
            f64::INFINITY
        } else if x.is_finite() {
            (x - y).abs()
        } else {
            0.0
        };
        if d > worst.0 {
            worst = (d, idx);
        }
    }
    worst
}

/// Outcome of a cross-method verification run.
#[derive(Clone, Debug)]
pub struct VerifyReport {
    /// Printable method labels, in input order.
    pub labels: Vec<String>,
    pub max_deviation: f64,
    /// Indices into `labels` of the worst-deviating pair.
    pub worst_pair: (usize, usize),
    /// Gridpoint of the worst deviation.
    pub worst_point: usize,
    pub tolerance: f64,
    /// Residual of the first (designated) solution.
    pub max_residual: f64,
    pub worst_residual_point: usize,
    pub residual_tolerance: f64,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.max_deviation <= self.tolerance && self.max_residual <= self.residual_tolerance
    }

    /// Human-readable multi-line summary ending in `PASS` or `FAIL`.
    pub fn render(&self, problem: &Problem64) -> String {
        let coords = |idx: usize| {
            let (i, j, k) = problem.geometry().grid_coords(idx);
            format!("({i},{j},{k})")
        };
        let dev_ok = self.max_deviation <= self.tolerance;
        let res_ok = self.max_residual <= self.residual_tolerance;
        let mut out = String::new();
        out.push_str(&format!(
            "max pairwise deviation {:e} between {} and {} at gridpoint {} (tolerance {:e}): {}\n",
            self.max_deviation,
            self.labels[self.worst_pair.0],
            self.labels[self.worst_pair.1],
            coords(self.worst_point),
            self.tolerance,
            if dev_ok { "ok" } else { "FAIL" },
        ));
        out.push_str(&format!(
            "max residual of {} solution {:e} at gridpoint {} (tolerance {:e}): {}\n",
            self.labels[0],
            self.max_residual,
            coords(self.worst_residual_point),
            self.residual_tolerance,
            if res_ok { "ok" } else { "FAIL" },
        ));
        out.push_str(if self.passed() { "PASS" } else { "FAIL" });
        out
    }
}

/// Compares already-computed solutions pairwise and checks the residual of
/// the first one. Factored out of [`verify_equivalence`] so corrupted
/// solutions can be fed in as test doubles.
pub fn compare_solutions(
    problem: &Problem64,
    labeled: &[(String, Vec<f64>)],
    tolerance: f64,
    residual_tolerance: f64,
) -> Result<VerifyReport> {
    ensure!(labeled.len() >= 2, "verification needs at least two methods");
    let mut report = VerifyReport {
        labels: labeled.iter().map(|(l, _)| l.clone()).collect(),
        max_deviation: 0.0,
        worst_pair: (0, 1),
        worst_point: 0,
        tolerance,
        max_residual: 0.0,
        worst_residual_point: 0,
        residual_tolerance,
    };
    for a in 0..labeled.len() {
        for b in a + 1..labeled.len() {
            let (d, at) = max_abs_deviation(&labeled[a].1, &labeled[b].1);
            if d > report.max_deviation {
                report.max_deviation = d;
                report.worst_pair = (a, b);
                report.worst_point = at;
            }
        }
    }
    let (res, at) = max_upwind_residual(problem, &labeled[0].1);
    report.max_residual = res;
    report.worst_residual_point = at;
    Ok(report)
}

/// Solves `problem` with every spec and verifies pairwise agreement within
/// `tolerance` plus the discretization residual of the first solution.
pub fn verify_equivalence(
    problem: &Problem64,
    specs: &[MethodSpec],
    tolerance: f64,
    residual_tolerance: f64,
) -> Result<VerifyReport> {
    ensure!(specs.len() >= 2, "verification needs at least two methods");
    let mut labeled = Vec::with_capacity(specs.len());
    for spec in specs {
        let out = spec
            .solve(problem)
            .with_context(|| format!("running {spec}"))?;
        labeled.push((spec.to_string(), out.values));
    }
    compare_solutions(problem, &labeled, tolerance, residual_tolerance)
}

/// One line of a convergence table.
#[derive(Clone, Copy, Debug)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    pub linf_error: f64,
    /// `log2(e(2h)/e(h))`, present from the second row on.
    pub order: Option<f64>,
}

/// L∞ distance between `values` and the analytic arrival time under uniform
/// speed, `u(x) = min over exits (q + |x - e| / F)`, excluding the exit
/// gridpoints themselves (whose values are prescribed, not computed). Only
/// meaningful when the speed really is uniform, as in the constant problem.
///
/// The error is measured against the arrival time from the actual discrete
/// exit set, not from an idealized center point: the centered source is
/// realized as 8 zero-value exits half a spacing off the center, and using
/// the center instead would fold that O(h) offset into the error and distort
/// observed convergence orders.
pub fn linf_error_vs_exact_arrival(problem: &Problem64, values: &[f64]) -> f64 {
    let geom = problem.geometry();
    let speed = problem.speed_at(0);
    let exits: Vec<([f64; 3], f64)> = problem
        .exits()
        .iter()
        .map(|&(idx, q)| {
            let (i, j, k) = geom.grid_coords(idx);
            (geom.position(i, j, k), q)
        })
        .collect();
    let mut err = 0.0f64;
    for (idx, &value) in values.iter().enumerate() {
        if problem.is_exit(idx) {
            continue;
        }
        let (i, j, k) = geom.grid_coords(idx);
        let p: [f64; 3] = geom.position(i, j, k);
        let exact = exits
            .iter()
            .map(|(e, q)| {
                let dist = ((p[0] - e[0]).powi(2) + (p[1] - e[1]).powi(2)
                    + (p[2] - e[2]).powi(2))
                .sqrt();
                q + dist / speed
            })
            .fold(f64::INFINITY, f64::min);
        err = err.max((value - exact).abs());
    }
    err
}

/// Runs `spec` on the constant-speed problem for each grid size and measures
/// the L∞ error against the analytic arrival time; the observed order
/// `log2(e(2h)/e(h))` is attached to each row after the first.
pub fn convergence_study(
    spec: &MethodSpec,
    problem_key: &str,
    ns: &[usize],
) -> Result<Vec<ConvergenceRow>> {
    ensure!(
        problem_key == "constant",
        "convergence study needs the analytic solution of the constant problem, \
         which {problem_key:?} does not have"
    );
    ensure!(!ns.is_empty(), "empty grid-size list");
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(ns.len());
    for &n in ns {
        let problem = build_problem::<f64>("constant", n, &ProblemParams::default())?;
        let out = spec.solve(&problem)?;
        let err = linf_error_vs_exact_arrival(&problem, &out.values);
        let order = rows.last().map(|prev| (prev.linf_error / err).log2());
        rows.push(ConvergenceRow {
            n,
            h: problem.geometry().spacing::<f64>(),
            linf_error: err,
            order,
        });
    }
    Ok(rows)
}

/// Plot-ready CSV rendering of a convergence table, header included.
pub fn render_convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from("n,h,linf_error,order\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.n,
            format_number(row.h),
            format_number(row.linf_error),
            row.order.map(format_number).unwrap_or_default(),
        ));
    }
    out
}
