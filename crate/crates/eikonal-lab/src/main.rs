//! Command-line front end: `run` benchmarks one solver configuration,
//! `verify` cross-checks several solvers on one problem, and `convergence`
//! measures the discretization error against the analytic solution.
//!
//! Exit status: 0 on success or verification pass, 1 on verification
//! failure, 2 on configuration or I/O errors (clap uses 2 for usage errors
//! as well).

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{ensure, Result};
use clap::{Args, Parser, Subcommand};
use eikonal::{build_problem, ProblemParams};
use eikonal_lab::{
    convergence_study, parse_heuristic, render_convergence_csv, run_benchmark,
    split_method_list, verify_equivalence, BenchConfig, Method, MethodSpec, DEVIATION_TOL,
    RESIDUAL_TOL,
};

/// Benchmarks, cross-solver verification and convergence studies for the
/// Eikonal solver suite.
#[derive(Parser)]
#[command(name = "eikonal-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time one solver on one problem and write a CSV report.
    Run(RunArgs),
    /// Solve one problem with several methods and check they agree.
    Verify(VerifyArgs),
    /// Measure the L∞ error against the analytic constant-speed solution.
    Convergence(ConvergenceArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Solver: fmm | fsm | lsm | hcm | phcm | dfsm | dlsm.
    #[arg(long)]
    method: String,
    /// Problem: constant | sine20 | sine2 | checkerboard | shellmaze.
    #[arg(long)]
    problem: String,
    /// Grid refinement M; the grid has (M+1)³ points and M must be odd.
    #[arg(long)]
    n: usize,
    /// Cell width r (heap-cell methods only; default 8).
    #[arg(long)]
    r: Option<usize>,
    /// Worker count P (parallel methods only; default 4).
    #[arg(long)]
    threads: Option<usize>,
    /// Sweep-convergence threshold κ (iterative methods; default 0 = exact).
    #[arg(long)]
    kappa: Option<f64>,
    /// Cell-key heuristic: min-inflow | legacy (heap-cell methods only).
    #[arg(long)]
    heuristic: Option<String>,
    /// Repetition count for the median/min/max aggregate rows.
    #[arg(long, default_value_t = 1)]
    reps: usize,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Offset for the rep labels (lets separate runs be concatenated).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cubes per side for the checkerboard problem (default 11).
    #[arg(long)]
    checker_count: Option<usize>,
    /// Also check the computed solution's discretization residual.
    #[arg(long)]
    verify: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Problem: constant | sine20 | sine2 | checkerboard | shellmaze.
    #[arg(long)]
    problem: String,
    /// Grid refinement M (odd).
    #[arg(long)]
    n: usize,
    /// Comma-separated method specs, e.g. "fmm,lsm,hcm(r=8),phcm(r=8,P=4)".
    #[arg(long)]
    methods: String,
    /// Max-norm agreement tolerance.
    #[arg(long, default_value_t = DEVIATION_TOL)]
    tol: f64,
    /// Discretization-residual tolerance for the first method's solution.
    #[arg(long, default_value_t = RESIDUAL_TOL)]
    residual_tol: f64,
    /// Cubes per side for the checkerboard problem (default 11).
    #[arg(long)]
    checker_count: Option<usize>,
}

#[derive(Args)]
struct ConvergenceArgs {
    /// Comma-separated grid refinements, e.g. 31,63,127.
    #[arg(long = "n-list", value_delimiter = ',', required = true)]
    n_list: Vec<usize>,
    /// Solver to study; accepts the compact spec form, e.g. hcm(r=8).
    #[arg(long, default_value = "fmm")]
    method: String,
    /// Problem key; must have an analytic solution (only "constant").
    #[arg(long, default_value = "constant")]
    problem: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(args) => run(args),
        Command::Verify(args) => verify(args),
        Command::Convergence(args) => convergence(args),
    }
}

/// Builds a fully resolved spec from the individual CLI flags, rejecting
/// parameters that do not apply to the chosen method.
fn build_spec(
    method: &str,
    r: Option<usize>,
    threads: Option<usize>,
    kappa: Option<f64>,
    heuristic: Option<&str>,
) -> Result<MethodSpec> {
    let method = Method::parse(method)?;
    let mut spec = MethodSpec::new(method);
    if let Some(r) = r {
        ensure!(
            method.takes_r(),
            "--r applies to hcm|phcm, not {}",
            method.key()
        );
        spec.r = r;
    }
    if let Some(threads) = threads {
        ensure!(
            method.takes_threads(),
            "--threads applies to phcm|dfsm|dlsm, not {}",
            method.key()
        );
        spec.threads = threads;
    }
    if let Some(kappa) = kappa {
        ensure!(
            method.takes_kappa(),
            "--kappa does not apply to fmm (it terminates by heap exhaustion)"
        );
        spec.kappa = kappa;
    }
    if let Some(heuristic) = heuristic {
        ensure!(
            method.takes_r(),
            "--heuristic applies to hcm|phcm, not {}",
            method.key()
        );
        spec.heuristic = parse_heuristic(heuristic)?;
    }
    spec.validate()?;
    Ok(spec)
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let spec = build_spec(
        &args.method,
        args.r,
        args.threads,
        args.kappa,
        args.heuristic.as_deref(),
    )?;
    let config = BenchConfig {
        spec,
        problem: args.problem,
        n: args.n,
        params: ProblemParams {
            checker_count: args.checker_count,
        },
        reps: args.reps,
        seed: args.seed,
        out: Some(args.out.clone()),
        verify: args.verify,
    };
    let report = run_benchmark(&config)?;
    let median = &report.aggregates[0];
    println!(
        "wrote {} ({} runs + median/min/max); {} {} n={}: median wall {:.6}s",
        args.out.display(),
        report.runs.len(),
        median.method,
        median.problem,
        median.n,
        median.wall_time_s,
    );
    if let Some((residual, at)) = report.residual {
        let (i, j, k) = build_problem::<f64>(&config.problem, config.n, &config.params)?
            .geometry()
            .grid_coords(at);
        let ok = residual <= RESIDUAL_TOL;
        println!(
            "residual check: max {residual:e} at gridpoint ({i},{j},{k}) (tolerance {RESIDUAL_TOL:e}): {}",
            if ok { "PASS" } else { "FAIL" },
        );
        if !ok {
            return Ok(ExitCode::from(1));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(args: VerifyArgs) -> Result<ExitCode> {
    let entries = split_method_list(&args.methods)?;
    ensure!(
        entries.len() >= 2,
        "verification needs at least two methods, got {:?}",
        args.methods
    );
    let specs = entries
        .iter()
        .map(|e| MethodSpec::parse(e))
        .collect::<Result<Vec<_>>>()?;
    let params = ProblemParams {
        checker_count: args.checker_count,
    };
    let problem = build_problem::<f64>(&args.problem, args.n, &params)?;
    let report = verify_equivalence(&problem, &specs, args.tol, args.residual_tol)?;
    println!(
        "verify {} n={} with {} methods",
        args.problem,
        args.n,
        specs.len()
    );
    println!("{}", report.render(&problem));
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn convergence(args: ConvergenceArgs) -> Result<ExitCode> {
    let spec = MethodSpec::parse(&args.method)?;
    let rows = convergence_study(&spec, &args.problem, &args.n_list)?;
    print!("{}", render_convergence_csv(&rows));
    Ok(ExitCode::SUCCESS)
}
