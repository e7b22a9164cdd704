//! The `hvolterra` command line: argument parsing, reports and exit codes.
//!
//! Exit codes: 0 success, 1 invalid input, 2 separation check failed under
//! `--require-h7`, 3 the iteration did not converge.

pub mod problem_file;

use crate::contraction::{
    find_mu, majorant_bounds, majorant_limits, ContractionMatrix, MuCriterion, MuSearch, ScheduleCounts,
    DEFAULT_MU_MAX, DEFAULT_MU_MIN,
};
use crate::hybrid_operator::{jump_at, HybridProblem, SolutionTriple};
use crate::kernel_lang::{KernelExpr, LipschitzSet, DEFAULT_SAFETY_FACTOR};
use crate::piecewise::{PiecewiseFn, Point};
use crate::schedule::{solve_sigma_roots, DEFAULT_ROOT_TOL, DEFAULT_SCAN_GRID};
use crate::series::series_contraction_coefficient;
use crate::solvers::{picard_solve, segment_solve, SolveReport, SolverOptions};
use clap::{Parser, Subcommand, ValueEnum};
use problem_file::{FileError, ProblemFile, SeriesFile};
use serde_json::{json, Value};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID_INPUT: i32 = 1;
pub const EXIT_H7_VIOLATION: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

/// Environment variable seeding the sampled Lipschitz estimates.
pub const SEED_ENV: &str = "HV_SEED";
/// Half-width of the state box used when estimating Lipschitz constants.
pub const DEFAULT_STATE_RANGE: f64 = 10.0;
pub const DEFAULT_LIPSCHITZ_SAMPLES: usize = 2000;

/// Modelling choices every report states explicitly.
pub const INTERPRETATIONS: &[&str] = &[
    "impulse counts in the contraction bounds are the numbers of fixed (N_tau) and moving (N_sigma) impulse times",
    "the contraction bounds assume the separation hypothesis and delay-type moving times (sigma_i(t) <= t)",
    "the separation check samples a grid: a pass means verified on that grid, not proven",
    "impulse membership tests are strict; one-sided limits are taken at an offset of 1e-10",
    "moving-time values are clamped to [0, T] before the state is evaluated there",
    "the mixed kernel g receives the moving-state value beta_i(s) at the integration variable",
];

#[derive(Debug, Parser)]
#[command(name = "hvolterra", version, about = "Solver for hybrid Volterra integral equations with fixed and moving impulses")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Picard,
    Segment,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a hybrid problem; writes the solution CSV to --out (or stdout).
    Solve {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "picard")]
        method: Method,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Refuse to solve unless the separation check passes.
        #[arg(long)]
        require_h7: bool,
        #[arg(long, default_value_t = DEFAULT_SCAN_GRID)]
        h7_grid: usize,
    },
    /// Roots, breakpoints, separation check, Lipschitz constants and the
    /// contraction analysis of a hybrid problem, as JSON.
    Analyze {
        file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_STATE_RANGE)]
        state_range: f64,
        #[arg(long, default_value_t = DEFAULT_LIPSCHITZ_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = DEFAULT_SCAN_GRID)]
        h7_grid: usize,
    },
    /// Solve a truncated multiple-integral series problem.
    SeriesSolve {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Allow truncation orders above the default limit.
        #[arg(long)]
        allow_high_order: bool,
    },
    /// Solve at several resolutions and report errors and observed ratios.
    ConvergenceReport {
        file: PathBuf,
        /// Panels per segment, e.g. 32,64,128.
        #[arg(long, value_delimiter = ',', required = true)]
        resolutions: Vec<usize>,
        #[arg(long, value_enum, default_value = "picard")]
        method: Method,
    },
    /// Roots of sigma_i(t) = t and the breakpoint partition.
    Roots {
        file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SCAN_GRID)]
        grid: usize,
        #[arg(long, default_value_t = DEFAULT_ROOT_TOL)]
        tol: f64,
    },
    /// Invariants, criterion quantities and eigenvalues of a 3x3 matrix
    /// given as nine numbers in row-major order.
    CheckMatrix {
        #[arg(num_args = 9, required = true, allow_negative_numbers = true)]
        entries: Vec<f64>,
    },
}

/// A failure carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn invalid(e: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_INVALID_INPUT,
            message: e.to_string(),
        }
    }
}

impl From<FileError> for Failure {
    fn from(e: FileError) -> Self {
        Failure::invalid(e)
    }
}

/// Parse `args` (including the program name), run the command and return
/// the process exit code. Normal output goes to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_INVALID_INPUT
                }
            };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    match cmd {
        Command::Solve {
            file,
            method,
            out: csv,
            report,
            require_h7,
            h7_grid,
        } => cmd_solve(&file, method, csv.as_deref(), report.as_deref(), require_h7, h7_grid, out, err),
        Command::Analyze {
            file,
            state_range,
            samples,
            h7_grid,
        } => cmd_analyze(&file, state_range, samples, h7_grid, out),
        Command::SeriesSolve {
            file,
            out: csv,
            report,
            allow_high_order,
        } => cmd_series(&file, csv.as_deref(), report.as_deref(), allow_high_order, out, err),
        Command::ConvergenceReport {
            file,
            resolutions,
            method,
        } => cmd_convergence(&file, &resolutions, method, out),
        Command::Roots { file, grid, tol } => cmd_roots(&file, grid, tol, out),
        Command::CheckMatrix { entries } => {
            let v: [f64; 9] = entries.try_into().map_err(|_| Failure::invalid("expected nine numbers"))?;
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Failure::invalid("matrix entries must be finite"));
            }
            emit(out, &matrix_summary(&ContractionMatrix::from_row_major(&v)))?;
            Ok(EXIT_OK)
        }
    }
}

fn emit(out: &mut dyn Write, v: &Value) -> Result<(), Failure> {
    let s = serde_json::to_string_pretty(v).map_err(Failure::invalid)?;
    writeln!(out, "{s}").map_err(Failure::invalid)
}

fn write_json(path: &Path, v: &Value) -> Result<(), Failure> {
    let s = serde_json::to_string_pretty(v).map_err(Failure::invalid)?;
    std::fs::write(path, s + "\n").map_err(|e| Failure::invalid(format!("cannot write {}: {e}", path.display())))
}

fn write_csv(path: Option<&Path>, x: &PiecewiseFn, out: &mut dyn Write) -> Result<(), Failure> {
    match path {
        Some(path) => {
            let f = std::fs::File::create(path)
                .map_err(|e| Failure::invalid(format!("cannot write {}: {e}", path.display())))?;
            x.write_csv(std::io::BufWriter::new(f)).map_err(Failure::invalid)
        }
        None => x.write_csv(out).map_err(Failure::invalid),
    }
}

fn matrix_summary(a: &ContractionMatrix) -> Value {
    json!({
        "matrix": a.a,
        "invariants": a.invariants(),
        "criterion": a.criterion(),
        "eigen": a.eigen(),
    })
}

fn contraction_at(lip: &LipschitzSet, counts: &ScheduleCounts, mu: f64) -> Value {
    match majorant_bounds(lip, counts, mu) {
        Ok(a) => {
            let mut v = matrix_summary(&a);
            v["mu"] = json!(mu);
            v
        }
        Err(e) => json!({ "mu": mu, "error": e.to_string() }),
    }
}

fn seed_from_env() -> Result<u64, Failure> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| Failure::invalid(format!("{SEED_ENV} must be an unsigned integer, got '{s}'"))),
        Err(_) => Ok(0),
    }
}

fn run_method(p: &HybridProblem, method: Method, opts: &SolverOptions) -> Result<(SolutionTriple, SolveReport), Failure> {
    match method {
        Method::Picard => picard_solve(p, None, opts),
        Method::Segment => segment_solve(p, opts),
    }
    .map_err(Failure::invalid)
}

fn schedule_summary(p: &HybridProblem) -> Value {
    let s = p.schedule();
    json!({
        "horizon": s.horizon(),
        "tau": s.tau(),
        "sigma": s.sigma().iter().map(KernelExpr::source).collect::<Vec<_>>(),
        "h": s.h(),
        "roots": s.rho(),
        "breakpoints": s.breakpoints().set,
        "partition": s.partition(),
    })
}

fn jump_table(p: &HybridProblem, v: &SolutionTriple) -> Result<Value, Failure> {
    let part = p.schedule().partition();
    let mut rows = Vec::new();
    for &alpha in &part[1..part.len() - 1] {
        let jump = jump_at(p, v, alpha).map_err(Failure::invalid)?;
        let observed = v.xi.eval_right(alpha).map_err(Failure::invalid)? - v.xi.eval_left(alpha).map_err(Failure::invalid)?;
        rows.push(json!({ "alpha": alpha, "jump": jump, "observed": observed }));
    }
    Ok(Value::Array(rows))
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve(
    file: &Path,
    method: Method,
    csv: Option<&Path>,
    report: Option<&Path>,
    require_h7: bool,
    h7_grid: usize,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    let pf = ProblemFile::load(file)?;
    let p = pf.build(None)?;
    let h7 = p.schedule().check_h7(h7_grid).map_err(Failure::invalid)?;
    if require_h7 && !h7.satisfied {
        return Err(Failure {
            code: EXIT_H7_VIOLATION,
            message: format!("separation hypothesis {}", h7.verdict()),
        });
    }
    let opts = pf.solver_options();
    let (v, rep) = run_method(&p, method, &opts)?;
    write_csv(csv, &v.xi, out)?;
    if let Some(path) = report {
        let contraction = match p.lipschitz() {
            Some(lip) if rep.mu > 0.0 => contraction_at(lip, &ScheduleCounts::from(p.schedule()), rep.mu),
            Some(_) => json!({ "note": "weight is zero; no matrix" }),
            None => json!({ "note": "no Lipschitz constants declared; run analyze to estimate them" }),
        };
        let doc = json!({
            "solver": rep,
            "panels": p.grid().panels(),
            "schedule": schedule_summary(&p),
            "jumps": jump_table(&p, &v)?,
            "h7": { "report": h7, "verdict": h7.verdict() },
            "contraction": contraction,
            "interpretations": INTERPRETATIONS,
        });
        write_json(path, &doc)?;
    }
    let _ = writeln!(
        err,
        "{}: {} after {} iterations, residual {:.3e}, mu {} ({:?})",
        rep.method,
        if rep.converged { "converged" } else { "NOT converged" },
        rep.iterations,
        rep.residual,
        rep.mu,
        rep.mu_source
    );
    Ok(if rep.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn cmd_analyze(file: &Path, state_range: f64, samples: usize, h7_grid: usize, out: &mut dyn Write) -> Result<i32, Failure> {
    if !(state_range > 0.0 && state_range.is_finite()) {
        return Err(Failure::invalid("state range must be positive"));
    }
    let pf = ProblemFile::load(file)?;
    let p = pf.build(None)?;
    let h7 = p.schedule().check_h7(h7_grid).map_err(Failure::invalid)?;
    let (lip, lip_info) = match p.lipschitz() {
        Some(l) => (l.clone(), json!({ "source": "declared" })),
        None => {
            let seed = seed_from_env()?;
            let l = p
                .estimate_lipschitz(state_range, samples, seed, DEFAULT_SAFETY_FACTOR)
                .map_err(Failure::invalid)?;
            let info = json!({
                "source": "estimated",
                "seed": seed,
                "samples": samples,
                "state_range": state_range,
                "safety_factor": DEFAULT_SAFETY_FACTOR,
            });
            (l, info)
        }
    };
    let counts = ScheduleCounts::from(p.schedule());
    let search = find_mu(&lip, &counts, DEFAULT_MU_MIN, DEFAULT_MU_MAX, MuCriterion::Contractive).map_err(Failure::invalid)?;
    let at = match &search {
        MuSearch::Found { mu, .. } => *mu,
        MuSearch::NotFound { mu_max } => *mu_max,
    };
    let [a12, a13, a32] = majorant_limits(&lip, &counts);
    let mut lip_json = lip_info;
    lip_json["constants"] = json!(lip);
    let doc = json!({
        "schedule": schedule_summary(&p),
        "h_source": if pf.h.is_some() { "declared" } else { "default: smallest gap between fixed times, or T with fewer than two" },
        "h7": { "report": h7, "verdict": h7.verdict() },
        "lipschitz": lip_json,
        "mu_search": search,
        "contraction": contraction_at(&lip, &counts, at),
        "large_mu_limits": { "a12": a12, "a13": a13, "a32": a32 },
        "interpretations": INTERPRETATIONS,
    });
    emit(out, &doc)?;
    Ok(EXIT_OK)
}

fn cmd_series(
    file: &Path,
    csv: Option<&Path>,
    report: Option<&Path>,
    allow_high_order: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    let sf = SeriesFile::load(file)?;
    let sp = sf.build(allow_high_order)?;
    let exact = sf.exact()?;
    let (x, rep) = crate::series::series_solve(&sp, &sf.solver_options()).map_err(Failure::invalid)?;
    write_csv(csv, &x, out)?;
    if let Some(path) = report {
        let coefficient = if sp.lipschitz().len() >= sp.order() && rep.mu > 0.0 {
            series_contraction_coefficient(sp.lipschitz(), sp.horizon(), rep.mu, sp.order()).ok()
        } else {
            None
        };
        let exact_error = match &exact {
            Some(e) => Some(error_against(&x, e)?),
            None => None,
        };
        let doc = json!({
            "solver": rep,
            "order": sp.order(),
            "panels": sp.grid().panels(),
            "contraction_coefficient": coefficient,
            "exact_error": exact_error,
        });
        write_json(path, &doc)?;
    }
    let _ = writeln!(
        err,
        "series order {}: {} after {} iterations, residual {:.3e}",
        sp.order(),
        if rep.converged { "converged" } else { "NOT converged" },
        rep.iterations,
        rep.residual
    );
    Ok(if rep.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

/// Largest nodal deviation from a reference solution given as an expression in `t`.
fn error_against(x: &PiecewiseFn, exact: &KernelExpr) -> Result<f64, Failure> {
    let grid = x.grid();
    let mut worst: f64 = 0.0;
    for p in grid.points() {
        let e = exact.eval(&[p.t]).map_err(|e| Failure::invalid(format!("exact solution: {e}")))?;
        worst = worst.max((x.value_at(&p) - e).abs());
    }
    Ok(worst)
}

/// Largest deviation between `a` and `b` over the nodes of `a`'s grid.
fn difference_on(a: &PiecewiseFn, b: &PiecewiseFn) -> f64 {
    a.grid()
        .points()
        .map(|p| {
            let q = Point { node: None, ..p };
            (a.value_at(&p) - b.value_at(&q)).abs()
        })
        .fold(0.0, f64::max)
}

fn cmd_convergence(file: &Path, resolutions: &[usize], method: Method, out: &mut dyn Write) -> Result<i32, Failure> {
    if resolutions.len() < 2 {
        return Err(Failure::invalid("need at least two resolutions"));
    }
    if resolutions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Failure::invalid("resolutions must be strictly increasing"));
    }
    let pf = ProblemFile::load(file)?;
    let exact = pf.exact()?;
    let opts = pf.solver_options();
    let mut solutions = Vec::new();
    let mut all_converged = true;
    for &m in resolutions {
        let p = pf.build(Some(m))?;
        let (v, rep) = run_method(&p, method, &opts)?;
        all_converged &= rep.converged;
        solutions.push(v.xi);
    }
    let n = solutions.len();
    let finest = &solutions[n - 1];
    // successive differences on the coarser grid of each pair
    let diffs: Vec<f64> = (0..n - 1).map(|k| difference_on(&solutions[k], &solutions[k + 1])).collect();
    let errors: Vec<Option<f64>> = match &exact {
        Some(e) => solutions.iter().map(|x| error_against(x, e).map(Some)).collect::<Result<_, _>>()?,
        None => (0..n)
            .map(|k| if k + 1 == n { None } else { Some(difference_on(&solutions[k], finest)) })
            .collect(),
    };
    let ratio = |a: f64, b: f64| if b > 0.0 { Some(a / b) } else { None };
    let mut rows = Vec::new();
    for k in 0..n {
        let r = match &exact {
            Some(_) if k > 0 => ratio(errors[k - 1].unwrap_or(f64::NAN), errors[k].unwrap_or(f64::NAN)),
            None if k > 0 && k < n - 1 => ratio(diffs[k - 1], diffs[k]),
            _ => None,
        };
        rows.push(json!({
            "panels": resolutions[k],
            "error": errors[k],
            "difference_to_next": diffs.get(k),
            "ratio": r,
            "observed_order": r.map(f64::log2),
        }));
    }
    let doc = json!({
        "method": match method { Method::Picard => "picard", Method::Segment => "segment" },
        "reference": if exact.is_some() { "exact" } else { "finest resolution" },
        "ratio_basis": if exact.is_some() { "successive errors" } else { "successive differences" },
        "converged": all_converged,
        "rows": rows,
    });
    emit(out, &doc)?;
    Ok(if all_converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn cmd_roots(file: &Path, grid: usize, tol: f64, out: &mut dyn Write) -> Result<i32, Failure> {
    if !(tol > 0.0) {
        return Err(Failure::invalid("tol must be positive"));
    }
    let pf = ProblemFile::load(file)?;
    let p = pf.build(None)?;
    let s = p.schedule();
    let roots = s
        .sigma()
        .iter()
        .enumerate()
        .map(|(i, sig)| {
            solve_sigma_roots(sig, s.horizon(), tol, grid)
                .map(|r| json!({ "index": i + 1, "sigma": sig.source(), "roots": r }))
                .map_err(Failure::invalid)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let doc = json!({
        "scan_grid": grid,
        "tol": tol,
        "sigma": roots,
        "breakpoints": s.breakpoints().set,
        "partition": s.partition(),
    });
    emit(out, &doc)?;
    Ok(EXIT_OK)
}
