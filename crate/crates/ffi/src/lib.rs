//! C ABI for the hybrid Volterra solver.
//!
//! Problems are built from the same TOML text the command line reads. Every
//! function returns an [`HvStatus`]; on failure a description is available
//! from [`hv_last_error_message`] on the same thread. Handles are opaque and
//! must be released with their `_free` function.

use hybrid_volterra::cli::problem_file::ProblemFile;
use hybrid_volterra::contraction::ContractionMatrix;
use hybrid_volterra::hybrid_operator::{HybridProblem, SolutionTriple};
use hybrid_volterra::solvers::{picard_solve, segment_solve, SolveReport, SolverOptions};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HvStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The problem text or an argument was rejected.
    InvalidInput = 3,
    /// The iteration stopped at its limit; the solution handle is still set.
    NotConverged = 4,
    /// A kernel evaluation failed during the solve.
    SolveFailed = 5,
    /// The requested time lies outside `[0, T]`.
    OutOfRange = 6,
    /// An internal error was caught at the boundary.
    Panic = 7,
}

/// Which iteration `hv_solve` runs.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HvMethod {
    /// Global successive approximation on `[0, T]`.
    Picard = 0,
    /// Segment-by-segment iteration with jumps applied at breakpoints.
    Segment = 1,
}

/// Summary of a 3x3 matrix: characteristic invariants and stability verdicts.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HvMatrixReport {
    pub trace: f64,
    pub s2: f64,
    pub det: f64,
    pub spectral_radius: f64,
    /// All eigenvalues lie strictly inside the unit disk (criterion test).
    pub criterion_contractive: bool,
    /// The same question answered from the computed eigenvalues.
    pub eigen_contractive: bool,
}

/// An immutable parsed problem with its solver options.
pub struct HvProblem {
    problem: HybridProblem,
    options: SolverOptions,
}

/// A computed solution and its iteration report.
pub struct HvSolution {
    triple: SolutionTriple,
    report: SolveReport,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::default());
}

fn fail(status: HvStatus, msg: impl Into<String>) -> HvStatus {
    set_error(msg);
    status
}

fn guarded(f: impl FnOnce() -> HvStatus) -> HvStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(HvStatus::Panic, "internal error"),
    }
}

/// Message describing the most recent failure on this thread, or an empty
/// string. The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn hv_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parse a problem from TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hv_problem_from_toml(toml: *const c_char, out: *mut *mut HvProblem) -> HvStatus {
    guarded(|| {
        if toml.is_null() || out.is_null() {
            return fail(HvStatus::NullPointer, "null argument");
        }
        *out = std::ptr::null_mut();
        let text = match CStr::from_ptr(toml).to_str() {
            Ok(s) => s,
            Err(e) => return fail(HvStatus::InvalidUtf8, e.to_string()),
        };
        let file = match ProblemFile::from_toml_str(text) {
            Ok(f) => f,
            Err(e) => return fail(HvStatus::InvalidInput, e.to_string()),
        };
        match file.build(None) {
            Ok(problem) => {
                let options = file.solver_options();
                *out = Box::into_raw(Box::new(HvProblem { problem, options }));
                HvStatus::Ok
            }
            Err(e) => fail(HvStatus::InvalidInput, e.to_string()),
        }
    })
}

/// Release a problem. Null is ignored.
///
/// # Safety
/// `p` must come from [`hv_problem_from_toml`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hv_problem_free(p: *mut HvProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Number of segments of the breakpoint partition.
///
/// # Safety
/// `p` must be a valid problem handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn hv_problem_segments(p: *const HvProblem) -> usize {
    p.as_ref().map_or(0, |p| p.problem.grid().segments())
}

/// Solve the problem. On `Ok` and on `NotConverged`, `*out` receives a
/// solution handle; otherwise it is set to null.
///
/// # Safety
/// `p` must be a valid problem handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hv_solve(p: *const HvProblem, method: HvMethod, out: *mut *mut HvSolution) -> HvStatus {
    guarded(|| {
        if p.is_null() || out.is_null() {
            return fail(HvStatus::NullPointer, "null argument");
        }
        *out = std::ptr::null_mut();
        let p = &*p;
        let result = match method {
            HvMethod::Picard => picard_solve(&p.problem, None, &p.options),
            HvMethod::Segment => segment_solve(&p.problem, &p.options),
        };
        match result {
            Ok((triple, report)) => {
                let converged = report.converged;
                let iterations = report.iterations;
                *out = Box::into_raw(Box::new(HvSolution { triple, report }));
                if converged {
                    HvStatus::Ok
                } else {
                    fail(HvStatus::NotConverged, format!("no convergence after {iterations} iterations"))
                }
            }
            Err(e) => fail(HvStatus::SolveFailed, e.to_string()),
        }
    })
}

unsafe fn eval_with(
    s: *const HvSolution,
    t: f64,
    out: *mut f64,
    f: impl FnOnce(&SolutionTriple, f64) -> Result<f64, String>,
) -> HvStatus {
    guarded(|| {
        if s.is_null() || out.is_null() {
            return fail(HvStatus::NullPointer, "null argument");
        }
        match f(&(*s).triple, t) {
            Ok(v) => {
                *out = v;
                HvStatus::Ok
            }
            Err(e) => fail(HvStatus::OutOfRange, e),
        }
    })
}

/// Left limit `x(t^-)` of the solution (the value itself at `t = 0`).
///
/// # Safety
/// `s` must be a valid solution handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hv_solution_eval(s: *const HvSolution, t: f64, out: *mut f64) -> HvStatus {
    eval_with(s, t, out, |v, t| v.xi.eval_left(t).map_err(|e| e.to_string()))
}

/// Right limit `x(t^+)` of the solution (the value itself at `t = T`).
///
/// # Safety
/// `s` must be a valid solution handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hv_solution_eval_right(s: *const HvSolution, t: f64, out: *mut f64) -> HvStatus {
    eval_with(s, t, out, |v, t| v.xi.eval_right(t).map_err(|e| e.to_string()))
}

/// Iterations performed, or 0 for a null handle.
///
/// # Safety
/// `s` must be a valid solution handle or null.
#[no_mangle]
pub unsafe extern "C" fn hv_solution_iterations(s: *const HvSolution) -> usize {
    s.as_ref().map_or(0, |s| s.report.iterations)
}

/// Sup-norm residual of the fixed-point equation, or NaN for a null handle.
///
/// # Safety
/// `s` must be a valid solution handle or null.
#[no_mangle]
pub unsafe extern "C" fn hv_solution_residual(s: *const HvSolution) -> f64 {
    s.as_ref().map_or(f64::NAN, |s| s.report.residual)
}

/// Whether the iteration met its tolerance; false for a null handle.
///
/// # Safety
/// `s` must be a valid solution handle or null.
#[no_mangle]
pub unsafe extern "C" fn hv_solution_converged(s: *const HvSolution) -> bool {
    s.as_ref().is_some_and(|s| s.report.converged)
}

/// Release a solution. Null is ignored.
///
/// # Safety
/// `s` must come from [`hv_solve`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hv_solution_free(s: *mut HvSolution) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Analyse a 3x3 matrix given as nine row-major entries.
///
/// # Safety
/// `entries` must point to nine doubles and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hv_check_matrix(entries: *const f64, out: *mut HvMatrixReport) -> HvStatus {
    guarded(|| {
        if entries.is_null() || out.is_null() {
            return fail(HvStatus::NullPointer, "null argument");
        }
        let mut v = [0.0; 9];
        v.copy_from_slice(std::slice::from_raw_parts(entries, 9));
        if v.iter().any(|x| !x.is_finite()) {
            return fail(HvStatus::InvalidInput, "matrix entries must be finite");
        }
        let a = ContractionMatrix::from_row_major(&v);
        let inv = a.invariants();
        let eig = a.eigen();
        *out = HvMatrixReport {
            trace: inv.trace,
            s2: inv.s2,
            det: inv.det,
            spectral_radius: eig.spectral_radius,
            criterion_contractive: a.criterion().contractive,
            eigen_contractive: eig.contractive,
        };
        HvStatus::Ok
    })
}
