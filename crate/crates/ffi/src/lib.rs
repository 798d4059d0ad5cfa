//! C interface to `dfn-core`.
//!
//! Problems and solutions are opaque handles created and released through this
//! API. Every function returns a [`DfnStatus`]; on failure a description is kept
//! per thread and can be copied out with [`dfn_last_error`].
//!
//! ```c
//! DfnProblem *p = NULL;
//! DfnSolution *s = NULL;
//! DfnSolveOptions o = dfn_solve_options_default();
//! if (dfn_problem_builtin("test1", &p) == DFN_STATUS_OK &&
//!     dfn_solve(p, &o, &s) == DFN_STATUS_OK) {
//!     DfnSummary sum;
//!     dfn_solution_summary(s, &sum);
//! }
//! dfn_solution_free(s);
//! dfn_problem_free(p);
//! ```

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use dfn_core::analysis::error_l2_h1;
use dfn_core::bench::TestCase;
use dfn_core::discretization::{discretize, Discretization, MeshParams, Problem};
use dfn_core::io::{load_problem, parse_network_file, problem_from_file};
use dfn_core::meshing::MeshOptions;
use dfn_core::solver::{assemble_system, flux_conservation_residual, solve, Solution, StabParams, Variant};
use dfn_core::DfnError;

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DfnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Geometry = 3,
    Mesh = 4,
    Stabilization = 5,
    SingularSystem = 6,
    Io = 7,
    Parse = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DfnVariant {
    None = 0,
    Natural = 1,
    MeshDependent = 2,
}

impl From<DfnVariant> for Variant {
    fn from(v: DfnVariant) -> Self {
        match v {
            DfnVariant::None => Variant::None,
            DfnVariant::Natural => Variant::Natural,
            DfnVariant::MeshDependent => Variant::MeshDep,
        }
    }
}

/// Discretization and stabilization settings for [`dfn_solve`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DfnSolveOptions {
    pub variant: DfnVariant,
    /// Mesh size used on every fracture and trace.
    pub delta: f64,
    /// Stabilization weight (ω or α).
    pub weight: f64,
    pub t: f64,
    /// Interior node perturbation as a fraction of the grid spacing.
    pub jitter: f64,
    pub seed: u64,
}

/// Sizes and quality measures of a solved problem. Errors are NaN when the
/// problem carries no exact solution.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DfnSummary {
    pub dofs_u: usize,
    pub dofs_lambda: usize,
    pub dofs_psi: usize,
    pub err_l2: f64,
    pub err_h1: f64,
    pub conservation: f64,
}

/// A fracture network with boundary data and forcing.
pub struct DfnProblem {
    inner: Arc<Problem>,
}

/// A discretized and solved problem.
pub struct DfnSolution {
    disc: Discretization,
    sol: Solution,
    summary: DfnSummary,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &DfnError) -> DfnStatus {
    match err {
        DfnError::Geometry(_) => DfnStatus::Geometry,
        DfnError::Mesh(_) | DfnError::Overlay(_) => DfnStatus::Mesh,
        DfnError::Stabilization(_) => DfnStatus::Stabilization,
        DfnError::SingularSystem(_) => DfnStatus::SingularSystem,
        DfnError::Dimension(_) | DfnError::Config(_) => DfnStatus::InvalidArgument,
        DfnError::Expression { .. } | DfnError::Json(_) => DfnStatus::Parse,
        DfnError::Io(_) => DfnStatus::Io,
    }
}

enum Failure {
    Status(DfnStatus, String),
    Core(DfnError),
}

impl From<DfnError> for Failure {
    fn from(e: DfnError) -> Self {
        Failure::Core(e)
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(DfnStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, translating errors and panics into a status and the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DfnStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DfnStatus::Ok,
        Ok(Err(Failure::Status(s, msg))) => {
            set_last_error(msg);
            s
        }
        Ok(Err(Failure::Core(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal error: {msg}"));
            DfnStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Failure::Status(DfnStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn problem_ref<'a>(p: *const DfnProblem) -> Result<&'a DfnProblem, Failure> {
    p.as_ref().ok_or_else(|| null("problem"))
}

unsafe fn solution_ref<'a>(s: *const DfnSolution) -> Result<&'a DfnSolution, Failure> {
    s.as_ref().ok_or_else(|| null("solution"))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dfn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of the calling thread into `buf` (truncated and
/// NUL-terminated) and returns the buffer size needed for the full message,
/// including the terminator. Returns 0 when the last call succeeded.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn dfn_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = (bytes.len() - 1).min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Creates one of the benchmark problems: `test1`, `test2A` or `test2B`.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dfn_problem_builtin(name: *const c_char, out: *mut *mut DfnProblem) -> DfnStatus {
    guard(|| {
        let name = read_str(name, "name")?;
        let case: TestCase = name.parse()?;
        write_out(out, DfnProblem { inner: Arc::new(case.problem()?) })
    })
}

/// Parses a JSON network description.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dfn_problem_from_json(json: *const c_char, out: *mut *mut DfnProblem) -> DfnStatus {
    guard(|| {
        let text = read_str(json, "json")?;
        let problem = problem_from_file(&parse_network_file(text)?, "custom")?;
        write_out(out, DfnProblem { inner: Arc::new(problem) })
    })
}

/// Loads a JSON network description from a file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dfn_problem_load(path: *const c_char, out: *mut *mut DfnProblem) -> DfnStatus {
    guard(|| {
        let path = read_str(path, "path")?;
        write_out(out, DfnProblem { inner: Arc::new(load_problem(Path::new(path))?) })
    })
}

/// Releases a problem. Null is ignored.
///
/// # Safety
/// `problem` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dfn_problem_free(problem: *mut DfnProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// # Safety
/// `problem` must be null or a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dfn_problem_counts(
    problem: *const DfnProblem,
    fractures: *mut usize,
    traces: *mut usize,
) -> DfnStatus {
    guard(|| {
        let p = problem_ref(problem)?;
        if fractures.is_null() || traces.is_null() {
            return Err(null("output pointer"));
        }
        *fractures = p.inner.network.fractures().len();
        *traces = p.inner.network.traces().len();
        Ok(())
    })
}

/// Natural stabilization with ω = 0.1, t = 0, δ = 0.1 and unperturbed grids.
#[no_mangle]
pub extern "C" fn dfn_solve_options_default() -> DfnSolveOptions {
    DfnSolveOptions { variant: DfnVariant::Natural, delta: 0.1, weight: 0.1, t: 0.0, jitter: 0.0, seed: 0 }
}

/// Meshes, assembles and solves `problem`.
///
/// # Safety
/// `problem` and `options` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dfn_solve(
    problem: *const DfnProblem,
    options: *const DfnSolveOptions,
    out: *mut *mut DfnSolution,
) -> DfnStatus {
    guard(|| {
        let p = problem_ref(problem)?;
        let o = *options.as_ref().ok_or_else(|| null("options"))?;
        if !(o.delta.is_finite() && o.delta > 0.0) {
            return Err(Failure::Status(
                DfnStatus::InvalidArgument,
                format!("delta must be positive, got {}", o.delta),
            ));
        }
        if !(0.0..=0.25).contains(&o.jitter) {
            return Err(Failure::Status(DfnStatus::InvalidArgument, format!("jitter {} outside [0, 0.25]", o.jitter)));
        }
        let params = MeshParams::uniform(&p.inner.network, o.delta, MeshOptions { jitter: o.jitter, seed: o.seed });
        let disc = discretize(p.inner.clone(), params)?;
        let sys = assemble_system(&disc, o.variant.into(), StabParams { weight: o.weight, t: o.t })?;
        let sol = solve(&sys)?;
        let (err_l2, err_h1) = match &p.inner.exact {
            Some(exact) => {
                let e = error_l2_h1(&sol, exact, &disc)?;
                let sum = |f: fn(&dfn_core::analysis::FractureErrors) -> f64| {
                    e.iter().map(|x| f(x).powi(2)).sum::<f64>().sqrt()
                };
                (sum(|x| x.l2), sum(|x| x.h1))
            }
            None => (f64::NAN, f64::NAN),
        };
        let dm = &disc.dofmap;
        let summary = DfnSummary {
            dofs_u: dm.num_free_u(),
            dofs_lambda: dm.num_free_lambda(),
            dofs_psi: dm.num_free_psi(),
            err_l2,
            err_h1,
            conservation: flux_conservation_residual(&sol, &disc),
        };
        write_out(out, DfnSolution { disc, sol, summary })
    })
}

/// Releases a solution. Null is ignored.
///
/// # Safety
/// `solution` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dfn_solution_free(solution: *mut DfnSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// # Safety
/// `solution` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dfn_solution_summary(solution: *const DfnSolution, out: *mut DfnSummary) -> DfnStatus {
    guard(|| {
        let s = solution_ref(solution)?;
        let out = out.as_mut().ok_or_else(|| null("output pointer"))?;
        *out = s.summary;
        Ok(())
    })
}

/// Number of mesh nodes on fracture `fracture` (network order, by id).
///
/// # Safety
/// `solution` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dfn_solution_num_nodes(
    solution: *const DfnSolution,
    fracture: usize,
    out: *mut usize,
) -> DfnStatus {
    guard(|| {
        let s = solution_ref(solution)?;
        let mesh = s.disc.meshes.get(fracture).ok_or_else(|| out_of_range(fracture, s.disc.meshes.len()))?;
        let out = out.as_mut().ok_or_else(|| null("output pointer"))?;
        *out = mesh.num_nodes();
        Ok(())
    })
}

fn out_of_range(fracture: usize, n: usize) -> Failure {
    Failure::Status(DfnStatus::InvalidArgument, format!("fracture index {fracture} out of range for {n} fractures"))
}

fn copy_into(src: &[f64], buf: *mut f64, len: usize) -> Result<(), Failure> {
    if buf.is_null() {
        return Err(null("buffer"));
    }
    if len < src.len() {
        return Err(Failure::Status(
            DfnStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", src.len()),
        ));
    }
    // SAFETY: the caller guarantees `len` writable values and we write at most `len`.
    unsafe { ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len()) };
    Ok(())
}

/// Copies the nodal heads of one fracture into `buf`.
///
/// # Safety
/// `solution` must be live; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dfn_solution_heads(
    solution: *const DfnSolution,
    fracture: usize,
    buf: *mut f64,
    len: usize,
) -> DfnStatus {
    guard(|| {
        let s = solution_ref(solution)?;
        let u = s.sol.u.get(fracture).ok_or_else(|| out_of_range(fracture, s.sol.u.len()))?;
        copy_into(u, buf, len)
    })
}

/// Copies the local node coordinates of one fracture into `buf` as `x0, y0, x1, y1, ...`.
///
/// # Safety
/// `solution` must be live; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dfn_solution_nodes(
    solution: *const DfnSolution,
    fracture: usize,
    buf: *mut f64,
    len: usize,
) -> DfnStatus {
    guard(|| {
        let s = solution_ref(solution)?;
        let mesh = s.disc.meshes.get(fracture).ok_or_else(|| out_of_range(fracture, s.disc.meshes.len()))?;
        let flat: Vec<f64> = mesh.nodes().iter().flat_map(|p| *p).collect();
        copy_into(&flat, buf, len)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_become_a_status() {
        let prev = std::panic::take_hook();
        std::panic::set_hook(Box::new(|_| {}));
        let status = guard(|| panic!("boom"));
        std::panic::set_hook(prev);
        assert_eq!(status, DfnStatus::Panic);
        let mut buf = [0 as c_char; 64];
        let n = unsafe { dfn_last_error(buf.as_mut_ptr(), buf.len()) };
        let msg = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap();
        assert_eq!(msg, "internal error: boom");
        assert_eq!(n, msg.len() + 1);
    }

    #[test]
    fn core_errors_map_to_codes() {
        assert_eq!(status_of(&DfnError::Overlay("x".into())), DfnStatus::Mesh);
        assert_eq!(status_of(&DfnError::Config("x".into())), DfnStatus::InvalidArgument);
        assert_eq!(status_of(&DfnError::SingularSystem("x".into())), DfnStatus::SingularSystem);
        assert_eq!(status_of(&DfnError::Expression { expr: "a".into(), reason: "b".into() }), DfnStatus::Parse);
    }
}
