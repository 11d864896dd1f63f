//! C ABI for `graphon-infer`.
//!
//! Objects cross the boundary as opaque handles written through an `out`
//! pointer and released with the matching `gi_*_free`. Every fallible
//! call returns a [`GiStatus`]; on failure a message is available from
//! [`gi_last_error`] on the same thread. Matrices are dense, row-major `f64`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use graphon_infer::graphon::{degree_function, sample_graph, DegreePrior, Graphon, PriorSource};
use graphon_infer::graphs::{
    empirical_degree_function, induced_subgraph, laplacian, read_edge_list, recovery_error, spectrum, EdgeListOptions,
    Graph, LaplacianMatrix,
};
use graphon_infer::signals::{
    estimate_templates, generate_signals, ConsensusFilter, SpectralTemplates, TemplateSource,
};
use graphon_infer::solver::{build_problem, solve, RecoverySolution, SolveStatus, SolverConfig};
use graphon_infer::Error;
use nalgebra::DMatrix;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DegenerateInput = 3,
    InvalidFilter = 4,
    Parse = 5,
    Config = 6,
    Dataset = 7,
    Io = 8,
    Format = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GiGraphonFamily {
    /// `W = p`.
    Constant = 0,
    /// `W = gamma (x^2 + y^2) / 2 + 1 - gamma`.
    QuadraticSum = 1,
    /// `W = 1 - a max(x, y)`.
    MaxDecay = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GiSolveStatus {
    Optimal = 0,
    MaxIters = 1,
    Infeasible = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GiSolverConfig {
    pub tolerance: f64,
    pub max_iters: usize,
    pub over_relaxation: f64,
    pub penalty_rho: f64,
    pub adaptive_rho: bool,
}

impl From<GiSolverConfig> for SolverConfig {
    fn from(c: GiSolverConfig) -> Self {
        SolverConfig {
            tolerance: c.tolerance,
            max_iters: c.max_iters,
            over_relaxation: c.over_relaxation,
            penalty_rho: c.penalty_rho,
            adaptive_rho: c.adaptive_rho,
        }
    }
}

/// Opaque graph handle.
pub struct GiGraph(Graph);
/// Opaque spectral-template handle.
pub struct GiTemplates(SpectralTemplates);
/// Opaque degree-prior handle.
pub struct GiPrior(DegreePrior);
/// Opaque solution handle.
pub struct GiSolution(RecoverySolution);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("NUL bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> GiStatus {
    match e {
        Error::InvalidArgument(_) => GiStatus::InvalidArgument,
        Error::DegenerateInput(_) => GiStatus::DegenerateInput,
        Error::InvalidFilter(_) => GiStatus::InvalidFilter,
        Error::Parse { .. } | Error::Json(_) | Error::Csv(_) => GiStatus::Parse,
        Error::Config(_) => GiStatus::Config,
        Error::Dataset(_) => GiStatus::Dataset,
        Error::Io { .. } => GiStatus::Io,
        Error::MatrixFormat(_) => GiStatus::Format,
    }
}

struct Fail(GiStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(name: &str) -> Fail {
    Fail(GiStatus::NullPointer, format!("`{name}` is null"))
}

/// Run `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> GiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            GiStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            GiStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn square(data: *const f64, n: usize) -> Result<DMatrix<f64>, Fail> {
    if data.is_null() {
        return Err(null("data"));
    }
    let len = n
        .checked_mul(n)
        .ok_or_else(|| Fail(GiStatus::InvalidArgument, "n * n overflows".into()))?;
    Ok(DMatrix::from_row_slice(n, n, std::slice::from_raw_parts(data, len)))
}

unsafe fn copy_out(values: impl ExactSizeIterator<Item = f64>, buf: *mut f64, len: usize) -> Result<(), Fail> {
    if buf.is_null() {
        return Err(null("buf"));
    }
    if len < values.len() {
        return Err(Fail(
            GiStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", values.len()),
        ));
    }
    for (i, v) in values.enumerate() {
        *buf.add(i) = v;
    }
    Ok(())
}

fn row_major(m: &DMatrix<f64>) -> impl ExactSizeIterator<Item = f64> + '_ {
    let (r, c) = m.shape();
    (0..r * c).map(move |k| m[(k / c, k % c)])
}

fn graphon(family: GiGraphonFamily, param: f64) -> Result<Graphon, Error> {
    match family {
        GiGraphonFamily::Constant => Graphon::constant(param),
        GiGraphonFamily::QuadraticSum => Graphon::quadratic_sum(param),
        GiGraphonFamily::MaxDecay => Graphon::max_decay(param),
    }
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn gi_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gi_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn gi_solver_config_default() -> GiSolverConfig {
    let d = SolverConfig::default();
    GiSolverConfig {
        tolerance: d.tolerance,
        max_iters: d.max_iters,
        over_relaxation: d.over_relaxation,
        penalty_rho: d.penalty_rho,
        adaptive_rho: d.adaptive_rho,
    }
}

/// Sample an `n`-node graph from a graphon.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn gi_graph_sample(
    family: GiGraphonFamily,
    param: f64,
    n: usize,
    seed: u64,
    out: *mut *mut GiGraph,
) -> GiStatus {
    guard(|| {
        let g = sample_graph(&graphon(family, param)?, n, seed)?;
        put(out, GiGraph(g))
    })
}

/// Build a graph from an `n x n` row-major adjacency matrix.
///
/// # Safety
/// `data` must point to `n * n` readable doubles; `out` as in [`gi_graph_sample`].
#[no_mangle]
pub unsafe extern "C" fn gi_graph_from_adjacency(data: *const f64, n: usize, out: *mut *mut GiGraph) -> GiStatus {
    guard(|| put(out, GiGraph(Graph::from_adjacency(square(data, n)?)?)))
}

/// Read an unweighted edge list.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` as in [`gi_graph_sample`].
#[no_mangle]
pub unsafe extern "C" fn gi_graph_read_edge_list(
    path: *const c_char,
    one_indexed: bool,
    out: *mut *mut GiGraph,
) -> GiStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|e| Fail(GiStatus::InvalidArgument, format!("path is not UTF-8: {e}")))?;
        let opts = EdgeListOptions {
            one_indexed,
            ..Default::default()
        };
        put(out, GiGraph(read_edge_list(Path::new(path), opts)?))
    })
}

/// Number of nodes, or 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gi_graph_node_count(g: *const GiGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.n())
}

/// Number of undirected edges, or 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gi_graph_edge_count(g: *const GiGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.edge_count())
}

/// Copy the combinatorial Laplacian (row-major, `n * n` values) into `buf`.
///
/// # Safety
/// `g` must be a live handle; `buf` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gi_graph_laplacian(g: *const GiGraph, buf: *mut f64, len: usize) -> GiStatus {
    guard(|| {
        let l = laplacian(&borrow(g, "g")?.0);
        copy_out(row_major(l.matrix()), buf, len)
    })
}

/// # Safety
/// `g` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gi_graph_free(g: *mut GiGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Exact Laplacian eigenvectors of `g`, ascending.
///
/// # Safety
/// `g` must be a live handle; `out` as in [`gi_graph_sample`].
#[no_mangle]
pub unsafe extern "C" fn gi_templates_exact(g: *const GiGraph, out: *mut *mut GiTemplates) -> GiStatus {
    guard(|| {
        let s = spectrum(&laplacian(&borrow(g, "g")?.0))?;
        put(out, GiTemplates(SpectralTemplates::exact(&s)))
    })
}

/// Templates from the sample covariance of `m` signals diffused over `g` by
/// `steps` consensus steps with `alpha = fraction / lambda_max`.
///
/// # Safety
/// `g` must be a live handle; `out` as in [`gi_graph_sample`].
#[no_mangle]
pub unsafe extern "C" fn gi_templates_from_signals(
    g: *const GiGraph,
    steps: usize,
    fraction: f64,
    m: usize,
    seed: u64,
    out: *mut *mut GiTemplates,
) -> GiStatus {
    guard(|| {
        let l = laplacian(&borrow(g, "g")?.0);
        let s = spectrum(&l)?;
        let alpha = fraction / s.lambda_max();
        let filter = ConsensusFilter::new(vec![alpha; steps])?;
        put(
            out,
            GiTemplates(estimate_templates(&generate_signals(&filter, &l, m, seed)?)?),
        )
    })
}

/// Templates given as the columns of an `n x n` row-major orthonormal matrix.
///
/// # Safety
/// `data` must point to `n * n` readable doubles; `out` as in [`gi_graph_sample`].
#[no_mangle]
pub unsafe extern "C" fn gi_templates_from_matrix(data: *const f64, n: usize, out: *mut *mut GiTemplates) -> GiStatus {
    guard(|| {
        put(
            out,
            GiTemplates(SpectralTemplates::new(square(data, n)?, TemplateSource::External)?),
        )
    })
}

/// # Safety
/// `t` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gi_templates_free(t: *mut GiTemplates) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Graphon degree function on a `grid`-point midpoint grid.
///
/// # Safety
/// `out` as in [`gi_graph_sample`].
#[no_mangle]
pub unsafe extern "C" fn gi_prior_from_graphon(
    family: GiGraphonFamily,
    param: f64,
    grid: usize,
    out: *mut *mut GiPrior,
) -> GiStatus {
    guard(|| put(out, GiPrior(degree_function(&graphon(family, param)?, grid)?)))
}

/// Empirical degree function of a random `n0`-node induced subgraph of `g`.
///
/// # Safety
/// `g` must be a live handle; `out` as in [`gi_graph_sample`].
#[no_mangle]
pub unsafe extern "C" fn gi_prior_from_subgraph(
    g: *const GiGraph,
    n0: usize,
    grid: usize,
    seed: u64,
    out: *mut *mut GiPrior,
) -> GiStatus {
    guard(|| {
        let sub = induced_subgraph(&borrow(g, "g")?.0, n0, seed)?;
        put(out, GiPrior(empirical_degree_function(&sub, grid)?))
    })
}

/// Prior from raw values (sorted ascending internally).
///
/// # Safety
/// `values` must point to `len` readable doubles; `out` as in [`gi_graph_sample`].
#[no_mangle]
pub unsafe extern "C" fn gi_prior_from_values(values: *const f64, len: usize, out: *mut *mut GiPrior) -> GiStatus {
    guard(|| {
        if values.is_null() {
            return Err(null("values"));
        }
        let v = std::slice::from_raw_parts(values, len).to_vec();
        put(out, GiPrior(DegreePrior::new(v, PriorSource::External)?))
    })
}

/// # Safety
/// `p` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gi_prior_free(p: *mut GiPrior) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Solve the recovery program. `prior` may be null (baseline with a trace
/// anchor, `beta` ignored); `config` may be null for defaults.
///
/// # Safety
/// `templates` must be a live handle, `prior` null or live, `config` null or
/// valid; `out` as in [`gi_graph_sample`].
#[no_mangle]
pub unsafe extern "C" fn gi_solve(
    templates: *const GiTemplates,
    prior: *const GiPrior,
    beta: f64,
    epsilon: f64,
    eta: usize,
    config: *const GiSolverConfig,
    out: *mut *mut GiSolution,
) -> GiStatus {
    guard(|| {
        let t = borrow(templates, "templates")?.0.clone();
        let p = prior.as_ref().map(|p| p.0.clone());
        let cfg = config.as_ref().map_or_else(SolverConfig::default, |c| (*c).into());
        let problem = build_problem(t, p, beta, epsilon, eta)?;
        put(out, GiSolution(solve(&problem, &cfg)?))
    })
}

/// # Safety
/// `s` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gi_solution_node_count(s: *const GiSolution) -> usize {
    s.as_ref().map_or(0, |s| s.0.laplacian.n())
}

/// # Safety
/// `s` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn gi_solution_status(s: *const GiSolution) -> GiSolveStatus {
    match (*s).0.status {
        SolveStatus::Optimal => GiSolveStatus::Optimal,
        SolveStatus::MaxIters => GiSolveStatus::MaxIters,
        SolveStatus::Infeasible => GiSolveStatus::Infeasible,
    }
}

/// # Safety
/// `s` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gi_solution_objective(s: *const GiSolution) -> f64 {
    s.as_ref().map_or(f64::NAN, |s| s.0.objective)
}

/// # Safety
/// `s` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gi_solution_iterations(s: *const GiSolution) -> usize {
    s.as_ref().map_or(0, |s| s.0.iterations)
}

/// Copy the inferred Laplacian (row-major) into `buf`.
///
/// # Safety
/// `s` must be a live handle; `buf` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gi_solution_laplacian(s: *const GiSolution, buf: *mut f64, len: usize) -> GiStatus {
    guard(|| copy_out(row_major(borrow(s, "s")?.0.laplacian.matrix()), buf, len))
}

/// Copy the spectrum variable (`n` values) into `buf`.
///
/// # Safety
/// `s` must be a live handle; `buf` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gi_solution_spectrum(s: *const GiSolution, buf: *mut f64, len: usize) -> GiStatus {
    guard(|| {
        let sol = &borrow(s, "s")?.0;
        copy_out(sol.spectrum.iter().copied(), buf, len)
    })
}

/// Normalized error between the solution and a reference graph's Laplacian.
///
/// # Safety
/// `s` and `truth` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gi_solution_error(s: *const GiSolution, truth: *const GiGraph, out: *mut f64) -> GiStatus {
    guard(|| {
        let sol = &borrow(s, "s")?.0;
        let truth: LaplacianMatrix = laplacian(&borrow(truth, "truth")?.0);
        if out.is_null() {
            return Err(null("out"));
        }
        *out = recovery_error(&sol.laplacian, &truth)?;
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gi_solution_free(s: *mut GiSolution) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}
