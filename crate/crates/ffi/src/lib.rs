//! C ABI over the topopairs library.
//!
//! Objects cross the boundary as opaque handles created by `tp_*_new` or
//! `tp_*` builders and released with the matching `tp_*_free`. Fallible
//! calls return a [`TpStatus`]; on failure `tp_last_error` describes the
//! most recent error on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use topopairs::curvature::ricci_curvature;
use topopairs::graph::homophily_index;
use topopairs::mining::{
    mine_positive_pairs, CandidateStrategy, EpsilonMode, MiningConfig, PositivePairSet,
};
use topopairs::pipeline::{extract, FiltrationKind};
use topopairs::vectorize::{PIConfig, PiStore};
use topopairs::{Error, Graph};

/// Result codes. The numeric values of the error kinds match the exit
/// codes of the command-line tool where they overlap.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Data = 3,
    Numeric = 4,
    Io = 5,
    Panic = 6,
}

/// Values accepted by the `filtration` argument of `tp_extract`.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TpFiltration {
    Ricci = 0,
    Degree = 1,
}

/// Values accepted by the `epsilon_mode` argument of `tp_mine`.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TpEpsilon {
    /// Accept pairs whose distance is at most the given value.
    Absolute = 0,
    /// Threshold at the given quantile of the candidate distances.
    Quantile = 1,
}

/// Undirected graph with optional node labels.
pub struct TpGraph {
    inner: Graph,
}

/// One persistence image per node.
pub struct TpPiStore {
    inner: PiStore,
}

/// Mined positive pairs.
pub struct TpPairSet {
    inner: PositivePairSet,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TpStatus {
    match e {
        Error::InvalidArgument(_) | Error::Config(_) => TpStatus::InvalidArgument,
        Error::Data(_) => TpStatus::Data,
        Error::Numeric(_) => TpStatus::Numeric,
        Error::Io { .. } => TpStatus::Io,
    }
}

/// Runs `f`, recording errors and panics for `tp_last_error`.
fn guard(f: impl FnOnce() -> Result<(), (TpStatus, String)>) -> TpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TpStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            TpStatus::Panic
        }
    }
}

fn lib<T>(r: topopairs::Result<T>) -> Result<T, (TpStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (TpStatus, String) {
    (TpStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (TpStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, (TpStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (TpStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a graph on `num_nodes` nodes from `num_edges` endpoint pairs
/// `(src[i], dst[i])`. Self-loops and duplicates are ignored.
///
/// # Safety
/// `src` and `dst` must point to `num_edges` readable values and `out` to
/// writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn tp_graph_new(
    num_nodes: usize,
    src: *const u64,
    dst: *const u64,
    num_edges: usize,
    out: *mut *mut TpGraph,
) -> TpStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let src = slice(src, num_edges, "src")?;
        let dst = slice(dst, num_edges, "dst")?;
        let edges: Vec<(usize, usize)> = src
            .iter()
            .zip(dst)
            .map(|(&u, &v)| (u as usize, v as usize))
            .collect();
        let graph = lib(Graph::from_edges(num_nodes, &edges))?;
        *out = Box::into_raw(Box::new(TpGraph { inner: graph }));
        Ok(())
    })
}

/// # Safety
/// `graph` must be NULL or a handle from `tp_graph_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tp_graph_free(graph: *mut TpGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// # Safety
/// `graph` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn tp_graph_num_nodes(graph: *const TpGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.inner.num_nodes())
}

/// # Safety
/// `graph` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn tp_graph_num_edges(graph: *const TpGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.inner.num_edges())
}

/// Attaches one class label per node.
///
/// # Safety
/// `graph` must be a live handle and `labels` must point to `len` values.
#[no_mangle]
pub unsafe extern "C" fn tp_graph_set_labels(
    graph: *mut TpGraph,
    labels: *const u64,
    len: usize,
) -> TpStatus {
    guard(|| {
        let g = out_ptr(graph, "graph")?;
        let labels = slice(labels, len, "labels")?
            .iter()
            .map(|&c| c as usize)
            .collect();
        g.inner = lib(g.inner.clone().with_labels(labels))?;
        Ok(())
    })
}

/// Fraction of edges joining same-label nodes.
///
/// # Safety
/// `graph` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tp_graph_homophily(graph: *const TpGraph, out: *mut f64) -> TpStatus {
    guard(|| {
        let g = handle(graph, "graph")?;
        *out_ptr(out, "out")? = lib(homophily_index(&g.inner))?;
        Ok(())
    })
}

/// Ollivier-Ricci curvature of the edge `(u, v)` with laziness `alpha`.
///
/// # Safety
/// `graph` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tp_ricci_curvature(
    graph: *const TpGraph,
    u: u64,
    v: u64,
    alpha: f64,
    out: *mut f64,
) -> TpStatus {
    guard(|| {
        let g = handle(graph, "graph")?;
        let out = out_ptr(out, "out")?;
        *out = lib(ricci_curvature(&g.inner, u as usize, v as usize, alpha))?.kappa;
        Ok(())
    })
}

/// Persistence images of every node's `radius`-hop ego-net. `filtration`
/// is a `TpFiltration` value; a non-positive `sigma` selects one grid cell.
///
/// # Safety
/// `graph` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tp_extract(
    graph: *const TpGraph,
    filtration: u32,
    radius: usize,
    alpha: f64,
    resolution: f64,
    sigma: f64,
    out: *mut *mut TpPiStore,
) -> TpStatus {
    guard(|| {
        let g = handle(graph, "graph")?;
        let out = out_ptr(out, "out")?;
        let cfg = lib(if sigma > 0.0 {
            PIConfig::with_sigma(resolution, sigma)
        } else {
            PIConfig::new(resolution)
        })?;
        let kind = match filtration {
            f if f == TpFiltration::Ricci as u32 => FiltrationKind::Ricci,
            f if f == TpFiltration::Degree as u32 => FiltrationKind::Degree,
            f => return Err((TpStatus::InvalidArgument, format!("unknown filtration {f}"))),
        };
        let store = lib(extract(&g.inner, kind, radius, alpha, &cfg, None))?;
        *out = Box::into_raw(Box::new(TpPiStore { inner: store }));
        Ok(())
    })
}

/// # Safety
/// `store` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tp_pi_store_free(store: *mut TpPiStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

/// # Safety
/// `store` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn tp_pi_store_num_nodes(store: *const TpPiStore) -> usize {
    store.as_ref().map_or(0, |s| s.inner.num_nodes())
}

/// # Safety
/// `store` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn tp_pi_store_vec_len(store: *const TpPiStore) -> usize {
    store.as_ref().map_or(0, |s| s.inner.vec_len)
}

/// Copies the image of `node` into `buf`, which must hold `vec_len` floats.
///
/// # Safety
/// `store` must be a live handle and `buf` must point to `len` writable floats.
#[no_mangle]
pub unsafe extern "C" fn tp_pi_store_row(
    store: *const TpPiStore,
    node: usize,
    buf: *mut f32,
    len: usize,
) -> TpStatus {
    guard(|| {
        let s = &handle(store, "store")?.inner;
        if node >= s.num_nodes() {
            return Err((
                TpStatus::InvalidArgument,
                format!("node {node} out of range"),
            ));
        }
        if len != s.vec_len {
            return Err((
                TpStatus::InvalidArgument,
                format!("buffer holds {len} floats, image has {}", s.vec_len),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(s.row(node));
        Ok(())
    })
}

/// Euclidean distance between the images of `u` and `v`.
///
/// # Safety
/// `store` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tp_pi_store_distance(
    store: *const TpPiStore,
    u: usize,
    v: usize,
    out: *mut f64,
) -> TpStatus {
    guard(|| {
        let s = &handle(store, "store")?.inner;
        let out = out_ptr(out, "out")?;
        if u >= s.num_nodes() || v >= s.num_nodes() {
            return Err((
                TpStatus::InvalidArgument,
                format!("node pair ({u}, {v}) out of range"),
            ));
        }
        *out = s.distance(u, v);
        Ok(())
    })
}

unsafe fn path_arg<'a>(path: *const c_char) -> Result<&'a Path, (TpStatus, String)> {
    if path.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map(Path::new)
        .map_err(|_| (TpStatus::InvalidArgument, "path is not UTF-8".into()))
}

/// # Safety
/// `store` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tp_pi_store_write(
    store: *const TpPiStore,
    path: *const c_char,
) -> TpStatus {
    guard(|| {
        let s = handle(store, "store")?;
        lib(s.inner.write(path_arg(path)?))
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tp_pi_store_read(
    path: *const c_char,
    out: *mut *mut TpPiStore,
) -> TpStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let store = lib(PiStore::read(path_arg(path)?))?;
        *out = Box::into_raw(Box::new(TpPiStore { inner: store }));
        Ok(())
    })
}

/// Pairs at least `delta` hops apart whose image distance passes the
/// threshold, with at most `max_pairs_per_node` pairs per node.
/// `epsilon_mode` is a `TpEpsilon` value. Candidates are all node pairs.
///
/// # Safety
/// `graph` and `store` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tp_mine(
    graph: *const TpGraph,
    store: *const TpPiStore,
    delta: usize,
    epsilon_mode: u32,
    epsilon: f64,
    max_pairs_per_node: usize,
    out: *mut *mut TpPairSet,
) -> TpStatus {
    guard(|| {
        let g = handle(graph, "graph")?;
        let s = handle(store, "store")?;
        let out = out_ptr(out, "out")?;
        let cfg = MiningConfig {
            delta,
            epsilon: match epsilon_mode {
                m if m == TpEpsilon::Absolute as u32 => EpsilonMode::Absolute(epsilon),
                m if m == TpEpsilon::Quantile as u32 => EpsilonMode::Quantile(epsilon),
                m => {
                    return Err((
                        TpStatus::InvalidArgument,
                        format!("unknown epsilon mode {m}"),
                    ))
                }
            },
            max_pairs_per_node,
            strategy: CandidateStrategy::Exhaustive,
        };
        let set = lib(mine_positive_pairs(&g.inner, &s.inner, &cfg))?;
        *out = Box::into_raw(Box::new(TpPairSet { inner: set }));
        Ok(())
    })
}

/// # Safety
/// `pairs` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tp_pair_set_free(pairs: *mut TpPairSet) {
    if !pairs.is_null() {
        drop(Box::from_raw(pairs));
    }
}

/// # Safety
/// `pairs` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn tp_pair_set_len(pairs: *const TpPairSet) -> usize {
    pairs.as_ref().map_or(0, |p| p.inner.len())
}

/// Distance threshold the set was mined with.
///
/// # Safety
/// `pairs` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn tp_pair_set_epsilon(pairs: *const TpPairSet) -> f64 {
    pairs.as_ref().map_or(f64::NAN, |p| p.inner.epsilon)
}

/// Pair `index` in `(u, v)` order, with `u < v`.
///
/// # Safety
/// `pairs` must be a live handle; `u`, `v` and `distance` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tp_pair_set_get(
    pairs: *const TpPairSet,
    index: usize,
    u: *mut u64,
    v: *mut u64,
    distance: *mut f64,
) -> TpStatus {
    guard(|| {
        let p = handle(pairs, "pairs")?;
        let pair = p.inner.pairs.get(index).ok_or_else(|| {
            (
                TpStatus::InvalidArgument,
                format!("pair index {index} out of range"),
            )
        })?;
        *out_ptr(u, "u")? = pair.u as u64;
        *out_ptr(v, "v")? = pair.v as u64;
        *out_ptr(distance, "distance")? = pair.distance;
        Ok(())
    })
}
