//! C ABI over the analysis pipeline.
//!
//! Results live behind opaque handles that the caller frees with the matching
//! `sd_*_free` function. Every fallible function returns an [`SdStatus`]; on
//! failure a description is available from [`sd_last_error`] on the same
//! thread. Panics never cross the boundary; they become
//! [`SdStatus::Internal`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use setdyn::cluster::{dbscan, Metric};
use setdyn::recurrence::RecurrenceAlgorithm;
use setdyn::{Error, Grid, Interval, MapKind, MorseDecomposition, ParamBox, RecurrenceField, Representation};

/// Result of a call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SdStatus {
    Ok = 0,
    /// Bad argument value (grid, interval, dimension, index).
    InvalidArgument = 1,
    /// A required pointer was null.
    NullPointer = 2,
    /// The cell set is not strongly connected.
    NotStronglyConnected = 3,
    /// A computation could not be certified or diverged.
    ContractViolation = 4,
    /// Output buffer too small; the required length was written.
    BufferTooSmall = 5,
    /// Bug inside the library.
    Internal = 6,
}

/// Built-in maps.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SdMap {
    Chialvo = 0,
    Henon = 1,
    Leslie = 2,
}

impl From<SdMap> for MapKind {
    fn from(m: SdMap) -> Self {
        match m {
            SdMap::Chialvo => MapKind::Chialvo,
            SdMap::Henon => MapKind::Henon,
            SdMap::Leslie => MapKind::Leslie,
        }
    }
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SdAlgorithm {
    ReverseBfs = 0,
    DistanceMatrix = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SdMetric {
    L1 = 0,
    L2 = 1,
}

/// Morse decomposition of one parameter box, with the graph it came from.
pub struct SdAnalysis {
    rep: Representation,
    md: MorseDecomposition,
}

/// Recurrence times over one Morse set.
pub struct SdField {
    field: RecurrenceField,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> SdStatus {
    match err {
        Error::NotStronglyConnected { .. } => SdStatus::NotStronglyConnected,
        Error::Enclosure(_) | Error::Diverged | Error::ZeroVariance { .. } => SdStatus::ContractViolation,
        Error::Io(_) | Error::Json(_) | Error::MissingArtifact { .. } => SdStatus::Internal,
        _ => SdStatus::InvalidArgument,
    }
}

enum Fail {
    Status(SdStatus, String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SdStatus::Ok,
        Ok(Err(Fail::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            SdStatus::Internal
        }
    }
}

fn null(what: &str) -> Fail {
    Fail::Status(SdStatus::NullPointer, format!("null pointer: {what}"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail::Status(SdStatus::InvalidArgument, msg.into())
}

/// # Safety
/// `p` is null or valid for `n` reads.
unsafe fn input<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, n))
}

/// Copies `src` into `dst` (capacity `cap`) and stores the length in `len`.
///
/// # Safety
/// `dst` is null or valid for `cap` writes; `len` is valid for a write.
unsafe fn output<T: Copy>(src: &[T], dst: *mut T, cap: usize, len: *mut usize) -> Result<(), Fail> {
    if len.is_null() {
        return Err(null("length output"));
    }
    *len = src.len();
    if src.len() > cap {
        return Err(Fail::Status(
            SdStatus::BufferTooSmall,
            format!("buffer holds {cap} values, {} needed", src.len()),
        ));
    }
    if !src.is_empty() {
        if dst.is_null() {
            return Err(null("output buffer"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    }
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on this thread.
#[no_mangle]
pub extern "C" fn sd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sd_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Number of parameters of `map`.
#[no_mangle]
pub extern "C" fn sd_map_param_count(map: SdMap) -> usize {
    MapKind::from(map).param_names().len()
}

/// Builds the cell graph of `map` on a planar grid and decomposes it.
///
/// `params` holds `2 * nparams` values, `lo, hi` per parameter in the map's
/// order. `bounds` holds `x_lo, x_hi, y_lo, y_hi`; `resolution` holds the
/// cell counts along x and y.
///
/// # Safety
/// Pointers must be valid for the stated lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sd_analyze(
    map: SdMap,
    params: *const f64,
    nparams: usize,
    bounds: *const f64,
    resolution: *const usize,
    out: *mut *mut SdAnalysis,
) -> SdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let p = input(params, 2 * nparams, "params")?;
        let b = input(bounds, 4, "bounds")?;
        let r = input(resolution, 2, "resolution")?;
        let pb = ParamBox::new(
            p.chunks_exact(2)
                .map(|c| Interval::new(c[0], c[1]))
                .collect::<Result<Vec<_>, _>>()?,
        );
        let grid = Grid::from_bounds(&[(b[0], b[1]), (b[2], b[3])], r)?;
        let kind = MapKind::from(map);
        let rep = Representation::build(&kind, &pb, &grid)?;
        let md = MorseDecomposition::compute(&rep);
        *out = Box::into_raw(Box::new(SdAnalysis { rep, md }));
        Ok(())
    })
}

/// # Safety
/// `h` is null or a handle from [`sd_analyze`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sd_analysis_free(h: *mut SdAnalysis) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Number of Morse sets, or 0 for a null handle.
///
/// # Safety
/// `h` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sd_analysis_set_count(h: *const SdAnalysis) -> usize {
    h.as_ref().map_or(0, |a| a.md.len())
}

/// Cells, attracting flag and boundary flag of set `set`.
///
/// # Safety
/// `h` is null or a live handle; the outputs are writable.
#[no_mangle]
pub unsafe extern "C" fn sd_analysis_set_info(
    h: *const SdAnalysis,
    set: usize,
    cells: *mut usize,
    attracting: *mut bool,
    touches_boundary: *mut bool,
) -> SdStatus {
    guard(|| {
        let a = h.as_ref().ok_or_else(|| null("handle"))?;
        if cells.is_null() || attracting.is_null() || touches_boundary.is_null() {
            return Err(null("output"));
        }
        let s =
            a.md.sets
                .get(set)
                .ok_or_else(|| invalid(format!("no Morse set {set}")))?;
        *cells = s.len();
        *attracting = a.md.attracting[set];
        *touches_boundary = a.md.touches_boundary[set];
        Ok(())
    })
}

/// Linear cell indices (`i * ny + j`) of set `set`, ascending.
///
/// # Safety
/// `h` is null or a live handle; `buf` is valid for `cap` writes and `len`
/// for one.
#[no_mangle]
pub unsafe extern "C" fn sd_analysis_set_cells(
    h: *const SdAnalysis,
    set: usize,
    buf: *mut usize,
    cap: usize,
    len: *mut usize,
) -> SdStatus {
    guard(|| {
        let a = h.as_ref().ok_or_else(|| null("handle"))?;
        let s =
            a.md.sets
                .get(set)
                .ok_or_else(|| invalid(format!("no Morse set {set}")))?;
        output(&s.cells, buf, cap, len)
    })
}

/// Whether a path leads from set `from` to set `to`. False for bad input.
///
/// # Safety
/// `h` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sd_analysis_reaches(h: *const SdAnalysis, from: usize, to: usize) -> bool {
    h.as_ref()
        .is_some_and(|a| from < a.md.len() && to < a.md.len() && a.md.reaches(from, to))
}

/// Recurrence field of Morse set `set`.
///
/// # Safety
/// `h` is null or a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn sd_analysis_recurrence(
    h: *const SdAnalysis,
    set: usize,
    algorithm: SdAlgorithm,
    out: *mut *mut SdField,
) -> SdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let a = h.as_ref().ok_or_else(|| null("handle"))?;
        let s =
            a.md.sets
                .get(set)
                .ok_or_else(|| invalid(format!("no Morse set {set}")))?;
        let algorithm = match algorithm {
            SdAlgorithm::ReverseBfs => RecurrenceAlgorithm::ReverseBfs,
            SdAlgorithm::DistanceMatrix => RecurrenceAlgorithm::DistanceMatrix,
        };
        let field = RecurrenceField::compute(&a.rep, s, algorithm)?;
        *out = Box::into_raw(Box::new(SdField { field }));
        Ok(())
    })
}

/// Recurrence field of an arbitrary cell set of the analysed graph. Fails
/// with [`SdStatus::NotStronglyConnected`] unless the cells form one
/// strongly connected component.
///
/// # Safety
/// `h` is null or a live handle; `cells` is valid for `n` reads; `out` is
/// writable.
#[no_mangle]
pub unsafe extern "C" fn sd_analysis_recurrence_of_cells(
    h: *const SdAnalysis,
    cells: *const usize,
    n: usize,
    out: *mut *mut SdField,
) -> SdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let a = h.as_ref().ok_or_else(|| null("handle"))?;
        let cells = input(cells, n, "cells")?.to_vec();
        let len = a.rep.grid().len();
        if let Some(c) = cells.iter().find(|&&c| c >= len) {
            return Err(invalid(format!("cell {c} outside a grid of {len} cells")));
        }
        let set = setdyn::MorseSet::new(cells);
        let field = RecurrenceField::compute(&a.rep, &set, RecurrenceAlgorithm::ReverseBfs)?;
        *out = Box::into_raw(Box::new(SdField { field }));
        Ok(())
    })
}

/// # Safety
/// `h` is null or a handle from a recurrence call not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sd_field_free(h: *mut SdField) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Summary statistics of a recurrence field.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SdFieldStats {
    pub cells: usize,
    pub mean_rec: f64,
    pub median_rec: f64,
    pub frrv: f64,
    pub nfrrv: f64,
    pub min_rec: u32,
    pub max_rec: u32,
}

/// # Safety
/// `h` is null or a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn sd_field_stats(h: *const SdField, out: *mut SdFieldStats) -> SdStatus {
    guard(|| {
        let f = &h.as_ref().ok_or_else(|| null("handle"))?.field;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = SdFieldStats {
            cells: f.len(),
            mean_rec: f.mean_rec,
            median_rec: f.median_rec,
            frrv: f.frrv,
            nfrrv: f.nfrrv,
            min_rec: f.min_rec(),
            max_rec: f.max_rec(),
        };
        Ok(())
    })
}

/// Cells and their recurrence times, both in ascending cell order.
///
/// # Safety
/// `h` is null or a live handle; `cells` and `rec` are valid for `cap`
/// writes; `len` is writable.
#[no_mangle]
pub unsafe extern "C" fn sd_field_values(
    h: *const SdField,
    cells: *mut usize,
    rec: *mut u32,
    cap: usize,
    len: *mut usize,
) -> SdStatus {
    guard(|| {
        let f = &h.as_ref().ok_or_else(|| null("handle"))?.field;
        output(&f.cells, cells, cap, len)?;
        output(&f.rec, rec, cap, len)
    })
}

/// DBSCAN over `n` points of dimension `dim` stored row by row. Writes one
/// label per point: cluster ids from 1, -1 for noise.
///
/// # Safety
/// `points` is valid for `n * dim` reads and `labels` for `n` writes.
#[no_mangle]
pub unsafe extern "C" fn sd_dbscan(
    points: *const f64,
    n: usize,
    dim: usize,
    eps: f64,
    minpts: usize,
    metric: SdMetric,
    labels: *mut i64,
) -> SdStatus {
    guard(|| {
        if dim == 0 && n > 0 {
            return Err(invalid("dimension must be positive"));
        }
        let flat = input(points, n * dim, "points")?;
        let rows: Vec<Vec<f64>> = flat.chunks_exact(dim.max(1)).map(<[f64]>::to_vec).collect();
        let metric = match metric {
            SdMetric::L1 => Metric::L1,
            SdMetric::L2 => Metric::L2,
        };
        let res = dbscan(&rows, eps, minpts, metric)?;
        if n > 0 && labels.is_null() {
            return Err(null("labels"));
        }
        for (i, l) in res.labels.iter().enumerate() {
            *labels.add(i) = l.as_i64();
        }
        Ok(())
    })
}
