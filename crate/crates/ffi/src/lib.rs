//! C interface to `moddit`.
//!
//! Every object crosses the boundary as an opaque pointer created by a
//! `md_*_new`-style call and released with the matching `md_*_free`. Calls
//! return an [`MdStatus`]; on failure [`md_last_error`] describes what went
//! wrong on the calling thread. Outputs are written only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use moddit::sim::{run_denoising, SimConfig};
use moddit::{
    attention_to_sparsity, block_diag_decision, build_block_mask, ensure_row_coverage, nae,
    solve_intensities, sparsity_ratio, topk_patterns, AttentionMap, BlockMask, Error, GridLayout,
    IntensityVector, Matrix, SelectionDirection, SolverConfig, SparsityMap,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NumericalFailure = 4,
    Io = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdDirection {
    Ascending = 0,
    Descending = 1,
}

/// Token count, block size and number of frame squares.
pub struct MdLayout(GridLayout);

/// Block sparsity map, `n × n`.
pub struct MdSparsityMap(SparsityMap);

/// Fitted pattern intensities, flattened as `c`, then `d`, then `e`.
pub struct MdIntensities(IntensityVector);

/// Block-level pass/skip mask.
pub struct MdBlockMask(BlockMask);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> MdStatus {
    match e {
        Error::DimensionMismatch { .. } | Error::Divisibility { .. } => MdStatus::DimensionMismatch,
        Error::Io { .. } | Error::Parse { .. } => MdStatus::Io,
        Error::Simulation { source, .. } => status_of(source),
        e if e.is_numerical() => MdStatus::NumericalFailure,
        _ => MdStatus::InvalidArgument,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            MdStatus::Ok
        }
        Ok(Err(Fail::Null(what))) => {
            set_last_error(format!("{what} is null"));
            MdStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("internal panic".into());
            MdStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<(), Fail> {
    if expected != found {
        return Err(Fail::Lib(Error::DimensionMismatch {
            what,
            expected: expected.to_string(),
            found: found.to_string(),
        }));
    }
    Ok(())
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

unsafe fn path<'a>(p: *const c_char, what: &'static str) -> Result<&'a Path, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Error::InvalidArgument(format!("{what} is not valid UTF-8")))?;
    Ok(Path::new(s))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn md_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL after a success.
/// Valid until the next `md_*` call on the same thread.
#[no_mangle]
pub extern "C" fn md_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn md_layout_new(tokens: usize, block: usize, frames: usize, out: *mut *mut MdLayout) -> MdStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        put(out, MdLayout(GridLayout::new(tokens, block, frames)?));
        Ok(())
    })
}

/// # Safety
/// `layout` must be NULL or a handle from [`md_layout_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn md_layout_free(layout: *mut MdLayout) {
    if !layout.is_null() {
        drop(Box::from_raw(layout));
    }
}

/// Blocks per side, or 0 for a NULL handle.
///
/// # Safety
/// `layout` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn md_layout_grid(layout: *const MdLayout) -> usize {
    layout.as_ref().map_or(0, |l| l.0.grid())
}

/// Length of an intensity vector for this layout, or 0 for a NULL handle.
///
/// # Safety
/// `layout` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn md_layout_pattern_count(layout: *const MdLayout) -> usize {
    layout.as_ref().map_or(0, |l| l.0.pattern_count())
}

/// Block sparsity map of a row-major `tokens × tokens` attention matrix.
///
/// # Safety
/// `attention` must point to `len` readable doubles; `layout` must be live.
#[no_mangle]
pub unsafe extern "C" fn md_sparsify(
    layout: *const MdLayout,
    attention: *const f64,
    len: usize,
    eta: f64,
    out: *mut *mut MdSparsityMap,
) -> MdStatus {
    guard(|| {
        let layout = &get(layout, "layout")?.0;
        let values = slice(attention, len, "attention")?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let t = layout.n_tokens();
        check_len("attention length", t * t, len)?;
        let a = AttentionMap::new(Matrix::from_vec(t, t, values.to_vec())?, 0)?;
        put(out, MdSparsityMap(attention_to_sparsity(&a, layout, eta)?));
        Ok(())
    })
}

/// Wraps a row-major `side × side` map with entries in `[0, 1]`.
///
/// # Safety
/// `values` must point to `side * side` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn md_sparsity_map_new(values: *const f64, side: usize, out: *mut *mut MdSparsityMap) -> MdStatus {
    guard(|| {
        let v = slice(values, side * side, "values")?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        put(out, MdSparsityMap(SparsityMap::new(Matrix::from_vec(side, side, v.to_vec())?, 0)?));
        Ok(())
    })
}

/// # Safety
/// `map` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn md_sparsity_map_free(map: *mut MdSparsityMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// # Safety
/// `map` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn md_sparsity_map_side(map: *const MdSparsityMap) -> usize {
    map.as_ref().map_or(0, |m| m.0.side())
}

/// Copies the map row-major into `buf`, which must hold exactly `side²` values.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn md_sparsity_map_copy(map: *const MdSparsityMap, buf: *mut f64, len: usize) -> MdStatus {
    guard(|| {
        let m = &get(map, "map")?.0;
        let dst = out_slice(buf, len, "buf")?;
        check_len("buffer length", m.values.as_slice().len(), len)?;
        dst.copy_from_slice(m.values.as_slice());
        Ok(())
    })
}

/// Fits pattern intensities. `nae_out` may be NULL.
///
/// # Safety
/// Handles must be live; `out` must be writable; `nae_out` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn md_decompose(
    map: *const MdSparsityMap,
    layout: *const MdLayout,
    lambda: f64,
    out: *mut *mut MdIntensities,
    nae_out: *mut f64,
) -> MdStatus {
    guard(|| {
        let map = &get(map, "map")?.0;
        let layout = &get(layout, "layout")?.0;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let cfg = SolverConfig {
            lambda,
            ..SolverConfig::default()
        };
        let fit = solve_intensities(map, layout, &cfg)?;
        if !nae_out.is_null() {
            *nae_out = nae(map, &fit.intensities, layout)?;
        }
        put(out, MdIntensities(fit.intensities));
        Ok(())
    })
}

/// Intensities from a flat `c, d, e` buffer of `md_layout_pattern_count` values.
///
/// # Safety
/// `values` must point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn md_intensities_new(
    layout: *const MdLayout,
    values: *const f64,
    len: usize,
    out: *mut *mut MdIntensities,
) -> MdStatus {
    guard(|| {
        let layout = &get(layout, "layout")?.0;
        let v = slice(values, len, "values")?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        put(out, MdIntensities(IntensityVector::unflatten(v, layout, 0)?));
        Ok(())
    })
}

/// # Safety
/// `x` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn md_intensities_free(x: *mut MdIntensities) {
    if !x.is_null() {
        drop(Box::from_raw(x));
    }
}

/// # Safety
/// `x` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn md_intensities_len(x: *const MdIntensities) -> usize {
    x.as_ref().map_or(0, |x| x.0.len())
}

/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn md_intensities_copy(x: *const MdIntensities, buf: *mut f64, len: usize) -> MdStatus {
    guard(|| {
        let flat = get(x, "intensities")?.0.flatten();
        let dst = out_slice(buf, len, "buf")?;
        check_len("buffer length", flat.len(), len)?;
        dst.copy_from_slice(&flat);
        Ok(())
    })
}

/// Top-K block mask from `current`. Frame squares are kept when both
/// `previous` and `current` exceed `tau_e`; a NULL `previous` uses `current`
/// twice. `cover_rows` opens the diagonal block of any empty block row.
///
/// # Safety
/// Handles must be live or, for `previous`, NULL; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_mask_build(
    layout: *const MdLayout,
    current: *const MdIntensities,
    previous: *const MdIntensities,
    top_k: usize,
    tau_e: f64,
    direction: MdDirection,
    cover_rows: bool,
    out: *mut *mut MdBlockMask,
) -> MdStatus {
    guard(|| {
        let layout = &get(layout, "layout")?.0;
        let curr = &get(current, "current")?.0;
        let prev = previous.as_ref().map_or(curr, |p| &p.0);
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        curr.check_layout(layout)?;
        prev.check_layout(layout)?;
        if top_k == 0 {
            return Err(Error::InvalidArgument("top_k must be at least 1".into()).into());
        }
        let direction = match direction {
            MdDirection::Ascending => SelectionDirection::Ascending,
            MdDirection::Descending => SelectionDirection::Descending,
        };
        let preserve = block_diag_decision(&prev.e, &curr.e, tau_e)?;
        let selected = topk_patterns(&curr.c, &curr.d, top_k, direction);
        let mut mask = build_block_mask(&selected, &preserve, layout, curr.step, 0)?;
        if cover_rows {
            ensure_row_coverage(&mut mask);
        }
        put(out, MdBlockMask(mask));
        Ok(())
    })
}

/// # Safety
/// `mask` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn md_block_mask_free(mask: *mut MdBlockMask) {
    if !mask.is_null() {
        drop(Box::from_raw(mask));
    }
}

/// # Safety
/// `mask` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn md_block_mask_side(mask: *const MdBlockMask) -> usize {
    mask.as_ref().map_or(0, |m| m.0.side())
}

/// Fraction of skipped blocks, or NaN for a NULL handle.
///
/// # Safety
/// `mask` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn md_block_mask_sparsity_ratio(mask: *const MdBlockMask) -> f64 {
    mask.as_ref().map_or(f64::NAN, |m| sparsity_ratio(&m.0))
}

/// Writes 1 for pass and 0 for skip, row-major, into `side²` bytes.
///
/// # Safety
/// `buf` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn md_block_mask_copy(mask: *const MdBlockMask, buf: *mut u8, len: usize) -> MdStatus {
    guard(|| {
        let m = &get(mask, "mask")?.0;
        let dst = out_slice(buf, len, "buf")?;
        check_len("buffer length", m.as_slice().len(), len)?;
        for (d, &p) in dst.iter_mut().zip(m.as_slice()) {
            *d = u8::from(p);
        }
        Ok(())
    })
}

/// Runs the simulator on a config file and writes its CSV reports to `out_dir`.
///
/// # Safety
/// Both arguments must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn md_simulate(config_path: *const c_char, out_dir: *const c_char) -> MdStatus {
    guard(|| {
        let cfg = SimConfig::load(path(config_path, "config_path")?)?;
        let out = path(out_dir, "out_dir")?;
        let report = run_denoising(&cfg.schedule, &cfg.layout, &cfg.solver, &cfg.trajectory, &cfg.run)?;
        report.write_to(out)?;
        Ok(())
    })
}
