//! C ABI over `gearfuse`.
//!
//! Every fallible function returns a [`GfStatus`]; on failure the message is
//! available from [`gf_last_error`] on the same thread. Objects cross the
//! boundary as opaque handles owned by the caller and released with the
//! matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::slice;

use gearfuse::cli::RunConfig;
use gearfuse::fusion::{self, FusionModel};
use gearfuse::nn::Layer;
use gearfuse::pso::{self, SwarmConfig};
use gearfuse::tfa::{self, TfGrid, WindowSchedule, SCHEDULE_SECTIONS};
use gearfuse::{dtcwt, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    Io = 4,
    Format = 5,
    Panic = 6,
}

/// Row-major real grid (frequency along rows).
pub struct GfGrid {
    inner: TfGrid,
}

/// Trained classifier plus the configuration it was built from.
pub struct GfModel {
    inner: FusionModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> GfStatus {
    match e {
        Error::InvalidArgument(_) | Error::Config(_) => GfStatus::InvalidArgument,
        Error::Shape(_) => GfStatus::Shape,
        Error::Io(_) => GfStatus::Io,
        Error::BadMagic { .. } | Error::UnexpectedEnd | Error::Version { .. } => GfStatus::Format,
    }
}

fn guard(f: impl FnOnce() -> Result<(), GfStatus>) -> GfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GfStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            GfStatus::Panic
        }
    }
}

fn lib<T>(r: gearfuse::Result<T>) -> Result<T, GfStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

fn null() -> GfStatus {
    set_error("null pointer argument".into());
    GfStatus::NullPointer
}

unsafe fn input<'a>(p: *const f64, n: usize) -> Result<&'a [f64], GfStatus> {
    if p.is_null() {
        return Err(null());
    }
    Ok(slice::from_raw_parts(p, n))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, GfStatus> {
    if p.is_null() {
        return Err(null());
    }
    CStr::from_ptr(p).to_str().map(PathBuf::from).map_err(|_| {
        set_error("path is not valid UTF-8".into());
        GfStatus::InvalidArgument
    })
}

unsafe fn schedule_arg(p: *const u32) -> Result<WindowSchedule, GfStatus> {
    if p.is_null() {
        return Err(null());
    }
    let lengths: Vec<usize> = slice::from_raw_parts(p, SCHEDULE_SECTIONS).iter().map(|&v| v as usize).collect();
    lib(WindowSchedule::from_slice(&lengths))
}

unsafe fn put_grid(out: *mut *mut GfGrid, grid: TfGrid) -> Result<(), GfStatus> {
    if out.is_null() {
        return Err(null());
    }
    *out = Box::into_raw(Box::new(GfGrid { inner: grid }));
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Adaptive Gabor STFT magnitude with a 16-section window schedule.
///
/// # Safety
/// `signal` must point to `len` doubles, `schedule` to 16 integers and `out`
/// to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn gf_astft(
    signal: *const f64,
    len: usize,
    schedule: *const u32,
    hop: usize,
    out: *mut *mut GfGrid,
) -> GfStatus {
    guard(|| {
        let x = input(signal, len)?;
        let s = schedule_arg(schedule)?;
        put_grid(out, lib(tfa::astft(x, &s, hop))?)
    })
}

/// Wigner-Ville distribution magnitude (`len x len`).
///
/// # Safety
/// `signal` must point to `len` doubles and `out` to storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn gf_wvd(signal: *const f64, len: usize, out: *mut *mut GfGrid) -> GfStatus {
    guard(|| {
        let x = input(signal, len)?;
        put_grid(out, lib(tfa::wvd(x))?)
    })
}

/// DTCWT scalogram resampled to `rows x cols`.
///
/// # Safety
/// `signal` must point to `len` doubles and `out` to storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn gf_dtcwt_scalogram(
    signal: *const f64,
    len: usize,
    levels: usize,
    rows: usize,
    cols: usize,
    out: *mut *mut GfGrid,
) -> GfStatus {
    guard(|| {
        let x = input(signal, len)?;
        let c = lib(dtcwt::forward(x, levels))?;
        put_grid(out, lib(dtcwt::scalogram(&c, rows, cols))?)
    })
}

/// Forward then inverse DTCWT; writes `len` reconstructed samples.
///
/// # Safety
/// `signal` and `out` must each point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gf_dtcwt_roundtrip(signal: *const f64, len: usize, levels: usize, out: *mut f64) -> GfStatus {
    guard(|| {
        let x = input(signal, len)?;
        if out.is_null() {
            return Err(null());
        }
        let y = lib(dtcwt::inverse(&lib(dtcwt::forward(x, levels))?))?;
        slice::from_raw_parts_mut(out, len).copy_from_slice(&y);
        Ok(())
    })
}

/// One seeded PSO search with default swarm constants; writes the best
/// 16-section schedule and its fitness.
///
/// # Safety
/// `signal` must point to `len` doubles, `out_schedule` to 16 writable
/// integers and `out_fitness` to one writable double.
#[no_mangle]
pub unsafe extern "C" fn gf_pso_optimize(
    signal: *const f64,
    len: usize,
    seed: u64,
    out_schedule: *mut u32,
    out_fitness: *mut f64,
) -> GfStatus {
    guard(|| {
        let x = input(signal, len)?;
        if out_schedule.is_null() || out_fitness.is_null() {
            return Err(null());
        }
        let r = lib(pso::pso_optimize(x, &SwarmConfig { seed, ..SwarmConfig::default() }))?;
        let dst = slice::from_raw_parts_mut(out_schedule, SCHEDULE_SECTIONS);
        for (d, &l) in dst.iter_mut().zip(r.best_schedule.lengths()) {
            *d = l as u32;
        }
        *out_fitness = r.best_fitness;
        Ok(())
    })
}

/// # Safety
/// `grid` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn gf_grid_rows(grid: *const GfGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.inner.rows())
}

/// # Safety
/// `grid` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn gf_grid_cols(grid: *const GfGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.inner.cols())
}

/// Borrowed pointer to `rows * cols` values; valid until the grid is freed.
///
/// # Safety
/// `grid` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn gf_grid_data(grid: *const GfGrid) -> *const f64 {
    grid.as_ref().map_or(ptr::null(), |g| g.inner.values().as_ptr())
}

/// # Safety
/// `grid` must come from this library and not be freed twice. NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn gf_grid_free(grid: *mut GfGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Loads a checkpoint. `config_path` is the run configuration the model was
/// trained with (the `config.txt` echoed next to it); it fixes the
/// architecture. `class_count` must match the training data.
///
/// # Safety
/// Paths must be NUL-terminated UTF-8; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gf_model_load(
    config_path: *const c_char,
    model_path: *const c_char,
    class_count: usize,
    out: *mut *mut GfModel,
) -> GfStatus {
    guard(|| {
        let cfg = lib(RunConfig::load(&path_arg(config_path)?))?;
        let model_path = path_arg(model_path)?;
        if out.is_null() {
            return Err(null());
        }
        let mut cfg = lib(cfg.resolved())?;
        cfg.model.class_count = class_count;
        let model = lib(fusion::load_model(&model_path, &cfg.model))?;
        *out = Box::into_raw(Box::new(GfModel { inner: model }));
        Ok(())
    })
}

/// Values per packed sample expected by [`gf_model_predict`].
///
/// # Safety
/// `model` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn gf_model_input_len(model: *const GfModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.config.input_len())
}

/// # Safety
/// `model` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn gf_model_class_count(model: *const GfModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.config.class_count)
}

/// Inference on `n` packed samples (`n * input_len` values, layout of the
/// model's variant); writes `n * class_count` logits row-major.
///
/// # Safety
/// `inputs` must hold `n * input_len` doubles and `out_logits`
/// `n * class_count` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gf_model_predict(
    model: *mut GfModel,
    inputs: *const f64,
    n: usize,
    out_logits: *mut f64,
) -> GfStatus {
    guard(|| {
        let m = model.as_mut().ok_or_else(null)?;
        if out_logits.is_null() {
            return Err(null());
        }
        let len = m.inner.config.input_len();
        let k = m.inner.config.class_count;
        let x = input(inputs, n * len)?;
        let t = lib(gearfuse::nn::Tensor4::new([n, 1, 1, len], x.to_vec()))?;
        let y = lib(m.inner.forward(&t, false))?;
        slice::from_raw_parts_mut(out_logits, n * k).copy_from_slice(y.data());
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library and not be freed twice. NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn gf_model_free(model: *mut GfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
