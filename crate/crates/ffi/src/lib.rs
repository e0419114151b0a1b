//! C ABI over the simulator.
//!
//! Every fallible function returns a [`V2vStatus`]. On failure the message is
//! kept per thread and can be read with [`v2v_last_error_message`]. Objects
//! created here are opaque and must be released with the matching `_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use v2v_alloc::allocation::hare_niemeyer;
use v2v_alloc::channel::{time_load, PathLossModel};
use v2v_alloc::config::SimConfig;
use v2v_alloc::engine::run;
use v2v_alloc::metrics::{summarize, MetricsLog, Summary};
use v2v_alloc::scenario::Point;
use v2v_alloc::sweep::{run_sweep, SweepOptions};
use v2v_alloc::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum V2vStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidConfig = 2,
    InvalidInput = 3,
    Io = 4,
    Utf8 = 5,
    OutOfRange = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum V2vScheme {
    Proposed = 0,
    Baseline = 1,
}

/// Per-scheme summary of one run.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct V2vSummary {
    pub scheme: V2vScheme,
    pub vue_pairs: usize,
    pub rbs: usize,
    pub seed: u64,
    pub satisfaction_pct: f64,
    pub outage: f64,
    pub sinr_p25_db: f64,
    pub sinr_p50_db: f64,
    pub sinr_p75_db: f64,
    pub mean_swaps_per_zone: f64,
    pub mean_zones: f64,
    pub unconverged_zones: usize,
}

/// Opaque simulation configuration.
pub struct V2vConfig {
    inner: SimConfig,
}

/// Opaque result of one simulation run.
pub struct V2vRun {
    log: MetricsLog,
    summaries: Vec<Summary>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: V2vStatus, msg: impl Into<String>) -> V2vStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> V2vStatus {
    let status = match e {
        Error::InvalidConfig { .. } | Error::UnknownKey(_) | Error::Parse(_) => V2vStatus::InvalidConfig,
        Error::Io(_) | Error::Json(_) => V2vStatus::Io,
        _ => V2vStatus::InvalidInput,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> V2vStatus) -> V2vStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == V2vStatus::Ok {
                LAST_ERROR.with(|e| *e.borrow_mut() = None);
            }
            s
        }
        Err(_) => fail(V2vStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, V2vStatus> {
    if p.is_null() {
        return Err(fail(V2vStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(V2vStatus::Utf8, format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], V2vStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(V2vStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Length in bytes of the last error message on this thread, excluding the
/// terminating NUL. Zero when there is none.
#[no_mangle]
pub extern "C" fn v2v_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |s| s.as_bytes().len()))
}

/// Copies the last error message into `buf` (NUL-terminated, truncated to
/// `len - 1` bytes). Returns the number of bytes written without the NUL.
///
/// # Safety
/// `buf` must be valid for `len` bytes of writes.
#[no_mangle]
pub unsafe extern "C" fn v2v_last_error_message(buf: *mut c_char, len: usize) -> usize {
    if buf.is_null() || len == 0 {
        return 0;
    }
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_ref().map_or(&[][..], |s| s.as_bytes());
        let n = bytes.len().min(len - 1);
        ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
        *buf.add(n) = 0;
        n
    })
}

/// A configuration holding the defaults.
#[no_mangle]
pub extern "C" fn v2v_config_new() -> *mut V2vConfig {
    Box::into_raw(Box::new(V2vConfig {
        inner: SimConfig::default(),
    }))
}

/// # Safety
/// `cfg` must come from [`v2v_config_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn v2v_config_free(cfg: *mut V2vConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Sets one configuration key (same names as the command-line flags).
///
/// # Safety
/// `cfg` must be a live config; `key` and `value` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn v2v_config_set(cfg: *mut V2vConfig, key: *const c_char, value: *const c_char) -> V2vStatus {
    guard(|| {
        let Some(cfg) = cfg.as_mut() else {
            return fail(V2vStatus::NullPointer, "config is null");
        };
        let key = try_ffi!(str_arg(key, "key"));
        let value = try_ffi!(str_arg(value, "value"));
        match cfg.inner.set(key, value) {
            Ok(()) => V2vStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}

/// Merges a flat TOML file into the configuration.
///
/// # Safety
/// `cfg` must be a live config; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn v2v_config_load_file(cfg: *mut V2vConfig, path: *const c_char) -> V2vStatus {
    guard(|| {
        let Some(cfg) = cfg.as_mut() else {
            return fail(V2vStatus::NullPointer, "config is null");
        };
        let path = try_ffi!(str_arg(path, "path"));
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => return fail(V2vStatus::Io, format!("{path}: {e}")),
        };
        match cfg.inner.merge_toml(&text) {
            Ok(()) => V2vStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `cfg` must be a live config.
#[no_mangle]
pub unsafe extern "C" fn v2v_config_validate(cfg: *const V2vConfig) -> V2vStatus {
    guard(|| match cfg.as_ref() {
        None => fail(V2vStatus::NullPointer, "config is null"),
        Some(c) => match c.inner.validate() {
            Ok(()) => V2vStatus::Ok,
            Err(e) => from_error(e),
        },
    })
}

/// Runs one simulation. On success `*out` owns a new run handle.
///
/// # Safety
/// `cfg` must be a live config and `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn v2v_run(cfg: *const V2vConfig, out: *mut *mut V2vRun) -> V2vStatus {
    guard(|| {
        if out.is_null() {
            return fail(V2vStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let Some(cfg) = cfg.as_ref() else {
            return fail(V2vStatus::NullPointer, "config is null");
        };
        let log = match run(&cfg.inner) {
            Ok(l) => l,
            Err(e) => return from_error(e),
        };
        let summaries = match summarize(&log) {
            Ok(s) => s,
            Err(e) => return from_error(e),
        };
        *out = Box::into_raw(Box::new(V2vRun { log, summaries }));
        V2vStatus::Ok
    })
}

/// # Safety
/// `run` must come from [`v2v_run`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn v2v_run_free(run: *mut V2vRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of summaries (one per evaluated scheme), 0 for a null handle.
///
/// # Safety
/// `run` must be null or a live run.
#[no_mangle]
pub unsafe extern "C" fn v2v_run_summary_count(run: *const V2vRun) -> usize {
    run.as_ref().map_or(0, |r| r.summaries.len())
}

/// Number of zone-formation windows, 0 for a null handle.
///
/// # Safety
/// `run` must be null or a live run.
#[no_mangle]
pub unsafe extern "C" fn v2v_run_window_count(run: *const V2vRun) -> usize {
    run.as_ref().map_or(0, |r| r.log.windows.len())
}

/// # Safety
/// `run` must be a live run and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn v2v_run_summary(run: *const V2vRun, index: usize, out: *mut V2vSummary) -> V2vStatus {
    guard(|| {
        let (Some(run), false) = (run.as_ref(), out.is_null()) else {
            return fail(V2vStatus::NullPointer, "run or out is null");
        };
        let Some(s) = run.summaries.get(index) else {
            return fail(
                V2vStatus::OutOfRange,
                format!("summary {index} of {}", run.summaries.len()),
            );
        };
        *out = V2vSummary {
            scheme: if s.scheme == "baseline" {
                V2vScheme::Baseline
            } else {
                V2vScheme::Proposed
            },
            vue_pairs: s.vue_pairs,
            rbs: s.rbs,
            seed: s.seed,
            satisfaction_pct: s.satisfaction_pct,
            outage: s.outage,
            sinr_p25_db: s.sinr_p25_db,
            sinr_p50_db: s.sinr_p50_db,
            sinr_p75_db: s.sinr_p75_db,
            mean_swaps_per_zone: s.mean_swaps_per_zone,
            mean_zones: s.mean_zones,
            unconverged_zones: s.unconverged_zones,
        };
        V2vStatus::Ok
    })
}

/// Serialises the full run log as JSON. Release the string with
/// [`v2v_string_free`].
///
/// # Safety
/// `run` must be a live run and `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn v2v_run_to_json(run: *const V2vRun, out: *mut *mut c_char) -> V2vStatus {
    guard(|| {
        let (Some(run), false) = (run.as_ref(), out.is_null()) else {
            return fail(V2vStatus::NullPointer, "run or out is null");
        };
        let json = match serde_json::to_string(&run.log) {
            Ok(j) => j,
            Err(e) => return from_error(e.into()),
        };
        match CString::new(json) {
            Ok(c) => {
                *out = c.into_raw();
                V2vStatus::Ok
            }
            Err(_) => fail(V2vStatus::InvalidInput, "log contains NUL bytes"),
        }
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn v2v_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Runs a (K, N, seed) sweep and writes the result files into `out_dir`.
///
/// # Safety
/// Array pointers must be valid for their lengths; `out_dir` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn v2v_sweep(
    cfg: *const V2vConfig,
    vue_pairs: *const usize,
    vue_pairs_len: usize,
    rbs: *const usize,
    rbs_len: usize,
    seeds: *const u64,
    seeds_len: usize,
    out_dir: *const c_char,
    dump_matrices: bool,
) -> V2vStatus {
    guard(|| {
        let Some(cfg) = cfg.as_ref() else {
            return fail(V2vStatus::NullPointer, "config is null");
        };
        let ks = try_ffi!(slice_arg(vue_pairs, vue_pairs_len, "vue_pairs"));
        let ns = try_ffi!(slice_arg(rbs, rbs_len, "rbs"));
        let seeds = try_ffi!(slice_arg(seeds, seeds_len, "seeds"));
        let dir = try_ffi!(str_arg(out_dir, "out_dir"));
        match run_sweep(
            &cfg.inner,
            ks,
            ns,
            seeds,
            Path::new(dir),
            SweepOptions { dump_matrices },
        ) {
            Ok(_) => V2vStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}

/// Largest-remainder split of `rbs` RBs over `zones` loads into `out_seats`.
///
/// # Safety
/// `loads` and `out_seats` must be valid for `zones` elements.
#[no_mangle]
pub unsafe extern "C" fn v2v_hare_niemeyer(
    loads: *const f64,
    zones: usize,
    rbs: usize,
    out_seats: *mut usize,
) -> V2vStatus {
    guard(|| {
        let loads = try_ffi!(slice_arg(loads, zones, "loads"));
        if out_seats.is_null() && zones > 0 {
            return fail(V2vStatus::NullPointer, "out_seats is null");
        }
        match hare_niemeyer(loads, rbs) {
            Ok(seats) => {
                ptr::copy_nonoverlapping(seats.as_ptr(), out_seats, seats.len());
                V2vStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Linear path gain between two points under the default model.
///
/// # Safety
/// `out_gain` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn v2v_pathloss(
    tx_x: f64,
    tx_y: f64,
    rx_x: f64,
    rx_y: f64,
    los: bool,
    out_gain: *mut f64,
) -> V2vStatus {
    guard(|| {
        if out_gain.is_null() {
            return fail(V2vStatus::NullPointer, "out_gain is null");
        }
        let (tx, rx) = (Point::new(tx_x, tx_y), Point::new(rx_x, rx_y));
        if ![tx.x, tx.y, rx.x, rx.y].iter().all(|v| v.is_finite()) {
            return fail(V2vStatus::InvalidInput, "coordinates must be finite");
        }
        *out_gain = PathLossModel::default().pathloss(tx, rx, los);
        V2vStatus::Ok
    })
}

/// Fraction of a slot needed to carry `influx` bit/s at `rate` bit/s;
/// infinite when the rate is zero.
#[no_mangle]
pub extern "C" fn v2v_time_load(influx: f64, rate: f64) -> f64 {
    time_load(influx, rate)
}
