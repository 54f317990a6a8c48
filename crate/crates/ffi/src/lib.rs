//! C ABI over `hetraffic`.
//!
//! Objects cross the boundary as opaque handles (`HtSource`, `HtConfig`) that
//! the caller frees with the matching `*_free` function. Every fallible call
//! returns an [`HtStatus`]; the message of the last failure on the calling
//! thread is available from [`ht_last_error`]. Strings returned through `char**`
//! out-parameters are owned by the library and released with [`ht_string_free`].
//! Panics are caught and reported as `HT_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use hetraffic::aggregation::{aggregate, AggregateOptions, SourceModel};
use hetraffic::analysis::{classify_regime, ClassifyBudget};
use hetraffic::cli::{run, ExperimentConfig, ModelConfig, RunOptions, Subcommand};
use hetraffic::error::Error;
use hetraffic::heavy_tail::hill_estimate;

/// Status codes.
#[repr(C)]
#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HtStatus {
    HT_OK = 0,
    /// Null pointer, bad UTF-8 or a too-small output buffer.
    HT_INVALID_ARGUMENT = 1,
    HT_INVALID_PARAMETER = 2,
    HT_CONFIG = 3,
    HT_HYPOTHESIS = 4,
    HT_CAPACITY = 5,
    HT_NUMERIC = 6,
    HT_IO = 7,
    /// `ht_run` with `assert` set found a verdict that differs from its prediction.
    HT_ASSERTION_FAILED = 8,
    HT_PANIC = 9,
}

use HtStatus::*;

/// Simulation source (shot-noise or regenerative).
pub struct HtSource(SourceModel);

/// Parsed experiment config.
pub struct HtConfig(ExperimentConfig);

/// Predicted regime at one γ.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HtRegime {
    pub gamma: f64,
    pub gamma0: f64,
    pub alpha: f64,
    pub h: f64,
    /// 0 = FBS, 1 = stable sheet, 2 = Telecom.
    pub kind: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> HtStatus {
    match e {
        Error::InvalidParameter { .. } => HT_INVALID_PARAMETER,
        Error::Config { .. } | Error::Json(_) => HT_CONFIG,
        Error::Hypothesis(_) => HT_HYPOTHESIS,
        Error::Capacity(_) => HT_CAPACITY,
        Error::Quadrature { .. } => HT_NUMERIC,
        Error::Io(_) | Error::Csv(_) => HT_IO,
    }
}

struct Fail(HtStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn arg(msg: &str) -> Fail {
    Fail(HT_INVALID_ARGUMENT, msg.to_string())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> HtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            HT_OK
        }
        Ok(Err(Fail(s, m))) => {
            set_error(&m);
            s
        }
        Err(p) => {
            let m = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("panic: {m}"));
            HT_PANIC
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(arg(&format!("`{name}` is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| arg(&format!("`{name}` is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, n: usize, name: &str) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(arg(&format!("`{name}` is null")));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn out_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    if out.is_null() {
        return Err(arg("output pointer is null"));
    }
    *out = CString::new(s).map_err(|_| arg("string contains NUL"))?.into_raw();
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ht_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread (empty after a success).
/// Valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn ht_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ht_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a source from a model JSON object such as
/// `{"class": "shot-noise", "pulse": {...}}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ht_source_from_json(json: *const c_char, out: *mut *mut HtSource) -> HtStatus {
    guard(|| {
        if out.is_null() {
            return Err(arg("`out` is null"));
        }
        let text = str_arg(json, "json")?;
        let model: ModelConfig = serde_json::from_str(text).map_err(Error::from)?;
        let src = model.build()?;
        *out = Box::into_raw(Box::new(HtSource(src)));
        Ok(())
    })
}

/// # Safety
/// `src` must come from `ht_source_from_json` and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ht_source_free(src: *mut HtSource) {
    if !src.is_null() {
        drop(Box::from_raw(src));
    }
}

unsafe fn source<'a>(src: *const HtSource) -> Result<&'a SourceModel, Fail> {
    src.as_ref().map(|s| &s.0).ok_or_else(|| arg("`src` is null"))
}

/// Stationary mean of one source.
///
/// # Safety
/// `src` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ht_source_mean(src: *const HtSource, out: *mut f64) -> HtStatus {
    guard(|| {
        let s = source(src)?;
        if out.is_null() {
            return Err(arg("`out` is null"));
        }
        *out = s.mean()?;
        Ok(())
    })
}

/// Predicted regime, normalization and critical γ₀ at `gamma`.
///
/// # Safety
/// `src` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ht_source_regime(src: *const HtSource, gamma: f64, out: *mut HtRegime) -> HtStatus {
    guard(|| {
        let s = source(src)?;
        if out.is_null() {
            return Err(arg("`out` is null"));
        }
        let r = s.regime_of(gamma)?;
        *out = HtRegime {
            gamma: r.gamma,
            gamma0: r.gamma0,
            alpha: r.alpha,
            h: r.h,
            kind: r.kind as i32,
        };
        Ok(())
    })
}

/// Full regime description (limit constants, notes) as JSON.
///
/// # Safety
/// `src` must be a live handle; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ht_source_regime_json(src: *const HtSource, gamma: f64, out_json: *mut *mut c_char) -> HtStatus {
    guard(|| {
        let r = source(src)?.regime_of(gamma)?;
        out_string(out_json, serde_json::to_string(&r).map_err(Error::from)?)
    })
}

/// Centered, normalized aggregate `A(x, y)` at a single point for `n_rep`
/// replicates, written to `out[0..n_rep]`.
///
/// # Safety
/// `src` must be a live handle; `out` must hold `n_rep` doubles.
#[no_mangle]
pub unsafe extern "C" fn ht_aggregate_point(
    src: *const HtSource,
    lambda: f64,
    gamma: f64,
    h: f64,
    x: f64,
    y: f64,
    n_rep: usize,
    seed: u64,
    out: *mut f64,
) -> HtStatus {
    guard(|| {
        let s = source(src)?;
        if out.is_null() {
            return Err(arg("`out` is null"));
        }
        let sample = aggregate(s, lambda, gamma, h, &[x], &[y], n_rep, seed, &AggregateOptions::default())?;
        let dst = std::slice::from_raw_parts_mut(out, n_rep);
        for (d, v) in dst.iter_mut().zip(sample.column(0, 0)) {
            *d = v;
        }
        Ok(())
    })
}

/// Runs the regime classifier. `budget_json` is a budget object, e.g.
/// `{"lambdas": [64, 128, 256, 512], "n_rep": 1000}`; the report is returned as JSON.
///
/// # Safety
/// `src` must be a live handle, `budget_json` NUL-terminated, `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn ht_classify_regime(
    src: *const HtSource,
    gamma: f64,
    budget_json: *const c_char,
    seed: u64,
    out_json: *mut *mut c_char,
) -> HtStatus {
    guard(|| {
        let s = source(src)?;
        let budget: ClassifyBudget = serde_json::from_str(str_arg(budget_json, "budget_json")?).map_err(Error::from)?;
        let report = classify_regime(s, gamma, &budget, seed)?;
        out_string(out_json, serde_json::to_string(&report).map_err(Error::from)?)
    })
}

/// Hill tail-index estimate from the `k` largest of `n` positive samples.
///
/// # Safety
/// `samples` must hold `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ht_hill_estimate(samples: *const f64, n: usize, k: usize, out: *mut f64) -> HtStatus {
    guard(|| {
        let v = slice_arg(samples, n, "samples")?;
        if out.is_null() {
            return Err(arg("`out` is null"));
        }
        *out = hill_estimate(v, k)?;
        Ok(())
    })
}

/// Parses and keeps an experiment config.
///
/// # Safety
/// `json` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ht_config_from_json(json: *const c_char, out: *mut *mut HtConfig) -> HtStatus {
    guard(|| {
        if out.is_null() {
            return Err(arg("`out` is null"));
        }
        let cfg = ExperimentConfig::from_json(str_arg(json, "json")?)?;
        *out = Box::into_raw(Box::new(HtConfig(cfg)));
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from `ht_config_from_json` and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ht_config_free(cfg: *mut HtConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// SHA-256 hex digest of the config as embedded in outputs.
///
/// # Safety
/// `cfg` must be a live handle; `out_hex` writable.
#[no_mangle]
pub unsafe extern "C" fn ht_config_hash(cfg: *const HtConfig, out_hex: *mut *mut c_char) -> HtStatus {
    guard(|| {
        let c = cfg.as_ref().ok_or_else(|| arg("`cfg` is null"))?;
        out_string(out_hex, c.0.hash())
    })
}

/// Runs a subcommand (`"simulate"`, `"limit-check"`, ...) and writes its files
/// into `out_dir`. `workers == 0` keeps the config value; `seed_override` is used
/// when `has_seed` is nonzero.
///
/// # Safety
/// `cfg` must be a live handle and the strings NUL-terminated. `out_dir` may be null.
#[no_mangle]
pub unsafe extern "C" fn ht_run(
    cfg: *const HtConfig,
    subcommand: *const c_char,
    out_dir: *const c_char,
    workers: usize,
    has_seed: i32,
    seed_override: u64,
    assert: i32,
) -> HtStatus {
    guard(|| {
        let c = cfg.as_ref().ok_or_else(|| arg("`cfg` is null"))?;
        let name = str_arg(subcommand, "subcommand")?;
        let sub = Subcommand::parse(name).ok_or_else(|| arg(&format!("unknown subcommand `{name}`")))?;
        let out = if out_dir.is_null() {
            None
        } else {
            Some(PathBuf::from(str_arg(out_dir, "out_dir")?))
        };
        let opts = RunOptions {
            seed: (has_seed != 0).then_some(seed_override),
            workers: (workers > 0).then_some(workers),
            out,
            assert: assert != 0,
        };
        let outcome = run(sub, &c.0, &opts)?;
        if outcome.assertion_failed {
            return Err(Fail(HT_ASSERTION_FAILED, outcome.summary.join("; ")));
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    #[test]
    fn null_arguments_are_rejected() {
        unsafe {
            let mut h: *mut HtSource = ptr::null_mut();
            assert_eq!(ht_source_from_json(ptr::null(), &mut h), HT_INVALID_ARGUMENT);
            assert!(h.is_null());
            let msg = CStr::from_ptr(ht_last_error()).to_str().unwrap();
            assert!(msg.contains("json"), "{msg}");
            let mut v = 0.0;
            assert_eq!(ht_source_mean(ptr::null(), &mut v), HT_INVALID_ARGUMENT);
            ht_source_free(ptr::null_mut());
            ht_string_free(ptr::null_mut());
        }
    }

    #[test]
    fn version_matches() {
        let v = unsafe { CStr::from_ptr(ht_version()) }.to_str().unwrap();
        assert_eq!(v, hetraffic::cli::VERSION);
    }
}
