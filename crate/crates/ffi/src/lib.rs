//! C ABI over the `isamp` library.
//!
//! Objects are opaque heap handles created by `*_new`/`*_load`/`*_run`
//! functions and released with the matching `*_free`. Every fallible call
//! returns an [`IsampStatus`]; on failure the message is available from
//! [`isamp_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use isamp::designs::ScenarioConfig;
use isamp::harness::{run_study_with_threads, MetricsTable, StudyMethod};
use isamp::io::{load_dataset, DatasetSpec};
use isamp::model::{Method, ModelKind, ModelSpec, Observation, Posterior};
use isamp::sampler::{run_hmc, ChainConfig, Draws, LogDensity};
use isamp::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsampStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Numerical = 4,
    Init = 5,
    Design = 6,
    Study = 7,
    Dataset = 8,
    Config = 9,
    Io = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsampModel {
    Linear = 0,
    Probit = 1,
    Spline = 2,
    WeightsOnly = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsampMethod {
    Full = 0,
    Pseudo = 1,
    Ignore = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsampStudyMethod {
    Full = 0,
    Pseudo = 1,
    Srs = 2,
}

/// Sampler settings; see [`isamp_chain_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct IsampChainConfig {
    pub n_warmup: usize,
    pub n_draws: usize,
    pub target_accept: f64,
    pub max_leapfrog: usize,
    pub seed: u64,
    pub init_jitter: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct IsampMethodMetrics {
    pub bias: f64,
    pub mse: f64,
    pub coverage_95: f64,
    pub avg_ci_length: f64,
}

pub struct IsampDataset {
    obs: Vec<Observation>,
}

pub struct IsampPosterior {
    inner: Posterior,
}

pub struct IsampDraws {
    inner: Draws,
}

pub struct IsampMetrics {
    inner: MetricsTable,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> IsampStatus {
    match e {
        Error::Domain(_) => IsampStatus::Domain,
        Error::Numerical { .. } => IsampStatus::Numerical,
        Error::Init(_) => IsampStatus::Init,
        Error::Design(_) => IsampStatus::Design,
        Error::Study { .. } => IsampStatus::Study,
        Error::Dataset(_) | Error::Csv(_) => IsampStatus::Dataset,
        Error::Config(_) | Error::Json(_) => IsampStatus::Config,
        Error::Io { .. } => IsampStatus::Io,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (IsampStatus, String)>) -> IsampStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IsampStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            IsampStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (IsampStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (IsampStatus, String) {
    (IsampStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (IsampStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (IsampStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (IsampStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (IsampStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn isamp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn isamp_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn isamp_chain_config_default() -> IsampChainConfig {
    let c = ChainConfig::default();
    IsampChainConfig {
        n_warmup: c.n_warmup,
        n_draws: c.n_draws,
        target_accept: c.target_accept,
        max_leapfrog: c.max_leapfrog,
        seed: c.seed,
        init_jitter: c.init_jitter,
    }
}

#[no_mangle]
pub extern "C" fn isamp_dataset_new() -> *mut IsampDataset {
    Box::into_raw(Box::new(IsampDataset { obs: Vec::new() }))
}

/// Appends one observation. `x_y` may be empty (`p_y = 0`) only for the
/// weights-only model.
///
/// # Safety
/// `ds` must come from this library; `x_y`/`x_pi` must point to `p_y`/`p_pi` doubles.
#[no_mangle]
pub unsafe extern "C" fn isamp_dataset_push(
    ds: *mut IsampDataset,
    y: f64,
    log_pi: f64,
    x_y: *const f64,
    p_y: usize,
    x_pi: *const f64,
    p_pi: usize,
) -> IsampStatus {
    guard(|| {
        let ds = out_ptr(ds, "dataset")?;
        let xy = slice(x_y, p_y, "x_y")?.to_vec();
        let xp = slice(x_pi, p_pi, "x_pi")?.to_vec();
        let obs = Observation::with_log_pi(y, log_pi, xy, xp).map_err(lib_err)?;
        ds.obs.push(obs);
        Ok(())
    })
}

/// Loads a CSV dataset described by a JSON dataset spec.
///
/// # Safety
/// `spec_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn isamp_dataset_load(spec_json: *const c_char, out: *mut *mut IsampDataset) -> IsampStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let spec: DatasetSpec = serde_json::from_str(c_str(spec_json, "spec_json")?)
            .map_err(|e| (IsampStatus::Config, e.to_string()))?;
        let ds = load_dataset(&spec).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(IsampDataset { obs: ds.observations }));
        Ok(())
    })
}

/// Number of observations, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn isamp_dataset_len(ds: *const IsampDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.obs.len())
}

/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn isamp_dataset_free(ds: *mut IsampDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Builds the log posterior of a model on a dataset. `spline_b`/`spline_k`
/// are used only by the spline model.
///
/// # Safety
/// `ds` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn isamp_posterior_new(
    ds: *const IsampDataset,
    model: IsampModel,
    method: IsampMethod,
    spline_b: usize,
    spline_k: usize,
    out: *mut *mut IsampPosterior,
) -> IsampStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or_else(|| null("dataset"))?;
        let out = out_ptr(out, "out")?;
        let method = match method {
            IsampMethod::Full => Method::Full,
            IsampMethod::Pseudo => Method::Pseudo,
            IsampMethod::Ignore => Method::Ignore,
        };
        let spec = match model {
            IsampModel::Linear => ModelSpec::new(ModelKind::Linear, method),
            IsampModel::Probit => ModelSpec::new(ModelKind::Probit, method),
            IsampModel::WeightsOnly => ModelSpec::new(ModelKind::WeightsOnly, method),
            IsampModel::Spline => ModelSpec::spline(method, spline_b, spline_k),
        };
        let inner = Posterior::new(&ds.obs, spec).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(IsampPosterior { inner }));
        Ok(())
    })
}

/// Unconstrained parameter dimension, or 0 for a null handle.
///
/// # Safety
/// `post` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn isamp_posterior_dim(post: *const IsampPosterior) -> usize {
    post.as_ref().map_or(0, |p| p.inner.dim())
}

/// Log posterior at `x` (length `dim`); when `grad` is non-null the gradient
/// is written there.
///
/// # Safety
/// `x` must hold `dim` doubles, `grad` null or `dim` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn isamp_posterior_log_density(
    post: *const IsampPosterior,
    x: *const f64,
    dim: usize,
    grad: *mut f64,
    out_value: *mut f64,
) -> IsampStatus {
    guard(|| {
        let post = post.as_ref().ok_or_else(|| null("posterior"))?;
        let out = out_ptr(out_value, "out_value")?;
        if dim != post.inner.dim() {
            return Err((
                IsampStatus::InvalidArgument,
                format!("dimension {dim} does not match posterior dimension {}", post.inner.dim()),
            ));
        }
        let x = slice(x, dim, "x")?;
        *out = if grad.is_null() {
            post.inner.log_density(x)
        } else {
            let g = std::slice::from_raw_parts_mut(grad, dim);
            post.inner.log_density_and_grad(x, g)
        };
        Ok(())
    })
}

/// # Safety
/// `post` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn isamp_posterior_free(post: *mut IsampPosterior) {
    if !post.is_null() {
        drop(Box::from_raw(post));
    }
}

/// Runs one NUTS chain. `init` may be null (start at zero) or hold `dim` doubles.
///
/// # Safety
/// Pointers must be valid as documented; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn isamp_sample(
    post: *const IsampPosterior,
    config: *const IsampChainConfig,
    init: *const f64,
    out: *mut *mut IsampDraws,
) -> IsampStatus {
    guard(|| {
        let post = post.as_ref().ok_or_else(|| null("posterior"))?;
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        let out = out_ptr(out, "out")?;
        let dim = post.inner.dim();
        let init = if init.is_null() {
            vec![0.0; dim]
        } else {
            slice(init, dim, "init")?.to_vec()
        };
        let cfg = ChainConfig {
            n_warmup: c.n_warmup,
            n_draws: c.n_draws,
            target_accept: c.target_accept,
            max_leapfrog: c.max_leapfrog,
            seed: c.seed,
            init_jitter: c.init_jitter,
        };
        let draws = run_hmc(&post.inner, &init, &cfg)
            .map_err(lib_err)?
            .with_names(post.inner.layout().names());
        *out = Box::into_raw(Box::new(IsampDraws { inner: draws }));
        Ok(())
    })
}

/// # Safety
/// `d` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn isamp_draws_count(d: *const IsampDraws) -> usize {
    d.as_ref().map_or(0, |d| d.inner.n_draws())
}

/// # Safety
/// `d` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn isamp_draws_dim(d: *const IsampDraws) -> usize {
    d.as_ref().map_or(0, |d| d.inner.dim())
}

/// Mean acceptance statistic of the post-warmup transitions.
///
/// # Safety
/// `d` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn isamp_draws_accept_rate(d: *const IsampDraws) -> f64 {
    d.as_ref().map_or(f64::NAN, |d| d.inner.accept_rate)
}

/// # Safety
/// `d` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn isamp_draws_divergences(d: *const IsampDraws) -> usize {
    d.as_ref().map_or(0, |d| d.inner.divergence_count)
}

/// Copies the draws row-major (count x dim, unconstrained scale) into `buf`.
///
/// # Safety
/// `buf` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn isamp_draws_copy(d: *const IsampDraws, buf: *mut f64, len: usize) -> IsampStatus {
    guard(|| {
        let d = d.as_ref().ok_or_else(|| null("draws"))?;
        let src = d.inner.as_flat();
        if len < src.len() {
            return Err((
                IsampStatus::InvalidArgument,
                format!("buffer holds {len} values, need {}", src.len()),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        std::slice::from_raw_parts_mut(buf, src.len()).copy_from_slice(src);
        Ok(())
    })
}

/// # Safety
/// `d` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn isamp_draws_free(d: *mut IsampDraws) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Runs a linear-scenario Monte Carlo study described by a JSON scenario
/// config. `threads = 0` uses `ISAMP_THREADS` or all cores.
///
/// # Safety
/// `scenario_json` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn isamp_run_study(
    scenario_json: *const c_char,
    threads: usize,
    out: *mut *mut IsampMetrics,
) -> IsampStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let scenario: ScenarioConfig = serde_json::from_str(c_str(scenario_json, "scenario_json")?)
            .map_err(|e| (IsampStatus::Config, e.to_string()))?;
        let threads = if threads == 0 {
            isamp::harness::worker_count()
        } else {
            threads
        };
        let inner = run_study_with_threads(&scenario, threads).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(IsampMetrics { inner }));
        Ok(())
    })
}

/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn isamp_metrics_get(
    m: *const IsampMetrics,
    method: IsampStudyMethod,
    out: *mut IsampMethodMetrics,
) -> IsampStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("metrics"))?;
        let out = out_ptr(out, "out")?;
        let which = match method {
            IsampStudyMethod::Full => StudyMethod::Full,
            IsampStudyMethod::Pseudo => StudyMethod::Pseudo,
            IsampStudyMethod::Srs => StudyMethod::Srs,
        };
        let x = m
            .inner
            .method(which)
            .ok_or_else(|| (IsampStatus::InvalidArgument, format!("no `{which}` row")))?;
        *out = IsampMethodMetrics {
            bias: x.bias,
            mse: x.mse,
            coverage_95: x.coverage_95,
            avg_ci_length: x.avg_ci_length,
        };
        Ok(())
    })
}

/// Replicates that failed and were excluded.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn isamp_metrics_failed(m: *const IsampMetrics) -> usize {
    m.as_ref().map_or(0, |m| m.inner.failed)
}

/// # Safety
/// `m` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn isamp_metrics_free(m: *mut IsampMetrics) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}
