//! C ABI for the mirrormatch library.
//!
//! Every fallible function returns an [`MmStatus`] and writes its result
//! through an out pointer. On failure the out pointer is left untouched and
//! a description is available from [`mm_last_error_message`] on the same
//! thread. Panics never cross the boundary; they surface as
//! `MM_STATUS_PANIC`.
//!
//! Strings returned by the library must be released with
//! [`mm_string_free`]. Experiments are opaque handles created by
//! [`mm_experiment_new`] and released by [`mm_experiment_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mirrormatch::analytic::{self, GroupSpec};
use mirrormatch::cli::{self, ConfigError, ModelConfig};
use mirrormatch::density::{self, JointDensityParams};
use mirrormatch::sampler::CloneMode;
use mirrormatch::simulate::{self, Estimate};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Bad configuration text, key or value.
    InvalidConfig = 2,
    /// An argument was outside the domain of the operation.
    Domain = 3,
    /// A numerical procedure did not converge.
    NonConvergence = 4,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 5,
    /// Internal failure; the library state is still usable.
    Panic = 6,
}

/// How clone noise is drawn across a subject's interactions.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmCloneMode {
    /// Fresh noise on both clones in every interaction.
    PerInteraction = 0,
    /// The subject's clone is drawn once per replication.
    FixedSubjectClone = 1,
}

/// Monte Carlo mean with its standard error.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub reps: u64,
}

impl From<Estimate> for MmEstimate {
    fn from(e: Estimate) -> Self {
        MmEstimate {
            mean: e.mean,
            std_error: e.std_error,
            reps: e.reps,
        }
    }
}

/// Experiment configuration behind an opaque handle.
pub struct MmExperiment {
    config: ModelConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

struct Failure(MmStatus, String);

impl From<mirrormatch::Error> for Failure {
    fn from(e: mirrormatch::Error) -> Self {
        let status = if e.is_numeric() {
            MmStatus::NonConvergence
        } else {
            MmStatus::Domain
        };
        Failure(status, e.to_string())
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure(MmStatus::InvalidConfig, e.to_string())
    }
}

/// Runs `body` behind a panic guard and records any failure.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> MmStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => MmStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let detail = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {detail}"));
            MmStatus::Panic
        }
    }
}

fn out_ref<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: the caller passes either null or a valid, writable pointer
    unsafe { p.as_mut() }.ok_or_else(|| Failure(MmStatus::NullPointer, format!("{name} is null")))
}

fn read_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(MmStatus::NullPointer, format!("{name} is null")));
    }
    // SAFETY: non-null and, per the contract, NUL-terminated
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Failure(MmStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

fn to_usize(k: u64) -> Result<usize, Failure> {
    usize::try_from(k)
        .map_err(|_| Failure(MmStatus::Domain, format!("k = {k} does not fit in usize")))
}

fn in_pool<R: Send>(workers: u32, f: impl FnOnce() -> R + Send) -> R {
    if workers == 0 {
        f()
    } else {
        simulate::with_workers(workers as usize, f)
    }
}

fn clone_mode(mode: MmCloneMode) -> CloneMode {
    match mode {
        MmCloneMode::PerInteraction => CloneMode::PerInteraction,
        MmCloneMode::FixedSubjectClone => CloneMode::FixedSubjectClone,
    }
}

/// Message for the last failure on this thread, or null if none. The
/// pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn mm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Expected norm of a single uniform draw, `k/(k+1)`.
#[no_mangle]
pub extern "C" fn mm_benchmark(k: u64) -> f64 {
    let k = k as f64;
    k / (k + 1.0)
}

/// Expected distance to the best of `m` in-person draws.
///
/// # Safety
/// `out` must be null or point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn mm_d_ip(k: u64, m: u64, out: *mut f64) -> MmStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = analytic::d_ip(to_usize(k)?, m)?;
        Ok(())
    })
}

/// Infinite-pool AI distance for per-clone noise variance `variance`.
///
/// # Safety
/// `out` must be null or point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn mm_d_ai_infinity(k: u64, variance: f64, out: *mut f64) -> MmStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = analytic::d_ai_infinity(to_usize(k)?, variance)?;
        Ok(())
    })
}

/// Smallest in-person sample size that beats the platform at every pool
/// size. Fails with `MM_STATUS_NON_CONVERGENCE` beyond 2^53.
///
/// # Safety
/// `out` must be null or point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn mm_ai_equivalent_bound(k: u64, variance: f64, out: *mut u64) -> MmStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = analytic::ai_equivalent_bound(to_usize(k)?, variance)?;
        Ok(())
    })
}

/// Large-pool probability that the match is data-rich, for clone
/// variances `sigma_r2 < sigma_p2`.
///
/// # Safety
/// `out` must be null or point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn mm_rich_win_probability(
    k: u64,
    sigma_r2: f64,
    sigma_p2: f64,
    out: *mut f64,
) -> MmStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let g = GroupSpec::new(sigma_r2, sigma_p2)?;
        *out = analytic::rich_win_probability(to_usize(k)?, &g)?;
        Ok(())
    })
}

/// `E[R | S = s]` for combined noise variance `nu` per coordinate.
///
/// # Safety
/// `out` must be null or point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn mm_conditional_mean(k: u64, nu: f64, s: f64, out: *mut f64) -> MmStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let p = JointDensityParams::new(to_usize(k)?, nu)?;
        *out = density::conditional_mean_r_given_s(&p, s)?;
        Ok(())
    })
}

/// Monte Carlo best-of-`m` in-person distance. `workers = 0` uses the
/// global thread pool; results do not depend on the worker count.
///
/// # Safety
/// `out` must be null or point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn mm_estimate_d_ip(
    k: u64,
    m: u64,
    reps: u64,
    seed: u64,
    workers: u32,
    out: *mut MmEstimate,
) -> MmStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let k = to_usize(k)?;
        *out = in_pool(workers, || simulate::estimate_d_ip(k, m, reps, seed))?.into();
        Ok(())
    })
}

/// Monte Carlo AI distance over `n` candidates.
///
/// # Safety
/// `out` must be null or point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn mm_estimate_d_ai(
    k: u64,
    n: u64,
    variance: f64,
    reps: u64,
    mode: MmCloneMode,
    seed: u64,
    workers: u32,
    out: *mut MmEstimate,
) -> MmStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let k = to_usize(k)?;
        let mode = clone_mode(mode);
        *out = in_pool(workers, || {
            simulate::estimate_d_ai(k, n, variance, reps, mode, seed)
        })?
        .into();
        Ok(())
    })
}

/// Creates an experiment from `key = value` config text (null for the
/// defaults). The handle is written to `*out`.
///
/// # Safety
/// `config_text` must be null or NUL-terminated; `out` must be null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn mm_experiment_new(
    config_text: *const c_char,
    out: *mut *mut MmExperiment,
) -> MmStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let mut config = ModelConfig::default();
        if !config_text.is_null() {
            config.apply_text(read_str(config_text, "config_text")?)?;
        }
        config.validate()?;
        *out = Box::into_raw(Box::new(MmExperiment { config }));
        Ok(())
    })
}

/// Applies one `key`, `value` assignment to an experiment.
///
/// # Safety
/// `exp` must be a live handle; strings must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn mm_experiment_set(
    exp: *mut MmExperiment,
    key: *const c_char,
    value: *const c_char,
) -> MmStatus {
    guard(|| {
        let exp = out_ref(exp, "exp")?;
        let mut next = exp.config.clone();
        next.set(read_str(key, "key")?, read_str(value, "value")?)?;
        next.validate()?;
        exp.config = next;
        Ok(())
    })
}

/// Canonical config text of an experiment, to be freed with
/// [`mm_string_free`].
///
/// # Safety
/// `exp` must be a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn mm_experiment_config(
    exp: *const MmExperiment,
    out: *mut *mut c_char,
) -> MmStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        // SAFETY: the caller passes a live handle or null
        let exp = unsafe { exp.as_ref() }
            .ok_or_else(|| Failure(MmStatus::NullPointer, "exp is null".into()))?;
        *out = into_c_string(exp.config.canonical_text());
        Ok(())
    })
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).expect("library text has no NUL").into_raw()
}

/// Runs a named command (`table1`, `figure2`, `mstar`, `groups`,
/// `seqsearch`, `calibrate`) and writes its CSV text to `*csv_out`, to be
/// freed with [`mm_string_free`]. `workers = 0` uses the global pool.
///
/// # Safety
/// `exp` must be a live handle; `command` NUL-terminated; `csv_out` null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn mm_experiment_run(
    exp: *const MmExperiment,
    command: *const c_char,
    workers: u32,
    csv_out: *mut *mut c_char,
) -> MmStatus {
    guard(|| {
        let csv_out = out_ref(csv_out, "csv_out")?;
        // SAFETY: the caller passes a live handle or null
        let exp = unsafe { exp.as_ref() }
            .ok_or_else(|| Failure(MmStatus::NullPointer, "exp is null".into()))?;
        let name = read_str(command, "command")?;
        let command: cli::Command = name
            .parse()
            .map_err(|e| Failure(MmStatus::InvalidConfig, e))?;
        let table = in_pool(workers, || cli::execute(command, &exp.config))?;
        *csv_out = into_c_string(table.to_csv(&exp.config.hash()));
        Ok(())
    })
}

/// Releases an experiment handle. Null is ignored.
///
/// # Safety
/// `exp` must come from [`mm_experiment_new`] and must not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn mm_experiment_free(exp: *mut MmExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}
