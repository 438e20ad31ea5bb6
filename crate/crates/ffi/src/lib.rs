//! C ABI over the `jlcm` crate.
//!
//! Handles are opaque pointers owned by the caller and released with the
//! matching `*_free` function. Every fallible call returns a [`JlcmStatus`];
//! on failure the message is available from [`jlcm_last_error`] on the same
//! thread. Panics are caught at the boundary and reported as
//! `JLCM_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use jlcm::inference::{auc_ipcw, dic, PosteriorSummary, Predictor};
use jlcm::io::{load_chain, load_dataset, save_chain, RunConfig};
use jlcm::pipeline::fit_dataset;
use jlcm::simulation::{simulate_dataset, SimDesign};
use jlcm::{Chain, Dataset, JlcmError};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JlcmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    OutOfRange = 3,
    Design = 10,
    Domain = 11,
    Data = 12,
    State = 13,
    Numeric = 14,
    Divergence = 15,
    UndefinedAuc = 16,
    UndefinedWeight = 17,
    Schema = 18,
    Parse = 19,
    Config = 20,
    Version = 21,
    Io = 22,
    Csv = 23,
    Panic = 99,
}

impl From<&JlcmError> for JlcmStatus {
    fn from(e: &JlcmError) -> Self {
        match e {
            JlcmError::Design(_) => JlcmStatus::Design,
            JlcmError::Domain(_) => JlcmStatus::Domain,
            JlcmError::Data(_) => JlcmStatus::Data,
            JlcmError::State(_) => JlcmStatus::State,
            JlcmError::Numeric(_) => JlcmStatus::Numeric,
            JlcmError::Divergence { .. } => JlcmStatus::Divergence,
            JlcmError::UndefinedAuc { .. } => JlcmStatus::UndefinedAuc,
            JlcmError::UndefinedWeight(_) => JlcmStatus::UndefinedWeight,
            JlcmError::MissingColumn(_) => JlcmStatus::Schema,
            JlcmError::Parse { .. } => JlcmStatus::Parse,
            JlcmError::Config(_) => JlcmStatus::Config,
            JlcmError::Version { .. } => JlcmStatus::Version,
            JlcmError::Io(_) => JlcmStatus::Io,
            JlcmError::Csv(_) => JlcmStatus::Csv,
        }
    }
}

/// Opaque run configuration (model, sampler, DIC and schema settings).
pub struct JlcmConfig(RunConfig);

/// Opaque validated dataset.
pub struct JlcmDataset(Dataset);

/// Opaque fitted chain.
pub struct JlcmChain(Chain);

/// DIC of a fitted chain.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct JlcmDic {
    pub dic: f64,
    pub p_d: f64,
    pub mean_deviance: f64,
}

/// Posterior mean, sd and 89% equal-tailed interval of one parameter.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct JlcmParamSummary {
    pub mean: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

struct Failure(JlcmStatus, String);

impl From<JlcmError> for Failure {
    fn from(e: JlcmError) -> Self {
        Failure(JlcmStatus::from(&e), e.to_string())
    }
}

type Outcome = Result<(), Failure>;

/// Runs `f`, converting errors and panics into a status plus the thread's last error.
fn guard(f: impl FnOnce() -> Outcome) -> JlcmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            JlcmStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            JlcmStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(JlcmStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(JlcmStatus::InvalidUtf8, format!("`{what}` is not valid UTF-8")))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn writable<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn jlcm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn jlcm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default configuration: K = 2, time-varying membership, 5000/2000 iterations.
#[no_mangle]
pub extern "C" fn jlcm_config_new() -> *mut JlcmConfig {
    Box::into_raw(Box::new(JlcmConfig(RunConfig::default())))
}

/// Parses `key = value` configuration text into a new handle.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jlcm_config_parse(text: *const c_char, out: *mut *mut JlcmConfig) -> JlcmStatus {
    guard(|| {
        let slot = writable(out, "out")?;
        let cfg = RunConfig::parse(c_str(text, "text")?)?;
        *slot = Box::into_raw(Box::new(JlcmConfig(cfg)));
        Ok(())
    })
}

/// Sets one configuration key, with the same names and syntax as config files.
///
/// # Safety
/// `config` must come from this library; `key` and `value` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn jlcm_config_set(
    config: *mut JlcmConfig,
    key: *const c_char,
    value: *const c_char,
) -> JlcmStatus {
    guard(|| {
        let cfg = writable(config, "config")?;
        cfg.0.set(c_str(key, "key")?, c_str(value, "value")?, 0)?;
        Ok(())
    })
}

/// # Safety
/// `config` must come from this library and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn jlcm_config_free(config: *mut JlcmConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Loads a long-format CSV using the column schema of `config`.
///
/// # Safety
/// Pointers must be valid; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn jlcm_dataset_load(
    config: *const JlcmConfig,
    path: *const c_char,
    out: *mut *mut JlcmDataset,
) -> JlcmStatus {
    guard(|| {
        let slot = writable(out, "out")?;
        let cfg = borrow(config, "config")?;
        let data = load_dataset(PathBuf::from(c_str(path, "path")?), &cfg.0.schema)?;
        *slot = Box::into_raw(Box::new(JlcmDataset(data)));
        Ok(())
    })
}

/// Simulates `n_subjects` from the default two-class switching design.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jlcm_dataset_simulate(n_subjects: usize, seed: u64, out: *mut *mut JlcmDataset) -> JlcmStatus {
    guard(|| {
        let slot = writable(out, "out")?;
        let sim = simulate_dataset(&SimDesign { n_subjects, ..SimDesign::with_seed(seed) })?;
        *slot = Box::into_raw(Box::new(JlcmDataset(sim.data)));
        Ok(())
    })
}

/// # Safety
/// `data` must be a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn jlcm_dataset_n_subjects(data: *const JlcmDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.n_subjects())
}

/// Total number of longitudinal rows.
///
/// # Safety
/// `data` must be a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn jlcm_dataset_n_rows(data: *const JlcmDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.n_visits())
}

/// # Safety
/// `data` must come from this library and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn jlcm_dataset_free(data: *mut JlcmDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Runs the sampler described by `config` on `data`.
///
/// # Safety
/// Pointers must be valid handles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn jlcm_fit(
    data: *const JlcmDataset,
    config: *const JlcmConfig,
    out: *mut *mut JlcmChain,
) -> JlcmStatus {
    guard(|| {
        let slot = writable(out, "out")?;
        let chain = fit_dataset(&borrow(data, "data")?.0, &borrow(config, "config")?.0)?;
        *slot = Box::into_raw(Box::new(JlcmChain(chain)));
        Ok(())
    })
}

/// Number of stored draws, burn-in included.
///
/// # Safety
/// `chain` must be a live chain handle.
#[no_mangle]
pub unsafe extern "C" fn jlcm_chain_n_draws(chain: *const JlcmChain) -> usize {
    chain.as_ref().map_or(0, |c| c.0.draws.len())
}

/// Writes the chain file; the DIC settings of `config` go into its header.
///
/// # Safety
/// Pointers must be valid; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn jlcm_chain_save(
    chain: *const JlcmChain,
    config: *const JlcmConfig,
    path: *const c_char,
) -> JlcmStatus {
    guard(|| {
        let chain = borrow(chain, "chain")?;
        save_chain(PathBuf::from(c_str(path, "path")?), &chain.0, borrow(config, "config")?.0.dic)?;
        Ok(())
    })
}

/// # Safety
/// `path` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn jlcm_chain_load(path: *const c_char, out: *mut *mut JlcmChain) -> JlcmStatus {
    guard(|| {
        let slot = writable(out, "out")?;
        let (chain, _) = load_chain(PathBuf::from(c_str(path, "path")?))?;
        *slot = Box::into_raw(Box::new(JlcmChain(chain)));
        Ok(())
    })
}

/// # Safety
/// `chain` must come from this library and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn jlcm_chain_free(chain: *mut JlcmChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}

/// Posterior summary of one named parameter such as `beta_2_1` or `tau_1`.
///
/// # Safety
/// Pointers must be valid; `name` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn jlcm_chain_summary(
    chain: *const JlcmChain,
    name: *const c_char,
    out: *mut JlcmParamSummary,
) -> JlcmStatus {
    guard(|| {
        let slot = writable(out, "out")?;
        let name = c_str(name, "name")?;
        let summary = PosteriorSummary::from_chain(&borrow(chain, "chain")?.0)?;
        let row = summary
            .get(name)
            .ok_or_else(|| Failure(JlcmStatus::OutOfRange, format!("no parameter named `{name}`")))?;
        *slot = JlcmParamSummary { mean: row.mean, sd: row.sd, lower: row.lower, upper: row.upper };
        Ok(())
    })
}

/// DIC with the variant and penalty selected in `config`.
///
/// # Safety
/// Pointers must be valid handles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn jlcm_dic(
    data: *const JlcmDataset,
    chain: *const JlcmChain,
    config: *const JlcmConfig,
    out: *mut JlcmDic,
) -> JlcmStatus {
    guard(|| {
        let slot = writable(out, "out")?;
        let r = dic(&borrow(data, "data")?.0, &borrow(chain, "chain")?.0, borrow(config, "config")?.0.dic)?;
        *slot = JlcmDic { dic: r.dic, p_d: r.p_d, mean_deviance: r.mean_deviance };
        Ok(())
    })
}

/// Conditional survival `P(T > t + dt | T > t, history up to t)` of subject `index`.
///
/// # Safety
/// Pointers must be valid handles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn jlcm_predict(
    data: *const JlcmDataset,
    chain: *const JlcmChain,
    index: usize,
    t: f64,
    dt: f64,
    out: *mut f64,
) -> JlcmStatus {
    guard(|| {
        let slot = writable(out, "out")?;
        let data = &borrow(data, "data")?.0;
        let subject = data.subjects().get(index).ok_or_else(|| {
            Failure(JlcmStatus::OutOfRange, format!("subject index {index} out of range (n = {})", data.n_subjects()))
        })?;
        let p = Predictor::from_chain(&borrow(chain, "chain")?.0)?;
        *slot = p.survival(subject, index, t, dt)?;
        Ok(())
    })
}

/// IPCW AUC over `[t, t + dt)` using the chain's predicted risks.
///
/// # Safety
/// Pointers must be valid handles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn jlcm_auc(
    data: *const JlcmDataset,
    chain: *const JlcmChain,
    t: f64,
    dt: f64,
    out: *mut f64,
) -> JlcmStatus {
    guard(|| {
        let slot = writable(out, "out")?;
        let data = &borrow(data, "data")?.0;
        let risk = Predictor::from_chain(&borrow(chain, "chain")?.0)?.risk_scores(data, t, dt)?;
        let times: Vec<f64> = data.subjects().iter().map(|s| s.survival.followup_time).collect();
        let events: Vec<bool> = data.subjects().iter().map(|s| s.survival.event).collect();
        *slot = auc_ipcw(&risk, &times, &events, t, dt)?;
        Ok(())
    })
}
