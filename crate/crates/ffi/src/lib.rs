//! C ABI for `msstarch`.
//!
//! Objects cross the boundary as opaque handles returned through `out`
//! pointers and released with the matching `ms_*_free`. Every fallible
//! function returns an [`MsStatus`]; on failure, [`ms_last_error`] gives a
//! message for the calling thread. Panics are caught and reported as
//! [`MsStatus::Panic`].
//!
//! Panels are time-major: element `(t, i)` of a `T x n` panel lives at
//! `values[t * n + i]`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use msstarch::estimation::{fit_one_regime, fit_two_regime, EstimationResult, FitOptions};
use msstarch::filter::{hamilton_filter, kim_smooth, loglik};
use msstarch::io;
use msstarch::model::{
    stationary_dist, LogSquaredPanel, ModelParams, RegimeParams, TransitionMatrix,
};
use msstarch::simulate::simulate;
use msstarch::weights::{build_queen_grid, row_normalize, WeightMatrix};
use msstarch::Error;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    Io = 4,
    Parse = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsRegimeParams {
    pub rho: f64,
    pub gamma: f64,
    pub delta: f64,
    pub phi: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsModelParams {
    pub regimes: [MsRegimeParams; 2],
    /// Stay probability of regime 1.
    pub p: f64,
    /// Stay probability of regime 2.
    pub q: f64,
    pub sigma2: f64,
}

impl From<&ModelParams> for MsModelParams {
    fn from(m: &ModelParams) -> Self {
        let r = |x: &RegimeParams| MsRegimeParams { rho: x.rho, gamma: x.gamma, delta: x.delta, phi: x.phi };
        MsModelParams {
            regimes: [r(&m.regimes[0]), r(&m.regimes[1])],
            p: m.transition.p,
            q: m.transition.q,
            sigma2: m.sigma2,
        }
    }
}

impl From<&MsModelParams> for ModelParams {
    fn from(m: &MsModelParams) -> Self {
        let r = |x: &MsRegimeParams| RegimeParams::new(x.rho, x.gamma, x.delta, x.phi);
        ModelParams {
            regimes: [r(&m.regimes[0]), r(&m.regimes[1])],
            transition: TransitionMatrix { p: m.p, q: m.q },
            sigma2: m.sigma2,
        }
    }
}

/// Spatial weight matrix.
pub struct MsWeights(WeightMatrix);

/// Panel of log-squared observations.
pub struct MsPanel(LogSquaredPanel);

/// Result of a fit.
pub struct MsFit(EstimationResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MsStatus {
    match e {
        Error::Io(_) => MsStatus::Io,
        Error::Csv(c) if c.is_io_error() => MsStatus::Io,
        Error::Parse(_) | Error::Csv(_) | Error::Json(_) => MsStatus::Parse,
        e if e.is_numerical() => MsStatus::Numerical,
        _ => MsStatus::InvalidArgument,
    }
}

struct Fail(MsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(MsStatus::NullPointer, format!("`{what}` is null"))
}

/// Runs `f`, records any failure and converts it into a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            MsStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".to_string());
            MsStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<String, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_string)
        .map_err(|_| Fail(MsStatus::InvalidArgument, "path is not valid UTF-8".into()))
}

unsafe fn write_handle<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failure on this thread, or NULL after a success.
/// The pointer stays valid until the next call into the library.
#[no_mangle]
pub extern "C" fn ms_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ms_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// The reference two-regime parameters (intercepts on the simulation scale).
///
/// # Safety
/// `out` must be null or point to writable memory for one `MsModelParams`.
#[no_mangle]
pub unsafe extern "C" fn ms_reference_params(out: *mut MsModelParams) -> MsStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = MsModelParams::from(&ModelParams::reference_dgp());
        Ok(())
    })
}

/// Queen-contiguity grid, optionally row-normalized.
///
/// # Safety
/// `out` must be null or point to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn ms_weights_queen_grid(
    rows: usize,
    cols: usize,
    normalize: bool,
    out: *mut *mut MsWeights,
) -> MsStatus {
    guard(|| {
        let raw = build_queen_grid(rows, cols)?;
        let w = if normalize { row_normalize(&raw).matrix } else { raw };
        write_handle(out, MsWeights(w))
    })
}

/// Reads a headerless weight CSV.
///
/// # Safety
/// `path` must be null or a NUL-terminated string; `out` as for other constructors.
#[no_mangle]
pub unsafe extern "C" fn ms_weights_read_csv(path: *const c_char, out: *mut *mut MsWeights) -> MsStatus {
    guard(|| {
        let w = io::read_weights(path_arg(path)?)?;
        write_handle(out, MsWeights(w))
    })
}

/// Builds weights from a dense row-major `n x n` array.
///
/// # Safety
/// `values` must be null or point to `n * n` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn ms_weights_from_values(
    values: *const f64,
    n: usize,
    out: *mut *mut MsWeights,
) -> MsStatus {
    guard(|| {
        if values.is_null() {
            return Err(null("values"));
        }
        let len = n.checked_mul(n).ok_or_else(|| Fail(MsStatus::InvalidArgument, "n too large".into()))?;
        let flat = std::slice::from_raw_parts(values, len);
        let rows: Vec<Vec<f64>> = flat.chunks(n.max(1)).map(<[f64]>::to_vec).collect();
        write_handle(out, MsWeights(WeightMatrix::from_rows(&rows)?))
    })
}

/// Number of locations, or 0 for a null handle.
///
/// # Safety
/// `w` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ms_weights_n(w: *const MsWeights) -> usize {
    w.as_ref().map_or(0, |w| w.0.n())
}

/// # Safety
/// `w` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn ms_weights_free(w: *mut MsWeights) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

/// Panel of log-squared values from a time-major `t x n` array.
///
/// # Safety
/// `values` must be null or point to `t * n` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn ms_panel_from_values(
    values: *const f64,
    t: usize,
    n: usize,
    out: *mut *mut MsPanel,
) -> MsStatus {
    guard(|| {
        if values.is_null() {
            return Err(null("values"));
        }
        let len = t.checked_mul(n).ok_or_else(|| Fail(MsStatus::InvalidArgument, "t * n too large".into()))?;
        if n == 0 {
            return Err(Fail(MsStatus::InvalidArgument, "n must be positive".into()));
        }
        let flat = std::slice::from_raw_parts(values, len);
        let rows = flat.chunks(n).map(<[f64]>::to_vec).collect();
        write_handle(out, MsPanel(LogSquaredPanel::from_values(rows)?))
    })
}

/// Reads a panel CSV. With `log_squared` false the file holds observations
/// and is transformed with the default zero policy.
///
/// # Safety
/// `path` must be null or a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ms_panel_read_csv(
    path: *const c_char,
    log_squared: bool,
    out: *mut *mut MsPanel,
) -> MsStatus {
    guard(|| {
        let path = path_arg(path)?;
        let panel = if log_squared {
            io::read_log_squared_csv(&path)?
        } else {
            msstarch::log_square(&io::read_panel_csv(&path)?, Default::default())
        };
        write_handle(out, MsPanel(panel))
    })
}

/// Writes `T` and `n` of a panel.
///
/// # Safety
/// Pointers must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn ms_panel_dims(panel: *const MsPanel, t: *mut usize, n: *mut usize) -> MsStatus {
    guard(|| {
        let p = deref(panel, "panel")?;
        *t.as_mut().ok_or_else(|| null("t"))? = p.0.t();
        *n.as_mut().ok_or_else(|| null("n"))? = p.0.n();
        Ok(())
    })
}

/// Copies the time-major values into `buf` of length `len >= T * n`.
///
/// # Safety
/// `buf` must be null or point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ms_panel_values(panel: *const MsPanel, buf: *mut f64, len: usize) -> MsStatus {
    guard(|| {
        let p = deref(panel, "panel")?;
        let need = p.0.t() * p.0.n();
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len < need {
            return Err(Fail(MsStatus::BufferTooSmall, format!("need {need} values, got {len}")));
        }
        let out = std::slice::from_raw_parts_mut(buf, need);
        for (dst, src) in out.chunks_mut(p.0.n()).zip(p.0.rows()) {
            dst.copy_from_slice(src);
        }
        Ok(())
    })
}

/// # Safety
/// `panel` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn ms_panel_free(panel: *mut MsPanel) {
    if !panel.is_null() {
        drop(Box::from_raw(panel));
    }
}

/// Simulates `t` periods. `states`, if not null, receives the 1-based regime
/// of each period and must hold `t` bytes.
///
/// # Safety
/// All pointers must be null or valid for the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn ms_simulate(
    params: *const MsModelParams,
    w: *const MsWeights,
    t: usize,
    burn_in: usize,
    seed: u64,
    out: *mut *mut MsPanel,
    states: *mut u8,
) -> MsStatus {
    guard(|| {
        let params = ModelParams::from(deref(params, "params")?);
        let w = deref(w, "w")?;
        let sim = simulate(&params, &w.0, t, burn_in, seed)?;
        if !states.is_null() {
            let dst = std::slice::from_raw_parts_mut(states, t);
            for (d, s) in dst.iter_mut().zip(sim.regimes.labels()) {
                *d = s;
            }
        }
        write_handle(out, MsPanel(sim.log_squared))
    })
}

/// Log-likelihood with the chain started from its stationary distribution.
///
/// # Safety
/// All pointers must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn ms_loglik(
    params: *const MsModelParams,
    panel: *const MsPanel,
    w: *const MsWeights,
    out: *mut f64,
) -> MsStatus {
    guard(|| {
        let params = ModelParams::from(deref(params, "params")?);
        let value = loglik(&params, &deref(panel, "panel")?.0, &deref(w, "w")?.0)?;
        *out.as_mut().ok_or_else(|| null("out"))? = value;
        Ok(())
    })
}

/// Fits the two-regime model (`two_regime` true) or the one-regime model.
///
/// # Safety
/// All pointers must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn ms_fit(
    panel: *const MsPanel,
    w: *const MsWeights,
    two_regime: bool,
    n_starts: usize,
    seed: u64,
    out: *mut *mut MsFit,
) -> MsStatus {
    guard(|| {
        let options = FitOptions { n_starts, seed, ..FitOptions::default() };
        let (panel, w) = (&deref(panel, "panel")?.0, &deref(w, "w")?.0);
        let fit = if two_regime {
            fit_two_regime(panel, w, &options)?
        } else {
            fit_one_regime(panel, w, &options)?
        };
        write_handle(out, MsFit(fit))
    })
}

/// Summary of a fit.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsFitSummary {
    pub params: MsModelParams,
    pub loglik: f64,
    pub bic: f64,
    pub n_params: usize,
    pub converged: bool,
}

/// # Safety
/// Pointers must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn ms_fit_summary(fit: *const MsFit, out: *mut MsFitSummary) -> MsStatus {
    guard(|| {
        let f = &deref(fit, "fit")?.0;
        *out.as_mut().ok_or_else(|| null("out"))? = MsFitSummary {
            params: MsModelParams::from(&f.params),
            loglik: f.loglik,
            bic: f.bic,
            n_params: f.n_params,
            converged: f.converged,
        };
        Ok(())
    })
}

/// Copies estimates and standard errors (NaN when unavailable) into buffers
/// of length `len >= n_params`. Either buffer may be null.
///
/// # Safety
/// Non-null buffers must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ms_fit_estimates(
    fit: *const MsFit,
    estimates: *mut f64,
    std_errors: *mut f64,
    len: usize,
) -> MsStatus {
    guard(|| {
        let f = &deref(fit, "fit")?.0;
        let k = f.estimates.len();
        if len < k {
            return Err(Fail(MsStatus::BufferTooSmall, format!("need {k} values, got {len}")));
        }
        if !estimates.is_null() {
            std::slice::from_raw_parts_mut(estimates, k).copy_from_slice(&f.estimates);
        }
        if !std_errors.is_null() {
            let dst = std::slice::from_raw_parts_mut(std_errors, k);
            match &f.std_errors {
                Some(se) => dst.copy_from_slice(se),
                None => dst.fill(f64::NAN),
            }
        }
        Ok(())
    })
}

/// # Safety
/// `fit` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn ms_fit_free(fit: *mut MsFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Filtered and smoothed probabilities, `T x 2` row-major, written to
/// buffers of length `len >= 2 * T`. Either buffer may be null.
///
/// # Safety
/// Non-null buffers must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ms_smooth(
    params: *const MsModelParams,
    panel: *const MsPanel,
    w: *const MsWeights,
    filtered: *mut f64,
    smoothed: *mut f64,
    len: usize,
) -> MsStatus {
    guard(|| {
        let params = ModelParams::from(deref(params, "params")?);
        let panel = &deref(panel, "panel")?.0;
        let need = 2 * panel.t();
        if len < need {
            return Err(Fail(MsStatus::BufferTooSmall, format!("need {need} values, got {len}")));
        }
        let init = stationary_dist(&params.transition)?;
        let f = hamilton_filter(panel, &params, &deref(w, "w")?.0, init)?;
        let s = kim_smooth(&f, &params.transition)?;
        let copy = |dst: *mut f64, rows: &[[f64; 2]]| {
            if !dst.is_null() {
                let out = std::slice::from_raw_parts_mut(dst, need);
                for (d, r) in out.chunks_mut(2).zip(rows) {
                    d.copy_from_slice(r);
                }
            }
        };
        copy(filtered, &f.filtered);
        copy(smoothed, &s.smoothed);
        Ok(())
    })
}
