//! C interface to the elliptope samplers.
//!
//! Every fallible function returns an [`ElStatus`]. On failure a message is
//! stored per thread and can be read with [`el_last_error`]. Matrices cross
//! the boundary as dense row-major `double` buffers of `dim * dim` entries.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use elliptope::baselines::BaselineMethod;
use elliptope::model::{self, CorrelationMatrix, UpperCholeskyFactor};
use elliptope::row::{self, RowChainConfig, DEFAULT_BURN_IN, DEFAULT_SIGMA_EPS};
use elliptope::sampler::{ChainMode, Method};
use elliptope::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotPositiveDefinite = 3,
    /// The sampler has produced all requested matrices.
    Exhausted = 4,
    Numerical = 5,
    BufferTooSmall = 6,
    Io = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElMethod {
    Chol = 0,
    Vine = 1,
    Onion = 2,
    Polar = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElChainMode {
    ChainReuse = 0,
    RestartPerMatrix = 1,
}

/// Sampler parameters. Chain fields are ignored by the baseline methods,
/// except `seed`.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct ElSamplerConfig {
    pub method: ElMethod,
    pub mode: ElChainMode,
    pub dim: usize,
    pub count: usize,
    pub sigma_eps: f64,
    pub burn_in: u64,
    pub thin: u64,
    pub seed: u64,
}

/// Opaque sampler handle.
pub struct ElSampler {
    dim: usize,
    stream: Box<dyn Iterator<Item = elliptope::Result<CorrelationMatrix>> + Send>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: ElStatus, msg: impl Into<String>) -> ElStatus {
    set_error(msg.into());
    status
}

fn status_of(err: &Error) -> ElStatus {
    match err {
        Error::NotPositiveDefinite { .. } => ElStatus::NotPositiveDefinite,
        Error::Quadrature(_) | Error::Bisection(_) | Error::VineRecursion(_) => ElStatus::Numerical,
        Error::Io(_) | Error::Format(_) => ElStatus::Io,
        _ => ElStatus::InvalidArgument,
    }
}

fn from_error(err: Error) -> ElStatus {
    let status = status_of(&err);
    fail(status, err.to_string())
}

fn guarded<F: FnOnce() -> ElStatus>(f: F) -> ElStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(ElStatus::Panic, "internal panic"),
    }
}

fn method_of(m: ElMethod) -> Method {
    match m {
        ElMethod::Chol => Method::Chol,
        ElMethod::Vine => Method::Baseline(BaselineMethod::Vine),
        ElMethod::Onion => Method::Baseline(BaselineMethod::Onion),
        ElMethod::Polar => Method::Baseline(BaselineMethod::Polar),
    }
}

/// Message for the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn el_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Defaults: chol, chain reuse, σ = 0.01, burn-in 1000, thin 1, seed 0.
#[no_mangle]
pub extern "C" fn el_sampler_config_default(dim: usize, count: usize) -> ElSamplerConfig {
    ElSamplerConfig {
        method: ElMethod::Chol,
        mode: ElChainMode::ChainReuse,
        dim,
        count,
        sigma_eps: DEFAULT_SIGMA_EPS,
        burn_in: DEFAULT_BURN_IN,
        thin: 1,
        seed: 0,
    }
}

/// Creates a sampler. On success `*out` owns a handle to release with
/// [`el_sampler_free`].
///
/// # Safety
/// `config` must point to a valid config and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn el_sampler_new(
    config: *const ElSamplerConfig,
    out: *mut *mut ElSampler,
) -> ElStatus {
    guarded(|| {
        if config.is_null() || out.is_null() {
            return fail(ElStatus::NullPointer, "null config or output pointer");
        }
        *out = ptr::null_mut();
        let c = *config;
        if c.dim == 0 {
            return fail(ElStatus::InvalidArgument, "dimension must be at least 1");
        }
        let row_config = match RowChainConfig::new(c.sigma_eps, c.burn_in, c.thin, c.seed) {
            Ok(r) => r,
            Err(e) => return from_error(e),
        };
        let mode = match c.mode {
            ElChainMode::ChainReuse => ChainMode::ChainReuse,
            ElChainMode::RestartPerMatrix => ChainMode::RestartPerMatrix,
        };
        match method_of(c.method).stream(c.dim, c.count, row_config, mode) {
            Ok(stream) => {
                *out = Box::into_raw(Box::new(ElSampler { dim: c.dim, stream }));
                ElStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Writes the next matrix into `buf` (`len >= dim * dim`). Returns
/// `Exhausted` once `count` matrices have been produced.
///
/// # Safety
/// `sampler` must come from [`el_sampler_new`]; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn el_sampler_next(
    sampler: *mut ElSampler,
    buf: *mut f64,
    len: usize,
) -> ElStatus {
    guarded(|| {
        if sampler.is_null() || buf.is_null() {
            return fail(ElStatus::NullPointer, "null sampler or buffer");
        }
        let s = &mut *sampler;
        let need = s.dim * s.dim;
        if len < need {
            return fail(
                ElStatus::BufferTooSmall,
                format!("buffer holds {len} values, need {need}"),
            );
        }
        match s.stream.next() {
            None => ElStatus::Exhausted,
            Some(Err(e)) => from_error(e),
            Some(Ok(m)) => {
                std::slice::from_raw_parts_mut(buf, need).copy_from_slice(m.as_slice());
                ElStatus::Ok
            }
        }
    })
}

/// Matrix size of a sampler, or 0 for a null handle.
///
/// # Safety
/// `sampler` must be null or come from [`el_sampler_new`].
#[no_mangle]
pub unsafe extern "C" fn el_sampler_dim(sampler: *const ElSampler) -> usize {
    sampler.as_ref().map_or(0, |s| s.dim)
}

/// # Safety
/// `sampler` must be null or come from [`el_sampler_new`], and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn el_sampler_free(sampler: *mut ElSampler) {
    if !sampler.is_null() {
        drop(Box::from_raw(sampler));
    }
}

unsafe fn read_correlation(r: *const f64, dim: usize) -> Result<CorrelationMatrix, ElStatus> {
    if r.is_null() {
        return Err(fail(ElStatus::NullPointer, "null matrix"));
    }
    if dim == 0 {
        return Err(fail(
            ElStatus::InvalidArgument,
            "dimension must be at least 1",
        ));
    }
    let entries = std::slice::from_raw_parts(r, dim * dim).to_vec();
    CorrelationMatrix::from_row_major(dim, entries).map_err(from_error)
}

unsafe fn read_factor(u: *const f64, dim: usize) -> Result<UpperCholeskyFactor, ElStatus> {
    if u.is_null() {
        return Err(fail(ElStatus::NullPointer, "null factor"));
    }
    if dim == 0 {
        return Err(fail(
            ElStatus::InvalidArgument,
            "dimension must be at least 1",
        ));
    }
    let full = std::slice::from_raw_parts(u, dim * dim);
    let mut packed = Vec::with_capacity(model::packed_len(dim));
    for i in 0..dim {
        packed.extend_from_slice(&full[i * dim + i..(i + 1) * dim]);
    }
    UpperCholeskyFactor::from_packed(dim, packed).map_err(from_error)
}

/// Upper-triangular factor `U` with `R = U Uᵀ`, written densely to `u_out`.
///
/// # Safety
/// `r` must hold `dim * dim` doubles and `u_out` must have room for as many.
#[no_mangle]
pub unsafe extern "C" fn el_factor_correlation(
    r: *const f64,
    dim: usize,
    u_out: *mut f64,
) -> ElStatus {
    guarded(|| {
        if u_out.is_null() {
            return fail(ElStatus::NullPointer, "null output");
        }
        let r = match read_correlation(r, dim) {
            Ok(r) => r,
            Err(s) => return s,
        };
        match model::factor_correlation(&r) {
            Ok(u) => {
                let out = std::slice::from_raw_parts_mut(u_out, dim * dim);
                for i in 0..dim {
                    for j in 0..dim {
                        out[i * dim + j] = u.get(i, j);
                    }
                }
                ElStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// `R = U Uᵀ` for a dense upper-triangular `u` with unit rows; entries
/// below the diagonal are ignored.
///
/// # Safety
/// `u` must hold `dim * dim` doubles and `r_out` must have room for as many.
#[no_mangle]
pub unsafe extern "C" fn el_build_correlation(
    u: *const f64,
    dim: usize,
    r_out: *mut f64,
) -> ElStatus {
    guarded(|| {
        if r_out.is_null() {
            return fail(ElStatus::NullPointer, "null output");
        }
        let u = match read_factor(u, dim) {
            Ok(u) => u,
            Err(s) => return s,
        };
        match model::build_correlation(&u) {
            Ok(r) => {
                std::slice::from_raw_parts_mut(r_out, dim * dim).copy_from_slice(r.as_slice());
                ElStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Log-Jacobian of the map from factor rows to a correlation matrix,
/// evaluated at a dense correlation matrix `r`.
///
/// # Safety
/// `r` must hold `dim * dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn el_log_jacobian(r: *const f64, dim: usize, out: *mut f64) -> ElStatus {
    guarded(|| {
        if out.is_null() {
            return fail(ElStatus::NullPointer, "null output");
        }
        let r = match read_correlation(r, dim) {
            Ok(r) => r,
            Err(s) => return s,
        };
        match model::factor_correlation(&r) {
            Ok(u) => {
                *out = model::log_jacobian(&u);
                ElStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Metropolis acceptance probability for a proposed first coordinate.
#[no_mangle]
pub extern "C" fn el_acceptance_probability(v1: f64, v1_tilde: f64, exponent: usize) -> f64 {
    row::acceptance_probability(v1, v1_tilde, exponent)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn el_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
