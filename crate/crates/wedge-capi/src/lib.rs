//! C ABI for the wedge tensor-completion toolkit.
//!
//! Conventions:
//! - Every function returns a [`WedgeStatus`]; outputs go through out
//!   pointers, which are written only on `Ok`.
//! - Handles (`WedgeCpModel`, `WedgeCompletion`) are opaque; free them with
//!   their `_free` function. Strings returned by the library are freed with
//!   [`wedge_string_free`].
//! - On failure, [`wedge_last_error_message`] returns a thread-local,
//!   NUL-terminated description valid until the next failing call on the
//!   same thread.
//! - Panics are caught at the boundary and reported as `WEDGE_STATUS_PANIC`.
//!
//! The generated header lands in `include/wedge.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use wedge_core::completion::{
    spectral_complete_asymmetric, spectral_complete_symmetric, CompletionMode,
    SpectralCompletionConfig,
};
use wedge_core::error::Error;
use wedge_core::gd::{
    gd_run, retrieve_cp_factors, GdConfig, RetrievalConfig, SparseObservations,
};
use wedge_core::rng;
use wedge_core::sampling::{build_wedge_matrix, sample_uniform, sample_wedges};
use wedge_core::spectral::{procrustes_align, top_r_eigs, EigOrdering};
use wedge_core::tensor::{unfold_cp, CpModel};

/// Status codes returned by every API function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WedgeStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    InvalidUtf8 = 3,
    Io = 4,
    Numeric = 5,
    RetrievalFailed = 6,
    Diverged = 7,
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> WedgeStatus {
    match err {
        Error::Io { .. } | Error::Format { .. } => WedgeStatus::Io,
        Error::RetrievalFailure { .. } => WedgeStatus::RetrievalFailed,
        Error::Divergence { .. } => WedgeStatus::Diverged,
        Error::NonFinite(_) | Error::ZeroRank => WedgeStatus::Numeric,
        Error::Json(_) => WedgeStatus::InvalidArgument,
        _ => WedgeStatus::InvalidArgument,
    }
}

fn report(err: Error) -> WedgeStatus {
    let status = status_of(&err);
    set_error(&err.to_string());
    status
}

/// Run `f` with panics converted to `WEDGE_STATUS_PANIC`.
fn guarded(f: impl FnOnce() -> WedgeStatus) -> WedgeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            WedgeStatus::Panic
        }
    }
}

/// Opaque CP model handle.
pub struct WedgeCpModel {
    inner: CpModel,
}

/// Opaque completion-result handle.
pub struct WedgeCompletion {
    rel_error: f64,
    wedge_samples: u64,
    uniform_samples: u64,
    degenerate_gap: bool,
}

/// Thread-local message describing the most recent failure on this thread.
/// Never NULL; empty when no failure has occurred. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn wedge_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string (do not free).
#[no_mangle]
pub extern "C" fn wedge_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

/// Free a string returned by this library.
///
/// # Safety
/// `s` must be a pointer previously returned by a `*_to_json` function of
/// this library (or NULL), not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wedge_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Create a symmetric CP model with i.i.d. Gaussian, column-normalized
/// factors.
///
/// # Safety
/// `out` must be a valid pointer to a `WedgeCpModel*` slot.
#[no_mangle]
pub unsafe extern "C" fn wedge_cp_model_random_symmetric(
    n: usize,
    rank: usize,
    order: usize,
    seed: u64,
    out: *mut *mut WedgeCpModel,
) -> WedgeStatus {
    guarded(|| {
        if out.is_null() {
            set_error("out pointer is NULL");
            return WedgeStatus::NullArgument;
        }
        match CpModel::random_gaussian_symmetric(n, rank, order, seed) {
            Ok(model) => {
                *out = Box::into_raw(Box::new(WedgeCpModel { inner: model }));
                WedgeStatus::Ok
            }
            Err(e) => report(e),
        }
    })
}

/// Create an asymmetric CP model with independent Gaussian factors per mode.
///
/// # Safety
/// `dims` must point to `order` readable `usize` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wedge_cp_model_random(
    dims: *const usize,
    order: usize,
    rank: usize,
    seed: u64,
    out: *mut *mut WedgeCpModel,
) -> WedgeStatus {
    guarded(|| {
        if dims.is_null() || out.is_null() {
            set_error("dims/out pointer is NULL");
            return WedgeStatus::NullArgument;
        }
        let dims = std::slice::from_raw_parts(dims, order);
        match CpModel::random_gaussian(dims, rank, seed) {
            Ok(model) => {
                *out = Box::into_raw(Box::new(WedgeCpModel { inner: model }));
                WedgeStatus::Ok
            }
            Err(e) => report(e),
        }
    })
}

/// Parse a CP model from its JSON encoding.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wedge_cp_model_from_json(
    json: *const c_char,
    out: *mut *mut WedgeCpModel,
) -> WedgeStatus {
    guarded(|| {
        if json.is_null() || out.is_null() {
            set_error("json/out pointer is NULL");
            return WedgeStatus::NullArgument;
        }
        let text = match CStr::from_ptr(json).to_str() {
            Ok(t) => t,
            Err(_) => {
                set_error("json is not valid UTF-8");
                return WedgeStatus::InvalidUtf8;
            }
        };
        match wedge_core::io::cp_model_from_json(text) {
            Ok(model) => {
                *out = Box::into_raw(Box::new(WedgeCpModel { inner: model }));
                WedgeStatus::Ok
            }
            Err(e) => report(e),
        }
    })
}

/// Serialize a CP model to JSON; the returned string is freed with
/// [`wedge_string_free`].
///
/// # Safety
/// `model` must be a live handle; `out_json` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wedge_cp_model_to_json(
    model: *const WedgeCpModel,
    out_json: *mut *mut c_char,
) -> WedgeStatus {
    guarded(|| {
        if model.is_null() || out_json.is_null() {
            set_error("model/out pointer is NULL");
            return WedgeStatus::NullArgument;
        }
        match wedge_core::io::cp_model_to_json(&(*model).inner) {
            Ok(json) => match CString::new(json) {
                Ok(c) => {
                    *out_json = c.into_raw();
                    WedgeStatus::Ok
                }
                Err(_) => {
                    set_error("serialized JSON contained NUL");
                    WedgeStatus::Numeric
                }
            },
            Err(e) => report(e),
        }
    })
}

/// Tensor order of the model.
///
/// # Safety
/// `model` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wedge_cp_model_order(
    model: *const WedgeCpModel,
    out: *mut usize,
) -> WedgeStatus {
    guarded(|| {
        if model.is_null() || out.is_null() {
            set_error("model/out pointer is NULL");
            return WedgeStatus::NullArgument;
        }
        *out = (*model).inner.order();
        WedgeStatus::Ok
    })
}

/// Dimension of one mode.
///
/// # Safety
/// `model` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wedge_cp_model_dim(
    model: *const WedgeCpModel,
    mode: usize,
    out: *mut usize,
) -> WedgeStatus {
    guarded(|| {
        if model.is_null() || out.is_null() {
            set_error("model/out pointer is NULL");
            return WedgeStatus::NullArgument;
        }
        let dims = (*model).inner.dims();
        if mode >= dims.len() {
            set_error("mode out of range");
            return WedgeStatus::InvalidArgument;
        }
        *out = dims[mode];
        WedgeStatus::Ok
    })
}

/// Lazy tensor entry `T[index]`.
///
/// # Safety
/// `model` must be a live handle; `index` must point to `len` readable
/// values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wedge_cp_model_entry(
    model: *const WedgeCpModel,
    index: *const usize,
    len: usize,
    out: *mut f64,
) -> WedgeStatus {
    guarded(|| {
        if model.is_null() || index.is_null() || out.is_null() {
            set_error("model/index/out pointer is NULL");
            return WedgeStatus::NullArgument;
        }
        let idx = std::slice::from_raw_parts(index, len);
        match (*model).inner.entry_checked(idx) {
            Ok(v) => {
                *out = v;
                WedgeStatus::Ok
            }
            Err(e) => report(e),
        }
    })
}

/// Free a model handle (NULL is a no-op).
///
/// # Safety
/// `model` must be a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wedge_cp_model_free(model: *mut WedgeCpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Run spectral completion (symmetric pipeline when `symmetric` is nonzero,
/// mode-wise otherwise) at wedge rate `p` and uniform rate `q`.
///
/// # Safety
/// `model` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wedge_spectral_complete(
    model: *const WedgeCpModel,
    rank: usize,
    p: f64,
    q: f64,
    seed: u64,
    symmetric: i32,
    out: *mut *mut WedgeCompletion,
) -> WedgeStatus {
    guarded(|| {
        if model.is_null() || out.is_null() {
            set_error("model/out pointer is NULL");
            return WedgeStatus::NullArgument;
        }
        let mut cfg = SpectralCompletionConfig::new(rank, p, q, seed);
        cfg.mode = if symmetric != 0 { CompletionMode::Symmetric } else { CompletionMode::Asymmetric };
        let run = if symmetric != 0 {
            spectral_complete_symmetric(&(*model).inner, &cfg)
        } else {
            spectral_complete_asymmetric(&(*model).inner, &cfg)
        };
        match run {
            Ok(res) => {
                *out = Box::into_raw(Box::new(WedgeCompletion {
                    rel_error: res.rel_error,
                    wedge_samples: res.wedge_entry_observations,
                    uniform_samples: res.uniform_samples,
                    degenerate_gap: res.degenerate_gap,
                }));
                WedgeStatus::Ok
            }
            Err(e) => report(e),
        }
    })
}

/// Relative Frobenius error of a completion run.
///
/// # Safety
/// `result` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wedge_completion_rel_error(
    result: *const WedgeCompletion,
    out: *mut f64,
) -> WedgeStatus {
    guarded(|| {
        if result.is_null() || out.is_null() {
            set_error("result/out pointer is NULL");
            return WedgeStatus::NullArgument;
        }
        *out = (*result).rel_error;
        WedgeStatus::Ok
    })
}

/// Total entry observations consumed (wedge + uniform).
///
/// # Safety
/// `result` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wedge_completion_samples(
    result: *const WedgeCompletion,
    out: *mut u64,
) -> WedgeStatus {
    guarded(|| {
        if result.is_null() || out.is_null() {
            set_error("result/out pointer is NULL");
            return WedgeStatus::NullArgument;
        }
        *out = (*result).wedge_samples + (*result).uniform_samples;
        WedgeStatus::Ok
    })
}

/// Whether any eigen-cut hit a degenerate spectral gap (1) or not (0).
///
/// # Safety
/// `result` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wedge_completion_degenerate_gap(
    result: *const WedgeCompletion,
    out: *mut i32,
) -> WedgeStatus {
    guarded(|| {
        if result.is_null() || out.is_null() {
            set_error("result/out pointer is NULL");
            return WedgeStatus::NullArgument;
        }
        *out = (*result).degenerate_gap as i32;
        WedgeStatus::Ok
    })
}

/// Free a completion handle (NULL is a no-op).
///
/// # Safety
/// `result` must be a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wedge_completion_free(result: *mut WedgeCompletion) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Wedge-initialized gradient-descent completion of an order-3 symmetric
/// model; writes the final relative Frobenius error.
///
/// # Safety
/// `model` must be a live handle; `out_rel_error` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wedge_gd_complete(
    model: *const WedgeCpModel,
    p: f64,
    q: f64,
    seed: u64,
    t_max: usize,
    out_rel_error: *mut f64,
) -> WedgeStatus {
    guarded(|| {
        if model.is_null() || out_rel_error.is_null() {
            set_error("model/out pointer is NULL");
            return WedgeStatus::NullArgument;
        }
        let model = &(*model).inner;
        let run = || -> Result<f64, Error> {
            let rank = model.rank();
            let n = model.dims()[0];
            let unfolding = unfold_cp(model, 0)?;
            let wedges = sample_wedges(
                n,
                wedge_core::tensor::MatrixEntry::ncols(&unfolding),
                p,
                rng::derive_seed(seed, &[rng::label::WEDGE, 0]),
            )?;
            let z = build_wedge_matrix(&unfolding, &wedges)?;
            let est = top_r_eigs(&z.z, rank, EigOrdering::Signed)?;
            let omega = sample_uniform(
                model.dims(),
                q,
                rng::derive_seed(seed, &[rng::label::UNIFORM]),
            )?;
            let obs = SparseObservations::gather(&omega, model)?;
            let retrieval = retrieve_cp_factors(
                &est.basis,
                &obs,
                rank,
                &RetrievalConfig::new(rank, rng::derive_seed(seed, &[rng::label::PROBE])),
            )?;
            let lambda_max = retrieval
                .selected
                .iter()
                .map(|&i| retrieval.candidates[i].lambda)
                .fold(f64::MIN_POSITIVE, f64::max);
            let mut cfg = GdConfig::new(wedge_core::gd::default_step(lambda_max));
            cfg.t_max = t_max;
            let run = gd_run(&retrieval.x0, &obs, &cfg, Some(model))?;
            Ok(run.final_rel_err_f().unwrap_or(f64::NAN))
        };
        match run() {
            Ok(err) => {
                *out_rel_error = err;
                WedgeStatus::Ok
            }
            Err(e) => report(e),
        }
    })
}

/// Wedge-initialized subspace estimation of the mode-0 unfolding; writes
/// `||Û R - U||` against the model's exact left subspace.
///
/// # Safety
/// `model` must be a live handle; `out_error` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wedge_subspace_error(
    model: *const WedgeCpModel,
    p: f64,
    seed: u64,
    out_error: *mut f64,
) -> WedgeStatus {
    guarded(|| {
        if model.is_null() || out_error.is_null() {
            set_error("model/out pointer is NULL");
            return WedgeStatus::NullArgument;
        }
        let model = &(*model).inner;
        let run = || -> Result<f64, Error> {
            let rank = model.rank();
            let n = model.dims()[0];
            let unfolding = unfold_cp(model, 0)?;
            let wedges = sample_wedges(
                n,
                wedge_core::tensor::MatrixEntry::ncols(&unfolding),
                p,
                seed,
            )?;
            let z = build_wedge_matrix(&unfolding, &wedges)?;
            let est = top_r_eigs(&z.z, rank, EigOrdering::Signed)?;
            let truth = model.factor(0).clone().qr().q();
            Ok(procrustes_align(&est.basis, &truth)?.op_err)
        };
        match run() {
            Ok(err) => {
                *out_error = err;
                WedgeStatus::Ok
            }
            Err(e) => report(e),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    #[test]
    fn model_lifecycle_and_entry() {
        unsafe {
            let mut model: *mut WedgeCpModel = ptr::null_mut();
            let status = wedge_cp_model_random_symmetric(8, 2, 3, 7, &mut model);
            assert_eq!(status, WedgeStatus::Ok);
            let mut order = 0usize;
            assert_eq!(wedge_cp_model_order(model, &mut order), WedgeStatus::Ok);
            assert_eq!(order, 3);
            let mut dim = 0usize;
            assert_eq!(wedge_cp_model_dim(model, 1, &mut dim), WedgeStatus::Ok);
            assert_eq!(dim, 8);
            let idx = [1usize, 2, 3];
            let mut v = 0.0f64;
            assert_eq!(
                wedge_cp_model_entry(model, idx.as_ptr(), idx.len(), &mut v),
                WedgeStatus::Ok
            );
            assert!(v.is_finite());
            // JSON round trip through the C surface.
            let mut json: *mut c_char = ptr::null_mut();
            assert_eq!(wedge_cp_model_to_json(model, &mut json), WedgeStatus::Ok);
            let mut model2: *mut WedgeCpModel = ptr::null_mut();
            assert_eq!(wedge_cp_model_from_json(json, &mut model2), WedgeStatus::Ok);
            let mut v2 = 0.0f64;
            assert_eq!(
                wedge_cp_model_entry(model2, idx.as_ptr(), idx.len(), &mut v2),
                WedgeStatus::Ok
            );
            assert_eq!(v, v2);
            wedge_string_free(json);
            wedge_cp_model_free(model);
            wedge_cp_model_free(model2);
        }
    }

    #[test]
    fn null_arguments_are_rejected_with_message() {
        unsafe {
            let status = wedge_cp_model_random_symmetric(4, 1, 3, 0, ptr::null_mut());
            assert_eq!(status, WedgeStatus::NullArgument);
            let msg = CStr::from_ptr(wedge_last_error_message());
            assert!(!msg.to_bytes().is_empty());
        }
    }

    #[test]
    fn invalid_model_reports_invalid_argument() {
        unsafe {
            let mut model: *mut WedgeCpModel = ptr::null_mut();
            // rank 0 is invalid
            let status = wedge_cp_model_random_symmetric(4, 0, 3, 0, &mut model);
            assert_eq!(status, WedgeStatus::InvalidArgument);
        }
    }

    #[test]
    fn exact_completion_through_the_c_surface() {
        unsafe {
            let mut model: *mut WedgeCpModel = ptr::null_mut();
            assert_eq!(
                wedge_cp_model_random_symmetric(10, 2, 3, 3, &mut model),
                WedgeStatus::Ok
            );
            let mut result: *mut WedgeCompletion = ptr::null_mut();
            assert_eq!(
                wedge_spectral_complete(model, 2, 1.0, 1.0, 5, 1, &mut result),
                WedgeStatus::Ok
            );
            let mut err = f64::NAN;
            assert_eq!(wedge_completion_rel_error(result, &mut err), WedgeStatus::Ok);
            assert!(err < 1e-10, "rel error {err}");
            let mut samples = 0u64;
            assert_eq!(wedge_completion_samples(result, &mut samples), WedgeStatus::Ok);
            assert!(samples > 0);
            wedge_completion_free(result);
            wedge_cp_model_free(model);
        }
    }

    #[test]
    fn gd_completion_through_the_c_surface() {
        unsafe {
            let mut model: *mut WedgeCpModel = ptr::null_mut();
            assert_eq!(
                wedge_cp_model_random_symmetric(20, 1, 3, 11, &mut model),
                WedgeStatus::Ok
            );
            let mut err = f64::NAN;
            let status = wedge_gd_complete(model, 0.05, 0.5, 13, 300, &mut err);
            assert_eq!(status, WedgeStatus::Ok);
            assert!(err < 1e-6, "rel error {err}");
            wedge_cp_model_free(model);
        }
    }
}
