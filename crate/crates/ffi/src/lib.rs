//! C ABI over `bounded_lse`.
//!
//! Objects cross the boundary as opaque handles (`BlseCase`, `BlseTrial`)
//! created by the `*_bundled`, `*_parse` and `*_generate` functions and released with the
//! matching `*_free`. Every fallible call returns a `BlseStatus`; on anything
//! other than `BLSE_STATUS_OK` a description is available from
//! `blse_last_error_message` on the same thread. Vector outputs are written
//! into caller-owned buffers whose length is passed alongside.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bounded_lse::bench::{generate_trial, run_convex, run_glfp, run_interval, trial_seeds, TrialData};
use bounded_lse::caseio::{parse_case, NetworkCase};
use bounded_lse::measmodel::{build_measurement_matrix, ChiPMode, DeltaPMode, MeasurementModel, PmuPlacement};
use bounded_lse::{data, Error};

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlseStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed case, placement or argument.
    InvalidInput = 3,
    /// An estimator failed (divergence, singular system, no feasible orthant).
    Numerical = 4,
    /// Output buffer length does not match the state dimension.
    BufferSize = 5,
    /// Internal panic caught at the boundary.
    Internal = 6,
}

/// Network case together with the PMU placement used for estimation.
pub struct BlseCase {
    case: NetworkCase,
    placement: PmuPlacement,
}

/// One synthetic experiment: perturbed grid, noisy measurements and bounds.
pub struct BlseTrial {
    model: MeasurementModel,
    data: TrialData,
}

/// Experiment settings for `blse_trial_generate`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct BlseTrialOptions {
    /// Maximum relative line-parameter deviation, in [0, 1).
    pub max_rel_dev: f64,
    /// Measurement TVE bound, e.g. 0.01.
    pub tve_bound: f64,
    pub seed: u64,
    pub trial: u64,
    /// Take the aggregate parameter bound from the realized parameter change
    /// instead of the matrix norm of the affine expansion.
    pub chi_p_from_parameters: bool,
    /// Use the realized parameter deviations as interval radii.
    pub realized_deltas: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: BlseStatus, msg: impl Into<String>) -> BlseStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> BlseStatus {
    let status = if e.is_numerical() { BlseStatus::Numerical } else { BlseStatus::InvalidInput };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> BlseStatus) -> BlseStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(BlseStatus::Internal, "internal panic"),
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, BlseStatus> {
    if s.is_null() {
        return Err(fail(BlseStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(BlseStatus::InvalidUtf8, "string argument is not UTF-8"))
}

unsafe fn write_vec(src: &[f64], out: *mut f64, len: usize) -> BlseStatus {
    if out.is_null() {
        return fail(BlseStatus::NullPointer, "null output buffer");
    }
    if len != src.len() {
        return fail(BlseStatus::BufferSize, format!("buffer holds {len} values, need {}", src.len()));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, len);
    BlseStatus::Ok
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn blse_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses a case file. `placement` lists PMU bus ids (whitespace or comma
/// separated); NULL places a PMU at every bus.
///
/// # Safety
/// `text` must be a NUL-terminated string, `placement` NULL or NUL-terminated,
/// and `out` a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn blse_case_parse(
    text: *const c_char,
    placement: *const c_char,
    out: *mut *mut BlseCase,
) -> BlseStatus {
    guard(|| {
        if out.is_null() {
            return fail(BlseStatus::NullPointer, "null output handle");
        }
        let text = match read_str(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let case = match parse_case(text) {
            Ok(c) => c,
            Err(e) => return from_error(e),
        };
        let placement = if placement.is_null() {
            PmuPlacement::all_buses(&case)
        } else {
            match read_str(placement).map(PmuPlacement::parse) {
                Ok(Ok(p)) => p,
                Ok(Err(e)) => return from_error(e),
                Err(s) => return s,
            }
        };
        *out = Box::into_raw(Box::new(BlseCase { case, placement }));
        BlseStatus::Ok
    })
}

/// Loads a bundled system (`case5`, `case14`, `case30`, `case57`, `case118`)
/// with its bundled placement.
///
/// # Safety
/// `name` must be NUL-terminated and `out` valid for one handle write.
#[no_mangle]
pub unsafe extern "C" fn blse_case_bundled(name: *const c_char, out: *mut *mut BlseCase) -> BlseStatus {
    guard(|| {
        if out.is_null() {
            return fail(BlseStatus::NullPointer, "null output handle");
        }
        let name = match read_str(name) {
            Ok(n) => n,
            Err(s) => return s,
        };
        let Some((text, placement)) = data::bundled(name) else {
            return fail(BlseStatus::InvalidInput, format!("no bundled case named '{name}'"));
        };
        let case = match parse_case(text).and_then(|c| Ok((PmuPlacement::parse(placement)?, c))) {
            Ok((placement, case)) => BlseCase { case, placement },
            Err(e) => return from_error(e),
        };
        *out = Box::into_raw(Box::new(case));
        BlseStatus::Ok
    })
}

/// Number of buses, or 0 for a NULL handle.
///
/// # Safety
/// `case` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn blse_case_bus_count(case: *const BlseCase) -> usize {
    case.as_ref().map_or(0, |c| c.case.bus_count())
}

/// # Safety
/// `case` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn blse_case_free(case: *mut BlseCase) {
    if !case.is_null() {
        drop(Box::from_raw(case));
    }
}

/// Defaults matching the command-line tool: 30% deviation, 1% TVE.
#[no_mangle]
pub extern "C" fn blse_trial_options_default() -> BlseTrialOptions {
    BlseTrialOptions {
        max_rel_dev: 0.3,
        tve_bound: 0.01,
        seed: 0,
        trial: 0,
        chi_p_from_parameters: false,
        realized_deltas: false,
    }
}

/// Perturbs the case, solves the power flow and simulates measurements.
///
/// # Safety
/// `case` must be a live handle, `options` a valid pointer and `out` valid
/// for one handle write.
#[no_mangle]
pub unsafe extern "C" fn blse_trial_generate(
    case: *const BlseCase,
    options: *const BlseTrialOptions,
    out: *mut *mut BlseTrial,
) -> BlseStatus {
    guard(|| {
        let (Some(case), Some(opt)) = (case.as_ref(), options.as_ref()) else {
            return fail(BlseStatus::NullPointer, "null case or options");
        };
        if out.is_null() {
            return fail(BlseStatus::NullPointer, "null output handle");
        }
        let model = match build_measurement_matrix(&case.case, &case.placement) {
            Ok(m) => m,
            Err(e) => return from_error(e),
        };
        let chi = if opt.chi_p_from_parameters { ChiPMode::Paper } else { ChiPMode::Matrix };
        let delta = if opt.realized_deltas { DeltaPMode::Realized } else { DeltaPMode::Box };
        let data = match generate_trial(
            &case.case,
            &case.placement,
            &model,
            opt.max_rel_dev,
            opt.tve_bound,
            trial_seeds(opt.seed, opt.trial as usize),
            chi,
            delta,
        ) {
            Ok(d) => d,
            Err(e) => return from_error(e),
        };
        *out = Box::into_raw(Box::new(BlseTrial { model, data }));
        BlseStatus::Ok
    })
}

/// State dimension (twice the bus count), or 0 for a NULL handle.
///
/// # Safety
/// `trial` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn blse_trial_state_len(trial: *const BlseTrial) -> usize {
    trial.as_ref().map_or(0, |t| t.model.n_states())
}

/// Copies the true state (real parts, then imaginary parts) into `out`.
///
/// # Safety
/// `trial` must be a live handle and `out` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn blse_trial_true_state(trial: *const BlseTrial, out: *mut f64, len: usize) -> BlseStatus {
    guard(|| match trial.as_ref() {
        Some(t) => write_vec(&t.data.measurements.x_true, out, len),
        None => fail(BlseStatus::NullPointer, "null trial"),
    })
}

/// Interval estimator: per-component lower and upper bounds.
///
/// # Safety
/// `trial` must be a live handle; `lower` and `upper` must each have room for
/// `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn blse_estimate_interval(
    trial: *const BlseTrial,
    lower: *mut f64,
    upper: *mut f64,
    len: usize,
) -> BlseStatus {
    guard(|| {
        let Some(t) = trial.as_ref() else {
            return fail(BlseStatus::NullPointer, "null trial");
        };
        if lower.is_null() || upper.is_null() {
            return fail(BlseStatus::NullPointer, "null output buffer");
        }
        if len != t.model.n_states() {
            return fail(BlseStatus::BufferSize, format!("buffer holds {len} values, need {}", t.model.n_states()));
        }
        match run_interval(&t.model, &t.data) {
            Ok(b) => {
                write_vec(&b.lower, lower, len);
                write_vec(&b.upper, upper, len)
            }
            Err(e) => from_error(e),
        }
    })
}

/// Convex (bounded data uncertainty) estimator. `theta` may be NULL; it
/// receives the regularization weight, +inf when the zero estimate is optimal.
///
/// # Safety
/// `trial` must be a live handle, `out` must have room for `len` doubles and
/// `theta` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn blse_estimate_convex(
    trial: *const BlseTrial,
    out: *mut f64,
    len: usize,
    theta: *mut f64,
) -> BlseStatus {
    guard(|| {
        let Some(t) = trial.as_ref() else {
            return fail(BlseStatus::NullPointer, "null trial");
        };
        if len != t.model.n_states() {
            return fail(BlseStatus::BufferSize, format!("buffer holds {len} values, need {}", t.model.n_states()));
        }
        match run_convex(&t.model, &t.data) {
            Ok(s) => {
                if !theta.is_null() {
                    *theta = s.theta;
                }
                write_vec(&s.x_hat, out, len)
            }
            Err(e) => from_error(e),
        }
    })
}

/// Fractional-programming estimator. Only small systems are accepted
/// (`max_states` caps the state dimension; 0 selects the default of 24).
/// `xi` may be NULL; it receives the optimal worst-case ratio.
///
/// # Safety
/// `trial` must be a live handle, `out` must have room for `len` doubles and
/// `xi` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn blse_estimate_glfp(
    trial: *const BlseTrial,
    max_states: usize,
    out: *mut f64,
    len: usize,
    xi: *mut f64,
) -> BlseStatus {
    guard(|| {
        let Some(t) = trial.as_ref() else {
            return fail(BlseStatus::NullPointer, "null trial");
        };
        if len != t.model.n_states() {
            return fail(BlseStatus::BufferSize, format!("buffer holds {len} values, need {}", t.model.n_states()));
        }
        let max_states = if max_states == 0 { bounded_lse::glfp::DEFAULT_MAX_STATES } else { max_states };
        match run_glfp(&t.model, &t.data, max_states) {
            Ok(s) => {
                if !xi.is_null() {
                    *xi = s.xi_hat;
                }
                write_vec(&s.x_star, out, len)
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `trial` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn blse_trial_free(trial: *mut BlseTrial) {
    if !trial.is_null() {
        drop(Box::from_raw(trial));
    }
}
