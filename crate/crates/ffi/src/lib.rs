//! C ABI over the crowdsense mechanisms.
//!
//! Instances and outcomes are opaque heap handles owned by the caller and
//! released with their `*_free` function. Every fallible call returns a
//! [`CsStatus`]; on failure, [`cs_last_error`] describes the most recent
//! error on the calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use crowdsense::msensing::run_msensing;
use crowdsense::online::{run_online, OnlineConfig};
use crowdsense::smart::run_smart;
use crowdsense::{AuctionOutcome, Instance, UserId};

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInstance = 3,
    InvalidArgument = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Opaque auction instance.
pub struct CsInstance(Instance);

/// Opaque auction result.
pub struct CsOutcome(AuctionOutcome);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = CString::new(message.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn fail(status: CsStatus, message: impl Into<String>) -> CsStatus {
    set_error(message);
    status
}

fn guard(f: impl FnOnce() -> CsStatus) -> CsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(CsStatus::Panic, "internal panic"),
    }
}

/// Message for the last failed call on this thread, or NULL if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses an instance from NUL-terminated JSON.
///
/// # Safety
/// `json` must be NULL or a valid NUL-terminated string; `out` must be NULL
/// or valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn cs_instance_from_json(
    json: *const c_char,
    out: *mut *mut CsInstance,
) -> CsStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return fail(CsStatus::NullPointer, "null argument");
        }
        let text = match CStr::from_ptr(json).to_str() {
            Ok(t) => t,
            Err(e) => return fail(CsStatus::InvalidUtf8, e.to_string()),
        };
        match Instance::from_json(text) {
            Ok(instance) => {
                *out = Box::into_raw(Box::new(CsInstance(instance)));
                CsStatus::Ok
            }
            Err(e) => fail(CsStatus::InvalidInstance, e.to_string()),
        }
    })
}

/// # Safety
/// `instance` must be NULL or a handle from [`cs_instance_from_json`] that
/// has not been freed.
#[no_mangle]
pub unsafe extern "C" fn cs_instance_free(instance: *mut CsInstance) {
    if !instance.is_null() {
        drop(Box::from_raw(instance));
    }
}

/// Number of users; 0 for NULL.
///
/// # Safety
/// `instance` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cs_instance_user_count(instance: *const CsInstance) -> usize {
    instance.as_ref().map_or(0, |i| i.0.user_count())
}

/// Number of tasks; 0 for NULL.
///
/// # Safety
/// `instance` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cs_instance_task_count(instance: *const CsInstance) -> usize {
    instance.as_ref().map_or(0, |i| i.0.task_count())
}

unsafe fn run_with(
    instance: *const CsInstance,
    out: *mut *mut CsOutcome,
    mechanism: impl FnOnce(&Instance) -> Result<AuctionOutcome, CsStatus>,
) -> CsStatus {
    guard(|| {
        let Some(instance) = instance.as_ref() else {
            return fail(CsStatus::NullPointer, "null instance");
        };
        if out.is_null() {
            return fail(CsStatus::NullPointer, "null output pointer");
        }
        match mechanism(&instance.0) {
            Ok(outcome) => {
                *out = Box::into_raw(Box::new(CsOutcome(outcome)));
                CsStatus::Ok
            }
            Err(status) => status,
        }
    })
}

/// Runs SMART.
///
/// # Safety
/// `instance` must be NULL or a live handle; `out` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn cs_run_smart(
    instance: *const CsInstance,
    out: *mut *mut CsOutcome,
) -> CsStatus {
    run_with(instance, out, |i| Ok(run_smart(i)))
}

/// Runs M-Sensing.
///
/// # Safety
/// `instance` must be NULL or a live handle; `out` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn cs_run_msensing(
    instance: *const CsInstance,
    out: *mut *mut CsOutcome,
) -> CsStatus {
    run_with(instance, out, |i| Ok(run_msensing(i)))
}

/// Runs ONLINE-SMART with an explicit arrival order: `order_len` user ids
/// forming a permutation of 1..=n.
///
/// # Safety
/// `order` must point to `order_len` readable ids (may be NULL when
/// `order_len` is 0); `instance` and `out` as for [`cs_run_smart`].
#[no_mangle]
pub unsafe extern "C" fn cs_run_online(
    instance: *const CsInstance,
    order: *const u32,
    order_len: usize,
    observe_fraction: f64,
    out: *mut *mut CsOutcome,
) -> CsStatus {
    if order.is_null() && order_len > 0 {
        return fail(CsStatus::NullPointer, "null arrival order");
    }
    let ids: Vec<UserId> = if order_len == 0 {
        Vec::new()
    } else {
        std::slice::from_raw_parts(order, order_len)
            .iter()
            .map(|&u| UserId(u))
            .collect()
    };
    run_with(instance, out, |i| {
        let config = OnlineConfig::new(observe_fraction)
            .map_err(|e| fail(CsStatus::InvalidArgument, e.to_string()))?;
        run_online(i, &ids, config).map_err(|e| fail(CsStatus::InvalidArgument, e.to_string()))
    })
}

/// # Safety
/// `outcome` must be NULL or a live outcome handle.
#[no_mangle]
pub unsafe extern "C" fn cs_outcome_free(outcome: *mut CsOutcome) {
    if !outcome.is_null() {
        drop(Box::from_raw(outcome));
    }
}

/// Platform utility; 0 for NULL.
///
/// # Safety
/// `outcome` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cs_outcome_utility(outcome: *const CsOutcome) -> i64 {
    outcome.as_ref().map_or(0, |o| o.0.utility)
}

/// Number of winners; 0 for NULL.
///
/// # Safety
/// `outcome` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cs_outcome_winner_count(outcome: *const CsOutcome) -> usize {
    outcome.as_ref().map_or(0, |o| o.0.winners.len())
}

/// Copies winner ids (ascending) and their payments into caller buffers of
/// length `capacity`. `payments` may be NULL. Fails with
/// `CS_STATUS_BUFFER_TOO_SMALL` when `capacity` is below the winner count.
///
/// # Safety
/// `ids` (and `payments` if not NULL) must be writable for `capacity`
/// elements.
#[no_mangle]
pub unsafe extern "C" fn cs_outcome_winners(
    outcome: *const CsOutcome,
    ids: *mut u32,
    payments: *mut i64,
    capacity: usize,
) -> CsStatus {
    guard(|| {
        let Some(outcome) = outcome.as_ref() else {
            return fail(CsStatus::NullPointer, "null outcome");
        };
        let n = outcome.0.winners.len();
        if capacity < n {
            return fail(
                CsStatus::BufferTooSmall,
                format!("{n} winners, capacity {capacity}"),
            );
        }
        if n > 0 && ids.is_null() {
            return fail(CsStatus::NullPointer, "null id buffer");
        }
        for (k, &w) in outcome.0.winners.iter().enumerate() {
            *ids.add(k) = w.0;
            if !payments.is_null() {
                *payments.add(k) = outcome.0.payment(w);
            }
        }
        CsStatus::Ok
    })
}

/// Payment made to `user`; 0 when it is not a winner.
///
/// # Safety
/// `outcome` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cs_outcome_payment(outcome: *const CsOutcome, user: u32) -> i64 {
    outcome.as_ref().map_or(0, |o| o.0.payment(UserId(user)))
}

/// Serializes an outcome as JSON. Free the string with [`cs_string_free`].
///
/// # Safety
/// `outcome` must be NULL or a live handle; `out` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn cs_outcome_to_json(
    outcome: *const CsOutcome,
    out: *mut *mut c_char,
) -> CsStatus {
    guard(|| {
        let Some(outcome) = outcome.as_ref() else {
            return fail(CsStatus::NullPointer, "null outcome");
        };
        if out.is_null() {
            return fail(CsStatus::NullPointer, "null output pointer");
        }
        let text = serde_json::to_string(&outcome.0).expect("outcome serializes");
        *out = CString::new(text)
            .expect("json has no nul bytes")
            .into_raw();
        CsStatus::Ok
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
