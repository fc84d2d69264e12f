//! C ABI for the parfilter filters.
//!
//! Every filter is an opaque handle created by a `*_new` function and
//! released with the matching `*_free`. Functions return a [`PfStatus`];
//! results come back through out-pointers. Panics never cross the boundary:
//! they are caught and reported as [`PfStatus::Panic`].
//!
//! Handles are `Sync` on the Rust side. Point operations on one handle may
//! run from several threads at once. Bulk operations need exclusive access.

use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use parfilter::{BulkTcf, BulkTcfParams, Error, Gqf, QfParams, Tcf, TcfParams};

/// Status codes returned by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    /// Both candidate blocks and the backing table are full.
    Full = 3,
    /// The quotient filter is at its maximum load factor.
    LoadLimit = 4,
    /// A shift would cross the region after the canonical one.
    ShiftBound = 5,
    CountOverflow = 6,
    Input = 7,
    Invariant = 8,
    Panic = 9,
}

impl From<&Error> for PfStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidParameter(_) => PfStatus::InvalidParameter,
            Error::Full => PfStatus::Full,
            Error::LoadLimit { .. } => PfStatus::LoadLimit,
            Error::ShiftBound { .. } => PfStatus::ShiftBound,
            Error::CountOverflow => PfStatus::CountOverflow,
            Error::Input(_) => PfStatus::Input,
            Error::Invariant(_) => PfStatus::Invariant,
        }
    }
}

/// Point-API two-choice filter.
pub struct PfTcf(Tcf);

/// Batch-API two-choice filter.
pub struct PfBulkTcf(BulkTcf);

/// Counting quotient filter.
pub struct PfGqf(Gqf);

fn guard(f: impl FnOnce() -> Result<(), PfStatus>) -> PfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PfStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => PfStatus::Panic,
    }
}

fn lift<T>(r: parfilter::Result<T>) -> Result<T, PfStatus> {
    r.map_err(|e| PfStatus::from(&e))
}

unsafe fn href<'a, T>(p: *const T) -> Result<&'a T, PfStatus> {
    p.as_ref().ok_or(PfStatus::NullPointer)
}

unsafe fn hmut<'a, T>(p: *mut T) -> Result<&'a mut T, PfStatus> {
    p.as_mut().ok_or(PfStatus::NullPointer)
}

unsafe fn put<T>(out: *mut T, v: T) -> Result<(), PfStatus> {
    if out.is_null() {
        return Err(PfStatus::NullPointer);
    }
    out.write(v);
    Ok(())
}

unsafe fn keys<'a>(p: *const u64, n: usize) -> Result<&'a [u64], PfStatus> {
    match (p.is_null(), n) {
        (_, 0) => Ok(&[]),
        (true, _) => Err(PfStatus::NullPointer),
        (false, _) => Ok(slice::from_raw_parts(p, n)),
    }
}

unsafe fn new_handle<T>(out: *mut *mut T, make: impl FnOnce() -> Result<T, PfStatus>) -> PfStatus {
    guard(|| {
        if out.is_null() {
            return Err(PfStatus::NullPointer);
        }
        out.write(std::ptr::null_mut());
        let h = make()?;
        out.write(Box::into_raw(Box::new(h)));
        Ok(())
    })
}

unsafe fn free_handle<T>(h: *mut T) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Static, NUL-terminated description of a status code. Unknown codes
/// get a generic message.
#[no_mangle]
pub extern "C" fn pf_status_str(status: i32) -> *const c_char {
    let s: &'static CStr = match status {
        0 => c"ok",
        1 => c"null pointer",
        2 => c"invalid parameter",
        3 => c"filter is full",
        4 => c"load limit reached",
        5 => c"shift bound exceeded",
        6 => c"count overflow",
        7 => c"input error",
        8 => c"invariant violated",
        9 => c"internal panic",
        _ => c"unknown status",
    };
    s.as_ptr()
}

// ---- point TCF ----

/// Creates a point TCF with `2^log_slots` main-table slots and default
/// geometry (16 slots of 16 bits per block, 1% backing table).
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pf_tcf_new(log_slots: u32, seed: u64, out: *mut *mut PfTcf) -> PfStatus {
    new_handle(out, || {
        let mut p = lift(TcfParams::with_log_slots(log_slots))?;
        p.seed = seed;
        lift(Tcf::new(p)).map(PfTcf)
    })
}

/// # Safety
/// `h` must come from [`pf_tcf_new`] and not be used afterwards. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn pf_tcf_free(h: *mut PfTcf) {
    free_handle(h)
}

/// Inserts `key` with `value`. The default layout spends all 16 slot bits
/// on the tag, so only `value == 0` is accepted.
///
/// # Safety
/// `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pf_tcf_insert(h: *const PfTcf, key: u64, value: u32) -> PfStatus {
    guard(|| lift(href(h)?.0.insert(key, value)).map(drop))
}

/// Looks up `key`. `*found` tells whether it was present; `*value` is
/// written only when it was. `value` may be null.
///
/// # Safety
/// `h` must be a live handle; `found` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pf_tcf_query(h: *const PfTcf, key: u64, found: *mut bool, value: *mut u32) -> PfStatus {
    guard(|| {
        let hit = href(h)?.0.query(key);
        put(found, hit.is_some())?;
        if let (Some(v), false) = (hit, value.is_null()) {
            value.write(v);
        }
        Ok(())
    })
}

/// Removes one matching entry; `*removed` tells whether one was found.
///
/// # Safety
/// `h` must be a live handle; `removed` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pf_tcf_remove(h: *const PfTcf, key: u64, removed: *mut bool) -> PfStatus {
    guard(|| {
        let hit = href(h)?.0.remove(key);
        put(removed, hit)
    })
}

/// # Safety
/// `h` must be a live handle; `len` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pf_tcf_len(h: *const PfTcf, len: *mut usize) -> PfStatus {
    guard(|| put(len, href(h)?.0.len()))
}

// ---- bulk TCF ----

/// Creates a bulk TCF with `2^log_slots` main-table slots and default
/// geometry (128 slots of 16 bits per block, 1% backing table).
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pf_bulk_tcf_new(log_slots: u32, seed: u64, out: *mut *mut PfBulkTcf) -> PfStatus {
    new_handle(out, || {
        let mut p = lift(BulkTcfParams::with_log_slots(log_slots))?;
        p.seed = seed;
        lift(BulkTcf::new(p)).map(PfBulkTcf)
    })
}

/// # Safety
/// `h` must come from [`pf_bulk_tcf_new`] and not be used afterwards. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn pf_bulk_tcf_free(h: *mut PfBulkTcf) {
    free_handle(h)
}

/// Inserts a batch. Keys that found no room are dropped and counted in
/// `*failed` (may be null); the call then returns [`PfStatus::Full`].
///
/// # Safety
/// `h` must be a live handle with no concurrent users; `keys` must point
/// to `n` readable values.
#[no_mangle]
pub unsafe extern "C" fn pf_bulk_tcf_insert(
    h: *mut PfBulkTcf,
    keys_ptr: *const u64,
    n: usize,
    workers: usize,
    failed: *mut usize,
) -> PfStatus {
    guard(|| {
        let f = hmut(h)?;
        let stats = f.0.bulk_insert(keys(keys_ptr, n)?, workers.max(1));
        if !failed.is_null() {
            failed.write(stats.failed);
        }
        lift(stats.check()).map(drop)
    })
}

/// Writes one membership answer per key into `found[0..n]`.
///
/// # Safety
/// `h` must be a live handle; `keys` and `found` must each hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn pf_bulk_tcf_query(
    h: *const PfBulkTcf,
    keys_ptr: *const u64,
    n: usize,
    workers: usize,
    found: *mut bool,
) -> PfStatus {
    guard(|| {
        let f = href(h)?;
        let ks = keys(keys_ptr, n)?;
        if n > 0 && found.is_null() {
            return Err(PfStatus::NullPointer);
        }
        for (i, hit) in f.0.bulk_query(ks, workers.max(1)).into_iter().enumerate() {
            found.add(i).write(hit);
        }
        Ok(())
    })
}

/// Deletes one entry per key; `*deleted` counts the keys that were found.
///
/// # Safety
/// `h` must be a live handle with no concurrent users; `keys` must point
/// to `n` readable values; `deleted` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pf_bulk_tcf_delete(
    h: *mut PfBulkTcf,
    keys_ptr: *const u64,
    n: usize,
    deleted: *mut usize,
) -> PfStatus {
    guard(|| {
        let f = hmut(h)?;
        let d = f.0.bulk_delete(keys(keys_ptr, n)?);
        put(deleted, d)
    })
}

/// # Safety
/// `h` must be a live handle; `len` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pf_bulk_tcf_len(h: *const PfBulkTcf, len: *mut usize) -> PfStatus {
    guard(|| put(len, href(h)?.0.len()))
}

// ---- GQF ----

/// Creates a counting quotient filter with `2^quotient_bits` slots of
/// `remainder_bits` (8, 16, 32 or 64) bits, capped at 95% load.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pf_gqf_new(quotient_bits: u32, remainder_bits: u32, seed: u64, out: *mut *mut PfGqf) -> PfStatus {
    new_handle(out, || {
        let mut p = QfParams::new(quotient_bits, remainder_bits);
        p.seed = seed;
        lift(Gqf::new(p)).map(PfGqf)
    })
}

/// # Safety
/// `h` must come from [`pf_gqf_new`] and not be used afterwards. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn pf_gqf_free(h: *mut PfGqf) {
    free_handle(h)
}

/// Adds `delta` occurrences of `key`.
///
/// # Safety
/// `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pf_gqf_insert(h: *const PfGqf, key: u64, delta: u64) -> PfStatus {
    guard(|| lift(href(h)?.0.insert(key, delta)))
}

/// # Safety
/// `h` must be a live handle; `count` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pf_gqf_count(h: *const PfGqf, key: u64, count: *mut u64) -> PfStatus {
    guard(|| put(count, href(h)?.0.count(key)))
}

/// Removes up to `delta` occurrences; `*found` tells whether the key was present.
///
/// # Safety
/// `h` must be a live handle; `found` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pf_gqf_delete(h: *const PfGqf, key: u64, delta: u64, found: *mut bool) -> PfStatus {
    guard(|| {
        let hit = lift(href(h)?.0.delete(key, delta))?;
        put(found, hit)
    })
}

/// Inserts every key once using even/odd region phases.
///
/// # Safety
/// `h` must be a live handle with no concurrent users; `keys` must point
/// to `n` readable values.
#[no_mangle]
pub unsafe extern "C" fn pf_gqf_bulk_insert(h: *mut PfGqf, keys_ptr: *const u64, n: usize, workers: usize) -> PfStatus {
    guard(|| lift(hmut(h)?.0.bulk_insert(keys(keys_ptr, n)?, workers.max(1))))
}

/// Like [`pf_gqf_bulk_insert`], but collapses duplicate keys first.
///
/// # Safety
/// As for [`pf_gqf_bulk_insert`].
#[no_mangle]
pub unsafe extern "C" fn pf_gqf_bulk_count(h: *mut PfGqf, keys_ptr: *const u64, n: usize, workers: usize) -> PfStatus {
    guard(|| lift(hmut(h)?.0.bulk_count(keys(keys_ptr, n)?, workers.max(1))))
}

/// Total multiplicity held.
///
/// # Safety
/// `h` must be a live handle; `len` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pf_gqf_len(h: *const PfGqf, len: *mut u64) -> PfStatus {
    guard(|| put(len, href(h)?.0.len()))
}
