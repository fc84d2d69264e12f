use std::ffi::CStr;
use std::ptr;

use parfilter_ffi::*;

#[test]
fn tcf_round_trip() {
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(pf_tcf_new(12, 7, &mut h), PfStatus::Ok);
        for k in 0..1000u64 {
            assert_eq!(pf_tcf_insert(h, k, 0), PfStatus::Ok);
        }
        let mut len = 0;
        assert_eq!(pf_tcf_len(h, &mut len), PfStatus::Ok);
        assert_eq!(len, 1000);
        let (mut found, mut value) = (false, 0u32);
        for k in 0..1000u64 {
            assert_eq!(pf_tcf_query(h, k, &mut found, &mut value), PfStatus::Ok);
            assert!(found);
        }
        assert_eq!(pf_tcf_query(h, 5, &mut found, ptr::null_mut()), PfStatus::Ok);
        let mut removed = false;
        assert_eq!(pf_tcf_remove(h, 5, &mut removed), PfStatus::Ok);
        assert!(removed);
        pf_tcf_free(h);
    }
}

#[test]
fn tcf_full_reports_status() {
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(pf_tcf_new(8, 0, &mut h), PfStatus::Ok);
        let mut last = PfStatus::Ok;
        for k in 0..10_000u64 {
            last = pf_tcf_insert(h, k, 0);
            if last != PfStatus::Ok {
                break;
            }
        }
        assert_eq!(last, PfStatus::Full);
        pf_tcf_free(h);
    }
}

#[test]
fn bulk_tcf_round_trip() {
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(pf_bulk_tcf_new(14, 3, &mut h), PfStatus::Ok);
        let keys: Vec<u64> = (0..8000).map(|i| i * 31 + 1).collect();
        let mut failed = usize::MAX;
        assert_eq!(pf_bulk_tcf_insert(h, keys.as_ptr(), keys.len(), 1, &mut failed), PfStatus::Ok);
        assert_eq!(failed, 0);
        let mut found = vec![false; keys.len()];
        assert_eq!(pf_bulk_tcf_query(h, keys.as_ptr(), keys.len(), 1, found.as_mut_ptr()), PfStatus::Ok);
        assert!(found.iter().all(|&b| b));
        let mut deleted = 0;
        assert_eq!(pf_bulk_tcf_delete(h, keys.as_ptr(), 100, &mut deleted), PfStatus::Ok);
        assert_eq!(deleted, 100);
        let mut len = 0;
        assert_eq!(pf_bulk_tcf_len(h, &mut len), PfStatus::Ok);
        assert_eq!(len, keys.len() - 100);
        pf_bulk_tcf_free(h);
    }
}

#[test]
fn gqf_counts() {
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(pf_gqf_new(12, 16, 1, &mut h), PfStatus::Ok);
        assert_eq!(pf_gqf_insert(h, 42, 300), PfStatus::Ok);
        let keys = [1u64, 2, 2, 3, 3, 3];
        assert_eq!(pf_gqf_bulk_count(h, keys.as_ptr(), keys.len(), 2), PfStatus::Ok);
        assert_eq!(pf_gqf_bulk_insert(h, keys.as_ptr(), 1, 1), PfStatus::Ok);
        let mut c = 0;
        for (k, want) in [(42u64, 300u64), (1, 2), (2, 2), (3, 3), (99, 0)] {
            assert_eq!(pf_gqf_count(h, k, &mut c), PfStatus::Ok);
            assert_eq!(c, want, "key {k}");
        }
        let mut found = false;
        assert_eq!(pf_gqf_delete(h, 42, 100, &mut found), PfStatus::Ok);
        assert!(found);
        pf_gqf_count(h, 42, &mut c);
        assert_eq!(c, 200);
        let mut len = 0;
        assert_eq!(pf_gqf_len(h, &mut len), PfStatus::Ok);
        assert_eq!(len, 207);
        pf_gqf_free(h);
    }
}

#[test]
fn errors_and_nulls() {
    unsafe {
        let mut h: *mut PfGqf = ptr::null_mut();
        assert_eq!(pf_gqf_new(12, 12, 0, &mut h), PfStatus::InvalidParameter);
        assert!(h.is_null());
        assert_eq!(pf_gqf_new(12, 8, 0, ptr::null_mut()), PfStatus::NullPointer);
        assert_eq!(pf_tcf_insert(ptr::null(), 1, 1), PfStatus::NullPointer);
        assert_eq!(pf_gqf_bulk_insert(ptr::null_mut(), ptr::null(), 0, 1), PfStatus::NullPointer);
        let mut g = ptr::null_mut();
        assert_eq!(pf_gqf_new(8, 8, 0, &mut g), PfStatus::Ok);
        assert_eq!(pf_gqf_bulk_insert(g, ptr::null(), 3, 1), PfStatus::NullPointer);
        assert_eq!(pf_gqf_bulk_insert(g, ptr::null(), 0, 1), PfStatus::Ok);
        assert_eq!(pf_gqf_count(g, 1, ptr::null_mut()), PfStatus::NullPointer);
        pf_gqf_free(g);
        pf_gqf_free(ptr::null_mut());
        pf_tcf_free(ptr::null_mut());
        pf_bulk_tcf_free(ptr::null_mut());
    }
}

#[test]
fn gqf_load_limit_status() {
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(pf_gqf_new(8, 8, 0, &mut h), PfStatus::Ok);
        let keys: Vec<u64> = (0..1000).collect();
        let s = pf_gqf_bulk_insert(h, keys.as_ptr(), keys.len(), 1);
        assert!(matches!(s, PfStatus::LoadLimit | PfStatus::ShiftBound), "{s:?}");
        pf_gqf_free(h);
    }
}

#[test]
fn status_strings() {
    let msg = |s: i32| unsafe { CStr::from_ptr(pf_status_str(s)) }.to_str().unwrap().to_owned();
    assert_eq!(msg(PfStatus::Ok as i32), "ok");
    assert_eq!(msg(PfStatus::Full as i32), "filter is full");
    assert_eq!(msg(-4), "unknown status");
}

#[test]
fn header_is_current() {
    let header = include_str!("../include/parfilter.h");
    for name in [
        "pf_tcf_new",
        "pf_tcf_query",
        "pf_bulk_tcf_insert",
        "pf_gqf_bulk_count",
        "pf_status_str",
        "typedef struct PfGqf PfGqf;",
        "PF_STATUS_LOAD_LIMIT = 4",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

#[test]
fn tcf_rejects_values_without_value_bits() {
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(pf_tcf_new(10, 0, &mut h), PfStatus::Ok);
        assert_eq!(pf_tcf_insert(h, 1, 1), PfStatus::InvalidParameter);
        pf_tcf_free(h);
    }
}
