// Copyright 2026 The plancache Authors
// SPDX-License-Identifier: Apache-2.0

//! C ABI over the plan cache and the episode runner.
//!
//! Handles are opaque pointers created by `pc_*_new`/`pc_*_from_*` and
//! released by the matching `pc_*_free`. Every fallible call returns a
//! [`PcStatus`]; the message of the last failure on the calling thread is
//! available through [`pc_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use plancache::cache::{PlanCache, Selection};
use plancache::env::Scenario;
use plancache::plan::PlanKind;
use plancache::planner::LatencyDist;
use plancache::report::EpisodeReport;
use plancache::state::{FieldSchema, StateVector};
use plancache::strategies::{run_episode, StrategyConfig, StrategyKind};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Parse = 4,
    SchemaMismatch = 5,
    Panic = 6,
}

/// Opaque plan cache handle.
pub struct PcCache {
    inner: PlanCache,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: PcStatus, msg: impl Into<String>) -> PcStatus {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
    status
}

fn guard(f: impl FnOnce() -> PcStatus) -> PcStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(PcStatus::Panic, "internal panic"))
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, PcStatus> {
    if p.is_null() {
        return Err(fail(PcStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(PcStatus::InvalidUtf8, "string argument is not UTF-8"))
}

fn kind(code: u8) -> Result<PlanKind, PcStatus> {
    PlanKind::from_code(code).ok_or_else(|| fail(PcStatus::InvalidArgument, format!("unknown plan code {code}")))
}

unsafe fn cache_mut<'a>(c: *mut PcCache) -> Result<&'a mut PcCache, PcStatus> {
    c.as_mut().ok_or_else(|| fail(PcStatus::NullPointer, "null cache handle"))
}

unsafe fn state(c: &PcCache, values: *const u32, len: usize) -> Result<StateVector, PcStatus> {
    if values.is_null() && len > 0 {
        return Err(fail(PcStatus::NullPointer, "null state values"));
    }
    let v = if len == 0 { Vec::new() } else { std::slice::from_raw_parts(values, len).to_vec() };
    StateVector::new(Arc::clone(c.inner.schema()), v).map_err(|e| fail(PcStatus::SchemaMismatch, e.to_string()))
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `cap`). Returns the full message length.
///
/// # Safety
/// `buf` must be valid for `cap` bytes or null.
#[no_mangle]
pub unsafe extern "C" fn pc_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Static name of a plan verb code, or null for an unknown code.
#[no_mangle]
pub extern "C" fn pc_plan_name(code: u8) -> *const c_char {
    const NAMES: [&CStr; 6] = [c"Explore", c"GoTo", c"GoGrasp", c"PutInto", c"Transport", c"Wait"];
    NAMES.get(code as usize).map_or(ptr::null(), |n| n.as_ptr())
}

/// Creates an empty cache over a schema such as `"items:4,has_container:1"`.
///
/// # Safety
/// `schema` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pc_cache_new(schema: *const c_char, out: *mut *mut PcCache) -> PcStatus {
    guard(|| {
        if out.is_null() {
            return fail(PcStatus::NullPointer, "null output pointer");
        }
        let s = tri!(text(schema));
        let schema: FieldSchema = tri!(s.parse().map_err(|e: plancache::state::SchemaError| fail(PcStatus::Parse, e.to_string())));
        *out = Box::into_raw(Box::new(PcCache { inner: PlanCache::new(Arc::new(schema)) }));
        PcStatus::Ok
    })
}

/// Parses a cache from its text form.
///
/// # Safety
/// `src` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pc_cache_from_text(src: *const c_char, out: *mut *mut PcCache) -> PcStatus {
    guard(|| {
        if out.is_null() {
            return fail(PcStatus::NullPointer, "null output pointer");
        }
        let s = tri!(text(src));
        let inner = tri!(PlanCache::deserialize(s).map_err(|e| fail(PcStatus::Parse, e.to_string())));
        *out = Box::into_raw(Box::new(PcCache { inner }));
        PcStatus::Ok
    })
}

/// Releases a cache handle. Null is ignored.
///
/// # Safety
/// `c` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pc_cache_free(c: *mut PcCache) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Number of stored transitions, or 0 for a null handle.
///
/// # Safety
/// `c` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pc_cache_len(c: *const PcCache) -> usize {
    c.as_ref().map_or(0, |c| c.inner.len())
}

/// Memory footprint in bytes under the cache's size model.
///
/// # Safety
/// `c` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn pc_cache_size_bytes(c: *const PcCache) -> usize {
    c.as_ref().map_or(0, |c| c.inner.size_bytes())
}

/// Records one occurrence of `from -> to` at the given state.
///
/// # Safety
/// `c` must be a live handle and `values` valid for `len` reads.
#[no_mangle]
pub unsafe extern "C" fn pc_cache_reinforce(
    c: *mut PcCache,
    from: u8,
    to: u8,
    values: *const u32,
    len: usize,
) -> PcStatus {
    guard(|| {
        let c = tri!(cache_mut(c));
        let (from, to) = (tri!(kind(from)), tri!(kind(to)));
        let st = tri!(state(c, values, len));
        tri!(c.inner.reinforce(from, to, &st).map_err(|e| fail(PcStatus::SchemaMismatch, e.to_string())));
        PcStatus::Ok
    })
}

/// Decrements a mispredicted transition.
///
/// # Safety
/// `c` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pc_cache_penalize(c: *mut PcCache, from: u8, wrong_to: u8) -> PcStatus {
    guard(|| {
        let c = tri!(cache_mut(c));
        c.inner.penalize(tri!(kind(from)), tri!(kind(wrong_to)));
        PcStatus::Ok
    })
}

/// Selects the next verb after `prev`. On a hit `*hit` is 1 and `*plan`,
/// `*score_num`, `*score_den` describe the winner; on a miss `*hit` is 0.
///
/// # Safety
/// `c` must be a live handle, `values` valid for `len` reads, and every
/// output pointer valid.
#[no_mangle]
pub unsafe extern "C" fn pc_cache_select(
    c: *mut PcCache,
    prev: u8,
    values: *const u32,
    len: usize,
    hit: *mut u8,
    plan: *mut u8,
    score_num: *mut u64,
    score_den: *mut u64,
) -> PcStatus {
    guard(|| {
        if hit.is_null() || plan.is_null() || score_num.is_null() || score_den.is_null() {
            return fail(PcStatus::NullPointer, "null output pointer");
        }
        let c = tri!(cache_mut(c));
        let prev = tri!(kind(prev));
        let st = tri!(state(c, values, len));
        match tri!(c.inner.select(prev, &st).map_err(|e| fail(PcStatus::SchemaMismatch, e.to_string()))) {
            Selection::Hit { plan: p, score } => {
                *hit = 1;
                *plan = p.code();
                *score_num = score.numer();
                *score_den = score.denom();
            }
            Selection::Miss => {
                *hit = 0;
            }
        }
        PcStatus::Ok
    })
}

fn to_c_string(s: String, out: *mut *mut c_char) -> PcStatus {
    match CString::new(s) {
        Ok(cs) => {
            // SAFETY: callers check `out` before building the string.
            unsafe { *out = cs.into_raw() };
            PcStatus::Ok
        }
        Err(_) => fail(PcStatus::InvalidArgument, "output contains a NUL byte"),
    }
}

/// Serializes the cache; the result is released with [`pc_string_free`].
///
/// # Safety
/// `c` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pc_cache_to_text(c: *const PcCache, out: *mut *mut c_char) -> PcStatus {
    guard(|| {
        if out.is_null() {
            return fail(PcStatus::NullPointer, "null output pointer");
        }
        let Some(c) = c.as_ref() else { return fail(PcStatus::NullPointer, "null cache handle") };
        to_c_string(c.inner.serialize(), out)
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Runs one episode and returns its report as JSON.
///
/// `strategy` is one of `sync`, `parallel`, `speculative`, `agenticcache`.
/// `cache_text` may be null; otherwise it warm-starts the agenticcache
/// strategy. When `trace_out` is non-null it receives the JSONL trace.
///
/// # Safety
/// String arguments must be NUL-terminated (or null where allowed) and
/// output pointers valid or null where allowed.
#[no_mangle]
pub unsafe extern "C" fn pc_run_episode(
    scenario_json: *const c_char,
    strategy: *const c_char,
    seed: u64,
    latency_ticks: u32,
    error_rate: f64,
    cache_text: *const c_char,
    report_out: *mut *mut c_char,
    trace_out: *mut *mut c_char,
) -> PcStatus {
    guard(|| {
        if report_out.is_null() {
            return fail(PcStatus::NullPointer, "null report pointer");
        }
        let scenario = tri!(Scenario::from_json(tri!(text(scenario_json))).map_err(|e| fail(PcStatus::Parse, e.to_string())));
        let kind: StrategyKind = tri!(tri!(text(strategy)).parse().map_err(|e: String| fail(PcStatus::InvalidArgument, e)));
        let cache = if cache_text.is_null() {
            None
        } else {
            Some(tri!(PlanCache::deserialize(tri!(text(cache_text))).map_err(|e| fail(PcStatus::Parse, e.to_string()))))
        };
        let cfg = StrategyConfig {
            kind,
            latency: LatencyDist::Const(latency_ticks),
            error_rate,
            cache,
            ..StrategyConfig::default()
        };
        let trace = tri!(run_episode(&scenario, seed, &cfg).map_err(|e| fail(PcStatus::InvalidArgument, e.to_string())));
        let report = EpisodeReport::from_trace(&trace);
        let json = serde_json::to_string(&report).expect("report serializes");
        if !trace_out.is_null() {
            tri!(match to_c_string(trace.to_jsonl(), trace_out) {
                PcStatus::Ok => Ok(()),
                s => Err(s),
            });
        }
        to_c_string(json, report_out)
    })
}
