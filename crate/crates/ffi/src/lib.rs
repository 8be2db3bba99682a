// SPDX-License-Identifier: Apache-2.0

//! C interface to the typed waveform library.
//!
//! Sessions are opaque handles. Every fallible call returns a [`TyvcdStatus`];
//! the message for the most recent failure on the calling thread is available
//! through [`tyvcd_last_error_message`]. Strings handed out by the library must
//! be released with [`tyvcd_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use tyvcd::link::PathError;
use tyvcd::session::{QueryError, Session, SessionConfig, SessionError};
use tyvcd::{parse_hgldd, parse_vcd_str};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TyvcdStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Link = 5,
    PathNotFound = 6,
    /// The value was produced, but the time lies past the end of the trace.
    TimeBeyondEnd = 7,
    Internal = 8,
}

/// Opaque handle to one loaded trace and its debug information.
pub struct TyvcdSession {
    inner: Session,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: TyvcdStatus, msg: impl Into<String>) -> TyvcdStatus {
    set_error(msg);
    status
}

fn error_chain(e: &dyn std::error::Error) -> String {
    let mut msg = e.to_string();
    let mut src = e.source();
    while let Some(s) = src {
        msg.push_str(&format!(": {s}"));
        src = s.source();
    }
    msg
}

fn session_status(e: &SessionError) -> TyvcdStatus {
    match e {
        SessionError::Io { .. } => TyvcdStatus::Io,
        SessionError::Vcd { .. } | SessionError::Debug { .. } => TyvcdStatus::Parse,
        SessionError::Merge(_) | SessionError::Link(_) | SessionError::NoDebug => TyvcdStatus::Link,
    }
}

fn query_status(e: &QueryError) -> TyvcdStatus {
    match e {
        QueryError::Path(PathError::PathNotFound(_))
        | QueryError::Path(PathError::IndexOutOfRange { .. })
        | QueryError::Path(PathError::NotAVariable(_))
        | QueryError::Path(PathError::Malformed(_)) => TyvcdStatus::PathNotFound,
        _ => TyvcdStatus::Internal,
    }
}

/// Runs `f`, converting panics into [`TyvcdStatus::Internal`].
fn guard(f: impl FnOnce() -> TyvcdStatus) -> TyvcdStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(TyvcdStatus::Internal, "internal panic"))
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, TyvcdStatus> {
    if p.is_null() {
        return Err(fail(TyvcdStatus::NullArgument, format!("`{name}` is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(TyvcdStatus::InvalidUtf8, format!("`{name}` is not valid UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, name: &str) -> Result<Option<&'a str>, TyvcdStatus> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, name).map(Some)
    }
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> TyvcdStatus {
    match CString::new(s) {
        Ok(c) => {
            *out = c.into_raw();
            TyvcdStatus::Ok
        }
        Err(_) => fail(TyvcdStatus::Internal, "result contains an interior NUL byte"),
    }
}

fn finish_open(result: Result<Session, SessionError>, out: *mut *mut TyvcdSession) -> TyvcdStatus {
    match result {
        Ok(inner) => {
            // SAFETY: caller checked `out` for null
            unsafe { *out = Box::into_raw(Box::new(TyvcdSession { inner })) };
            TyvcdStatus::Ok
        }
        Err(e) => fail(session_status(&e), error_chain(&e)),
    }
}

/// Opens a session from files.
///
/// `debug_paths` points at `n_debug` path strings (may be null when `n_debug` is 0).
/// `top` may be null. On success `*out` receives a handle to release with
/// [`tyvcd_session_free`].
///
/// # Safety
/// All non-null pointers must reference valid NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tyvcd_session_open(
    vcd_path: *const c_char,
    debug_paths: *const *const c_char,
    n_debug: usize,
    top: *const c_char,
    allow_fallback: bool,
    out: *mut *mut TyvcdSession,
) -> TyvcdStatus {
    guard(|| {
        if out.is_null() {
            return fail(TyvcdStatus::NullArgument, "`out` is null");
        }
        *out = ptr::null_mut();
        let vcd = match str_arg(vcd_path, "vcd_path") {
            Ok(s) => s,
            Err(st) => return st,
        };
        if n_debug > 0 && debug_paths.is_null() {
            return fail(TyvcdStatus::NullArgument, "`debug_paths` is null");
        }
        let mut debug = Vec::with_capacity(n_debug);
        for i in 0..n_debug {
            match str_arg(*debug_paths.add(i), "debug_paths[i]") {
                Ok(s) => debug.push(PathBuf::from(s)),
                Err(st) => return st,
            }
        }
        let top = match opt_str_arg(top, "top") {
            Ok(t) => t.map(str::to_string),
            Err(st) => return st,
        };
        let config = SessionConfig {
            vcd_path: PathBuf::from(vcd),
            debug_paths: debug,
            top_override: top,
            fallback_allowed: allow_fallback,
            serve_port: None,
        };
        finish_open(Session::load(&config), out)
    })
}

/// Opens a session from in-memory VCD text and an optional debug JSON document.
///
/// # Safety
/// All non-null pointers must reference valid NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tyvcd_session_open_text(
    vcd_text: *const c_char,
    debug_json: *const c_char,
    allow_fallback: bool,
    out: *mut *mut TyvcdSession,
) -> TyvcdStatus {
    guard(|| {
        if out.is_null() {
            return fail(TyvcdStatus::NullArgument, "`out` is null");
        }
        *out = ptr::null_mut();
        let vcd = match str_arg(vcd_text, "vcd_text") {
            Ok(s) => s,
            Err(st) => return st,
        };
        let debug = match opt_str_arg(debug_json, "debug_json") {
            Ok(d) => d,
            Err(st) => return st,
        };
        let trace = match parse_vcd_str(vcd) {
            Ok(t) => t,
            Err(e) => return fail(TyvcdStatus::Parse, error_chain(&e)),
        };
        let docs = match debug.map(parse_hgldd).transpose() {
            Ok(d) => d.into_iter().collect(),
            Err(e) => return fail(TyvcdStatus::Parse, error_chain(&e)),
        };
        finish_open(Session::from_parts(docs, trace, None, allow_fallback), out)
    })
}

/// Releases a session. Null is ignored.
///
/// # Safety
/// `session` must come from an open call and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn tyvcd_session_free(session: *mut TyvcdSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Formats the typed value of `path` at `time` into `*out`.
///
/// Returns [`TyvcdStatus::TimeBeyondEnd`] with `*out` still set when `time`
/// lies past the end of the trace.
///
/// # Safety
/// `session` must be a live handle, `path` a valid string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tyvcd_session_value(
    session: *const TyvcdSession,
    path: *const c_char,
    time: u64,
    out: *mut *mut c_char,
) -> TyvcdStatus {
    guard(|| {
        if session.is_null() || out.is_null() {
            return fail(TyvcdStatus::NullArgument, "`session` or `out` is null");
        }
        *out = ptr::null_mut();
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(st) => return st,
        };
        match (*session).inner.value(path, time) {
            Ok(v) => {
                let st = put_string(out, v.formatted);
                if st == TyvcdStatus::Ok && v.beyond_end {
                    set_error(format!("time {time} is beyond the end of the trace"));
                    return TyvcdStatus::TimeBeyondEnd;
                }
                st
            }
            Err(e) => fail(query_status(&e), e.to_string()),
        }
    })
}

/// Writes the indented `name: label` hierarchy into `*out`.
///
/// # Safety
/// `session` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tyvcd_session_tree(session: *const TyvcdSession, out: *mut *mut c_char) -> TyvcdStatus {
    guard(|| {
        if session.is_null() || out.is_null() {
            return fail(TyvcdStatus::NullArgument, "`session` or `out` is null");
        }
        *out = ptr::null_mut();
        put_string(out, (*session).inner.tree_text())
    })
}

/// Writes the tab-separated typed change records into `*out`.
///
/// # Safety
/// `session` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tyvcd_session_export(session: *const TyvcdSession, out: *mut *mut c_char) -> TyvcdStatus {
    guard(|| {
        if session.is_null() || out.is_null() {
            return fail(TyvcdStatus::NullArgument, "`session` or `out` is null");
        }
        *out = ptr::null_mut();
        match (*session).inner.export_tsv() {
            Ok(s) => put_string(out, s),
            Err(e) => fail(TyvcdStatus::Internal, e.to_string()),
        }
    })
}

/// # Safety
/// `session` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tyvcd_session_end_time(session: *const TyvcdSession, out: *mut u64) -> TyvcdStatus {
    guard(|| {
        if session.is_null() || out.is_null() {
            return fail(TyvcdStatus::NullArgument, "`session` or `out` is null");
        }
        *out = (*session).inner.trace().end_time();
        TyvcdStatus::Ok
    })
}

/// Number of diagnostics collected while loading; 0 for a null handle.
///
/// # Safety
/// `session` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tyvcd_session_diagnostic_count(session: *const TyvcdSession) -> usize {
    if session.is_null() {
        0
    } else {
        (*session).inner.diagnostics.len()
    }
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn tyvcd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the most recent failure on this thread, or null.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tyvcd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}
