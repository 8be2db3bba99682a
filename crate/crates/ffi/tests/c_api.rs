// SPDX-License-Identifier: Apache-2.0

use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use tyvcd::fixtures::{listing1_fixture, flatten_design, Strategy};
use tyvcd_ffi::*;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(s: *mut c_char) -> String {
    let out = CStr::from_ptr(s).to_str().unwrap().to_string();
    tyvcd_string_free(s);
    out
}

unsafe fn last_error() -> String {
    let p = tyvcd_last_error_message();
    assert!(!p.is_null());
    CStr::from_ptr(p).to_string_lossy().into_owned()
}

fn open_listing1() -> *mut TyvcdSession {
    let f = flatten_design(&listing1_fixture(), Strategy::Leaf).unwrap();
    let vcd = cstr(&f.trace.to_vcd_string());
    let debug = cstr(&f.debug.to_json_string());
    let mut s = ptr::null_mut();
    let st = unsafe { tyvcd_session_open_text(vcd.as_ptr(), debug.as_ptr(), false, &mut s) };
    assert_eq!(st, TyvcdStatus::Ok);
    assert!(!s.is_null());
    s
}

#[test]
fn value_tree_and_export_through_handles() {
    let f = flatten_design(&listing1_fixture(), Strategy::Leaf).unwrap();
    let s = open_listing1();
    unsafe {
        let mut out = ptr::null_mut();
        let path = cstr("TopCircuit.mod1.state");
        assert_eq!(tyvcd_session_value(s, path.as_ptr(), 40, &mut out), TyvcdStatus::Ok);
        let expected = tyvcd::format_value(f.expected.get("TopCircuit.mod1.state", 40).unwrap());
        assert_eq!(take(out), expected);

        assert_eq!(tyvcd_session_tree(s, &mut out), TyvcdStatus::Ok);
        assert!(take(out).contains("    state: Reg[MyState]\n"));

        assert_eq!(tyvcd_session_export(s, &mut out), TyvcdStatus::Ok);
        assert_eq!(take(out), f.expected.change_points_tsv());

        let mut end = 0u64;
        assert_eq!(tyvcd_session_end_time(s, &mut end), TyvcdStatus::Ok);
        assert_eq!(end, f.trace.end_time());
        assert_eq!(tyvcd_session_diagnostic_count(s), 0);
        tyvcd_session_free(s);
    }
}

#[test]
fn error_codes_and_messages() {
    let s = open_listing1();
    unsafe {
        let mut out = ptr::null_mut();
        let bad = cstr("TopCircuit.mod9");
        assert_eq!(tyvcd_session_value(s, bad.as_ptr(), 0, &mut out), TyvcdStatus::PathNotFound);
        assert!(out.is_null());
        assert!(last_error().contains("TopCircuit"));

        let path = cstr("TopCircuit.mod1.state");
        assert_eq!(tyvcd_session_value(s, path.as_ptr(), 1 << 40, &mut out), TyvcdStatus::TimeBeyondEnd);
        assert!(!out.is_null());
        take(out);

        assert_eq!(tyvcd_session_value(ptr::null(), path.as_ptr(), 0, &mut out), TyvcdStatus::NullArgument);
        assert_eq!(tyvcd_session_value(s, ptr::null(), 0, &mut out), TyvcdStatus::NullArgument);
        tyvcd_session_free(s);
        tyvcd_session_free(ptr::null_mut());
        tyvcd_string_free(ptr::null_mut());

        let mut h = ptr::null_mut();
        let junk = cstr("$var wire 1 ! a $end\n#0 1!\n");
        assert_eq!(tyvcd_session_open_text(junk.as_ptr(), ptr::null(), true, &mut h), TyvcdStatus::Parse);
        assert!(h.is_null());

        let vcd = cstr("$scope module t $end $var wire 1 ! a $end $upscope $end $enddefinitions $end\n#0 1!\n");
        assert_eq!(tyvcd_session_open_text(vcd.as_ptr(), ptr::null(), false, &mut h), TyvcdStatus::Link);
        assert_eq!(tyvcd_session_open_text(vcd.as_ptr(), ptr::null(), true, &mut h), TyvcdStatus::Ok);
        let a = cstr("t.a");
        assert_eq!(tyvcd_session_value(h, a.as_ptr(), 0, &mut out), TyvcdStatus::Ok);
        assert_eq!(take(out), "1");
        tyvcd_session_free(h);

        let missing = cstr("/nonexistent/trace.vcd");
        assert_eq!(
            tyvcd_session_open(missing.as_ptr(), ptr::null(), 0, ptr::null(), true, &mut h),
            TyvcdStatus::Io
        );
    }
}

#[test]
fn open_from_files_with_split_debug() {
    let dir = tempfile::tempdir().unwrap();
    let f = flatten_design(&listing1_fixture(), Strategy::Packed).unwrap();
    f.write_to(dir.path()).unwrap();
    let parts: Vec<CString> = f
        .split_debug()
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let p = dir.path().join(format!("part{i}.json"));
            std::fs::write(&p, d.to_json_string()).unwrap();
            cstr(p.to_str().unwrap())
        })
        .collect();
    let ptrs: Vec<*const c_char> = parts.iter().map(|c| c.as_ptr()).collect();
    let vcd = cstr(dir.path().join("listing1.vcd").to_str().unwrap());
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(
            tyvcd_session_open(vcd.as_ptr(), ptrs.as_ptr(), ptrs.len(), ptr::null(), false, &mut s),
            TyvcdStatus::Ok
        );
        let mut out = ptr::null_mut();
        assert_eq!(tyvcd_session_export(s, &mut out), TyvcdStatus::Ok);
        assert_eq!(take(out), f.expected.change_points_tsv());
        tyvcd_session_free(s);
    }
}

#[test]
fn header_declares_every_export() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/tyvcd.h")).unwrap();
    let source = std::fs::read_to_string(dir.join("src/lib.rs")).unwrap();
    let mut count = 0;
    for line in source.lines() {
        if let Some(rest) = line.split("extern \"C\" fn ").nth(1) {
            let name = rest.split('(').next().unwrap();
            assert!(header.contains(&format!("{name}(")), "{name} missing from header");
            count += 1;
        }
    }
    assert!(count >= 9);
    assert!(header.contains("typedef struct TyvcdSession TyvcdSession;"));
}

#[test]
fn header_compiles_as_c() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let Ok(status) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(dir.join("include/tyvcd.h"))
        .status()
    else {
        eprintln!("no C compiler available; skipping");
        return;
    };
    assert!(status.success());
}
