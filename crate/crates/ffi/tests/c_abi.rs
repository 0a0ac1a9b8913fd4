use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use crowdsense_ffi::*;

const FIX: &str = r#"{"tasks":[{"id":0,"value":8},{"id":1,"value":10},{"id":2,"value":8},{"id":3,"value":9},{"id":4,"value":9},{"id":5,"value":6}],"users":[{"id":1,"tasks":[1,2,3,5],"bid":8},{"id":2,"tasks":[0,1,5],"bid":6},{"id":3,"tasks":[2,4,5],"bid":6},{"id":4,"tasks":[4],"bid":7},{"id":5,"tasks":[3],"bid":2}]}"#;

fn load(json: &str) -> (CsStatus, *mut CsInstance) {
    let text = CString::new(json).unwrap();
    let mut inst = ptr::null_mut();
    let status = unsafe { cs_instance_from_json(text.as_ptr(), &mut inst) };
    (status, inst)
}

fn last_error() -> String {
    let p = cs_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn smart_and_msensing_through_the_abi() {
    let (status, inst) = load(FIX);
    assert_eq!(status, CsStatus::Ok);
    unsafe {
        assert_eq!(cs_instance_user_count(inst), 5);
        assert_eq!(cs_instance_task_count(inst), 6);

        let mut out = ptr::null_mut();
        assert_eq!(cs_run_smart(inst, &mut out), CsStatus::Ok);
        assert_eq!(cs_outcome_utility(out), 27);
        assert_eq!(cs_outcome_winner_count(out), 3);
        let (mut ids, mut pay) = ([0u32; 3], [0i64; 3]);
        assert_eq!(
            cs_outcome_winners(out, ids.as_mut_ptr(), pay.as_mut_ptr(), 3),
            CsStatus::Ok
        );
        assert_eq!(ids, [2, 3, 5]);
        assert_eq!(pay, [8, 7, 8]);
        assert_eq!(cs_outcome_payment(out, 1), 0);
        assert_eq!(
            cs_outcome_winners(out, ids.as_mut_ptr(), ptr::null_mut(), 2),
            CsStatus::BufferTooSmall
        );

        let mut json = ptr::null_mut();
        assert_eq!(cs_outcome_to_json(out, &mut json), CsStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        cs_string_free(json);
        assert!(text.contains("\"utility\":27"), "{text}");
        cs_outcome_free(out);

        let mut out = ptr::null_mut();
        assert_eq!(cs_run_msensing(inst, &mut out), CsStatus::Ok);
        assert_eq!(cs_outcome_utility(out), 20);
        cs_outcome_free(out);
        cs_instance_free(inst);
    }
}

#[test]
fn online_through_the_abi() {
    let (_, inst) = load(FIX);
    let order = [4u32, 5, 1, 3, 2];
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(
            cs_run_online(inst, order.as_ptr(), 5, 0.2, &mut out),
            CsStatus::Ok
        );
        assert_eq!(cs_outcome_winner_count(out), 4);
        assert_eq!(cs_outcome_payment(out, 1), 24);
        cs_outcome_free(out);

        let mut out = ptr::null_mut();
        assert_eq!(
            cs_run_online(inst, order.as_ptr(), 3, 0.2, &mut out),
            CsStatus::InvalidArgument
        );
        assert!(out.is_null());
        assert_eq!(
            cs_run_online(inst, order.as_ptr(), 5, 1.0, &mut out),
            CsStatus::InvalidArgument
        );
        assert!(last_error().contains("observe"), "{}", last_error());
        assert_eq!(
            cs_run_online(inst, ptr::null(), 5, 0.2, &mut out),
            CsStatus::NullPointer
        );
        cs_instance_free(inst);
    }
}

#[test]
fn errors_are_reported() {
    let (status, inst) =
        load(r#"{"tasks":[{"id":0,"value":3}],"users":[{"id":1,"tasks":[0],"bid":0}]}"#);
    assert_eq!(status, CsStatus::InvalidInstance);
    assert!(inst.is_null());
    assert!(last_error().contains("users[0].bid"), "{}", last_error());

    let mut inst = ptr::null_mut();
    assert_eq!(
        unsafe { cs_instance_from_json(ptr::null(), &mut inst) },
        CsStatus::NullPointer
    );
    let bad = [0xffu8, 0];
    assert_eq!(
        unsafe { cs_instance_from_json(bad.as_ptr().cast(), &mut inst) },
        CsStatus::InvalidUtf8
    );
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(cs_run_smart(ptr::null(), &mut out), CsStatus::NullPointer);
        assert_eq!(cs_outcome_utility(ptr::null()), 0);
        assert_eq!(cs_instance_user_count(ptr::null()), 0);
        cs_instance_free(ptr::null_mut());
        cs_outcome_free(ptr::null_mut());
        cs_string_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_every_export() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/crowdsense.h")).unwrap();
    for name in [
        "cs_last_error",
        "cs_instance_from_json",
        "cs_instance_free",
        "cs_instance_user_count",
        "cs_instance_task_count",
        "cs_run_smart",
        "cs_run_msensing",
        "cs_run_online",
        "cs_outcome_free",
        "cs_outcome_utility",
        "cs_outcome_winner_count",
        "cs_outcome_winners",
        "cs_outcome_payment",
        "cs_outcome_to_json",
        "cs_string_free",
    ] {
        assert!(
            header.contains(&format!("{name}(")),
            "{name} missing from header"
        );
    }
}

/// Compiles tests/c/smoke.c against the static library when a C compiler
/// is on PATH.
#[test]
fn c_program_links_and_runs() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let deps = std::env::current_exe().unwrap();
    let profile_dir = deps.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libcrowdsense_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no static library or C compiler");
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let exe = tmp.path().join("smoke");
    let status = Command::new("cc")
        .arg(dir.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status);
    let stdout = String::from_utf8(run.stdout).unwrap();
    assert_eq!(stdout, "utility 27 winners 2:8 3:7 5:8\nerror set\n");
}
