use std::ffi::{c_char, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use surflab_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { surflab_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf.iter().take(n.min(255)).map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn fuchsian(p: usize) -> *mut SurflabRepresentation {
    let mut rep = ptr::null_mut();
    assert_eq!(unsafe { surflab_representation_fuchsian(p, &mut rep) }, SurflabStatus::Ok);
    rep
}

#[test]
fn representation_round_trip() {
    let rep = fuchsian(2);
    unsafe {
        assert_eq!(surflab_representation_dim(rep), 3);
        let mut r = f64::NAN;
        assert_eq!(surflab_representation_relator_residual(rep, &mut r), SurflabStatus::Ok);
        assert!(r < 1e-9);

        let w = CString::new("abAB").unwrap();
        let mut m = [0.0; 9];
        assert_eq!(surflab_representation_evaluate(rep, w.as_ptr(), m.as_mut_ptr(), 9), SurflabStatus::Ok);
        assert!(m.iter().all(|x| x.is_finite()));

        let e = CString::new("").unwrap();
        let mut id = [0.0; 9];
        assert_eq!(surflab_representation_evaluate(rep, e.as_ptr(), id.as_mut_ptr(), 9), SurflabStatus::Ok);
        assert_eq!(id, [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        surflab_representation_free(rep);
    }
}

#[test]
fn error_codes_and_messages() {
    unsafe {
        let mut rep = ptr::null_mut();
        assert_eq!(surflab_representation_fuchsian(1, &mut rep), SurflabStatus::InvalidInput);
        assert!(rep.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(surflab_representation_fuchsian(2, ptr::null_mut()), SurflabStatus::NullPointer);
        assert!(last_error().contains("null"));

        let rep = fuchsian(2);
        let w = CString::new("ab").unwrap();
        let mut small = [0.0; 4];
        assert_eq!(
            surflab_representation_evaluate(rep, w.as_ptr(), small.as_mut_ptr(), 4),
            SurflabStatus::BufferTooSmall
        );
        assert!(last_error().contains("9"));

        let bad = CString::new("ab?").unwrap();
        let mut m = [0.0; 9];
        assert_eq!(surflab_representation_evaluate(rep, bad.as_ptr(), m.as_mut_ptr(), 9), SurflabStatus::InvalidInput);

        let mut r = 0.0;
        assert_eq!(surflab_representation_relator_residual(ptr::null(), &mut r), SurflabStatus::NullPointer);
        assert_eq!(surflab_representation_dim(ptr::null()), 0);
        surflab_representation_free(rep);
        surflab_representation_free(ptr::null_mut());
    }
}

#[test]
fn margulis_invariant_of_coboundary_vanishes() {
    let rep = fuchsian(2);
    unsafe {
        let v = [0.3, -1.0, 2.0];
        let mut c = ptr::null_mut();
        assert_eq!(surflab_cocycle_coboundary(rep, v.as_ptr(), 3, &mut c), SurflabStatus::Ok);
        let w = CString::new("aBcD").unwrap();
        let mut alpha = f64::NAN;
        assert_eq!(surflab_margulis_invariant(rep, c, w.as_ptr(), &mut alpha), SurflabStatus::Ok);
        assert!(alpha.abs() < 1e-9, "{alpha}");

        let mut wrong = ptr::null_mut();
        assert_eq!(surflab_cocycle_coboundary(rep, v.as_ptr(), 2, &mut wrong), SurflabStatus::InvalidInput);
        surflab_cocycle_free(c);
        surflab_representation_free(rep);
    }
}

#[test]
fn spectrum_through_handles() {
    let rep = fuchsian(2);
    unsafe {
        let mut spec = ptr::null_mut();
        assert_eq!(surflab_spectrum_new(rep, 8.0, 0.0, &mut spec), SurflabStatus::Ok);
        let n = surflab_spectrum_len(spec);
        assert!(n > 100);

        let mut first = SurflabClass::default();
        assert_eq!(surflab_spectrum_class(spec, 0, &mut first), SurflabStatus::Ok);
        let systole = 2.0 * (1.0 + 0.5 * 2f64.sqrt()).acosh();
        assert!((first.l_hyp - systole).abs() < 1e-9);
        assert_eq!(surflab_spectrum_class(spec, n, &mut first), SurflabStatus::InvalidInput);

        let mut e = SurflabEntropy::default();
        assert_eq!(surflab_spectrum_entropy(spec, SurflabLength::LastRoot, 4.0, 8.0, &mut e), SurflabStatus::Ok);
        assert!(e.estimate > 0.7 && e.estimate < 1.3, "{}", e.estimate);

        let mut c = ptr::null_mut();
        assert_eq!(surflab_cocycle_random(rep, 7, &mut c), SurflabStatus::Ok);
        let mut alphas = vec![0.0; n];
        assert_eq!(surflab_spectrum_alphas(spec, c, alphas.as_mut_ptr(), n), SurflabStatus::Ok);
        let mut avg = SurflabAverage::default();
        assert_eq!(surflab_spectrum_bm_average(spec, c, 4.0, 8.0, 1.0, &mut avg), SurflabStatus::Ok);
        assert!(avg.count > 0 && avg.value.is_finite());

        surflab_cocycle_free(c);
        surflab_spectrum_free(spec);
        surflab_representation_free(rep);
    }
}

/// Compiles a C program against the generated header and the static
/// library. Skipped when no C compiler or archive is available.
#[test]
fn c_program_links_against_header() {
    let header_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    assert!(header_dir.join("surflab.h").exists());
    let exe = std::env::current_exe().unwrap();
    let target_dir = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    let archive = target_dir.join("libsurflab_ffi.a");
    if !archive.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no cc or {}", archive.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "surflab.h"
int main(void) {
    SurflabRepresentation *rep = NULL;
    if (surflab_representation_fuchsian(3, &rep) != SURFLAB_STATUS_OK) return 1;
    double r = 1.0;
    if (surflab_representation_relator_residual(rep, &r) != SURFLAB_STATUS_OK) return 2;
    if (surflab_representation_fuchsian(0, NULL) != SURFLAB_STATUS_NULL_POINTER) return 3;
    char msg[128];
    if (surflab_last_error(msg, sizeof msg) == 0) return 4;
    printf("%zu %.3e\n", surflab_representation_dim(rep), r);
    surflab_representation_free(rep);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("main");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&header_dir)
        .arg(&archive)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("5 "));
}
