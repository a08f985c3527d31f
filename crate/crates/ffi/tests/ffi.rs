use std::ffi::CString;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use ck_lab_ffi::*;

fn phase(name: &str, n: usize) -> *mut CkPhase {
    let name = CString::new(name).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { ck_phase_builtin(name.as_ptr(), n, &mut p) }, CkStatus::Ok);
    p
}

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let len = unsafe { ck_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..len.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn bourgain_verdicts_through_the_c_abi() {
    let tan = phase("tan", 3);
    let worst = phase("worst", 3);
    assert_eq!(unsafe { ck_phase_dim(tan) }, 3);
    let mut r = CkConditionReport::default();
    let x = [0.01, -0.02];
    let xi = [0.05, 0.1];
    assert_eq!(
        unsafe { ck_check_bourgain(tan, x.as_ptr(), 1.0, xi.as_ptr(), 1e-8, &mut r) },
        CkStatus::Ok
    );
    assert!(r.holds && r.residual < 1e-10);
    assert_eq!(
        unsafe { ck_check_bourgain(worst, x.as_ptr(), 0.05, xi.as_ptr(), 1e-8, &mut r) },
        CkStatus::Ok
    );
    assert!(!r.holds && r.residual > 0.3);
    let mut res = 1.0;
    assert_eq!(
        unsafe { ck_check_abc(tan, x.as_ptr(), 1.0, xi.as_ptr(), &mut res) },
        CkStatus::Ok
    );
    assert!(res < 1e-12);
    assert_eq!(
        unsafe { ck_check_abc(worst, x.as_ptr(), 0.0, xi.as_ptr(), &mut res) },
        CkStatus::InvalidArgument
    );
    unsafe {
        ck_phase_free(tan);
        ck_phase_free(worst);
    }
}

#[test]
fn errors_are_codes_and_messages() {
    let name = CString::new("nope").unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { ck_phase_builtin(name.as_ptr(), 3, &mut p) }, CkStatus::InvalidArgument);
    assert!(p.is_null());
    assert!(last_error().contains("nope"));
    assert_eq!(unsafe { ck_phase_builtin(ptr::null(), 3, &mut p) }, CkStatus::NullPointer);
    let tan = phase("tan", 3);
    let far = [5.0, 5.0];
    let mut r = CkConditionReport::default();
    assert_eq!(
        unsafe { ck_check_bourgain(tan, far.as_ptr(), 1.0, far.as_ptr(), 1e-8, &mut r) },
        CkStatus::Domain
    );
    assert_eq!(
        unsafe { ck_check_bourgain(tan, ptr::null(), 1.0, far.as_ptr(), 1e-8, &mut r) },
        CkStatus::NullPointer
    );
    unsafe { ck_phase_free(tan) };
    assert_eq!(unsafe { ck_phase_dim(ptr::null()) }, 0);
}

#[test]
fn trace_and_straightening_order() {
    let rest = phase("rest", 3);
    let grid = [-0.4, 0.0, 0.4];
    let mut pts = [0.0; 6];
    let xi = [0.1, -0.2];
    let v = [0.05, 0.0];
    assert_eq!(
        unsafe { ck_trace_curve(rest, xi.as_ptr(), v.as_ptr(), grid.as_ptr(), 3, pts.as_mut_ptr()) },
        CkStatus::Ok
    );
    for (k, &t) in grid.iter().enumerate() {
        for j in 0..2 {
            assert!((pts[2 * k + j] - (v[j] - t * xi[j])).abs() < 1e-12);
        }
    }
    let radii = [0.125, 0.0625, 0.03125];
    let (mut slope, mut exact) = (0.0, false);
    let zero = [0.0, 0.0];
    assert_eq!(
        unsafe {
            ck_straightening_order(rest, zero.as_ptr(), zero.as_ptr(), radii.as_ptr(), 3, 2, 1, &mut slope, &mut exact)
        },
        CkStatus::Ok
    );
    assert!(exact && slope.is_nan());
    unsafe { ck_phase_free(rest) };
}

#[test]
fn coniness_and_families() {
    let p = [1e-3, 1e-3];
    let mut c = CkConiness::default();
    assert_eq!(unsafe { ck_tan_coniness(3, 1.05, p.as_ptr(), &mut c) }, CkStatus::Ok);
    assert!(c.det > 0.0 && c.rel_err < 0.1);
    assert_eq!(unsafe { ck_tan_coniness(3, 1.5, p.as_ptr(), &mut c) }, CkStatus::InvalidArgument);

    let rest = phase("rest", 3);
    let delta = 1.0 / 32.0;
    let mut fam = ptr::null_mut();
    assert_eq!(unsafe { ck_family_new(rest, delta, &mut fam) }, CkStatus::Ok);
    let z = [0.0, 0.0];
    assert_eq!(unsafe { ck_family_push(fam, z.as_ptr(), z.as_ptr(), -0.45, 0.45) }, CkStatus::Ok);
    assert_eq!(unsafe { ck_family_len(fam) }, 1);
    let mut vol = 0.0;
    assert_eq!(unsafe { ck_family_union_volume(fam, 128, &mut vol) }, CkStatus::Ok);
    let exact = std::f64::consts::PI * delta * delta * 0.9;
    assert!((vol - exact).abs() < 0.2 * exact, "{vol} vs {exact}");
    assert_eq!(unsafe { ck_family_union_volume(fam, 4, &mut vol) }, CkStatus::Geometry);
    unsafe { ck_family_free(fam) };

    let mut sticky = ptr::null_mut();
    assert_eq!(unsafe { ck_family_sticky(rest, 0.25, 0, 1, &mut sticky) }, CkStatus::Ok);
    assert_eq!(unsafe { ck_family_len(sticky) }, 16);
    assert_eq!(unsafe { ck_family_sticky(rest, 0.25, 7, 1, &mut sticky) }, CkStatus::InvalidArgument);
    unsafe {
        ck_family_free(sticky);
        ck_phase_free(rest);
    }
}

fn static_lib() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let dir = exe.parent()?.parent()?;
    let lib = dir.join("libck_lab_ffi.a");
    lib.exists().then_some(lib)
}

#[test]
fn header_compiles_and_links_from_c() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(root.join("include/ck_lab.h")).unwrap();
    for sym in ["ck_phase_builtin", "ck_check_bourgain", "ck_tan_coniness", "ck_family_union_volume", "CK_STATUS_OK"] {
        assert!(header.contains(sym), "{sym} missing from header");
    }
    let Some(lib) = static_lib() else {
        eprintln!("static library not built in this profile; link step not exercised");
        return;
    };
    let out = std::env::temp_dir().join(format!("ck_lab_smoke_{}", std::process::id()));
    let status = Command::new("cc")
        .arg(root.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(root.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .status();
    let Ok(status) = status else {
        eprintln!("no C compiler; link step not exercised");
        return;
    };
    assert!(status.success(), "C smoke program failed to build");
    let run = Command::new(&out).output().unwrap();
    let _ = std::fs::remove_file(&out);
    assert!(run.status.success(), "exit {:?}: {}", run.status, String::from_utf8_lossy(&run.stdout));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok det="));
}
