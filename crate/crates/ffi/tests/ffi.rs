use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use millsurf_ffi::*;

fn fixture(name: &str) -> CString {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name);
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = millsurf_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

#[test]
fn analytic_calls() {
    let mut req = 0.0;
    let mut sz = 0.0;
    unsafe {
        assert_eq!(millsurf_effective_radius(0.0, 1.0, 5.0, 1.5, MillsurfRadiusForm::AsPrinted, &mut req), MillsurfStatus::Ok);
        assert!(millsurf_last_error_message().is_null());
        assert_eq!(millsurf_predict_sz(0.14, 0.005, req, 1.5, MillsurfSzBranch::AsPrinted, &mut sz), MillsurfStatus::Ok);
        assert!((sz * 1000.0 - 1.633333).abs() < 1e-5);
        assert_eq!(millsurf_predict_sz(0.14, 0.005, req, 1.5, MillsurfSzBranch::HcAdditiveSwapped, &mut sz), MillsurfStatus::Ok);
        assert!((sz * 1000.0 - 6.633333).abs() < 1e-5);

        let st = millsurf_effective_radius(0.0, 0.0, 5.0, 1.5, MillsurfRadiusForm::Variant, &mut req);
        assert_eq!(st, MillsurfStatus::SingularOrientation);
        assert!(last_error().contains("singular"));
        let st = millsurf_effective_radius(0.0, 1.0, 5.0, 1.5, MillsurfRadiusForm::AsPrinted, ptr::null_mut());
        assert_eq!(st, MillsurfStatus::NullPointer);
        let st = millsurf_predict_sz(-1.0, 0.005, 1.0, 1.5, MillsurfSzBranch::AsPrinted, &mut sz);
        assert_eq!(st, MillsurfStatus::Domain);
    }
}

#[test]
fn heightfield_round_trip_and_params() {
    let (nx, ny) = (64usize, 64usize);
    let d = 0.01;
    let z: Vec<f64> = (0..nx * ny)
        .map(|k| 2.0 * (std::f64::consts::TAU * ((k % nx) as f64 - 31.5) * d / 0.16).cos())
        .collect();
    unsafe {
        let mut hf = ptr::null_mut();
        assert_eq!(millsurf_heightfield_new(nx, ny, d, d, z.as_ptr(), &mut hf), MillsurfStatus::Ok);
        let mut p = std::mem::MaybeUninit::<MillsurfArealParams>::uninit();
        assert_eq!(millsurf_areal_params(hf, 0.0, p.as_mut_ptr()), MillsurfStatus::Ok);
        let p = p.assume_init();
        assert!((p.sq - 2f64.sqrt()).abs() < 1e-2, "{p:?}");
        assert!(p.sz > 3.9 && p.sz <= 4.0 + 1e-9, "{p:?}");

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("f.csv").to_str().unwrap()).unwrap();
        assert_eq!(millsurf_heightfield_write_csv(hf, path.as_ptr()), MillsurfStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(millsurf_heightfield_read_csv(path.as_ptr(), &mut back), MillsurfStatus::Ok);
        let mut buf = vec![0.0; nx * ny];
        assert_eq!(millsurf_heightfield_copy_heights(back, buf.as_mut_ptr(), buf.len()), MillsurfStatus::Ok);
        assert!(buf.iter().zip(&z).all(|(a, b)| (a - b).abs() < 1e-9));
        millsurf_heightfield_free(hf);
        millsurf_heightfield_free(back);

        let mut c = ptr::null_mut();
        assert_eq!(millsurf_heightfield_read_csv(fixture("constant_field.csv").as_ptr(), &mut c), MillsurfStatus::Ok);
        let mut p = std::mem::MaybeUninit::<MillsurfArealParams>::uninit();
        assert_eq!(millsurf_areal_params(c, 0.0, p.as_mut_ptr()), MillsurfStatus::Ok);
        let p = p.assume_init();
        assert_eq!(p.sa, 0.0);
        assert!(p.ssk.is_nan() && p.std.is_nan());
        millsurf_heightfield_free(c);

        let mut none = ptr::null_mut();
        let missing = CString::new("/no/such/field.csv").unwrap();
        assert_eq!(millsurf_heightfield_read_csv(missing.as_ptr(), &mut none), MillsurfStatus::Io);
        assert!(none.is_null());
        assert_eq!(millsurf_heightfield_new(0, 3, d, d, z.as_ptr(), &mut none), MillsurfStatus::Input);
        millsurf_heightfield_free(ptr::null_mut());
    }
}

#[test]
fn simulate_from_config() {
    unsafe {
        let mut cfg = ptr::null_mut();
        assert_eq!(millsurf_config_read(fixture("straight_passes.cfg").as_ptr(), &mut cfg), MillsurfStatus::Ok);
        let threads = CString::new("run.threads=2").unwrap();
        assert_eq!(millsurf_config_set(cfg, threads.as_ptr()), MillsurfStatus::Ok);
        let mut hf = ptr::null_mut();
        assert_eq!(millsurf_simulate(cfg, &mut hf), MillsurfStatus::Ok);
        let (mut nx, mut ny) = (0usize, 0usize);
        assert_eq!(millsurf_heightfield_shape(hf, &mut nx, &mut ny, ptr::null_mut(), ptr::null_mut()), MillsurfStatus::Ok);
        assert_eq!((nx, ny), (9, 41));
        millsurf_heightfield_free(hf);

        let bad = CString::new("trajectory.path=/no/such.csv").unwrap();
        assert_eq!(millsurf_config_set(cfg, bad.as_ptr()), MillsurfStatus::Ok);
        assert_eq!(millsurf_simulate(cfg, &mut hf), MillsurfStatus::Io);
        millsurf_config_free(cfg);

        let mut empty = ptr::null_mut();
        assert_eq!(millsurf_config_new(&mut empty), MillsurfStatus::Ok);
        assert_eq!(millsurf_simulate(empty, &mut hf), MillsurfStatus::Config);
        assert!(last_error().contains("nothing to simulate"));
        millsurf_config_free(empty);
    }
}

fn target_dir() -> PathBuf {
    // tests run from <target>/<profile>/deps
    std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(root.join("include/millsurf.h")).unwrap();
    for name in ["millsurf_simulate", "millsurf_areal_params", "MILLSURF_STATUS_BUFFER_TOO_SMALL", "typedef struct MillsurfHeightField"] {
        assert!(header.contains(name), "{name} missing from header");
    }
    let lib = target_dir().join("libmillsurf_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(cc)
        .arg(root.join("tests/smoke.c"))
        .arg("-I")
        .arg(root.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("a C compiler");
    assert!(status.success());
    let out = Command::new(&exe).arg(fixture("tiny_field.csv").to_str().unwrap()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok 0.1.0"));
}
