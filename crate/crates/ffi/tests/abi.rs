use std::ffi::{CStr, CString};
use std::ptr;

use kropina_ffi::*;

fn last_error() -> String {
    let p = kr_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn load(spec: &str) -> *mut KrStructure {
    let spec = CString::new(spec).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { kr_structure_load(spec.as_ptr(), &mut s) }, KrStatus::Ok);
    s
}

#[test]
fn version_is_nonempty() {
    let v = unsafe { CStr::from_ptr(kr_version()) }.to_str().unwrap();
    assert!(!v.is_empty());
}

#[test]
fn heisenberg_trace_and_lift_agree() {
    let s = load("heisenberg:1");
    assert_eq!(unsafe { kr_structure_dim(s) }, 3);
    let x = [0.1, -0.2, 0.0];
    let xi = [1.0, 0.3, 0.8];
    let mut f = 0.0;
    assert_eq!(unsafe { kr_eval_f(s, x.as_ptr(), xi.as_ptr(), 3, &mut f) }, KrStatus::Ok);
    assert!(f.is_finite() && f > 0.0);

    let mut a = ptr::null_mut();
    let mut b = ptr::null_mut();
    unsafe {
        assert_eq!(kr_trace(s, x.as_ptr(), xi.as_ptr(), 3, KrGauge::OmegaConstant, 1.0, 1e-10, 1e-12, &mut a), KrStatus::Ok);
        assert_eq!(kr_lift_trace(s, x.as_ptr(), xi.as_ptr(), 3, 1.0, 1e-10, 1e-12, &mut b), KrStatus::Ok);
        assert!(kr_trajectory_len(a) > 2);
        assert_eq!(kr_trajectory_dim(a), 3);
        let mut d = f64::NAN;
        assert_eq!(kr_sup_distance(a, b, &mut d), KrStatus::Ok);
        assert!(d < 1e-6, "{d}");
        assert_eq!(kr_frechet_distance(a, b, 200, false, &mut d), KrStatus::Ok);
        assert!(d < 1e-6, "{d}");

        let (mut t, mut xs, mut xis, mut fv, mut om) = (f64::NAN, [0.0; 3], [0.0; 3], 0.0, 0.0);
        assert_eq!(kr_trajectory_sample(a, 0, &mut t, xs.as_mut_ptr(), xis.as_mut_ptr(), &mut fv, &mut om), KrStatus::Ok);
        assert_eq!(t, 0.0);
        assert_eq!(xs, x);
        assert!((fv - f).abs() < 1e-12);
        let n = kr_trajectory_len(a);
        assert_eq!(kr_trajectory_sample(a, n, &mut t, ptr::null_mut(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut()), KrStatus::InvalidInput);
        assert!(last_error().contains("out of range"));

        kr_trajectory_free(a);
        kr_trajectory_free(b);
        kr_structure_free(s);
    }
}

#[test]
fn csv_round_trip_through_handles() {
    let s = load("heisenberg:1");
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("t.csv").to_str().unwrap()).unwrap();
    unsafe {
        let mut a = ptr::null_mut();
        let x = [0.0, 0.0, 0.0];
        let xi = [1.0, 0.0, 1.0];
        assert_eq!(kr_trace(s, x.as_ptr(), xi.as_ptr(), 3, KrGauge::FArclength, 0.5, 1e-9, 1e-12, &mut a), KrStatus::Ok);
        assert_eq!(kr_trajectory_write_csv(a, path.as_ptr()), KrStatus::Ok);
        let mut b = ptr::null_mut();
        assert_eq!(kr_trajectory_read_csv(path.as_ptr(), &mut b), KrStatus::Ok);
        assert_eq!(kr_trajectory_len(a), kr_trajectory_len(b));
        for i in 0..kr_trajectory_len(a) {
            let (mut ta, mut tb, mut xa, mut xb) = (0.0, 0.0, [0.0; 3], [0.0; 3]);
            let none = ptr::null_mut();
            assert_eq!(kr_trajectory_sample(a, i, &mut ta, xa.as_mut_ptr(), none, none, none), KrStatus::Ok);
            assert_eq!(kr_trajectory_sample(b, i, &mut tb, xb.as_mut_ptr(), none, none, none), KrStatus::Ok);
            assert_eq!(ta.to_bits(), tb.to_bits());
            assert_eq!(xa, xb);
        }
        kr_trajectory_free(a);
        kr_trajectory_free(b);
        kr_structure_free(s);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut s = ptr::null_mut();
        let bad = CString::new("no-such-model:1").unwrap();
        assert_ne!(kr_structure_load(bad.as_ptr(), &mut s), KrStatus::Ok);
        assert!(s.is_null());
        assert!(!last_error().is_empty());

        let text = CString::new("dim = 2\ng11 = 1 +\n").unwrap();
        assert_eq!(kr_structure_from_config(text.as_ptr(), &mut s), KrStatus::Syntax);
        assert_eq!(kr_structure_load(ptr::null(), &mut s), KrStatus::NullPointer);

        let s = load("heisenberg:1");
        let x = [0.0; 3];
        let mut f = 0.0;
        // a direction in ker ω
        let xi = [1.0, 0.0, 0.0];
        assert_eq!(kr_eval_f(s, x.as_ptr(), xi.as_ptr(), 3, &mut f), KrStatus::KernelDirection);
        assert_eq!(kr_eval_f(s, x.as_ptr(), xi.as_ptr(), 2, &mut f), KrStatus::DimensionMismatch);
        assert_eq!(kr_eval_f(ptr::null(), x.as_ptr(), xi.as_ptr(), 3, &mut f), KrStatus::NullPointer);
        kr_structure_free(s);
        kr_structure_free(ptr::null_mut());
        kr_trajectory_free(ptr::null_mut());
    }
}

#[test]
fn config_text_models_work() {
    let text = CString::new("label = \"flat\"\ndim = 2\ng11 = 1\ng22 = 1\nw = [1, 0.3*x2]\n").unwrap();
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(kr_structure_from_config(text.as_ptr(), &mut s), KrStatus::Ok);
        assert_eq!(kr_structure_dim(s), 2);
        let (x, v) = ([0.0, 0.0], [2.0, 0.0]);
        let mut f = 0.0;
        assert_eq!(kr_eval_f(s, x.as_ptr(), v.as_ptr(), 2, &mut f), KrStatus::Ok);
        assert!((f - 2.0).abs() < 1e-15);
        kr_structure_free(s);
    }
}

#[test]
fn connect_returns_forward_path() {
    let s = load("heisenberg:1");
    let p = [0.0, 0.0, 0.0];
    let q = [0.3, 0.1, 0.4];
    let mut t = ptr::null_mut();
    let mut len = 0.0;
    unsafe {
        assert_eq!(kr_connect(s, p.as_ptr(), q.as_ptr(), 3, &mut t, &mut len), KrStatus::Ok, "{}", last_error());
        assert!(len > 0.0);
        let n = kr_trajectory_len(t);
        let mut x = [0.0; 3];
        assert_eq!(kr_trajectory_sample(t, n - 1, ptr::null_mut(), x.as_mut_ptr(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut()), KrStatus::Ok);
        let err: f64 = x.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err < 1e-6, "{err}");
        kr_trajectory_free(t);
        kr_structure_free(s);
    }
}
