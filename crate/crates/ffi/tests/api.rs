use std::ffi::{CStr, CString};
use std::ptr;

use robust_enkf_ffi::*;

fn last_error() -> String {
    let n = unsafe { re_last_error_message(ptr::null_mut(), 0) };
    let mut buf = vec![0 as std::ffi::c_char; n + 1];
    unsafe { re_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn identity(n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    v
}

#[test]
fn scalar_are_through_handles() {
    let (a, b, one) = (-1.0, 1.0, 1.0);
    let mut gain = ptr::null_mut();
    let st = unsafe { re_gain_solve_are(1, 1, &a, &b, &one, &one, &one, &mut gain) };
    assert_eq!(st, ReStatus::Ok);
    assert_eq!(unsafe { re_gain_dim(gain) }, 1);
    let mut p = 0.0;
    assert_eq!(unsafe { re_gain_value_matrix(gain, &mut p) }, ReStatus::Ok);
    assert!((p - (2f64.sqrt() - 1.0)).abs() < 1e-10);
    unsafe { re_gain_free(gain) };
}

#[test]
fn linear_training_matches_are() {
    let n = 2;
    let a = [-1.0, 0.5, 0.0, -2.0];
    let b = [1.0, 0.0, 0.0, 1.0];
    let i = identity(n);
    let mut exact = ptr::null_mut();
    let mut learned = ptr::null_mut();
    unsafe {
        assert_eq!(
            re_gain_solve_are(
                n,
                n,
                a.as_ptr(),
                b.as_ptr(),
                i.as_ptr(),
                i.as_ptr(),
                i.as_ptr(),
                &mut exact
            ),
            ReStatus::Ok
        );
        let st = re_gain_train_linear(
            n,
            n,
            a.as_ptr(),
            b.as_ptr(),
            i.as_ptr(),
            i.as_ptr(),
            i.as_ptr(),
            2000,
            8.0,
            0.01,
            3,
            &mut learned,
        );
        assert_eq!(st, ReStatus::Ok, "{}", last_error());
        let (mut pe, mut pl) = ([0.0; 4], [0.0; 4]);
        re_gain_value_matrix(exact, pe.as_mut_ptr());
        re_gain_value_matrix(learned, pl.as_mut_ptr());
        let num: f64 = pe.iter().zip(&pl).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let den: f64 = pe.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(num / den < 0.1, "relative error {}", num / den);
        re_gain_free(exact);
        re_gain_free(learned);
    }
}

#[test]
fn nonlinear_training_on_linear_simulator() {
    let a = [-1.0];
    let b = [1.0];
    let one = [1.0];
    unsafe {
        let mut sim = ptr::null_mut();
        assert_eq!(
            re_simulator_new_linear(1, 1, a.as_ptr(), b.as_ptr(), &mut sim),
            ReStatus::Ok
        );
        let mut gain = ptr::null_mut();
        let st = re_gain_train_nonlinear(
            sim,
            one.as_ptr(),
            one.as_ptr(),
            one.as_ptr(),
            2000,
            8.0,
            0.01,
            5,
            &mut gain,
        );
        assert_eq!(st, ReStatus::Ok, "{}", last_error());
        let mut p = 0.0;
        re_gain_value_matrix(gain, &mut p);
        assert!((p - (2f64.sqrt() - 1.0)).abs() < 0.05, "p={p}");
        re_gain_free(gain);
        re_simulator_free(sim);
    }
}

#[test]
fn pde_simulator_eval_and_dims() {
    unsafe {
        let mut sim = ptr::null_mut();
        assert_eq!(
            re_simulator_new_pde(RePde::Heat, 0.01, 32, 1.0, 4, ReBoundary::Periodic, &mut sim),
            ReStatus::Ok
        );
        let (mut n, mut m) = (0, 0);
        assert_eq!(re_simulator_dims(sim, &mut n, &mut m), ReStatus::Ok);
        assert_eq!((n, m), (32, 4));
        let x = vec![1.0; n];
        let u = vec![0.0; m];
        let mut dx = vec![f64::NAN; n];
        assert_eq!(
            re_simulator_eval(sim, x.as_ptr(), u.as_ptr(), dx.as_mut_ptr()),
            ReStatus::Ok
        );
        assert!(dx.iter().all(|v| v.abs() < 1e-12));
        re_simulator_free(sim);
    }
}

#[test]
fn law_control_is_negative_feedback() {
    let (a, b, one) = (-1.0, 1.0, 1.0);
    unsafe {
        let mut gain = ptr::null_mut();
        re_gain_solve_are(1, 1, &a, &b, &one, &one, &one, &mut gain);
        let mut sim = ptr::null_mut();
        re_simulator_new_linear(1, 1, &a, &b, &mut sim);
        let mut p = 0.0;
        re_gain_value_matrix(gain, &mut p);
        for access in [0, 1] {
            let mut law = ptr::null_mut();
            assert_eq!(
                re_law_new(gain, 1, &one, &one, &one, 0.5, 1e-3, access, &mut law),
                ReStatus::Ok
            );
            let (x, mut u) = (2.0, 0.0);
            assert_eq!(re_law_control(law, sim, 0.0, &x, &mut u), ReStatus::Ok);
            assert!((u - (-p * x - 0.5)).abs() < 1e-6, "access={access} u={u}");
            re_law_free(law);
        }
        re_simulator_free(sim);
        re_gain_free(gain);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut sim = ptr::null_mut();
        let st = re_simulator_new_pde(RePde::Heat, 0.01, 16, 1.0, 0, ReBoundary::Periodic, &mut sim);
        assert_eq!(st, ReStatus::InvalidArgument);
        assert!(last_error().contains("m=0"), "{}", last_error());
        assert!(sim.is_null());

        let st = re_simulator_new_linear(1, 1, ptr::null(), ptr::null(), &mut sim);
        assert_eq!(st, ReStatus::NullPointer);

        let (a, b, one, minus) = (-1.0, 1.0, 1.0, -1.0);
        let mut gain = ptr::null_mut();
        let st = re_gain_solve_are(1, 1, &a, &b, &one, &minus, &one, &mut gain);
        assert_eq!(st, ReStatus::NumericalFailure);

        let path = CString::new("/nonexistent/dir/gain.txt").unwrap();
        assert_eq!(re_gain_load(path.as_ptr(), &mut gain), ReStatus::Io);

        let mut two = ptr::null_mut();
        re_simulator_new_linear(1, 1, &a, &b, &mut sim);
        let a2 = identity(2);
        re_simulator_new_linear(2, 2, a2.as_ptr(), a2.as_ptr(), &mut two);
        re_gain_solve_are(1, 1, &a, &b, &one, &one, &one, &mut gain);
        let mut law = ptr::null_mut();
        re_law_new(gain, 1, &one, &one, &one, 0.0, 1e-3, 1, &mut law);
        let (x, mut u) = ([1.0, 1.0], [0.0, 0.0]);
        assert_eq!(
            re_law_control(law, two, 0.0, x.as_ptr(), u.as_mut_ptr()),
            ReStatus::DimensionMismatch
        );
        assert_eq!(re_gain_dim(ptr::null()), 0);
        re_law_free(law);
        re_gain_free(gain);
        re_simulator_free(sim);
        re_simulator_free(two);
        re_simulator_free(ptr::null_mut());
    }
}

#[test]
fn save_and_load_round_trip() {
    let dir = std::env::temp_dir().join(format!("re-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = CString::new(dir.join("gain.txt").to_str().unwrap()).unwrap();
    let (a, b, one) = (-0.5, 2.0, 1.0);
    unsafe {
        let mut gain = ptr::null_mut();
        re_gain_solve_are(1, 1, &a, &b, &one, &one, &one, &mut gain);
        assert_eq!(re_gain_save(gain, path.as_ptr()), ReStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(re_gain_load(path.as_ptr(), &mut back), ReStatus::Ok);
        let (mut p, mut q) = (0.0, 1.0);
        re_gain_value_matrix(gain, &mut p);
        re_gain_value_matrix(back, &mut q);
        assert_eq!(p, q);
        re_gain_free(gain);
        re_gain_free(back);
    }
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn status_strings() {
    let s = unsafe { CStr::from_ptr(re_status_str(ReStatus::DimensionMismatch)) };
    assert_eq!(s.to_str().unwrap(), "dimension mismatch");
}
