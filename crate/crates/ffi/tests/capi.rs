use std::ffi::{CStr, CString};
use std::ptr;

use orthopair::io::{model_to_string, random_system};
use orthopair_ffi::*;

fn model_json(seed: u64, n: usize, d: usize) -> CString {
    CString::new(model_to_string(&random_system(n, d, 1, 0.8, seed).unwrap()).unwrap()).unwrap()
}

fn last_error() -> String {
    let p = orthopair_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn dims(p: *const OrthopairPair) -> (usize, usize) {
    let (mut n, mut d) = (0, 0);
    assert_eq!(orthopair_pair_dims(p, &mut n, &mut d), OrthopairStatus::Ok);
    (n, d)
}

/// Row-major `[C; A]`.
unsafe fn stack(p: *const OrthopairPair) -> Vec<f64> {
    let (n, d) = dims(p);
    let mut c = vec![0.0; d * n];
    let mut a = vec![0.0; n * n];
    assert_eq!(orthopair_pair_get_c(p, c.as_mut_ptr(), c.len()), OrthopairStatus::Ok);
    assert_eq!(orthopair_pair_get_a(p, a.as_mut_ptr(), a.len()), OrthopairStatus::Ok);
    c.extend(a);
    c
}

fn max_diff(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

unsafe fn normalized(seed: u64, n: usize, d: usize) -> *mut OrthopairPair {
    let mut raw = ptr::null_mut();
    assert_eq!(orthopair_pair_from_json(model_json(seed, n, d).as_ptr(), &mut raw), OrthopairStatus::Ok);
    let mut on = ptr::null_mut();
    assert_eq!(orthopair_normalize(raw, &mut on), OrthopairStatus::Ok);
    orthopair_pair_free(raw);
    let mut r = 1.0;
    assert_eq!(orthopair_pair_on_residual(on, &mut r), OrthopairStatus::Ok);
    assert!(r < 1e-10);
    on
}

#[test]
fn factor_reconstruct_round_trip() {
    for (form, kind) in [(OrthopairForm::Ots, OrthopairKind::Otson), (OrthopairForm::Hessenberg, OrthopairKind::Hoon)] {
        for seed in 0..10 {
            unsafe {
                let on = normalized(seed, 6, 2);
                let mut red = ptr::null_mut();
                assert_eq!(orthopair_reduce(on, form, &mut red), OrthopairStatus::Ok);
                let mut params = ptr::null_mut();
                assert_eq!(orthopair_factor(red, kind, &mut params), OrthopairStatus::Ok, "{}", last_error());
                let mut back = ptr::null_mut();
                assert_eq!(orthopair_reconstruct(params, &mut back), OrthopairStatus::Ok);
                assert!(max_diff(&stack(red), &stack(back)) < 1e-10);

                let (mut k, mut n, mut d, mut len) = (OrthopairKind::Otson, 0, 0, 0);
                assert_eq!(orthopair_params_info(params, &mut k, &mut n, &mut d, &mut len), OrthopairStatus::Ok);
                assert_eq!((k, n, d), (kind, 6, 2));
                let mut angles = vec![f64::NAN; len];
                assert_eq!(orthopair_params_angles(params, angles.as_mut_ptr(), len), OrthopairStatus::Ok);
                assert!(angles.iter().all(|x| x.is_finite()));
                let mut g = 0.0;
                let st = orthopair_params_gamma(params, &mut g);
                match kind {
                    OrthopairKind::Hoon => assert!(st == OrthopairStatus::Ok && g > 0.0 && g < 1.0),
                    OrthopairKind::Otson => assert_eq!(st, OrthopairStatus::Domain),
                }

                for p in [on, red, back] {
                    orthopair_pair_free(p);
                }
                orthopair_params_free(params);
            }
        }
    }
}

#[test]
fn matvec_matches_dense_stack() {
    unsafe {
        let on = normalized(3, 5, 3);
        let mut ho = ptr::null_mut();
        assert_eq!(orthopair_reduce(on, OrthopairForm::Hessenberg, &mut ho), OrthopairStatus::Ok);
        let mut params = ptr::null_mut();
        assert_eq!(orthopair_factor(ho, OrthopairKind::Hoon, &mut params), OrthopairStatus::Ok);
        let q = stack(ho);
        let v = [0.3, -1.0, 2.0, 0.5, -0.25];
        let mut out = [0.0; 8];
        let mut mults = 0;
        assert_eq!(
            orthopair_stack_matvec(params, v.as_ptr(), v.len(), out.as_mut_ptr(), out.len(), &mut mults),
            OrthopairStatus::Ok
        );
        let dense: Vec<f64> = (0..8).map(|i| (0..5).map(|j| q[i * 5 + j] * v[j]).sum()).collect();
        assert!(max_diff(&out, &dense) < 1e-12);
        assert!(mults > 0 && mults <= 6 * 5 * 3 + 8 * 8);

        let mut short = [0.0; 7];
        assert_eq!(
            orthopair_stack_matvec(params, v.as_ptr(), v.len(), short.as_mut_ptr(), short.len(), ptr::null_mut()),
            OrthopairStatus::InvalidArgument
        );
        assert_eq!(
            orthopair_stack_matvec(params, v.as_ptr(), 4, out.as_mut_ptr(), out.len(), ptr::null_mut()),
            OrthopairStatus::Input
        );
        orthopair_params_free(params);
        orthopair_pair_free(ho);
        orthopair_pair_free(on);
    }
}

#[test]
fn json_round_trips() {
    unsafe {
        let on = normalized(7, 4, 1);
        let mut s = ptr::null_mut();
        assert_eq!(orthopair_pair_to_json(on, &mut s), OrthopairStatus::Ok);
        let mut again = ptr::null_mut();
        assert_eq!(orthopair_pair_from_json(s, &mut again), OrthopairStatus::Ok);
        assert_eq!(stack(on), stack(again));
        orthopair_string_free(s);

        let mut ots = ptr::null_mut();
        assert_eq!(orthopair_reduce(on, OrthopairForm::Ots, &mut ots), OrthopairStatus::Ok);
        let mut params = ptr::null_mut();
        assert_eq!(orthopair_factor(ots, OrthopairKind::Otson, &mut params), OrthopairStatus::Ok);
        let mut s = ptr::null_mut();
        assert_eq!(orthopair_params_to_json(params, &mut s), OrthopairStatus::Ok);
        let mut p2 = ptr::null_mut();
        assert_eq!(orthopair_params_from_json(s, &mut p2), OrthopairStatus::Ok);
        let (mut b1, mut b2) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(orthopair_reconstruct(params, &mut b1), OrthopairStatus::Ok);
        assert_eq!(orthopair_reconstruct(p2, &mut b2), OrthopairStatus::Ok);
        assert_eq!(stack(b1), stack(b2));
        orthopair_string_free(s);
        for p in [on, again, ots, b1, b2] {
            orthopair_pair_free(p);
        }
        orthopair_params_free(params);
        orthopair_params_free(p2);
    }
}

#[test]
fn schur_forms_are_quasi_triangular() {
    for form in [OrthopairForm::SchurAscending, OrthopairForm::SchurDescending] {
        unsafe {
            let on = normalized(11, 6, 2);
            let mut s = ptr::null_mut();
            assert_eq!(orthopair_reduce(on, form, &mut s), OrthopairStatus::Ok);
            let mut a = vec![0.0; 36];
            assert_eq!(orthopair_pair_get_a(s, a.as_mut_ptr(), 36), OrthopairStatus::Ok);
            for j in 0..6 {
                for i in j + 2..6 {
                    assert!(a[i * 6 + j].abs() < 1e-10);
                }
            }
            orthopair_pair_free(s);
            orthopair_pair_free(on);
        }
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(orthopair_pair_from_json(ptr::null(), &mut p), OrthopairStatus::InvalidArgument);
        assert!(last_error().contains("null"));

        let bad = CString::new("{ \"format_version\": 1, ").unwrap();
        assert_eq!(orthopair_pair_from_json(bad.as_ptr(), &mut p), OrthopairStatus::Input);
        assert!(last_error().contains("line"));

        // unstable: A = 2
        let (a, c) = ([2.0], [1.0]);
        assert_eq!(orthopair_pair_new(a.as_ptr(), c.as_ptr(), 1, 1, &mut p), OrthopairStatus::Ok);
        let mut on = ptr::null_mut();
        assert_eq!(orthopair_normalize(p, &mut on), OrthopairStatus::Domain);
        assert!(on.is_null());
        let mut red = ptr::null_mut();
        assert_eq!(orthopair_reduce(p, OrthopairForm::Ots, &mut red), OrthopairStatus::Domain);
        assert!(last_error().contains("output normal"));
        assert_eq!(orthopair_pair_dims(p, ptr::null_mut(), ptr::null_mut()), OrthopairStatus::InvalidArgument);
        orthopair_pair_free(p);

        // an ON pair that is not in OTS form
        let on = normalized(5, 4, 2);
        let mut params = ptr::null_mut();
        assert_eq!(orthopair_factor(on, OrthopairKind::Otson, &mut params), OrthopairStatus::Domain);
        assert!(params.is_null());
        assert_eq!(orthopair_normalize(on, ptr::null_mut()), OrthopairStatus::InvalidArgument);
        orthopair_pair_free(on);

        orthopair_pair_free(ptr::null_mut());
        orthopair_params_free(ptr::null_mut());
        orthopair_string_free(ptr::null_mut());
        assert!(!CStr::from_ptr(orthopair_version()).to_bytes().is_empty());
    }
}

#[test]
fn degenerate_hessenberg_pair_is_refused() {
    unsafe {
        // C = I, A = 0: the stack's first column is e1, so C11 = 1
        let a = [0.0, 0.0, 0.0, 0.0];
        let c = [1.0, 0.0, 0.0, 1.0];
        let mut p = ptr::null_mut();
        assert_eq!(orthopair_pair_new(a.as_ptr(), c.as_ptr(), 2, 2, &mut p), OrthopairStatus::Ok);
        let mut params = ptr::null_mut();
        assert_eq!(orthopair_factor(p, OrthopairKind::Hoon, &mut params), OrthopairStatus::Domain);
        assert!(last_error().contains("C11"));
        orthopair_pair_free(p);
    }
}
