//! Exercises the C ABI the way a foreign caller would: through raw pointers
//! and status codes.

use std::ffi::CStr;
use std::ptr;

use tldakit_capi::*;

fn last_error() -> String {
    unsafe {
        CStr::from_ptr(tldakit_last_error_message())
            .to_string_lossy()
            .into_owned()
    }
}

/// Two well-separated classes, n1 x n x n3 with per-class centroid offsets.
fn toy_data(n1: usize, per_class: usize, n3: usize) -> (Vec<f64>, Vec<usize>, usize) {
    let n = 2 * per_class;
    let mut data = vec![0.0; n1 * n * n3];
    let mut labels = Vec::new();
    let mut state = 88172645463325252u64;
    let mut noise = || {
        // xorshift; plenty for a smoke dataset
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state as f64 / u64::MAX as f64) - 0.5
    };
    for j in 0..n {
        let class = j / per_class;
        labels.push(class + 1);
        for k in 0..n3 {
            for i in 0..n1 {
                let center = if class == 0 { 4.0 } else { -4.0 };
                data[i + j * n1 + k * n1 * n] = center + noise();
            }
        }
    }
    (data, labels, n)
}

#[test]
fn version_and_error_message_are_readable() {
    unsafe {
        let version = CStr::from_ptr(tldakit_version()).to_str().unwrap();
        assert!(!version.is_empty());
        // No error yet: message is empty, not a dangling pointer.
        let _ = tldakit_last_error_message();
    }
}

#[test]
fn tensor_round_trip_through_the_abi() {
    unsafe {
        let data: Vec<f64> = (0..24).map(|v| v as f64).collect();
        let mut t: *mut TldakitTensor = ptr::null_mut();
        assert_eq!(
            tldakit_tensor_new(2, 3, 4, data.as_ptr(), data.len(), &mut t),
            TldakitStatus::Ok
        );
        let (mut n1, mut n2, mut n3) = (0usize, 0usize, 0usize);
        assert_eq!(tldakit_tensor_dims(t, &mut n1, &mut n2, &mut n3), TldakitStatus::Ok);
        assert_eq!((n1, n2, n3), (2, 3, 4));
        let mut out = vec![0.0; 24];
        assert_eq!(
            tldakit_tensor_copy_data(t, out.as_mut_ptr(), out.len()),
            TldakitStatus::Ok
        );
        assert_eq!(out, data);
        tldakit_tensor_free(t);
    }
}

#[test]
fn null_and_mismatched_arguments_report_errors() {
    unsafe {
        let mut t: *mut TldakitTensor = ptr::null_mut();
        assert_eq!(
            tldakit_tensor_new(2, 2, 2, ptr::null(), 0, ptr::null_mut()),
            TldakitStatus::NullPointer
        );
        let data = [1.0f64; 4];
        assert_eq!(
            tldakit_tensor_new(2, 2, 2, data.as_ptr(), 4, &mut t),
            TldakitStatus::DimMismatch
        );
        assert!(last_error().contains("needs 8"), "{}", last_error());

        assert_eq!(
            tldakit_tensor_dims(ptr::null(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut()),
            TldakitStatus::NullPointer
        );
    }
}

#[test]
fn file_round_trip_is_byte_identical() {
    unsafe {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tns3");
        let cpath = std::ffi::CString::new(path.to_str().unwrap()).unwrap();

        let data: Vec<f64> = (0..12).map(|v| (v as f64).sin()).collect();
        let mut t: *mut TldakitTensor = ptr::null_mut();
        assert_eq!(
            tldakit_tensor_new(3, 2, 2, data.as_ptr(), data.len(), &mut t),
            TldakitStatus::Ok
        );
        assert_eq!(tldakit_tensor_write_tns3(t, cpath.as_ptr()), TldakitStatus::Ok);
        let bytes1 = std::fs::read(&path).unwrap();

        let mut back: *mut TldakitTensor = ptr::null_mut();
        assert_eq!(tldakit_tensor_read_tns3(cpath.as_ptr(), &mut back), TldakitStatus::Ok);
        assert_eq!(tldakit_tensor_write_tns3(back, cpath.as_ptr()), TldakitStatus::Ok);
        assert_eq!(std::fs::read(&path).unwrap(), bytes1);

        tldakit_tensor_free(t);
        tldakit_tensor_free(back);
    }
}

#[test]
fn lproduct_matches_library() {
    unsafe {
        let (a_data, _, _) = toy_data(3, 2, 4);
        let mut a: *mut TldakitTensor = ptr::null_mut();
        assert_eq!(
            tldakit_tensor_new(3, 4, 4, a_data.as_ptr(), a_data.len(), &mut a),
            TldakitStatus::Ok
        );

        // Wrong buffer length is rejected before any allocation.
        let short: Vec<f64> = vec![0.0; 5];
        let mut b: *mut TldakitTensor = ptr::null_mut();
        assert_eq!(
            tldakit_tensor_new(4, 6, 4, short.as_ptr(), short.len(), &mut b),
            TldakitStatus::DimMismatch
        );

        let b_data: Vec<f64> = (0..4 * 6 * 4).map(|v| (v as f64 * 0.37).cos()).collect();
        assert_eq!(
            tldakit_tensor_new(4, 6, 4, b_data.as_ptr(), b_data.len(), &mut b),
            TldakitStatus::Ok
        );

        let mut c: *mut TldakitTensor = ptr::null_mut();
        assert_eq!(
            tldakit_lproduct(a, b, TldakitTransform::Dct, &mut c),
            TldakitStatus::Ok
        );
        let mut got = vec![0.0; 3 * 6 * 4];
        assert_eq!(
            tldakit_tensor_copy_data(c, got.as_mut_ptr(), got.len()),
            TldakitStatus::Ok
        );

        // Library oracle.
        let at = tldakit::Tensor3::from_vec(3, 4, 4, a_data).unwrap();
        let bt = tldakit::Tensor3::from_vec(4, 6, 4, b_data).unwrap();
        let l = tldakit::LinearTransform::dct(4).unwrap();
        let expect = l.product(&at, &bt).unwrap();
        for (g, e) in got.iter().zip(expect.data()) {
            assert!((g - e).abs() < 1e-12);
        }

        tldakit_tensor_free(a);
        tldakit_tensor_free(b);
        tldakit_tensor_free(c);
    }
}

#[test]
fn train_project_classify_flow() {
    unsafe {
        let (data, labels, n) = toy_data(6, 8, 3);
        let mut x: *mut TldakitTensor = ptr::null_mut();
        assert_eq!(
            tldakit_tensor_new(6, n, 3, data.as_ptr(), data.len(), &mut x),
            TldakitStatus::Ok
        );

        let mut model: *mut TldakitModel = ptr::null_mut();
        assert_eq!(
            tldakit_train_trace_ratio(
                x,
                labels.as_ptr(),
                labels.len(),
                1,
                TldakitTransform::Dft,
                false,
                &mut model
            ),
            TldakitStatus::Ok
        );
        let mut k = 0usize;
        assert_eq!(tldakit_model_k(model, &mut k), TldakitStatus::Ok);
        assert_eq!(k, 1);

        // Project the training data and classify it against itself.
        let mut gallery: *mut TldakitTensor = ptr::null_mut();
        assert_eq!(tldakit_model_project(model, x, &mut gallery), TldakitStatus::Ok);
        let mut preds = vec![0usize; n];
        assert_eq!(
            tldakit_classify(
                model,
                gallery,
                labels.as_ptr(),
                labels.len(),
                x,
                TldakitMetric::Frobenius,
                preds.as_mut_ptr(),
                preds.len()
            ),
            TldakitStatus::Ok
        );
        assert_eq!(preds, labels);

        // Save/load round trip through the ABI.
        let dir = tempfile::tempdir().unwrap();
        let path = std::ffi::CString::new(
            dir.path().join("m.tlda").to_str().unwrap(),
        )
        .unwrap();
        assert_eq!(tldakit_model_save(model, path.as_ptr()), TldakitStatus::Ok);
        let mut loaded: *mut TldakitModel = ptr::null_mut();
        assert_eq!(tldakit_model_load(path.as_ptr(), &mut loaded), TldakitStatus::Ok);
        let mut k2 = 0usize;
        assert_eq!(tldakit_model_k(loaded, &mut k2), TldakitStatus::Ok);
        assert_eq!(k2, 1);

        tldakit_model_free(loaded);
        tldakit_model_free(model);
        tldakit_tensor_free(gallery);
        tldakit_tensor_free(x);
    }
}

#[test]
fn training_failures_surface_as_status_codes() {
    unsafe {
        let (data, _, n) = toy_data(4, 3, 2);
        let mut x: *mut TldakitTensor = ptr::null_mut();
        assert_eq!(
            tldakit_tensor_new(4, n, 2, data.as_ptr(), data.len(), &mut x),
            TldakitStatus::Ok
        );
        // Single class: invalid.
        let labels = vec![1usize; n];
        let mut model: *mut TldakitModel = ptr::null_mut();
        assert_eq!(
            tldakit_train_trace_ratio(
                x,
                labels.as_ptr(),
                labels.len(),
                1,
                TldakitTransform::Dft,
                false,
                &mut model
            ),
            TldakitStatus::InvalidArgument
        );
        assert!(last_error().contains("two classes"), "{}", last_error());
        tldakit_tensor_free(x);
    }
}
