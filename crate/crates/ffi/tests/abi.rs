use std::ffi::{CStr, CString};
use std::ptr;

use caenet_ffi::*;

fn last_error() -> String {
    let p = caenet_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn tiny_cae(tied: bool) -> *mut CaenetCae {
    let mut cae = ptr::null_mut();
    let s = unsafe { caenet_cae_build(3, 8, 8, 2, 3, tied, 0.2, 7, &mut cae) };
    assert_eq!(s, CaenetStatus::Ok);
    assert!(!cae.is_null());
    cae
}

fn ramp(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i % 17) as f64 / 16.0).collect()
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(caenet_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn learning_rate_schedule() {
    let mut lr = 0.0;
    assert_eq!(unsafe { caenet_lr_at_epoch(0.01, 0.98, 2, &mut lr) }, CaenetStatus::Ok);
    assert!((lr - 0.01 * 0.98 * 0.98).abs() < 1e-15);
    assert_eq!(unsafe { caenet_lr_at_epoch(0.01, 0.98, -1, &mut lr) }, CaenetStatus::InvalidArgument);
    assert!(last_error().contains("epoch"));
    assert_eq!(unsafe { caenet_lr_at_epoch(0.01, 0.98, 0, ptr::null_mut()) }, CaenetStatus::NullPointer);
}

#[test]
fn cae_reconstructs_and_roundtrips() {
    let cae = tiny_cae(true);
    let n = unsafe { caenet_cae_input_len(cae) };
    assert_eq!(n, 192);
    let x = ramp(n);
    let mut y = vec![0.0; n];
    assert_eq!(unsafe { caenet_cae_reconstruct(cae, x.as_ptr(), n, y.as_mut_ptr(), n) }, CaenetStatus::Ok);
    assert!(y.iter().all(|v| (0.0..=1.0).contains(v)));

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("m.ckpt").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { caenet_cae_save(cae, path.as_ptr()) }, CaenetStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { caenet_cae_load(path.as_ptr(), &mut back) }, CaenetStatus::Ok);
    let mut y2 = vec![0.0; n];
    assert_eq!(unsafe { caenet_cae_reconstruct(back, x.as_ptr(), n, y2.as_mut_ptr(), n) }, CaenetStatus::Ok);
    assert_eq!(y, y2);

    let mut wrong = ptr::null_mut();
    assert_eq!(unsafe { caenet_cnn_load(path.as_ptr(), &mut wrong) }, CaenetStatus::WrongModelKind);
    assert!(wrong.is_null());
    unsafe {
        caenet_cae_free(cae);
        caenet_cae_free(back);
    }
}

#[test]
fn classifier_lifecycle() {
    let cae = tiny_cae(false);
    let sizes = [5u32, 4];
    let mut cnn = ptr::null_mut();
    assert_eq!(
        unsafe { caenet_cnn_from_cae(cae, sizes.as_ptr(), 2, 3, false, 1, &mut cnn) },
        CaenetStatus::Ok
    );
    assert_eq!(unsafe { caenet_cnn_num_classes(cnn) }, 3);
    let n = unsafe { caenet_cnn_input_len(cnn) };
    let x = ramp(n);
    let mut p = [0.0; 3];
    assert_eq!(unsafe { caenet_cnn_probabilities(cnn, x.as_ptr(), n, p.as_mut_ptr(), 3) }, CaenetStatus::Ok);
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let mut label = 99;
    assert_eq!(unsafe { caenet_cnn_predict(cnn, x.as_ptr(), n, &mut label) }, CaenetStatus::Ok);
    let best = (0..3).fold(0, |b, i| if p[i] > p[b] { i } else { b });
    assert_eq!(label as usize, best);

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("c.ckpt").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { caenet_cnn_save(cnn, path.as_ptr()) }, CaenetStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { caenet_cnn_load(path.as_ptr(), &mut back) }, CaenetStatus::Ok);
    let mut p2 = [0.0; 3];
    assert_eq!(unsafe { caenet_cnn_probabilities(back, x.as_ptr(), n, p2.as_mut_ptr(), 3) }, CaenetStatus::Ok);
    assert_eq!(p, p2);
    unsafe {
        caenet_cnn_free(cnn);
        caenet_cnn_free(back);
        caenet_cae_free(cae);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let mut cae = ptr::null_mut();
    assert_eq!(unsafe { caenet_cae_build(3, 50, 50, 2, 3, true, 0.2, 0, &mut cae) }, CaenetStatus::Config);
    assert!(cae.is_null());
    assert!(!last_error().is_empty());

    let cae = tiny_cae(true);
    let x = ramp(10);
    let mut y = vec![0.0; 10];
    assert_eq!(unsafe { caenet_cae_reconstruct(cae, x.as_ptr(), 10, y.as_mut_ptr(), 10) }, CaenetStatus::Shape);
    assert_eq!(
        unsafe { caenet_cae_reconstruct(ptr::null(), x.as_ptr(), 10, y.as_mut_ptr(), 10) },
        CaenetStatus::NullPointer
    );

    let mut cnn = ptr::null_mut();
    let sizes = [4u32];
    assert_eq!(
        unsafe { caenet_cnn_from_cae(cae, sizes.as_ptr(), 1, 1, false, 0, &mut cnn) },
        CaenetStatus::Config
    );

    let missing = CString::new("/nonexistent/dir/model.ckpt").unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { caenet_cae_load(missing.as_ptr(), &mut m) }, CaenetStatus::Io);

    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.ckpt");
    std::fs::write(&junk, b"not a checkpoint").unwrap();
    let junk = CString::new(junk.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { caenet_cae_load(junk.as_ptr(), &mut m) }, CaenetStatus::Format);
    unsafe {
        caenet_cae_free(cae);
        caenet_cae_free(ptr::null_mut());
        caenet_cnn_free(ptr::null_mut());
    }
    assert_eq!(unsafe { caenet_cae_input_len(ptr::null()) }, 0);
}
