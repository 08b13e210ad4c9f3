//! C ABI over `caenet`.
//!
//! Models are opaque handles created by `caenet_*_build` / `caenet_*_load`
//! and released with the matching `_free`. Every fallible call returns a
//! [`CaenetStatus`]; on failure the message is available from
//! [`caenet_last_error`] on the same thread until the next failing call.
//! Images cross the boundary as planar `f64` buffers in channel, row,
//! column order.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use caenet::autoencoder::{build_cae, encoder_extract, Cae, CaeConfig};
use caenet::classifier::{build_cnn, Cnn, CnnConfig};
use caenet::optim::{lr_at_epoch, SgdConfig};
use caenet::persist::{load_checkpoint, save_checkpoint, Model};
use caenet::{Error, Tensor};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CaenetStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    Config = 4,
    Data = 5,
    Format = 6,
    Version = 7,
    Io = 8,
    WrongModelKind = 9,
    Numeric = 10,
    Panic = 11,
}

/// Convolutional autoencoder handle.
pub struct CaenetCae {
    inner: Cae,
}

/// Classifier handle.
pub struct CaenetCnn {
    inner: Cnn,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> CaenetStatus {
    match e {
        Error::Shape(_) => CaenetStatus::Shape,
        Error::Numeric(_) => CaenetStatus::Numeric,
        Error::Config(_) => CaenetStatus::Config,
        Error::Argument(_) | Error::Index(_) => CaenetStatus::InvalidArgument,
        Error::Data(_) | Error::Manifest(_) => CaenetStatus::Data,
        Error::Format(_) | Error::Unsupported(_) => CaenetStatus::Format,
        Error::Version { .. } => CaenetStatus::Version,
        Error::Io(_) => CaenetStatus::Io,
    }
}

struct Fail(CaenetStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CaenetStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CaenetStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CaenetStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(CaenetStatus::NullPointer, format!("{what} is null"))
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, Fail> {
    if path.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(path)
        .to_str()
        .map_err(|_| Fail(CaenetStatus::InvalidArgument, "path is not UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn slice_arg<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn out_slice<'a>(ptr: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, len))
}

fn check_len(got: usize, want: usize, what: &str) -> Result<(), Fail> {
    if got != want {
        return Err(Fail(
            CaenetStatus::Shape,
            format!("{what} has {got} values, expected {want}"),
        ));
    }
    Ok(())
}

fn image(dims: [usize; 3], data: &[f64]) -> Result<Tensor, Fail> {
    check_len(data.len(), dims.iter().product(), "input")?;
    Ok(Tensor::from_vec(&dims, data.to_vec())?)
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn caenet_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn caenet_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `lr0 · decay^epoch`.
///
/// # Safety
/// `out` must be null or point to writable memory for one `double`.
#[no_mangle]
pub unsafe extern "C" fn caenet_lr_at_epoch(lr0: f64, decay: f64, epoch: i64, out: *mut f64) -> CaenetStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = SgdConfig {
            lr0,
            decay,
            ..Default::default()
        };
        *out = lr_at_epoch(&cfg, epoch)?;
        Ok(())
    })
}

/// Builds a freshly initialized autoencoder.
///
/// # Safety
/// `out` must be null or point to writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn caenet_cae_build(
    input_channels: u32,
    height: u32,
    width: u32,
    conv1_channels: u32,
    conv2_channels: u32,
    tied_decoder: bool,
    corruption_fraction: f64,
    seed: u64,
    out: *mut *mut CaenetCae,
) -> CaenetStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = CaeConfig {
            input_channels: input_channels as usize,
            input_size: (height as usize, width as usize),
            conv_channels: (conv1_channels as usize, conv2_channels as usize),
            tied_decoder,
            corruption_fraction,
            ..Default::default()
        };
        let cae = build_cae(&cfg, seed)?;
        *out = Box::into_raw(Box::new(CaenetCae { inner: cae }));
        Ok(())
    })
}

/// Loads an autoencoder checkpoint.
///
/// # Safety
/// `path` must be null or a NUL-terminated string; `out` must be null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn caenet_cae_load(path: *const c_char, out: *mut *mut CaenetCae) -> CaenetStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = path_arg(path)?;
        match load_checkpoint(&path)? {
            Model::Cae(inner) => {
                *out = Box::into_raw(Box::new(CaenetCae { inner }));
                Ok(())
            }
            Model::Cnn(_) => Err(Fail(
                CaenetStatus::WrongModelKind,
                format!("{} holds a classifier", path.display()),
            )),
        }
    })
}

/// Writes the autoencoder to `path`.
///
/// # Safety
/// `model` must be null or a live handle; `path` null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn caenet_cae_save(model: *const CaenetCae, path: *const c_char) -> CaenetStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let path = path_arg(path)?;
        save_checkpoint(&Model::Cae(m.inner.clone()), &path)?;
        Ok(())
    })
}

/// Number of values in one input image (`C · H · W`).
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn caenet_cae_input_len(model: *const CaenetCae) -> usize {
    model
        .as_ref()
        .map_or(0, |m| m.inner.encoder().input_dims().iter().product())
}

/// Reconstructs one image. `input` and `output` both hold
/// [`caenet_cae_input_len`] values.
///
/// # Safety
/// `input` must be readable for `input_len` doubles and `output` writable
/// for `output_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn caenet_cae_reconstruct(
    model: *const CaenetCae,
    input: *const f64,
    input_len: usize,
    output: *mut f64,
    output_len: usize,
) -> CaenetStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let dims = m.inner.encoder().input_dims();
        let x = image(dims, slice_arg(input, input_len, "input")?)?;
        let out = out_slice(output, output_len, "output")?;
        check_len(output_len, x.len(), "output")?;
        out.copy_from_slice(m.inner.reconstruct(&x)?.data());
        Ok(())
    })
}

/// Releases an autoencoder handle. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn caenet_cae_free(model: *mut CaenetCae) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Builds a classifier on a copy of the autoencoder's encoder with a fresh
/// head of `n_fc` hidden layers.
///
/// # Safety
/// `fc_sizes` must be readable for `n_fc` values (may be null when
/// `n_fc == 0`); `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn caenet_cnn_from_cae(
    cae: *const CaenetCae,
    fc_sizes: *const u32,
    n_fc: usize,
    n_classes: u32,
    freeze_encoder: bool,
    seed: u64,
    out: *mut *mut CaenetCnn,
) -> CaenetStatus {
    guard(|| {
        let cae = cae.as_ref().ok_or_else(|| null("cae"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let sizes: Vec<usize> = if n_fc == 0 {
            Vec::new()
        } else if fc_sizes.is_null() {
            return Err(null("fc_sizes"));
        } else {
            std::slice::from_raw_parts(fc_sizes, n_fc).iter().map(|&s| s as usize).collect()
        };
        let cfg = CnnConfig {
            fc_sizes: sizes,
            n_classes: n_classes as usize,
            freeze_encoder,
            ..Default::default()
        };
        let cnn = build_cnn(&encoder_extract(&cae.inner), &cfg, seed)?;
        *out = Box::into_raw(Box::new(CaenetCnn { inner: cnn }));
        Ok(())
    })
}

/// Loads a classifier checkpoint.
///
/// # Safety
/// As for [`caenet_cae_load`].
#[no_mangle]
pub unsafe extern "C" fn caenet_cnn_load(path: *const c_char, out: *mut *mut CaenetCnn) -> CaenetStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = path_arg(path)?;
        match load_checkpoint(&path)? {
            Model::Cnn(inner) => {
                *out = Box::into_raw(Box::new(CaenetCnn { inner }));
                Ok(())
            }
            Model::Cae(_) => Err(Fail(
                CaenetStatus::WrongModelKind,
                format!("{} holds an autoencoder", path.display()),
            )),
        }
    })
}

/// Writes the classifier to `path`.
///
/// # Safety
/// As for [`caenet_cae_save`].
#[no_mangle]
pub unsafe extern "C" fn caenet_cnn_save(model: *const CaenetCnn, path: *const c_char) -> CaenetStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let path = path_arg(path)?;
        save_checkpoint(&Model::Cnn(m.inner.clone()), &path)?;
        Ok(())
    })
}

/// Number of values in one input image.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn caenet_cnn_input_len(model: *const CaenetCnn) -> usize {
    model
        .as_ref()
        .map_or(0, |m| m.inner.encoder().input_dims().iter().product())
}

/// Number of output classes; 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn caenet_cnn_num_classes(model: *const CaenetCnn) -> usize {
    model.as_ref().map_or(0, |m| m.inner.config().n_classes)
}

/// Class probabilities for one image; `probs` holds
/// [`caenet_cnn_num_classes`] values.
///
/// # Safety
/// `input` readable for `input_len` doubles; `probs` writable for
/// `probs_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn caenet_cnn_probabilities(
    model: *const CaenetCnn,
    input: *const f64,
    input_len: usize,
    probs: *mut f64,
    probs_len: usize,
) -> CaenetStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let x = image(m.inner.encoder().input_dims(), slice_arg(input, input_len, "input")?)?;
        let out = out_slice(probs, probs_len, "probs")?;
        check_len(probs_len, m.inner.config().n_classes, "probs")?;
        out.copy_from_slice(m.inner.forward(&x)?.data());
        Ok(())
    })
}

/// Most probable class for one image; ties go to the lowest index.
///
/// # Safety
/// `input` readable for `input_len` doubles; `label` writable.
#[no_mangle]
pub unsafe extern "C" fn caenet_cnn_predict(
    model: *const CaenetCnn,
    input: *const f64,
    input_len: usize,
    label: *mut u32,
) -> CaenetStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if label.is_null() {
            return Err(null("label"));
        }
        let x = image(m.inner.encoder().input_dims(), slice_arg(input, input_len, "input")?)?;
        *label = m.inner.predict(&x)? as u32;
        Ok(())
    })
}

/// Releases a classifier handle. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn caenet_cnn_free(model: *mut CaenetCnn) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
