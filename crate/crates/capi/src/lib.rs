//! C ABI over the tldakit library.
//!
//! Objects cross the boundary as opaque handles (`TldakitTensor`,
//! `TldakitModel`) created and destroyed by this library; every fallible
//! call returns a [`TldakitStatus`] code and stores a human-readable message
//! retrievable via [`tldakit_last_error_message`] (thread-local, valid until
//! the next failing call on the same thread).
//!
//! Tensor payloads are exchanged as dense `f64` buffers in the canonical
//! linearization: element `(i, j, k)` at `i + j*n1 + k*n1*n2`, 0-based.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write as _};
use std::panic::{catch_unwind, AssertUnwindSafe};

use tldakit::data::load_bundle;
use tldakit::tensor::{read_tns3_real, write_tns3, Tensor3, Tns3Payload};
use tldakit::tlda::{
    classify_projected, train_ratio_trace, train_trace_ratio, DistanceMetric,
    LabeledTensorDataset, ProjectedGallery, TldaModel, TldaOptions,
};
use tldakit::transform::LinearTransform;
use tldakit::Error;

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TldakitStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimMismatch = 3,
    Singular = 4,
    NumericalError = 5,
    FormatError = 6,
    IoError = 7,
    Utf8Error = 8,
    Panic = 9,
}

/// Built-in mode-3 transforms selectable over the ABI.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TldakitTransform {
    Dft = 0,
    Dct = 1,
}

/// Distance used by the 1-NN classifier.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TldakitMetric {
    Frobenius = 0,
    Mad = 1,
}

/// Opaque dense real third-order tensor.
pub struct TldakitTensor(Tensor3);

/// Opaque trained model.
pub struct TldakitModel(TldaModel);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn remember_error(message: &str) {
    let sanitized: String = message.chars().map(|c| if c == '\0' { ' ' } else { c }).collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> TldakitStatus {
    match err.kind() {
        "invalid_argument" => TldakitStatus::InvalidArgument,
        "dim_mismatch" => TldakitStatus::DimMismatch,
        "singular" => TldakitStatus::Singular,
        "numerical_consistency" => TldakitStatus::NumericalError,
        "format" => TldakitStatus::FormatError,
        "io" => TldakitStatus::IoError,
        _ => TldakitStatus::InvalidArgument,
    }
}

fn fail(err: Error) -> TldakitStatus {
    let status = status_of(&err);
    remember_error(&err.to_string());
    status
}

fn guard(f: impl FnOnce() -> TldakitStatus) -> TldakitStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            remember_error("internal panic");
            TldakitStatus::Panic
        }
    }
}

/// # Safety
/// `ptr` must be null or point to a valid NUL-terminated string.
unsafe fn path_from(ptr: *const c_char) -> Result<std::path::PathBuf, TldakitStatus> {
    if ptr.is_null() {
        remember_error("null path");
        return Err(TldakitStatus::NullPointer);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(std::path::PathBuf::from(s)),
        Err(_) => {
            remember_error("path is not valid UTF-8");
            Err(TldakitStatus::Utf8Error)
        }
    }
}

fn transform_for(kind: TldakitTransform, n3: usize) -> tldakit::Result<LinearTransform> {
    match kind {
        TldakitTransform::Dft => LinearTransform::dft(n3),
        TldakitTransform::Dct => LinearTransform::dct(n3),
    }
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tldakit_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tldakit_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Create a tensor from a buffer of `n1*n2*n3` values in the canonical
/// linearization; a null `data` gives a zero tensor.
///
/// # Safety
/// `data` must be null or point to at least `len` readable doubles, and
/// `out` must point to writable pointer storage.
#[no_mangle]
pub unsafe extern "C" fn tldakit_tensor_new(
    n1: usize,
    n2: usize,
    n3: usize,
    data: *const f64,
    len: usize,
    out: *mut *mut TldakitTensor,
) -> TldakitStatus {
    guard(|| {
        if out.is_null() {
            remember_error("null output pointer");
            return TldakitStatus::NullPointer;
        }
        let tensor = if data.is_null() {
            if n1 == 0 || n2 == 0 || n3 == 0 {
                return fail(Error::invalid("tensor dimensions must be positive"));
            }
            Tensor3::zeros(n1, n2, n3)
        } else {
            let expect = n1 * n2 * n3;
            if len != expect {
                return fail(Error::dims(format!(
                    "buffer holds {len} values but {n1}x{n2}x{n3} needs {expect}"
                )));
            }
            let slice = std::slice::from_raw_parts(data, len);
            match Tensor3::from_vec(n1, n2, n3, slice.to_vec()) {
                Ok(t) => t,
                Err(e) => return fail(e),
            }
        };
        *out = Box::into_raw(Box::new(TldakitTensor(tensor)));
        TldakitStatus::Ok
    })
}

/// # Safety
/// `t` must be null or a pointer returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tldakit_tensor_free(t: *mut TldakitTensor) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// # Safety
/// `t` must be a live tensor handle; dimension outputs may be null to skip.
#[no_mangle]
pub unsafe extern "C" fn tldakit_tensor_dims(
    t: *const TldakitTensor,
    n1: *mut usize,
    n2: *mut usize,
    n3: *mut usize,
) -> TldakitStatus {
    guard(|| {
        let Some(tensor) = t.as_ref() else {
            remember_error("null tensor handle");
            return TldakitStatus::NullPointer;
        };
        let dims = tensor.0.dims();
        if !n1.is_null() {
            *n1 = dims.0;
        }
        if !n2.is_null() {
            *n2 = dims.1;
        }
        if !n3.is_null() {
            *n3 = dims.2;
        }
        TldakitStatus::Ok
    })
}

/// Copy the payload out in the canonical linearization.
///
/// # Safety
/// `t` must be a live handle and `out` must point to at least `len` writable
/// doubles with `len = n1*n2*n3`.
#[no_mangle]
pub unsafe extern "C" fn tldakit_tensor_copy_data(
    t: *const TldakitTensor,
    out: *mut f64,
    len: usize,
) -> TldakitStatus {
    guard(|| {
        let Some(tensor) = t.as_ref() else {
            remember_error("null tensor handle");
            return TldakitStatus::NullPointer;
        };
        if out.is_null() {
            remember_error("null output buffer");
            return TldakitStatus::NullPointer;
        }
        let data = tensor.0.data();
        if len != data.len() {
            return fail(Error::dims(format!(
                "output buffer holds {len} values but the tensor has {}",
                data.len()
            )));
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(data);
        TldakitStatus::Ok
    })
}

/// Read a real TNS3 file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tldakit_tensor_read_tns3(
    path: *const c_char,
    out: *mut *mut TldakitTensor,
) -> TldakitStatus {
    guard(|| {
        if out.is_null() {
            remember_error("null output pointer");
            return TldakitStatus::NullPointer;
        }
        let path = match path_from(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let open = || -> tldakit::Result<Tensor3> {
            read_tns3_real(&mut BufReader::new(File::open(&path)?))
        };
        match open() {
            Ok(t) => {
                *out = Box::into_raw(Box::new(TldakitTensor(t)));
                TldakitStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Write a tensor as a real TNS3 file.
///
/// # Safety
/// `t` must be a live handle, `path` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tldakit_tensor_write_tns3(
    t: *const TldakitTensor,
    path: *const c_char,
) -> TldakitStatus {
    guard(|| {
        let Some(tensor) = t.as_ref() else {
            remember_error("null tensor handle");
            return TldakitStatus::NullPointer;
        };
        let path = match path_from(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let write = || -> tldakit::Result<()> {
            let mut w = BufWriter::new(File::create(&path)?);
            write_tns3(&mut w, &Tns3Payload::Real(tensor.0.clone()))?;
            w.flush()?;
            Ok(())
        };
        match write() {
            Ok(()) => TldakitStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// `a *_L b` under the selected built-in transform.
///
/// # Safety
/// `a` and `b` must be live handles, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tldakit_lproduct(
    a: *const TldakitTensor,
    b: *const TldakitTensor,
    transform: TldakitTransform,
    out: *mut *mut TldakitTensor,
) -> TldakitStatus {
    guard(|| {
        let (Some(a), Some(b)) = (a.as_ref(), b.as_ref()) else {
            remember_error("null tensor handle");
            return TldakitStatus::NullPointer;
        };
        if out.is_null() {
            remember_error("null output pointer");
            return TldakitStatus::NullPointer;
        }
        let compute = || -> tldakit::Result<Tensor3> {
            let l = transform_for(transform, a.0.dims().2)?;
            l.product(&a.0, &b.0)
        };
        match compute() {
            Ok(c) => {
                *out = Box::into_raw(Box::new(TldakitTensor(c)));
                TldakitStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

unsafe fn labels_from(labels: *const usize, n: usize) -> Result<Vec<usize>, TldakitStatus> {
    if labels.is_null() {
        remember_error("null labels pointer");
        return Err(TldakitStatus::NullPointer);
    }
    Ok(std::slice::from_raw_parts(labels, n).to_vec())
}

unsafe fn train_common(
    x: *const TldakitTensor,
    labels: *const usize,
    n_labels: usize,
    transform: TldakitTransform,
    weight_between: bool,
    out: *mut *mut TldakitModel,
    f: impl FnOnce(&LabeledTensorDataset, &LinearTransform, &TldaOptions) -> tldakit::Result<TldaModel>,
) -> TldakitStatus {
    let Some(x) = x.as_ref() else {
        remember_error("null tensor handle");
        return TldakitStatus::NullPointer;
    };
    if out.is_null() {
        remember_error("null output pointer");
        return TldakitStatus::NullPointer;
    }
    let labels = match labels_from(labels, n_labels) {
        Ok(l) => l,
        Err(s) => return s,
    };
    let run = || -> tldakit::Result<TldaModel> {
        let ds = LabeledTensorDataset::new(x.0.clone(), labels)?;
        let l = transform_for(transform, x.0.dims().2)?;
        let opts = TldaOptions {
            weight_between,
            ..TldaOptions::default()
        };
        f(&ds, &l, &opts)
    };
    match run() {
        Ok(model) => {
            *out = Box::into_raw(Box::new(TldakitModel(model)));
            TldakitStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Trace-ratio training. `labels` are per-sample class ids in `1..=c`,
/// one per lateral slice of `x`.
///
/// # Safety
/// `x` must be a live handle, `labels` readable for `n_labels` entries,
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tldakit_train_trace_ratio(
    x: *const TldakitTensor,
    labels: *const usize,
    n_labels: usize,
    k: usize,
    transform: TldakitTransform,
    weight_between: bool,
    out: *mut *mut TldakitModel,
) -> TldakitStatus {
    guard(|| {
        train_common(x, labels, n_labels, transform, weight_between, out, |ds, l, opts| {
            train_trace_ratio(ds, k, l, opts)
        })
    })
}

/// Ratio-trace training with ridge `gamma`; the subspace width is inferred
/// from the between-scatter rank.
///
/// # Safety
/// As for [`tldakit_train_trace_ratio`].
#[no_mangle]
pub unsafe extern "C" fn tldakit_train_ratio_trace(
    x: *const TldakitTensor,
    labels: *const usize,
    n_labels: usize,
    gamma: f64,
    transform: TldakitTransform,
    weight_between: bool,
    out: *mut *mut TldakitModel,
) -> TldakitStatus {
    guard(|| {
        train_common(x, labels, n_labels, transform, weight_between, out, |ds, l, opts| {
            train_ratio_trace(ds, gamma, l, opts)
        })
    })
}

/// # Safety
/// `m` must be null or a pointer returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tldakit_model_free(m: *mut TldakitModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be a live model handle, `k` writable.
#[no_mangle]
pub unsafe extern "C" fn tldakit_model_k(m: *const TldakitModel, k: *mut usize) -> TldakitStatus {
    guard(|| {
        let Some(model) = m.as_ref() else {
            remember_error("null model handle");
            return TldakitStatus::NullPointer;
        };
        if k.is_null() {
            remember_error("null output pointer");
            return TldakitStatus::NullPointer;
        }
        *k = model.0.k();
        TldakitStatus::Ok
    })
}

/// # Safety
/// `m` must be a live model handle, `path` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tldakit_model_save(
    m: *const TldakitModel,
    path: *const c_char,
) -> TldakitStatus {
    guard(|| {
        let Some(model) = m.as_ref() else {
            remember_error("null model handle");
            return TldakitStatus::NullPointer;
        };
        let path = match path_from(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let write = || -> tldakit::Result<()> {
            let mut w = BufWriter::new(File::create(&path)?);
            model.0.save(&mut w)?;
            w.flush()?;
            Ok(())
        };
        match write() {
            Ok(()) => TldakitStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `path` must be a valid NUL-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tldakit_model_load(
    path: *const c_char,
    out: *mut *mut TldakitModel,
) -> TldakitStatus {
    guard(|| {
        if out.is_null() {
            remember_error("null output pointer");
            return TldakitStatus::NullPointer;
        }
        let path = match path_from(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let read = || -> tldakit::Result<TldaModel> {
            TldaModel::load(&mut BufReader::new(File::open(&path)?))
        };
        match read() {
            Ok(model) => {
                *out = Box::into_raw(Box::new(TldakitModel(model)));
                TldakitStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Project samples (`n1 x m x n3`) to `K x m x n3`.
///
/// # Safety
/// `m` and `samples` must be live handles, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tldakit_model_project(
    m: *const TldakitModel,
    samples: *const TldakitTensor,
    out: *mut *mut TldakitTensor,
) -> TldakitStatus {
    guard(|| {
        let (Some(model), Some(samples)) = (m.as_ref(), samples.as_ref()) else {
            remember_error("null handle");
            return TldakitStatus::NullPointer;
        };
        if out.is_null() {
            remember_error("null output pointer");
            return TldakitStatus::NullPointer;
        }
        match model.0.project(&samples.0) {
            Ok(t) => {
                *out = Box::into_raw(Box::new(TldakitTensor(t)));
                TldakitStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Project raw probes through the model and 1-NN classify them against a
/// projected gallery. Writes one predicted label per probe.
///
/// # Safety
/// All handles must be live; `gallery_labels` must hold `n_gallery` entries
/// and `predictions` must have room for one label per probe lateral slice.
#[no_mangle]
pub unsafe extern "C" fn tldakit_classify(
    m: *const TldakitModel,
    gallery_projected: *const TldakitTensor,
    gallery_labels: *const usize,
    n_gallery: usize,
    probes: *const TldakitTensor,
    metric: TldakitMetric,
    predictions: *mut usize,
    n_predictions: usize,
) -> TldakitStatus {
    guard(|| {
        let (Some(model), Some(gallery), Some(probes_t)) =
            (m.as_ref(), gallery_projected.as_ref(), probes.as_ref())
        else {
            remember_error("null handle");
            return TldakitStatus::NullPointer;
        };
        if predictions.is_null() {
            remember_error("null predictions buffer");
            return TldakitStatus::NullPointer;
        }
        let labels = match labels_from(gallery_labels, n_gallery) {
            Ok(l) => l,
            Err(s) => return s,
        };
        if n_predictions != probes_t.0.dims().1 {
            return fail(Error::dims(format!(
                "predictions buffer holds {n_predictions} slots but there are {} probes",
                probes_t.0.dims().1
            )));
        }
        let metric = match metric {
            TldakitMetric::Frobenius => DistanceMetric::Frobenius,
            TldakitMetric::Mad => DistanceMetric::Mad,
        };
        let run = || -> tldakit::Result<Vec<usize>> {
            let projected = model.0.project(&probes_t.0)?;
            let gallery = ProjectedGallery {
                data: gallery.0.clone(),
                labels,
            };
            Ok(classify_projected(&gallery, &projected, metric)?.predictions)
        };
        match run() {
            Ok(preds) => {
                std::slice::from_raw_parts_mut(predictions, n_predictions)
                    .copy_from_slice(&preds);
                TldakitStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Load a dataset (TNS3 + labels sidecar). Labels are written to
/// `labels_out` when non-null (must hold one entry per sample).
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` writable;
/// `labels_out` null or writable for `labels_len` entries.
#[no_mangle]
pub unsafe extern "C" fn tldakit_dataset_read(
    path: *const c_char,
    out: *mut *mut TldakitTensor,
    labels_out: *mut usize,
    labels_len: usize,
) -> TldakitStatus {
    guard(|| {
        if out.is_null() {
            remember_error("null output pointer");
            return TldakitStatus::NullPointer;
        }
        let path = match path_from(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match load_bundle(&path) {
            Ok(bundle) => {
                if !labels_out.is_null() {
                    if labels_len != bundle.labels.len() {
                        return fail(Error::dims(format!(
                            "labels buffer holds {labels_len} slots but the dataset has {}",
                            bundle.labels.len()
                        )));
                    }
                    std::slice::from_raw_parts_mut(labels_out, labels_len)
                        .copy_from_slice(&bundle.labels);
                }
                *out = Box::into_raw(Box::new(TldakitTensor(bundle.tensor)));
                TldakitStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}
