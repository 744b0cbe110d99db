//! C ABI over the `namegender` core.
//!
//! Tables and models cross the boundary as opaque pointers that the caller
//! frees with the matching `*_free` function. Every fallible call returns an
//! [`NgStatus`]; on failure [`ng_last_error`] holds a message for the calling
//! thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use namegender::corpus::NameType;
use namegender::{ConfusionCounts, FrequencyTable, GenderCounts, GenderLabel, MleModel, Tau};

/// Opaque frequency table.
pub struct NgTable(FrequencyTable);

/// Opaque trained model.
pub struct NgModel(MleModel);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NgStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    InvalidInput = 4,
    RejectedName = 5,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NgLabel {
    Female = 0,
    Male = 1,
    Ambiguous = 2,
    Unknown = 3,
}

impl From<GenderLabel> for NgLabel {
    fn from(l: GenderLabel) -> Self {
        match l {
            GenderLabel::Female => NgLabel::Female,
            GenderLabel::Male => NgLabel::Male,
            GenderLabel::Ambiguous => NgLabel::Ambiguous,
            GenderLabel::Unknown => NgLabel::Unknown,
        }
    }
}

/// Confusion counts; undecided means Ambiguous or Unknown.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NgCounts {
    pub tf: u64,
    pub tm: u64,
    pub ff: u64,
    pub fm: u64,
    pub undecided_female: u64,
    pub undecided_male: u64,
}

/// Percentages; NA is NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NgMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub gbe: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(NgStatus, String);

impl Failure {
    fn new(status: NgStatus, msg: impl ToString) -> Self {
        Failure(status, msg.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NgStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            NgStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(NgStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(NgStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::new(NgStatus::NullArgument, format!("{what} is null")))
}

fn out_arg<T>(p: *mut T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(Failure::new(NgStatus::NullArgument, format!("{what} is null")));
    }
    Ok(())
}

/// Message for the last failing call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ng_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ng_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a frequency table file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ng_table_load(path: *const c_char, out: *mut *mut NgTable) -> NgStatus {
    guard(|| {
        out_arg(out, "out")?;
        let path = PathBuf::from(str_arg(path, "path")?);
        let table = FrequencyTable::load(&path).map_err(|e| Failure::new(NgStatus::Io, e))?;
        *out = Box::into_raw(Box::new(NgTable(table)));
        Ok(())
    })
}

/// Number of distinct names in the table, or 0 for null.
///
/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ng_table_len(table: *const NgTable) -> usize {
    table.as_ref().map_or(0, |t| t.0.len())
}

/// # Safety
/// `table` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ng_table_free(table: *mut NgTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Trains a model from a table; full-name tables are projected to first names.
/// The table stays owned by the caller.
///
/// # Safety
/// `table` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ng_model_train(table: *const NgTable, tau: f64, out: *mut *mut NgModel) -> NgStatus {
    guard(|| {
        out_arg(out, "out")?;
        let table = &ref_arg(table, "table")?.0;
        let table = if table.name_type() == NameType::Full { table.to_first_names() } else { table.clone() };
        let tau = Tau::new(tau).map_err(|e| Failure::new(NgStatus::InvalidInput, e))?;
        let model = MleModel::train(table, tau).map_err(|e| Failure::new(NgStatus::InvalidInput, e))?;
        *out = Box::into_raw(Box::new(NgModel(model)));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ng_model_load(path: *const c_char, out: *mut *mut NgModel) -> NgStatus {
    guard(|| {
        out_arg(out, "out")?;
        let path = PathBuf::from(str_arg(path, "path")?);
        let model = MleModel::load(&path).map_err(|e| Failure::new(NgStatus::Io, e))?;
        *out = Box::into_raw(Box::new(NgModel(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ng_model_save(model: *const NgModel, path: *const c_char) -> NgStatus {
    guard(|| {
        let model = &ref_arg(model, "model")?.0;
        let path = PathBuf::from(str_arg(path, "path")?);
        model.save(&path).map_err(|e| Failure::new(NgStatus::Io, e))
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ng_model_free(model: *mut NgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Normalizes and classifies a raw name. `p_female` receives NaN when the
/// name is unknown to the model. A name rejected by the cleaning rules
/// returns `RejectedName`.
///
/// # Safety
/// `model` must be a live handle, `name` a NUL-terminated string and both
/// outputs writable pointers.
#[no_mangle]
pub unsafe extern "C" fn ng_model_classify(
    model: *const NgModel,
    name: *const c_char,
    label: *mut NgLabel,
    p_female: *mut f64,
) -> NgStatus {
    guard(|| {
        out_arg(label, "label")?;
        out_arg(p_female, "p_female")?;
        let model = &ref_arg(model, "model")?.0;
        let raw = str_arg(name, "name")?;
        let name = namegender::normalize_name(raw)
            .map_err(|r| Failure::new(NgStatus::RejectedName, format!("`{raw}` rejected: {}", r.as_str())))?;
        let pred = model.classify(&name);
        *label = pred.label.into();
        *p_female = pred.p_female.unwrap_or(f64::NAN);
        Ok(())
    })
}

/// Female share `female / (female + male)`.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ng_mle_female(female: u64, male: u64, out: *mut f64) -> NgStatus {
    guard(|| {
        out_arg(out, "out")?;
        *out = namegender::mle_female(GenderCounts::new(female, male))
            .map_err(|e| Failure::new(NgStatus::InvalidInput, e))?;
        Ok(())
    })
}

/// Metrics from confusion counts.
///
/// # Safety
/// `counts` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ng_metrics(counts: *const NgCounts, out: *mut NgMetrics) -> NgStatus {
    guard(|| {
        out_arg(out, "out")?;
        let c = ref_arg(counts, "counts")?;
        let counts = ConfusionCounts {
            tf: c.tf,
            tm: c.tm,
            ff: c.ff,
            fm: c.fm,
            undecided_female: c.undecided_female,
            undecided_male: c.undecided_male,
        };
        let m = namegender::metrics(&counts).map_err(|e| Failure::new(NgStatus::InvalidInput, e))?;
        let na = |v: Option<f64>| v.unwrap_or(f64::NAN);
        *out = NgMetrics {
            accuracy: na(m.accuracy),
            precision: na(m.precision),
            recall: na(m.recall),
            f1: na(m.f1),
            gbe: na(m.gbe),
        };
        Ok(())
    })
}
