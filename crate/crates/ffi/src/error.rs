use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sigsoftmax::Error;

/// Status code returned by every fallible function. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsmStatus {
    Ok = 0,
    NullPointer = -1,
    InvalidArgument = -2,
    DimensionMismatch = -3,
    NonFinite = -4,
    Io = -5,
    BufferTooSmall = -6,
    Panic = -99,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

pub(crate) fn set_last_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    let c = CString::new(text).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

pub(crate) fn status_for(err: &Error) -> SsmStatus {
    match err {
        Error::DimensionMismatch { .. } => SsmStatus::DimensionMismatch,
        Error::NonFinite { .. } | Error::NonFiniteField(_) => SsmStatus::NonFinite,
        Error::Io { .. } | Error::EmptyCorpus(_) => SsmStatus::Io,
        _ => SsmStatus::InvalidArgument,
    }
}

pub(crate) fn fail(status: SsmStatus, message: impl Into<String>) -> SsmStatus {
    set_last_error(message);
    status
}

/// Runs `body`, translating errors and panics into status codes.
pub(crate) fn guard<F>(body: F) -> SsmStatus
where
    F: FnOnce() -> Result<(), SsmStatus>,
{
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => SsmStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(SsmStatus::Panic, "internal panic"),
    }
}

pub(crate) trait IntoStatus<T> {
    fn or_status(self) -> Result<T, SsmStatus>;
}

impl<T> IntoStatus<T> for Result<T, Error> {
    fn or_status(self) -> Result<T, SsmStatus> {
        self.map_err(|e| fail(status_for(&e), e.to_string()))
    }
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn ssm_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Frees a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from a `*_json` function of this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ssm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

pub(crate) fn into_c_string(text: String) -> Result<*mut c_char, SsmStatus> {
    CString::new(text)
        .map(CString::into_raw)
        .map_err(|_| fail(SsmStatus::InvalidArgument, "string contains NUL"))
}

pub(crate) fn non_null<T>(p: *const T, name: &str) -> Result<(), SsmStatus> {
    if p.is_null() {
        Err(fail(SsmStatus::NullPointer, format!("`{name}` is NULL")))
    } else {
        Ok(())
    }
}

/// Borrows `len` values from a C array.
///
/// # Safety
/// `p` must be non-null and point to `len` readable values.
pub(crate) unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], SsmStatus> {
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be non-null and point to `len` writable values.
pub(crate) unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], SsmStatus> {
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts_mut(p, len))
}
