use sigsoftmax::{
    finite_difference_log_jacobian, forward, log_forward, log_jacobian, ActivationKind, LogitVector,
};

use crate::error::{fail, guard, non_null, slice, slice_mut, IntoStatus, SsmStatus};

/// Activation codes accepted by `ssm_activation_new`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsmKind {
    Softmax = 0,
    Sigsoftmax = 1,
    ReluBased = 2,
    SigmoidBased = 3,
}

/// Opaque activation configuration.
pub struct SsmActivation {
    pub(crate) kind: ActivationKind,
}

pub(crate) fn kind_from_code(code: i32, param: f64) -> Result<ActivationKind, SsmStatus> {
    let kind = match code {
        0 => ActivationKind::Softmax,
        1 => ActivationKind::Sigsoftmax { shift: param },
        2 => ActivationKind::ReluBased { epsilon: param },
        3 => ActivationKind::SigmoidBased,
        other => return Err(fail(SsmStatus::InvalidArgument, format!("unknown kind code {other}"))),
    };
    kind.validate().or_status()?;
    Ok(kind)
}

/// # Safety
/// `h` must be NULL or a live handle from `ssm_activation_new`.
pub(crate) unsafe fn activation<'a>(h: *const SsmActivation) -> Result<&'a SsmActivation, SsmStatus> {
    non_null(h, "activation")?;
    Ok(&*h)
}

/// Creates an activation handle. `kind` is an `SsmKind` value; `param` is the sigmoid shift for
/// `SSM_KIND_SIGSOFTMAX` (0 for the plain function), epsilon for
/// `SSM_KIND_RELU_BASED` (1e-8 is the usual choice) and ignored otherwise.
///
/// # Safety
/// `out` must point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn ssm_activation_new(kind: i32, param: f64, out: *mut *mut SsmActivation) -> SsmStatus {
    guard(|| {
        non_null(out, "out")?;
        let kind = kind_from_code(kind, param)?;
        *out = Box::into_raw(Box::new(SsmActivation { kind }));
        Ok(())
    })
}

/// # Safety
/// `h` must be NULL or a handle from `ssm_activation_new`, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn ssm_activation_free(h: *mut SsmActivation) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

unsafe fn logits(z: *const f64, len: usize) -> Result<LogitVector, SsmStatus> {
    let values = slice(z, len, "z")?;
    LogitVector::new(values.to_vec()).or_status()
}

/// Writes `f(z)` (length `len`) into `out`.
///
/// # Safety
/// `z` and `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ssm_forward(h: *const SsmActivation, z: *const f64, len: usize, out: *mut f64) -> SsmStatus {
    guard(|| {
        let act = activation(h)?;
        let z = logits(z, len)?;
        slice_mut(out, len, "out")?.copy_from_slice(&forward(act.kind, &z));
        Ok(())
    })
}

/// Writes `log f(z)` into `out`.
///
/// # Safety
/// `z` and `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ssm_log_forward(
    h: *const SsmActivation,
    z: *const f64,
    len: usize,
    out: *mut f64,
) -> SsmStatus {
    guard(|| {
        let act = activation(h)?;
        let z = logits(z, len)?;
        slice_mut(out, len, "out")?.copy_from_slice(&log_forward(act.kind, &z));
        Ok(())
    })
}

/// Writes the `len x len` Jacobian of `log f` at `z`, row-major, into `out`.
/// `large_magnitude` (may be NULL) is set when an entry exceeds 1e6.
///
/// # Safety
/// `z` must point to `len` doubles, `out` to `len * len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ssm_log_jacobian(
    h: *const SsmActivation,
    z: *const f64,
    len: usize,
    out: *mut f64,
    large_magnitude: *mut bool,
) -> SsmStatus {
    guard(|| {
        let act = activation(h)?;
        let z = logits(z, len)?;
        let jac = log_jacobian(act.kind, &z);
        slice_mut(out, len * len, "out")?.copy_from_slice(jac.as_row_major());
        if !large_magnitude.is_null() {
            *large_magnitude = jac.large_magnitude;
        }
        Ok(())
    })
}

/// Central-difference estimate of the same Jacobian.
///
/// # Safety
/// `z` must point to `len` doubles, `out` to `len * len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ssm_finite_difference_log_jacobian(
    h: *const SsmActivation,
    z: *const f64,
    len: usize,
    step: f64,
    out: *mut f64,
) -> SsmStatus {
    guard(|| {
        let act = activation(h)?;
        let z = logits(z, len)?;
        let jac = finite_difference_log_jacobian(act.kind, &z, step).or_status()?;
        slice_mut(out, len * len, "out")?.copy_from_slice(jac.as_row_major());
        Ok(())
    })
}

/// Stable `log(1 + exp(x))`.
#[no_mangle]
pub extern "C" fn ssm_softplus(x: f64) -> f64 {
    sigsoftmax::softplus(x)
}

/// `log sum exp(z)`; returns -inf for `len == 0` or NULL `z`.
///
/// # Safety
/// `z` must be NULL or point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ssm_logsumexp(z: *const f64, len: usize) -> f64 {
    if z.is_null() {
        return f64::NEG_INFINITY;
    }
    sigsoftmax::logsumexp(std::slice::from_raw_parts(z, len))
}
