use std::ffi::{c_char, CStr};
use std::path::Path;

use sigsoftmax::rank::RankReport;
use sigsoftmax::synthetic::{bigram_language_from_text, compare_activations, generate_language, SyntheticLanguage};
use sigsoftmax::{bottleneck_counterexample, serialize_report, ActivationKind, RankTrial, TrainConfig};

use crate::activation::{activation, kind_from_code, SsmActivation};
use crate::error::{fail, guard, into_c_string, non_null, slice, slice_mut, IntoStatus, SsmStatus};

/// Opaque rank analysis result.
pub struct SsmRankReport {
    report: RankReport,
}

/// Opaque synthetic language.
pub struct SsmLanguage {
    language: SyntheticLanguage,
}

/// Singular values, numerical rank and the softmax bound check for a
/// row-major `rows x cols` matrix, typically a log-output matrix whose
/// columns are log-probability vectors.
///
/// # Safety
/// `values` must point to `rows * cols` doubles; `out` to storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn ssm_rank_analyze(
    values: *const f64,
    rows: usize,
    cols: usize,
    d: usize,
    has_bias: bool,
    out: *mut *mut SsmRankReport,
) -> SsmStatus {
    guard(|| {
        non_null(out, "out")?;
        let values = slice(values, rows * cols, "values")?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(fail(SsmStatus::NonFinite, "matrix has non-finite entries"));
        }
        let report = RankReport::from_row_major(rows, cols, values, d, has_bias);
        *out = Box::into_raw(Box::new(SsmRankReport { report }));
        Ok(())
    })
}

/// Random log-output matrix with `M = classes`, hidden width `d` and `samples`
/// Gaussian inputs, followed by its rank analysis. Deterministic in `seed`.
///
/// # Safety
/// `h` must be a live activation handle; `out` must point to storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn ssm_rank_trial(
    h: *const SsmActivation,
    classes: usize,
    d: usize,
    samples: usize,
    has_bias: bool,
    seed: u64,
    out: *mut *mut SsmRankReport,
) -> SsmStatus {
    guard(|| {
        non_null(out, "out")?;
        let act = activation(h)?;
        let trial = RankTrial {
            kind: act.kind,
            classes,
            hidden: d,
            samples,
            bias: has_bias,
            seed,
        };
        let report = trial.run().or_status()?;
        *out = Box::into_raw(Box::new(SsmRankReport { report }));
        Ok(())
    })
}

unsafe fn rank_report<'a>(h: *const SsmRankReport) -> Result<&'a RankReport, SsmStatus> {
    non_null(h, "report")?;
    Ok(&(*h).report)
}

/// Numerical rank, or `SIZE_MAX` for a NULL handle.
///
/// # Safety
/// `h` must be NULL or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn ssm_rank_report_numerical_rank(h: *const SsmRankReport) -> usize {
    rank_report(h).map_or(usize::MAX, |r| r.numerical_rank)
}

/// # Safety
/// `h` must be NULL or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn ssm_rank_report_bound(h: *const SsmRankReport) -> usize {
    rank_report(h).map_or(usize::MAX, |r| r.bound)
}

/// # Safety
/// `h` must be NULL or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn ssm_rank_report_bound_respected(h: *const SsmRankReport) -> bool {
    rank_report(h).is_ok_and(|r| r.bound_respected)
}

/// # Safety
/// `h` must be NULL or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn ssm_rank_report_threshold(h: *const SsmRankReport) -> f64 {
    rank_report(h).map_or(f64::NAN, |r| r.threshold)
}

/// Copies the singular values (descending) into `buf`. `count` receives the
/// total number; `SSM_STATUS_BUFFER_TOO_SMALL` is returned if `capacity` is
/// smaller, with nothing copied.
///
/// # Safety
/// `buf` must point to `capacity` doubles (may be NULL when `capacity` is 0);
/// `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ssm_rank_report_singular_values(
    h: *const SsmRankReport,
    buf: *mut f64,
    capacity: usize,
    count: *mut usize,
) -> SsmStatus {
    guard(|| {
        let report = rank_report(h)?;
        non_null(count, "count")?;
        let sv = &report.singular_values;
        *count = sv.len();
        if capacity < sv.len() {
            return Err(fail(
                SsmStatus::BufferTooSmall,
                format!("need {} values, buffer holds {capacity}", sv.len()),
            ));
        }
        if !sv.is_empty() {
            slice_mut(buf, sv.len(), "buf")?.copy_from_slice(sv);
        }
        Ok(())
    })
}

/// JSON rendering of the report; free with `ssm_string_free`.
///
/// # Safety
/// `h` must be a live report handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ssm_rank_report_json(h: *const SsmRankReport, out: *mut *mut c_char) -> SsmStatus {
    guard(|| {
        non_null(out, "out")?;
        let json = serialize_report(rank_report(h)?).or_status()?;
        *out = into_c_string(json)?;
        Ok(())
    })
}

/// # Safety
/// `h` must be NULL or a report handle, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn ssm_rank_report_free(h: *mut SsmRankReport) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Determinant of the 3x3 log-output matrix built from `k * [1, 2, 0]` for
/// `k = 0, 1, -1`. Nonzero means three independent outputs from a
/// one-dimensional input space.
///
/// # Safety
/// `h` must be a live activation handle; `determinant` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ssm_counterexample_determinant(h: *const SsmActivation, determinant: *mut f64) -> SsmStatus {
    guard(|| {
        let act = activation(h)?;
        non_null(determinant, "determinant")?;
        *determinant = bottleneck_counterexample(act.kind).determinant;
        Ok(())
    })
}

/// Generated language with `contexts` rows over `classes` tokens whose logits
/// have rank `logit_rank`.
///
/// # Safety
/// `out` must point to storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn ssm_language_generate(
    contexts: usize,
    classes: usize,
    logit_rank: usize,
    concentration: f64,
    seed: u64,
    out: *mut *mut SsmLanguage,
) -> SsmStatus {
    guard(|| {
        non_null(out, "out")?;
        let language = generate_language(contexts, classes, logit_rank, concentration, seed).or_status()?;
        *out = Box::into_raw(Box::new(SsmLanguage { language }));
        Ok(())
    })
}

/// Add-`alpha` bigram language from a UTF-8 text file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ssm_language_from_bigram_file(
    path: *const c_char,
    vocab_cap: usize,
    alpha: f64,
    out: *mut *mut SsmLanguage,
) -> SsmStatus {
    guard(|| {
        non_null(out, "out")?;
        non_null(path, "path")?;
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| fail(SsmStatus::InvalidArgument, "path is not UTF-8"))?;
        let language = bigram_language_from_text(Path::new(path), vocab_cap, alpha).or_status()?;
        *out = Box::into_raw(Box::new(SsmLanguage { language }));
        Ok(())
    })
}

unsafe fn language<'a>(h: *const SsmLanguage) -> Result<&'a SyntheticLanguage, SsmStatus> {
    non_null(h, "language")?;
    Ok(&(*h).language)
}

/// # Safety
/// `h` must be NULL or a live language handle.
#[no_mangle]
pub unsafe extern "C" fn ssm_language_contexts(h: *const SsmLanguage) -> usize {
    language(h).map_or(0, |l| l.contexts())
}

/// # Safety
/// `h` must be NULL or a live language handle.
#[no_mangle]
pub unsafe extern "C" fn ssm_language_classes(h: *const SsmLanguage) -> usize {
    language(h).map_or(0, |l| l.classes())
}

/// # Safety
/// `h` must be NULL or a live language handle.
#[no_mangle]
pub unsafe extern "C" fn ssm_language_true_log_rank(h: *const SsmLanguage) -> usize {
    language(h).map_or(0, |l| l.true_log_rank())
}

/// Copies the row-major `contexts x classes` true distribution into `buf`.
///
/// # Safety
/// `buf` must point to `contexts * classes` doubles.
#[no_mangle]
pub unsafe extern "C" fn ssm_language_true_probs(h: *const SsmLanguage, buf: *mut f64) -> SsmStatus {
    guard(|| {
        let lang = language(h)?;
        let (rows, cols) = (lang.contexts(), lang.classes());
        let out = slice_mut(buf, rows * cols, "buf")?;
        for (n, row) in out.chunks_exact_mut(cols).enumerate() {
            for (i, v) in row.iter_mut().enumerate() {
                *v = lang.true_probs()[(n, i)];
            }
        }
        Ok(())
    })
}

/// # Safety
/// `h` must be NULL or a language handle, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn ssm_language_free(h: *mut SsmLanguage) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Fits one factor model per `(kind, seed)` and returns the comparison table
/// as JSON (free with `ssm_string_free`). `kinds` holds `SsmKind` codes with
/// default parameters.
///
/// # Safety
/// `kinds` must point to `n_kinds` ints, `seeds` to `n_seeds` values, `out` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn ssm_compare_activations_json(
    h: *const SsmLanguage,
    d: usize,
    has_bias: bool,
    kinds: *const i32,
    n_kinds: usize,
    learning_rate: f64,
    max_epochs: usize,
    tol: f64,
    seeds: *const u64,
    n_seeds: usize,
    out: *mut *mut c_char,
) -> SsmStatus {
    guard(|| {
        non_null(out, "out")?;
        let lang = language(h)?;
        let kinds: Vec<ActivationKind> = slice(kinds, n_kinds, "kinds")?
            .iter()
            .map(|&code| {
                let param = if code == 2 { sigsoftmax::activation::DEFAULT_RELU_EPSILON } else { 0.0 };
                kind_from_code(code, param)
            })
            .collect::<Result<_, _>>()?;
        let seeds = slice(seeds, n_seeds, "seeds")?;
        let config = TrainConfig {
            learning_rate,
            max_epochs,
            tol,
            seed: 0,
        };
        let table = compare_activations(lang, d, has_bias, &kinds, &config, seeds).or_status()?;
        *out = into_c_string(serialize_report(&table).or_status()?)?;
        Ok(())
    })
}
