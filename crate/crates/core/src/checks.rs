//! Randomized checks behind the `grad-check`, `limit-check` and
//! `counterexample` subcommands.

use serde::Serialize;

use crate::activation::{
    finite_difference_log_jacobian, forward, log_jacobian, ActivationKind, LogitVector,
};
use crate::error::{Error, Result};
use crate::prng::Prng;
use crate::rank::{bottleneck_counterexample, Counterexample};
use crate::report::{check_real, check_reals, Report};

/// Largest accepted gap between the closed-form and finite-difference Jacobians.
pub const GRADIENT_TOLERANCE: f64 = 1e-6;

/// ReLU-based draws with any coordinate closer than this to the kink are redrawn.
pub const DEFAULT_KINK_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub kind: ActivationKind,
    pub dim: usize,
    pub trials: usize,
    pub step: f64,
    pub seed: u64,
    pub tolerance: f64,
    /// Largest `|analytic - numeric|` over all entries and trials.
    pub max_abs_error: f64,
    /// Largest `|analytic - numeric| / max(1, |analytic|)`.
    pub max_scaled_error: f64,
    /// Which error the pass decision uses: absolute for the stable kinds,
    /// scaled for the ReLU-based kind, whose entries grow like `1/z` near the kink.
    pub criterion: &'static str,
    pub worst_trial: usize,
    pub worst_entry: [usize; 2],
    pub worst_point: Vec<f64>,
    pub redrawn_near_kink: usize,
    pub passed: bool,
}

impl Report for GradCheckReport {
    fn non_finite_field(&self) -> Option<String> {
        check_real("max_abs_error", self.max_abs_error)
            .or_else(|| check_real("max_scaled_error", self.max_scaled_error))
            .or_else(|| check_reals("worst_point", &self.worst_point))
    }
}

/// Compares [`log_jacobian`] against central differences on `trials` logit
/// vectors drawn uniformly from `[-5, 5]^dim`.
pub fn gradient_check(
    kind: ActivationKind,
    dim: usize,
    trials: usize,
    step: f64,
    seed: u64,
    kink_margin: f64,
) -> Result<GradCheckReport> {
    kind.validate()?;
    if dim < 2 {
        return Err(Error::TooFewClasses(dim));
    }
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    let relu = matches!(kind, ActivationKind::ReluBased { .. });
    let mut prng = Prng::new(seed);
    let mut report = GradCheckReport {
        kind,
        dim,
        trials,
        step,
        seed,
        tolerance: GRADIENT_TOLERANCE,
        max_abs_error: 0.0,
        max_scaled_error: 0.0,
        criterion: if relu { "scaled" } else { "absolute" },
        worst_trial: 0,
        worst_entry: [0, 0],
        worst_point: Vec::new(),
        redrawn_near_kink: 0,
        passed: false,
    };
    let mut worst_key = -1.0;
    for trial in 0..trials {
        let z = loop {
            let z: Vec<f64> = (0..dim).map(|_| prng.uniform_range(-5.0, 5.0)).collect();
            if relu && z.iter().any(|v| v.abs() < kink_margin) {
                report.redrawn_near_kink += 1;
                continue;
            }
            break LogitVector::new(z)?;
        };
        let exact = log_jacobian(kind, &z);
        let numeric = finite_difference_log_jacobian(kind, &z, step)?;
        for i in 0..dim {
            for j in 0..dim {
                let a = exact.get(i, j);
                let abs = (a - numeric.get(i, j)).abs();
                let scaled = abs / a.abs().max(1.0);
                report.max_abs_error = report.max_abs_error.max(abs);
                report.max_scaled_error = report.max_scaled_error.max(scaled);
                let key = if relu { scaled } else { abs };
                if key > worst_key {
                    worst_key = key;
                    report.worst_trial = trial;
                    report.worst_entry = [i, j];
                    report.worst_point = z.to_vec();
                }
            }
        }
    }
    report.passed = worst_key <= GRADIENT_TOLERANCE;
    Ok(report)
}

/// Allowed increase between consecutive limit-check differences.
pub const MONOTONE_JITTER: f64 = 1e-12;
/// Largest accepted difference at `k = 30`.
pub const LIMIT_TOLERANCE: f64 = 1e-10;
pub const LIMIT_CHECK_K: usize = 30;

#[derive(Debug, Clone, Serialize)]
pub struct LimitTrial {
    pub logits: Vec<f64>,
    /// `||sigsoftmax(z + k 1) - softmax(z)||_inf` for `k = 0..=kmax`.
    pub differences: Vec<f64>,
    pub monotone: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitCheckReport {
    pub dim: usize,
    pub kmax: usize,
    pub seed: u64,
    pub trials: Vec<LimitTrial>,
    pub monotone: bool,
    /// Largest difference at `k = 30` over all trials, when `kmax >= 30`.
    pub max_difference_at_30: Option<f64>,
    pub passed: bool,
}

impl Report for LimitCheckReport {
    fn non_finite_field(&self) -> Option<String> {
        self.trials.iter().enumerate().find_map(|(i, t)| {
            check_reals("logits", &t.logits)
                .or_else(|| check_reals("differences", &t.differences))
                .map(|f| format!("trials[{i}].{f}"))
        })
    }
}

/// Distance between sigsoftmax on `z + k 1` and softmax on `z` as `k` grows.
pub fn limit_differences(z: &LogitVector, kmax: usize) -> Result<Vec<f64>> {
    let target = forward(ActivationKind::Softmax, z);
    (0..=kmax)
        .map(|k| {
            let shifted = z.shifted(k as f64)?;
            let p = forward(ActivationKind::sigsoftmax(), &shifted);
            Ok(p.iter()
                .zip(target.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max))
        })
        .collect()
}

pub fn is_monotone_non_increasing(values: &[f64], jitter: f64) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] + jitter)
}

/// `trials` logit vectors uniform on `[-10, 10]^dim`, or the zero vector when
/// `zero_logits` is set.
pub fn limit_check(dim: usize, kmax: usize, trials: usize, seed: u64, zero_logits: bool) -> Result<LimitCheckReport> {
    if dim < 2 {
        return Err(Error::TooFewClasses(dim));
    }
    if kmax == 0 {
        return Err(Error::invalid("kmax", "must be at least 1"));
    }
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    let mut prng = Prng::new(seed);
    let mut out = Vec::with_capacity(trials);
    for _ in 0..trials {
        let logits: Vec<f64> = if zero_logits {
            vec![0.0; dim]
        } else {
            (0..dim).map(|_| prng.uniform_range(-10.0, 10.0)).collect()
        };
        let z = LogitVector::new(logits.clone())?;
        let differences = limit_differences(&z, kmax)?;
        let monotone = is_monotone_non_increasing(&differences, MONOTONE_JITTER);
        out.push(LimitTrial {
            logits,
            differences,
            monotone,
        });
    }
    let monotone = out.iter().all(|t| t.monotone);
    let max_difference_at_30 = (kmax >= LIMIT_CHECK_K).then(|| {
        out.iter()
            .map(|t| t.differences[LIMIT_CHECK_K])
            .fold(0.0, f64::max)
    });
    let passed = monotone && max_difference_at_30.is_none_or(|d| d <= LIMIT_TOLERANCE);
    Ok(LimitCheckReport {
        dim,
        kmax,
        seed,
        trials: out,
        monotone,
        max_difference_at_30,
        passed,
    })
}

pub const COUNTEREXAMPLE_MIN_DET: f64 = 0.01;
pub const COUNTEREXAMPLE_ZERO_DET: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleReport {
    pub direction: [f64; 3],
    pub scales: [f64; 3],
    pub sigsoftmax: Counterexample,
    pub softmax: Counterexample,
    pub passed: bool,
}

impl Report for CounterexampleReport {
    fn non_finite_field(&self) -> Option<String> {
        self.sigsoftmax
            .non_finite_field()
            .map(|f| format!("sigsoftmax.{f}"))
            .or_else(|| self.softmax.non_finite_field().map(|f| format!("softmax.{f}")))
    }
}

pub fn counterexample_check() -> CounterexampleReport {
    let sigsoftmax = bottleneck_counterexample(ActivationKind::sigsoftmax());
    let softmax = bottleneck_counterexample(ActivationKind::Softmax);
    let passed = sigsoftmax.determinant.abs() > COUNTEREXAMPLE_MIN_DET
        && softmax.determinant.abs() <= COUNTEREXAMPLE_ZERO_DET;
    CounterexampleReport {
        direction: [1.0, 2.0, 0.0],
        scales: [0.0, 1.0, -1.0],
        sigsoftmax,
        softmax,
        passed,
    }
}
