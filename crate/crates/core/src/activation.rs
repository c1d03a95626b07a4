//! Output activations of the form `f(z)_i = g(z_i) / sum_m g(z_m)`.
//!
//! Four members of the family are provided:
//!
//! | kind            | `g(z)`                 | `log g(z)`                 |
//! |-----------------|------------------------|----------------------------|
//! | `Softmax`       | `exp(z)`               | `z`                        |
//! | `Sigsoftmax`    | `exp(z) * sigmoid(z+b)`| `z - softplus(-(z+b))`     |
//! | `ReluBased`     | `max(z, 0) + eps`      | `log(max(z, 0) + eps)`     |
//! | `SigmoidBased`  | `sigmoid(z)`           | `z - softplus(z)`          |
//!
//! Every log-output is evaluated as `log g(z) - logsumexp(log g(z))`, so no
//! intermediate `exp` can overflow for logits up to roughly 700 in magnitude.
//!
//! The Jacobian of the log-output has the same shape for all four kinds:
//!
//! ```text
//! d log f_i / d z_j = (delta_ij - f_j) * c_j,    c_j = d log g(z_j) / d z_j
//! ```
//!
//! with `c = 1` for softmax, `2 - sigmoid(z + b)` for sigsoftmax,
//! `1 - sigmoid(z)` for the sigmoid-based function and
//! `1[z > 0] / (relu(z) + eps)` for the ReLU-based function.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default additive constant of the ReLU-based activation.
pub const DEFAULT_RELU_EPSILON: f64 = 1e-8;

/// Jacobian entries above this magnitude are reported as numerically unstable.
pub const UNSTABLE_ENTRY_MAGNITUDE: f64 = 1e6;

/// `log(1 + exp(x))` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Logistic sigmoid, evaluated on the branch that never overflows.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log sum_m exp(z_m)` with max-shift. Returns `-inf` for an empty slice.
pub fn logsumexp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = z.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActivationKind {
    #[default]
    Softmax,
    /// `exp(z) * sigmoid(z + shift)`; the shift is a fixed offset, zero by default.
    Sigsoftmax { shift: f64 },
    ReluBased { epsilon: f64 },
    SigmoidBased,
}

impl ActivationKind {
    pub const fn sigsoftmax() -> Self {
        ActivationKind::Sigsoftmax { shift: 0.0 }
    }

    pub const fn relu_based() -> Self {
        ActivationKind::ReluBased {
            epsilon: DEFAULT_RELU_EPSILON,
        }
    }

    /// The four kinds with their default parameters.
    pub const ALL: [ActivationKind; 4] = [
        ActivationKind::Softmax,
        ActivationKind::sigsoftmax(),
        ActivationKind::relu_based(),
        ActivationKind::SigmoidBased,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ActivationKind::Softmax => "softmax",
            ActivationKind::Sigsoftmax { .. } => "sigsoftmax",
            ActivationKind::ReluBased { .. } => "relu_based",
            ActivationKind::SigmoidBased => "sigmoid_based",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ActivationKind::ReluBased { epsilon } if !(epsilon > 0.0 && epsilon.is_finite()) => {
                Err(Error::invalid("epsilon", format!("must be positive, got {epsilon}")))
            }
            ActivationKind::Sigsoftmax { shift } if !shift.is_finite() => {
                Err(Error::invalid("shift", format!("must be finite, got {shift}")))
            }
            _ => Ok(()),
        }
    }

    /// `log g(z)` for a single logit.
    #[inline]
    pub fn log_g(&self, z: f64) -> f64 {
        match *self {
            ActivationKind::Softmax => z,
            // z + log sigmoid(z + b); equals 2z - softplus(z) at b = 0
            ActivationKind::Sigsoftmax { shift } => z - softplus(-(z + shift)),
            ActivationKind::ReluBased { epsilon } => (z.max(0.0) + epsilon).ln(),
            ActivationKind::SigmoidBased => z - softplus(z),
        }
    }

    /// `d log g(z) / dz`.
    #[inline]
    pub fn log_g_slope(&self, z: f64) -> f64 {
        match *self {
            ActivationKind::Softmax => 1.0,
            ActivationKind::Sigsoftmax { shift } => 2.0 - sigmoid(z + shift),
            // subgradient 0 at the kink
            ActivationKind::ReluBased { epsilon } => {
                if z > 0.0 {
                    1.0 / (z + epsilon)
                } else {
                    0.0
                }
            }
            ActivationKind::SigmoidBased => 1.0 - sigmoid(z),
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "softmax" => Ok(ActivationKind::Softmax),
            "sigsoftmax" => Ok(ActivationKind::sigsoftmax()),
            "relu" | "relu_based" | "relu-based" => Ok(ActivationKind::relu_based()),
            "sigmoid" | "sigmoid_based" | "sigmoid-based" => Ok(ActivationKind::SigmoidBased),
            other => Err(Error::invalid(
                "kind",
                format!("unknown activation `{other}` (expected softmax, sigsoftmax, relu, sigmoid)"),
            )),
        }
    }
}

/// Finite logits, at least two of them.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitVector(Vec<f64>);

impl LogitVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::TooFewClasses(values.len()));
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(LogitVector(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Adds `c` to every entry. Returns an error if the result stops being finite.
    pub fn shifted(&self, c: f64) -> Result<Self> {
        LogitVector::new(self.0.iter().map(|v| v + c).collect())
    }
}

impl Deref for LogitVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for LogitVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        LogitVector::new(values)
    }
}

impl TryFrom<&[f64]> for LogitVector {
    type Error = Error;

    fn try_from(values: &[f64]) -> Result<Self> {
        LogitVector::new(values.to_vec())
    }
}

/// Non-negative entries summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|&p| p >= 0.0));
        ProbabilityVector(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ProbabilityVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Log-probabilities; `logsumexp` of the entries is zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogProbVector(Vec<f64>);

impl LogProbVector {
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        LogProbVector(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn exp(&self) -> ProbabilityVector {
        ProbabilityVector::from_raw(self.0.iter().map(|v| v.exp()).collect())
    }
}

impl Deref for LogProbVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Square Jacobian of the log-output, row-major. Entry `(i, j)` is
/// `d log f_i / d z_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianMatrix {
    dim: usize,
    entries: Vec<f64>,
    /// Set when some entry exceeds [`UNSTABLE_ENTRY_MAGNITUDE`]. Only the
    /// ReLU-based kind can trigger it for finite input.
    pub large_magnitude: bool,
}

impl JacobianMatrix {
    pub(crate) fn from_row_major(dim: usize, entries: Vec<f64>) -> Self {
        debug_assert_eq!(entries.len(), dim * dim);
        let large_magnitude = entries.iter().any(|v| v.abs() > UNSTABLE_ENTRY_MAGNITUDE);
        JacobianMatrix {
            dim,
            entries,
            large_magnitude,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.entries
    }

    pub fn max_abs_diff(&self, other: &JacobianMatrix) -> f64 {
        assert_eq!(self.dim, other.dim, "jacobian dimensions differ");
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `J^T v`.
    pub fn transpose_mul(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim);
        let mut out = vec![0.0; self.dim];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, &jij) in out.iter_mut().zip(self.row(i)) {
                *o += vi * jij;
            }
        }
        out
    }
}

/// `log g(z)` entrywise; accepts any length, including one.
pub fn unnormalized_log_g(kind: ActivationKind, z: &[f64]) -> Vec<f64> {
    z.iter().map(|&v| kind.log_g(v)).collect()
}

pub(crate) fn log_forward_into(kind: ActivationKind, z: &[f64], out: &mut [f64]) {
    debug_assert_eq!(z.len(), out.len());
    for (o, &v) in out.iter_mut().zip(z) {
        *o = kind.log_g(v);
    }
    let lse = logsumexp(out);
    for o in out.iter_mut() {
        *o -= lse;
    }
}

pub fn log_forward(kind: ActivationKind, z: &LogitVector) -> LogProbVector {
    let mut out = vec![0.0; z.len()];
    log_forward_into(kind, z, &mut out);
    LogProbVector::from_raw(out)
}

pub(crate) fn forward_into(kind: ActivationKind, z: &[f64], out: &mut [f64]) {
    match kind {
        ActivationKind::Softmax | ActivationKind::Sigsoftmax { .. } => {
            log_forward_into(kind, z, out);
            for o in out.iter_mut() {
                *o = o.exp();
            }
        }
        ActivationKind::ReluBased { epsilon } => {
            for (o, &v) in out.iter_mut().zip(z) {
                *o = v.max(0.0) + epsilon;
            }
            normalize(out);
        }
        ActivationKind::SigmoidBased => {
            for (o, &v) in out.iter_mut().zip(z) {
                *o = sigmoid(v);
            }
            normalize(out);
        }
    }
}

fn normalize(values: &mut [f64]) {
    let total: f64 = values.iter().sum();
    for v in values.iter_mut() {
        *v /= total;
    }
}

pub fn forward(kind: ActivationKind, z: &LogitVector) -> ProbabilityVector {
    let mut out = vec![0.0; z.len()];
    forward_into(kind, z, &mut out);
    ProbabilityVector::from_raw(out)
}

fn log_jacobian_raw(kind: ActivationKind, z: &[f64]) -> JacobianMatrix {
    let m = z.len();
    let mut probs = vec![0.0; m];
    forward_into(kind, z, &mut probs);
    let slopes: Vec<f64> = z.iter().map(|&v| kind.log_g_slope(v)).collect();
    let mut entries = vec![0.0; m * m];
    for (i, row) in entries.chunks_exact_mut(m).enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            let delta = if i == j { 1.0 } else { 0.0 };
            *e = (delta - probs[j]) * slopes[j];
        }
    }
    JacobianMatrix::from_row_major(m, entries)
}

/// `J^T v` for the log-output Jacobian at `z` without forming `J`:
/// `(J^T v)_j = c_j (v_j - f_j sum_i v_i)`, with `f` recovered from the
/// already computed `log_probs = log_forward(z)`.
pub(crate) fn log_jacobian_transpose_mul_into(
    kind: ActivationKind,
    z: &[f64],
    log_probs: &[f64],
    v: &[f64],
    out: &mut [f64],
) {
    let total: f64 = v.iter().sum();
    for (j, o) in out.iter_mut().enumerate() {
        *o = kind.log_g_slope(z[j]) * (v[j] - log_probs[j].exp() * total);
    }
}

/// Closed-form Jacobian of `log_forward`.
pub fn log_jacobian(kind: ActivationKind, z: &LogitVector) -> JacobianMatrix {
    log_jacobian_raw(kind, z)
}

/// Central-difference estimate of the log-output Jacobian, column by column.
pub fn finite_difference_log_jacobian(
    kind: ActivationKind,
    z: &LogitVector,
    step: f64,
) -> Result<JacobianMatrix> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid("step", format!("must be positive, got {step}")));
    }
    let m = z.len();
    let mut entries = vec![0.0; m * m];
    let mut probe = z.to_vec();
    let mut plus = vec![0.0; m];
    let mut minus = vec![0.0; m];
    for j in 0..m {
        probe[j] = z[j] + step;
        log_forward_into(kind, &probe, &mut plus);
        probe[j] = z[j] - step;
        log_forward_into(kind, &probe, &mut minus);
        probe[j] = z[j];
        for i in 0..m {
            entries[i * m + j] = (plus[i] - minus[i]) / (2.0 * step);
        }
    }
    Ok(JacobianMatrix::from_row_major(m, entries))
}

/// Deviation of `v(x) = log g(x)` from affineness at `(a, mid, b)`:
/// `v(a) + v(b) - 2 v(mid)`. Zero for any affine `log g`.
pub fn nonlinearity_witness(kind: ActivationKind, a: f64, mid: f64, b: f64) -> f64 {
    kind.log_g(a) + kind.log_g(b) - 2.0 * kind.log_g(mid)
}
