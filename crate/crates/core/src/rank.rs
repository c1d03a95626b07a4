//! Numerical rank of log-output matrices.
//!
//! A log-output matrix stacks `log f(W h_t + bias)` as columns, one per input
//! `h_t`. For softmax every column lies in `span(W) + span(1)` (plus the bias
//! direction), so its rank never exceeds `d + 1` (`d + 2` with a bias). Output
//! functions with a nonlinear `log g` are not confined to that subspace.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::activation::{log_forward_into, ActivationKind};
use crate::error::{Error, Result};
use crate::prng::{gaussian_matrix, Prng};
use crate::report::{check_real, check_reals, Report};

/// `M x T` matrix whose columns are log-probability vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct LogOutputMatrix(DMatrix<f64>);

impl LogOutputMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn classes(&self) -> usize {
        self.0.nrows()
    }

    pub fn samples(&self) -> usize {
        self.0.ncols()
    }
}

/// Column `t` of the result is `log_forward(kind, W * inputs[:, t] + bias)`.
///
/// `weights` is `M x d`, `inputs` is `d x T` (one input per column).
pub fn collect_log_outputs(
    kind: ActivationKind,
    weights: &DMatrix<f64>,
    bias: Option<&DVector<f64>>,
    inputs: &DMatrix<f64>,
) -> Result<LogOutputMatrix> {
    kind.validate()?;
    let classes = weights.nrows();
    if classes < 2 {
        return Err(Error::TooFewClasses(classes));
    }
    if inputs.nrows() != weights.ncols() {
        return Err(Error::mismatch("input dimension", weights.ncols(), inputs.nrows()));
    }
    if let Some(b) = bias {
        if b.len() != classes {
            return Err(Error::mismatch("bias length", classes, b.len()));
        }
    }
    if let Some((index, &value)) = inputs.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { index, value });
    }

    let mut logits = weights * inputs;
    if let Some(b) = bias {
        for mut col in logits.column_iter_mut() {
            col += b;
        }
    }
    let mut out = DMatrix::zeros(classes, inputs.ncols());
    for (z, mut col) in logits.column_iter().zip(out.column_iter_mut()) {
        log_forward_into(kind, z.as_slice(), col.as_mut_slice());
    }
    Ok(LogOutputMatrix(out))
}

/// Singular values in descending order.
///
/// Strongly rectangular inputs are first reduced to their square triangular
/// factor by a Householder QR, which has the same singular values.
pub fn singular_values(matrix: &DMatrix<f64>) -> Vec<f64> {
    let (rows, cols) = matrix.shape();
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    let mut values = if rows >= 2 * cols {
        square_factor_singular_values(matrix.clone())
    } else if cols >= 2 * rows {
        square_factor_singular_values(matrix.transpose())
    } else {
        matrix.clone().svd(false, false).singular_values.as_slice().to_vec()
    };
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

fn square_factor_singular_values(tall: DMatrix<f64>) -> Vec<f64> {
    let r = tall.qr().r();
    r.svd(false, false).singular_values.as_slice().to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NumericalRank {
    pub threshold: f64,
    pub rank: usize,
}

/// Rank with the roundoff threshold `max(rows, cols) * eps * sigma_max`.
pub fn numerical_rank(singular_values: &[f64], rows: usize, cols: usize) -> NumericalRank {
    let largest = singular_values.first().copied().unwrap_or(0.0);
    let threshold = rows.max(cols) as f64 * f64::EPSILON * largest;
    let rank = singular_values.iter().filter(|&&s| s > threshold).count();
    NumericalRank { threshold, rank }
}

/// Largest possible rank of a softmax log-output matrix with hidden width `d`.
pub fn softmax_rank_bound(d: usize, has_bias: bool) -> usize {
    if has_bias {
        d + 2
    } else {
        d + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankReport {
    pub rows: usize,
    pub cols: usize,
    pub singular_values: Vec<f64>,
    pub threshold: f64,
    pub numerical_rank: usize,
    pub bound: usize,
    pub bound_respected: bool,
}

impl RankReport {
    pub fn analyze(matrix: &LogOutputMatrix, d: usize, has_bias: bool) -> Self {
        Self::from_matrix(matrix.matrix(), d, has_bias)
    }

    /// Same as [`RankReport::from_matrix`] for a row-major buffer of `rows * cols` values.
    pub fn from_row_major(rows: usize, cols: usize, values: &[f64], d: usize, has_bias: bool) -> Self {
        Self::from_matrix(&DMatrix::from_row_slice(rows, cols, values), d, has_bias)
    }

    pub fn from_matrix(matrix: &DMatrix<f64>, d: usize, has_bias: bool) -> Self {
        let (rows, cols) = matrix.shape();
        let singular_values = singular_values(matrix);
        let NumericalRank { threshold, rank } = numerical_rank(&singular_values, rows, cols);
        let mut report = RankReport {
            rows,
            cols,
            singular_values,
            threshold,
            numerical_rank: rank,
            bound: softmax_rank_bound(d, has_bias),
            bound_respected: false,
        };
        report.bound_respected = verify_bound(&report, d, has_bias);
        report
    }
}

impl Report for RankReport {
    fn non_finite_field(&self) -> Option<String> {
        check_reals("singular_values", &self.singular_values)
            .or_else(|| check_real("threshold", self.threshold))
    }
}

/// Whether the measured rank stays within the softmax bound `d + 1` (`d + 2` with bias).
pub fn verify_bound(report: &RankReport, d: usize, has_bias: bool) -> bool {
    report.numerical_rank <= softmax_rank_bound(d, has_bias)
}

/// Three log-outputs from the one-dimensional input space `{k u}` with
/// `u = [1, 2, 0]` at `k = 0, 1, -1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub kind: ActivationKind,
    /// Row-major 3x3; column `c` is the log-output for the `c`-th input.
    pub log_outputs: [[f64; 3]; 3],
    pub determinant: f64,
}

impl Report for Counterexample {
    fn non_finite_field(&self) -> Option<String> {
        check_reals("log_outputs", self.log_outputs.as_flattened())
            .or_else(|| check_real("determinant", self.determinant))
    }
}

/// With softmax the three columns span at most `d + 1 = 2` dimensions and the
/// determinant vanishes; with sigsoftmax they are linearly independent.
pub fn bottleneck_counterexample(kind: ActivationKind) -> Counterexample {
    let direction = [1.0, 2.0, 0.0];
    let mut columns = [[0.0; 3]; 3];
    for (col, k) in columns.iter_mut().zip([0.0, 1.0, -1.0]) {
        let z = direction.map(|u| k * u);
        log_forward_into(kind, &z, col);
    }
    let matrix = DMatrix::from_fn(3, 3, |i, j| columns[j][i]);
    let mut log_outputs = [[0.0; 3]; 3];
    for (i, row) in log_outputs.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = columns[j][i];
        }
    }
    Counterexample {
        kind,
        log_outputs,
        determinant: matrix.determinant(),
    }
}

/// Smallest singular value a random weight matrix must exceed to count as full rank.
pub const FULL_RANK_TOLERANCE: f64 = 1e-8;

/// Standard Gaussian `rows x cols` matrix, redrawn until its smallest singular
/// value exceeds [`FULL_RANK_TOLERANCE`].
pub fn random_full_rank(prng: &mut Prng, rows: usize, cols: usize) -> DMatrix<f64> {
    loop {
        let w = gaussian_matrix(prng, rows, cols, 1.0);
        let smallest = singular_values(&w).last().copied().unwrap_or(0.0);
        if smallest > FULL_RANK_TOLERANCE {
            return w;
        }
    }
}

/// One random log-output rank measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankTrial {
    pub kind: ActivationKind,
    pub classes: usize,
    pub hidden: usize,
    pub samples: usize,
    pub bias: bool,
    pub seed: u64,
}

impl RankTrial {
    pub fn validate(&self) -> Result<()> {
        self.kind.validate()?;
        if self.hidden == 0 {
            return Err(Error::invalid("d", "must be at least 1"));
        }
        if self.classes <= self.hidden {
            return Err(Error::invalid(
                "M",
                format!("must exceed d = {}, got {}", self.hidden, self.classes),
            ));
        }
        if self.samples == 0 {
            return Err(Error::invalid("T", "must be at least 1"));
        }
        Ok(())
    }

    /// Draws `W ~ N(0,1)` (full rank), optional `bias ~ N(0,1)` and
    /// `T` standard Gaussian inputs, in that order, from `Prng::new(seed)`.
    pub fn log_outputs(&self) -> Result<LogOutputMatrix> {
        self.validate()?;
        let mut prng = Prng::new(self.seed);
        let weights = random_full_rank(&mut prng, self.classes, self.hidden);
        let bias = self
            .bias
            .then(|| DVector::from_iterator(self.classes, (0..self.classes).map(|_| prng.standard_normal())));
        let inputs = gaussian_matrix(&mut prng, self.hidden, self.samples, 1.0);
        collect_log_outputs(self.kind, &weights, bias.as_ref(), &inputs)
    }

    pub fn run(&self) -> Result<RankReport> {
        let matrix = self.log_outputs()?;
        Ok(RankReport::analyze(&matrix, self.hidden, self.bias))
    }
}

/// Runs `trials` independent measurements; trial `i` uses `split_seed(seed, i)`.
/// Results are in trial order regardless of scheduling.
pub fn run_rank_trials(template: RankTrial, trials: usize) -> Result<Vec<RankReport>> {
    (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            RankTrial {
                seed: crate::prng::split_seed(template.seed, i),
                ..template
            }
            .run()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn singular_value_examples() {
        let sv = singular_values(&DMatrix::identity(3, 3));
        assert_eq!(sv.len(), 3);
        for s in sv {
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-14);
        }
        let sv = singular_values(&DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0, 2.0])));
        for (a, b) in sv.iter().zip([3.0, 2.0, 1.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
        let u = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let v = DVector::from_vec(vec![0.3, 1.0, -1.0]);
        let outer = &u * v.transpose();
        let sv = singular_values(&outer);
        assert_eq!(sv.iter().filter(|&&s| s > 1e-10).count(), 1);
    }

    #[test]
    fn reduced_and_direct_routes_agree() {
        let mut prng = Prng::new(11);
        for (r, c) in [(40, 6), (6, 40), (9, 7)] {
            let a = gaussian_matrix(&mut prng, r, c, 1.0);
            let mut direct = a.clone().svd(false, false).singular_values.as_slice().to_vec();
            direct.sort_by(|x, y| y.total_cmp(x));
            let fast = singular_values(&a);
            for (x, y) in fast.iter().zip(&direct) {
                assert_abs_diff_eq!(*x, *y, epsilon = 1e-12 * direct[0]);
            }
        }
    }

    #[test]
    fn svd_reconstructs() {
        let a = gaussian_matrix(&mut Prng::new(4), 8, 5, 1.0);
        let svd = a.clone().svd(true, true);
        let rebuilt = svd.recompose().unwrap();
        assert!((&a - rebuilt).norm() <= 1e-8 * a.norm());
    }

    #[test]
    fn rank_threshold_examples() {
        assert_eq!(numerical_rank(&[3.0, 2.0, 1.0], 3, 3).rank, 3);
        assert_eq!(numerical_rank(&[1.0, 1e-18], 2, 2).rank, 1);
        assert_eq!(numerical_rank(&[0.0, 0.0], 2, 2).rank, 0);
        assert_eq!(numerical_rank(&[], 0, 0).rank, 0);
    }

    #[test]
    fn zero_input_gives_uniform_column() {
        let w = gaussian_matrix(&mut Prng::new(1), 5, 2, 1.0);
        let out = collect_log_outputs(ActivationKind::Softmax, &w, None, &DMatrix::zeros(2, 1)).unwrap();
        for &v in out.matrix().iter() {
            assert_abs_diff_eq!(v, -(5f64.ln()), epsilon = 1e-15);
        }
    }

    #[test]
    fn duplicate_inputs_have_rank_one() {
        let mut prng = Prng::new(2);
        let w = gaussian_matrix(&mut prng, 6, 3, 1.0);
        let h = gaussian_matrix(&mut prng, 3, 1, 1.0);
        let inputs = DMatrix::from_fn(3, 3, |i, _| h[(i, 0)]);
        let out = collect_log_outputs(ActivationKind::sigsoftmax(), &w, None, &inputs).unwrap();
        let report = RankReport::analyze(&out, 3, false);
        assert_eq!(report.numerical_rank, 1);
    }

    #[test]
    fn collect_rejects_mismatched_shapes() {
        let w = DMatrix::zeros(4, 2);
        assert!(collect_log_outputs(ActivationKind::Softmax, &w, None, &DMatrix::zeros(3, 1)).is_err());
        let bias = DVector::zeros(3);
        assert!(collect_log_outputs(ActivationKind::Softmax, &w, Some(&bias), &DMatrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn bound_examples() {
        let mk = |rank| RankReport {
            rows: 50,
            cols: 200,
            singular_values: vec![],
            threshold: 0.0,
            numerical_rank: rank,
            bound: 0,
            bound_respected: false,
        };
        assert!(verify_bound(&mk(6), 5, false));
        assert!(!verify_bound(&mk(7), 5, false));
        assert!(verify_bound(&mk(7), 5, true));
    }

    #[test]
    fn softmax_and_sigsoftmax_trials() {
        let base = RankTrial {
            kind: ActivationKind::Softmax,
            classes: 50,
            hidden: 5,
            samples: 200,
            bias: false,
            seed: 3,
        };
        let soft = base.run().unwrap();
        assert!(soft.numerical_rank <= 6 && soft.bound_respected, "{}", soft.numerical_rank);
        let sig = RankTrial {
            kind: ActivationKind::sigsoftmax(),
            ..base
        }
        .run()
        .unwrap();
        assert!(sig.numerical_rank > 6);
        assert!(!sig.bound_respected);
    }

    #[test]
    fn counterexample_columns() {
        let sig = bottleneck_counterexample(ActivationKind::sigsoftmax());
        for row in &sig.log_outputs {
            assert_abs_diff_eq!(row[0], -(3f64.ln()), epsilon = 1e-12);
        }
        // mpmath at 40 digits: 0.63791521252188631137
        assert_abs_diff_eq!(sig.determinant, 0.637_915_212_521_886_3, epsilon = 1e-12);
        let soft = bottleneck_counterexample(ActivationKind::Softmax);
        assert!(soft.determinant.abs() <= 1e-12);
    }
}
