//! Free-context factor model `log P(. | x_n) = f(W h_n + bias)` and its
//! full-batch gradient descent fit against a known true distribution.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::language::SyntheticLanguage;
use crate::activation::{log_forward_into, log_jacobian_transpose_mul_into, ActivationKind};
use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::prng::{uniform_matrix, Prng};
use crate::report::{check_real, check_reals, Report};

#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    pub kind: ActivationKind,
    /// `N x d`; row `n` is the hidden vector of context `n`.
    pub hidden: DMatrix<f64>,
    /// `M x d`.
    pub output: DMatrix<f64>,
    pub bias: Option<DVector<f64>>,
}

impl FactorModel {
    /// `hidden` and `output` uniform on `(-1/sqrt(d), 1/sqrt(d))`, drawn in that
    /// order from `Prng::new(seed)`; bias starts at zero.
    pub fn initialize(
        kind: ActivationKind,
        contexts: usize,
        classes: usize,
        dim: usize,
        with_bias: bool,
        seed: u64,
    ) -> Result<Self> {
        kind.validate()?;
        if dim == 0 {
            return Err(Error::invalid("d", "must be at least 1"));
        }
        let bound = 1.0 / (dim as f64).sqrt();
        let mut prng = Prng::new(seed);
        let hidden = uniform_matrix(&mut prng, contexts, dim, bound);
        let output = uniform_matrix(&mut prng, classes, dim, bound);
        Ok(FactorModel {
            kind,
            hidden,
            output,
            bias: with_bias.then(|| DVector::zeros(classes)),
        })
    }

    pub fn dim(&self) -> usize {
        self.output.ncols()
    }

    fn check_against(&self, language: &SyntheticLanguage) -> Result<()> {
        self.kind.validate()?;
        if self.hidden.nrows() != language.contexts() {
            return Err(Error::mismatch("context count", language.contexts(), self.hidden.nrows()));
        }
        if self.output.nrows() != language.classes() {
            return Err(Error::mismatch("class count", language.classes(), self.output.nrows()));
        }
        if self.hidden.ncols() != self.output.ncols() {
            return Err(Error::mismatch("hidden width", self.output.ncols(), self.hidden.ncols()));
        }
        if let Some(b) = &self.bias {
            if b.len() != language.classes() {
                return Err(Error::mismatch("bias length", language.classes(), b.len()));
            }
        }
        Ok(())
    }

    /// `N x M` logits, row `n` is `W h_n + bias`.
    pub fn logits(&self) -> DMatrix<f64> {
        let mut z = &self.hidden * self.output.transpose();
        if let Some(b) = &self.bias {
            for mut row in z.row_iter_mut() {
                row += b.transpose();
            }
        }
        z
    }

    /// `N x M` model log-probabilities.
    pub fn log_probs(&self) -> DMatrix<f64> {
        let logits = self.logits();
        let mut out = DMatrix::zeros(logits.nrows(), logits.ncols());
        let mut z = vec![0.0; logits.ncols()];
        let mut lp = vec![0.0; logits.ncols()];
        for n in 0..logits.nrows() {
            z.iter_mut().zip(logits.row(n).iter()).for_each(|(d, s)| *d = *s);
            log_forward_into(self.kind, &z, &mut lp);
            out.row_mut(n).iter_mut().zip(&lp).for_each(|(d, s)| *d = *s);
        }
        out
    }

    fn is_finite(&self) -> bool {
        self.hidden.iter().all(|v| v.is_finite())
            && self.output.iter().all(|v| v.is_finite())
            && self.bias.as_ref().is_none_or(|b| b.iter().all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub nll: f64,
    pub hidden: DMatrix<f64>,
    pub output: DMatrix<f64>,
    pub bias: Option<DVector<f64>>,
}

/// Mean cross entropy against the true distributions,
/// `-(1/N) sum_n sum_i P*(i|x_n) log P(i|x_n)`, and its gradients.
///
/// Per context, `dL/dz_n = -(1/N) J_n^T p*_n` where `J_n` is the log-output
/// Jacobian at `z_n`; the parameter gradients follow from `z_n = W h_n + bias`.
pub fn nll_and_gradients(model: &FactorModel, language: &SyntheticLanguage) -> Result<Gradients> {
    model.check_against(language)?;
    Ok(gradients_unchecked(model, language))
}

fn gradients_unchecked(model: &FactorModel, language: &SyntheticLanguage) -> Gradients {
    let n_ctx = language.contexts();
    let classes = language.classes();
    let scale = 1.0 / n_ctx as f64;
    let logits = model.logits();

    let mut nll = 0.0;
    let mut grad_hidden = DMatrix::zeros(n_ctx, model.dim());
    let mut grad_output = DMatrix::zeros(classes, model.dim());
    let mut grad_bias = model.bias.as_ref().map(|_| DVector::zeros(classes));

    let dim = model.dim();
    let mut z = vec![0.0; classes];
    let mut target = vec![0.0; classes];
    let mut lp = vec![0.0; classes];
    let mut gz = vec![0.0; classes];
    for n in 0..n_ctx {
        z.iter_mut().zip(logits.row(n).iter()).for_each(|(d, s)| *d = *s);
        target
            .iter_mut()
            .zip(language.true_probs().row(n).iter())
            .for_each(|(d, s)| *d = *s);
        log_forward_into(model.kind, &z, &mut lp);
        nll -= target.iter().zip(&lp).map(|(p, l)| p * l).sum::<f64>();

        log_jacobian_transpose_mul_into(model.kind, &z, &lp, &target, &mut gz);
        gz.iter_mut().for_each(|g| *g *= -scale);

        for k in 0..dim {
            let h = model.hidden[(n, k)];
            let mut acc = 0.0;
            for (i, &g) in gz.iter().enumerate() {
                grad_output[(i, k)] += g * h;
                acc += model.output[(i, k)] * g;
            }
            grad_hidden[(n, k)] = acc;
        }
        if let Some(gb) = grad_bias.as_mut() {
            gb.iter_mut().zip(&gz).for_each(|(b, g)| *b += g);
        }
    }
    Gradients {
        nll: nll * scale,
        hidden: grad_hidden,
        output: grad_output,
        bias: grad_bias,
    }
}

/// `KL(P*_n || P_n)` per context. Rounding below zero is clamped.
pub fn per_context_kl(model: &FactorModel, language: &SyntheticLanguage) -> Result<Vec<f64>> {
    model.check_against(language)?;
    let model_lp = model.log_probs();
    Ok((0..language.contexts())
        .map(|n| {
            let kl: f64 = language
                .true_probs()
                .row(n)
                .iter()
                .zip(language.log_probs().row(n).iter())
                .zip(model_lp.row(n).iter())
                .map(|((p, lt), lm)| p * (lt - lm))
                .sum();
            kl.max(0.0)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub per_context_kl: Vec<f64>,
    pub mean_kl: f64,
    pub final_nll: f64,
    pub epochs_run: usize,
    /// True when the loss plateaued (improvement below `tol` over the patience
    /// window) before `max_epochs`.
    pub converged: bool,
    pub diagnostic: Option<String>,
}

impl Report for FitReport {
    fn non_finite_field(&self) -> Option<String> {
        check_reals("per_context_kl", &self.per_context_kl)
            .or_else(|| check_real("mean_kl", self.mean_kl))
            .or_else(|| check_real("final_nll", self.final_nll))
    }
}

/// Full-batch gradient descent with a fixed learning rate.
///
/// If the loss turns non-finite the model is rolled back to the last finite
/// iterate and the fit is reported as not converged, with a diagnostic.
pub fn fit(model: &mut FactorModel, language: &SyntheticLanguage, config: &TrainConfig) -> Result<FitReport> {
    config.validate()?;
    model.check_against(language)?;

    let patience = TrainConfig::PATIENCE;
    let mut history: Vec<f64> = Vec::with_capacity(config.max_epochs.min(1 << 16) + 1);
    let mut previous = model.clone();
    let mut converged = false;
    let mut diagnostic = None;
    let mut epochs_run: usize = 0;

    loop {
        let grads = gradients_unchecked(model, language);
        if !grads.nll.is_finite() || !model.is_finite() {
            diagnostic = Some(format!(
                "loss became non-finite after {epochs_run} epochs; reporting the last finite iterate"
            ));
            *model = previous;
            epochs_run = epochs_run.saturating_sub(1);
            break;
        }
        history.push(grads.nll);
        let len = history.len();
        if len > patience && history[len - 1 - patience] - grads.nll < config.tol {
            converged = true;
            break;
        }
        if epochs_run == config.max_epochs {
            break;
        }
        previous.clone_from(model);
        model.hidden -= &grads.hidden * config.learning_rate;
        model.output -= &grads.output * config.learning_rate;
        if let (Some(b), Some(gb)) = (model.bias.as_mut(), grads.bias.as_ref()) {
            b.axpy(-config.learning_rate, gb, 1.0);
        }
        epochs_run += 1;
    }

    let per_context_kl = per_context_kl(model, language)?;
    let mean_kl = per_context_kl.iter().sum::<f64>() / per_context_kl.len() as f64;
    let final_nll = gradients_unchecked(model, language).nll;
    if !converged && diagnostic.is_none() {
        diagnostic = Some(format!("stopped at max_epochs = {}", config.max_epochs));
    }
    Ok(FitReport {
        per_context_kl,
        mean_kl,
        final_nll,
        epochs_run,
        converged,
        diagnostic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::language::generate_language;
    use approx::assert_abs_diff_eq;

    fn uniform_language(n: usize, m: usize) -> SyntheticLanguage {
        generate_language(n, m, 1, 1e-20, 0).unwrap()
    }

    #[test]
    fn symmetric_point_is_stationary() {
        let lang = uniform_language(5, 4);
        for kind in ActivationKind::ALL {
            let model = FactorModel {
                kind,
                hidden: DMatrix::zeros(5, 3),
                output: DMatrix::zeros(4, 3),
                bias: Some(DVector::zeros(4)),
            };
            let g = nll_and_gradients(&model, &lang).unwrap();
            assert_abs_diff_eq!(g.nll, 4f64.ln(), epsilon = 1e-12);
            assert!(g.hidden.amax() <= 1e-12);
            assert!(g.output.amax() <= 1e-12);
            assert!(g.bias.unwrap().amax() <= 1e-12);
        }
    }

    #[test]
    fn perfect_fit_construction() {
        let lang = generate_language(6, 4, 3, 1.5, 8).unwrap();
        let model = FactorModel {
            kind: ActivationKind::Softmax,
            hidden: lang.log_probs().clone(),
            output: DMatrix::identity(4, 4),
            bias: None,
        };
        let kl = per_context_kl(&model, &lang).unwrap();
        assert!(kl.iter().all(|&k| k <= 1e-10));
        // entropy by direct summation
        let mut entropy = 0.0;
        for n in 0..6 {
            for i in 0..4 {
                let p = lang.true_probs()[(n, i)];
                entropy -= p * p.ln();
            }
        }
        entropy /= 6.0;
        let g = nll_and_gradients(&model, &lang).unwrap();
        assert_abs_diff_eq!(g.nll, entropy, epsilon = 1e-12);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let lang = uniform_language(5, 4);
        let model = FactorModel::initialize(ActivationKind::Softmax, 4, 4, 2, false, 0).unwrap();
        assert!(matches!(nll_and_gradients(&model, &lang), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn fit_reduces_loss_and_is_deterministic() {
        let lang = generate_language(8, 5, 2, 1.0, 4).unwrap();
        let config = TrainConfig {
            max_epochs: 300,
            ..TrainConfig::default()
        };
        let run = || {
            let mut model = FactorModel::initialize(ActivationKind::sigsoftmax(), 8, 5, 3, true, 2).unwrap();
            let start = nll_and_gradients(&model, &lang).unwrap().nll;
            let report = fit(&mut model, &lang, &config).unwrap();
            (start, report)
        };
        let (start, a) = run();
        let (_, b) = run();
        assert_eq!(a, b);
        assert!(a.final_nll < start);
        assert!(a.final_nll >= lang.mean_entropy() - 1e-12);
        assert_abs_diff_eq!(
            a.mean_kl,
            a.per_context_kl.iter().sum::<f64>() / 8.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn divergence_is_reported_not_raised() {
        let lang = generate_language(6, 4, 2, 3.0, 1).unwrap();
        let mut model = FactorModel::initialize(ActivationKind::Softmax, 6, 4, 2, false, 1).unwrap();
        let config = TrainConfig {
            learning_rate: 1e200,
            max_epochs: 50,
            ..TrainConfig::default()
        };
        let report = fit(&mut model, &lang, &config).unwrap();
        assert!(!report.converged);
        assert!(report.diagnostic.as_deref().unwrap().contains("non-finite"));
        assert!(report.mean_kl.is_finite());
    }
}
