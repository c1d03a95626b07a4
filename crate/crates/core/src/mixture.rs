//! Mixture heads: `P(y_i | x) = sum_k pi_k * f(W tanh(W_hk h'))_i`.
//!
//! `pi` is itself an output activation over the prior logits `w_pik^T h'`.
//! MoS uses softmax for both the priors and the components; MoSS uses
//! sigsoftmax (with zero shift) for both.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::activation::{forward_into, log_forward_into, logsumexp, ActivationKind, LogProbVector, ProbabilityVector};
use crate::error::{Error, Result};
use crate::prng::{uniform_matrix, Prng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixtureKind {
    Mos,
    Moss,
}

impl MixtureKind {
    pub fn activation(self) -> ActivationKind {
        match self {
            MixtureKind::Mos => ActivationKind::Softmax,
            MixtureKind::Moss => ActivationKind::sigsoftmax(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParams {
    /// `K` matrices of shape `d x d'`.
    pub context_maps: Vec<DMatrix<f64>>,
    /// `K x d'`; row `k` is `w_pik`.
    pub prior_weights: DMatrix<f64>,
    /// `M x d`.
    pub output: DMatrix<f64>,
}

impl MixtureParams {
    pub fn components(&self) -> usize {
        self.context_maps.len()
    }

    pub fn classes(&self) -> usize {
        self.output.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.prior_weights.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.components();
        if k == 0 {
            return Err(Error::invalid("K", "mixture needs at least one component"));
        }
        if self.classes() < 2 {
            return Err(Error::TooFewClasses(self.classes()));
        }
        if self.prior_weights.nrows() != k {
            return Err(Error::mismatch("prior weight rows", k, self.prior_weights.nrows()));
        }
        let d = self.output.ncols();
        let d_in = self.input_dim();
        for map in &self.context_maps {
            if map.nrows() != d {
                return Err(Error::mismatch("context map rows", d, map.nrows()));
            }
            if map.ncols() != d_in {
                return Err(Error::mismatch("context map cols", d_in, map.ncols()));
            }
        }
        Ok(())
    }

    /// Entries uniform on `(-1/sqrt(fan_in), 1/sqrt(fan_in))` for each block.
    pub fn random(
        prng: &mut Prng,
        components: usize,
        classes: usize,
        hidden: usize,
        input_dim: usize,
    ) -> Self {
        let in_bound = 1.0 / (input_dim as f64).sqrt();
        let context_maps = (0..components)
            .map(|_| uniform_matrix(prng, hidden, input_dim, in_bound))
            .collect();
        let prior_weights = uniform_matrix(prng, components, input_dim, in_bound);
        let output = uniform_matrix(prng, classes, hidden, 1.0 / (hidden as f64).sqrt());
        MixtureParams {
            context_maps,
            prior_weights,
            output,
        }
    }
}

struct Evaluation {
    prior_logits: Vec<f64>,
    component_logits: Vec<Vec<f64>>,
}

fn evaluate(params: &MixtureParams, hidden: &[f64]) -> Result<Evaluation> {
    params.validate()?;
    if hidden.len() != params.input_dim() {
        return Err(Error::mismatch("hidden vector", params.input_dim(), hidden.len()));
    }
    if let Some((index, &value)) = hidden.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { index, value });
    }
    let h = DVector::from_column_slice(hidden);
    let prior_logits = (&params.prior_weights * &h).as_slice().to_vec();
    let component_logits = params
        .context_maps
        .iter()
        .map(|map| {
            let context = (map * &h).map(f64::tanh);
            (&params.output * context).as_slice().to_vec()
        })
        .collect();
    Ok(Evaluation {
        prior_logits,
        component_logits,
    })
}

/// Mixture weights `pi(x, k)`, length `K`.
pub fn mixture_priors(kind: MixtureKind, params: &MixtureParams, hidden: &[f64]) -> Result<ProbabilityVector> {
    let eval = evaluate(params, hidden)?;
    let mut priors = vec![0.0; params.components()];
    forward_into(kind.activation(), &eval.prior_logits, &mut priors);
    Ok(ProbabilityVector::from_raw(priors))
}

/// Per-component output distributions, one row per component.
pub fn mixture_components(
    kind: MixtureKind,
    params: &MixtureParams,
    hidden: &[f64],
) -> Result<Vec<ProbabilityVector>> {
    let eval = evaluate(params, hidden)?;
    Ok(eval
        .component_logits
        .iter()
        .map(|z| {
            let mut p = vec![0.0; z.len()];
            forward_into(kind.activation(), z, &mut p);
            ProbabilityVector::from_raw(p)
        })
        .collect())
}

pub fn mixture_forward(kind: MixtureKind, params: &MixtureParams, hidden: &[f64]) -> Result<ProbabilityVector> {
    let eval = evaluate(params, hidden)?;
    let activation = kind.activation();
    let mut priors = vec![0.0; params.components()];
    forward_into(activation, &eval.prior_logits, &mut priors);

    let classes = params.classes();
    let mut out = vec![0.0; classes];
    let mut component = vec![0.0; classes];
    for (pi, z) in priors.iter().zip(&eval.component_logits) {
        forward_into(activation, z, &mut component);
        for (o, p) in out.iter_mut().zip(&component) {
            *o += pi * p;
        }
    }
    Ok(ProbabilityVector::from_raw(out))
}

/// `log sum_k exp(log pi_k + log p_{k,i})`, evaluated per class with logsumexp.
pub fn mixture_log_forward(kind: MixtureKind, params: &MixtureParams, hidden: &[f64]) -> Result<LogProbVector> {
    let eval = evaluate(params, hidden)?;
    let activation = kind.activation();
    let k = params.components();
    let mut log_priors = vec![0.0; k];
    log_forward_into(activation, &eval.prior_logits, &mut log_priors);

    let classes = params.classes();
    let mut joint = vec![vec![0.0; classes]; k];
    for ((row, z), lp) in joint.iter_mut().zip(&eval.component_logits).zip(&log_priors) {
        log_forward_into(activation, z, row);
        for v in row.iter_mut() {
            *v += lp;
        }
    }
    let mut terms = vec![0.0; k];
    let out = (0..classes)
        .map(|i| {
            for (t, row) in terms.iter_mut().zip(&joint) {
                *t = row[i];
            }
            logsumexp(&terms)
        })
        .collect();
    Ok(LogProbVector::from_raw(out))
}
