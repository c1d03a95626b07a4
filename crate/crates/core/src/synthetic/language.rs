use std::collections::HashMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::activation::logsumexp;
use crate::error::{Error, Result};
use crate::prng::{gaussian_matrix, Prng};
use crate::rank::{numerical_rank, singular_values};

/// Token standing in for everything outside the kept vocabulary.
pub const UNKNOWN_TOKEN: &str = "<unk>";

/// A finite set of contexts with known next-token distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticLanguage {
    /// `N x M`, row `n` is `P*(. | x_n)`.
    true_probs: DMatrix<f64>,
    /// `log true_probs`.
    log_probs: DMatrix<f64>,
    true_log_rank: usize,
    vocabulary: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LanguageSummary {
    pub contexts: usize,
    pub classes: usize,
    pub true_log_rank: usize,
}

impl SyntheticLanguage {
    fn from_log_probs(log_probs: DMatrix<f64>, vocabulary: Option<Vec<String>>) -> Result<Self> {
        let true_probs = log_probs.map(f64::exp);
        if true_probs.iter().any(|&p| p.is_nan() || p <= 0.0) {
            return Err(Error::invalid(
                "concentration",
                "some true probability underflowed to zero",
            ));
        }
        let sv = singular_values(&log_probs);
        let true_log_rank = numerical_rank(&sv, log_probs.nrows(), log_probs.ncols()).rank;
        Ok(SyntheticLanguage {
            true_probs,
            log_probs,
            true_log_rank,
            vocabulary,
        })
    }

    pub fn contexts(&self) -> usize {
        self.true_probs.nrows()
    }

    pub fn classes(&self) -> usize {
        self.true_probs.ncols()
    }

    pub fn true_probs(&self) -> &DMatrix<f64> {
        &self.true_probs
    }

    pub fn log_probs(&self) -> &DMatrix<f64> {
        &self.log_probs
    }

    /// Numerical rank of `log P*`.
    pub fn true_log_rank(&self) -> usize {
        self.true_log_rank
    }

    /// Token names for bigram languages; `None` for generated ones.
    pub fn vocabulary(&self) -> Option<&[String]> {
        self.vocabulary.as_deref()
    }

    /// Mean entropy of the true next-token distributions; the lowest
    /// achievable cross entropy.
    pub fn mean_entropy(&self) -> f64 {
        let total: f64 = self
            .true_probs
            .iter()
            .zip(self.log_probs.iter())
            .map(|(p, lp)| -p * lp)
            .sum();
        total / self.contexts() as f64
    }

    pub fn summary(&self) -> LanguageSummary {
        LanguageSummary {
            contexts: self.contexts(),
            classes: self.classes(),
            true_log_rank: self.true_log_rank,
        }
    }
}

/// Rows are `softmax(B_n)` with `B = (concentration / sqrt(r)) U V^T`,
/// `U` (`N x r`) and `V` (`M x r`) standard Gaussian, drawn in that order
/// from `Prng::new(seed)`. Each logit then has standard deviation
/// `concentration`, and `log P*` has rank `r + 1` generically.
pub fn generate_language(
    contexts: usize,
    classes: usize,
    logit_rank: usize,
    concentration: f64,
    seed: u64,
) -> Result<SyntheticLanguage> {
    if contexts < 2 {
        return Err(Error::invalid("N", format!("need at least 2 contexts, got {contexts}")));
    }
    if classes < 2 {
        return Err(Error::TooFewClasses(classes));
    }
    if logit_rank == 0 || logit_rank > contexts.min(classes) {
        return Err(Error::invalid(
            "rank",
            format!("must lie in 1..={}, got {logit_rank}", contexts.min(classes)),
        ));
    }
    if !(concentration > 0.0 && concentration.is_finite()) {
        return Err(Error::invalid(
            "concentration",
            format!("must be positive, got {concentration}"),
        ));
    }
    let mut prng = Prng::new(seed);
    let u = gaussian_matrix(&mut prng, contexts, logit_rank, 1.0);
    let v = gaussian_matrix(&mut prng, classes, logit_rank, 1.0);
    let mut logits = u * v.transpose() * (concentration / (logit_rank as f64).sqrt());
    for mut row in logits.row_iter_mut() {
        let lse = logsumexp(&row.iter().copied().collect::<Vec<_>>());
        row.add_scalar_mut(-lse);
    }
    SyntheticLanguage::from_log_probs(logits, None)
}

/// Add-`alpha` smoothed bigram language over whitespace tokens.
///
/// The `vocab_cap` most frequent tokens are kept (ties broken
/// lexicographically) and every other token maps to [`UNKNOWN_TOKEN`], which
/// is always the last vocabulary entry. Every vocabulary entry is a context,
/// so `N = M = kept + 1`.
pub fn bigram_language_from_text(path: &Path, vocab_cap: usize, alpha: f64) -> Result<SyntheticLanguage> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    bigram_language(&text, vocab_cap, alpha).map_err(|e| match e {
        Error::EmptyCorpus(_) => Error::EmptyCorpus(path.to_path_buf()),
        other => other,
    })
}

pub fn bigram_language(text: &str, vocab_cap: usize, alpha: f64) -> Result<SyntheticLanguage> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid("alpha", format!("must be positive, got {alpha}")));
    }
    if vocab_cap == 0 {
        return Err(Error::invalid("vocab_cap", "must be at least 1"));
    }
    let tokens: Vec<&str> = text.split_whitespace().collect();
    if tokens.len() < 2 {
        return Err(Error::EmptyCorpus("<text>".into()));
    }

    let mut counts: HashMap<&str, usize> = HashMap::new();
    for &t in &tokens {
        if t != UNKNOWN_TOKEN {
            *counts.entry(t).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(vocab_cap);

    let mut vocabulary: Vec<String> = ranked.iter().map(|(t, _)| t.to_string()).collect();
    vocabulary.push(UNKNOWN_TOKEN.to_string());
    let unknown = vocabulary.len() - 1;
    let index: HashMap<&str, usize> = ranked.iter().enumerate().map(|(i, (t, _))| (*t, i)).collect();
    let ids: Vec<usize> = tokens
        .iter()
        .map(|t| index.get(t).copied().unwrap_or(unknown))
        .collect();

    let size = vocabulary.len();
    let mut bigrams = DMatrix::<f64>::zeros(size, size);
    for pair in ids.windows(2) {
        bigrams[(pair[0], pair[1])] += 1.0;
    }
    let mut log_probs = DMatrix::zeros(size, size);
    for (mut out, counts) in log_probs.row_iter_mut().zip(bigrams.row_iter()) {
        let denom = (counts.sum() + alpha * size as f64).ln();
        for (o, &c) in out.iter_mut().zip(counts.iter()) {
            *o = (c + alpha).ln() - denom;
        }
    }
    SyntheticLanguage::from_log_probs(log_probs, Some(vocabulary))
}
