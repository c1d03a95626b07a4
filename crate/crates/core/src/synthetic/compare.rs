use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::language::{LanguageSummary, SyntheticLanguage};
use super::model::{fit, FactorModel, FitReport};
use crate::activation::ActivationKind;
use crate::config::TrainConfig;
use crate::error::Result;
use crate::rank::{collect_log_outputs, RankReport};
use crate::report::{check_real, format_real, Report};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankSummary {
    pub numerical_rank: usize,
    pub bound: usize,
    pub bound_respected: bool,
    pub threshold: f64,
}

impl From<&RankReport> for RankSummary {
    fn from(r: &RankReport) -> Self {
        RankSummary {
            numerical_rank: r.numerical_rank,
            bound: r.bound,
            bound_respected: r.bound_respected,
            threshold: r.threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub kind: ActivationKind,
    pub seed: u64,
    pub fit: FitReport,
    /// Rank of the fitted `M x N` log-output matrix.
    pub rank: RankSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KindAggregate {
    pub kind: ActivationKind,
    pub runs: usize,
    pub mean_kl_mean: f64,
    /// Sample standard deviation; zero for a single run.
    pub mean_kl_stddev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub language: Option<LanguageSummary>,
    pub hidden_dim: usize,
    pub with_bias: bool,
    pub config: Option<TrainConfig>,
    pub rows: Vec<ComparisonRow>,
    pub aggregates: Vec<KindAggregate>,
}

impl ComparisonTable {
    pub fn empty() -> Self {
        ComparisonTable {
            language: None,
            hidden_dim: 0,
            with_bias: false,
            config: None,
            rows: Vec::new(),
            aggregates: Vec::new(),
        }
    }

    pub fn aggregate(&self, kind: ActivationKind) -> Option<&KindAggregate> {
        self.aggregates.iter().find(|a| a.kind == kind)
    }

    pub fn row(&self, kind: ActivationKind, seed: u64) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.kind == kind && r.seed == seed)
    }

    /// Comma-separated summary, one line per `(kind, seed)`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record([
            "kind",
            "seed",
            "mean_kl",
            "final_nll",
            "epochs_run",
            "converged",
            "numerical_rank",
            "bound",
        ])?;
        for row in &self.rows {
            writer.write_record([
                row.kind.name().to_string(),
                row.seed.to_string(),
                format_real(row.fit.mean_kl),
                format_real(row.fit.final_nll),
                row.fit.epochs_run.to_string(),
                row.fit.converged.to_string(),
                row.rank.numerical_rank.to_string(),
                row.rank.bound.to_string(),
            ])?;
        }
        writer.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

impl Report for ComparisonTable {
    fn non_finite_field(&self) -> Option<String> {
        for (i, row) in self.rows.iter().enumerate() {
            if let Some(f) = row.fit.non_finite_field() {
                return Some(format!("rows[{i}].fit.{f}"));
            }
            if let Some(f) = check_real("threshold", row.rank.threshold) {
                return Some(format!("rows[{i}].rank.{f}"));
            }
        }
        self.aggregates.iter().enumerate().find_map(|(i, a)| {
            check_real("mean_kl_mean", a.mean_kl_mean)
                .or_else(|| check_real("mean_kl_stddev", a.mean_kl_stddev))
                .map(|f| format!("aggregates[{i}].{f}"))
        })
    }
}

fn kind_order(kind: &ActivationKind) -> usize {
    ActivationKind::ALL
        .iter()
        .position(|k| k.name() == kind.name())
        .unwrap_or(usize::MAX)
}

/// Fits one [`FactorModel`] per `(kind, seed)` and measures the rank of each
/// fitted log-output matrix. Seed `s` initializes the model with
/// `FactorModel::initialize(.., s)`. Rows are sorted by kind (softmax,
/// sigsoftmax, relu_based, sigmoid_based) and then seed, independent of how
/// the fits were scheduled.
pub fn compare_activations(
    language: &SyntheticLanguage,
    dim: usize,
    with_bias: bool,
    kinds: &[ActivationKind],
    config: &TrainConfig,
    seeds: &[u64],
) -> Result<ComparisonTable> {
    config.validate()?;
    let mut jobs: Vec<(ActivationKind, u64)> = kinds
        .iter()
        .flat_map(|&k| seeds.iter().map(move |&s| (k, s)))
        .collect();
    jobs.sort_by(|a, b| kind_order(&a.0).cmp(&kind_order(&b.0)).then(a.1.cmp(&b.1)));
    jobs.dedup();

    let rows = jobs
        .into_par_iter()
        .map(|(kind, seed)| {
            let mut model = FactorModel::initialize(
                kind,
                language.contexts(),
                language.classes(),
                dim,
                with_bias,
                seed,
            )?;
            let report = fit(&mut model, language, &config.with_seed(seed))?;
            let log_outputs =
                collect_log_outputs(kind, &model.output, model.bias.as_ref(), &model.hidden.transpose())?;
            let rank = RankReport::analyze(&log_outputs, dim, with_bias);
            Ok(ComparisonRow {
                kind,
                seed,
                fit: report,
                rank: RankSummary::from(&rank),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut aggregates: Vec<KindAggregate> = Vec::new();
    for row in &rows {
        if aggregates.last().is_none_or(|a| a.kind != row.kind) {
            let values: Vec<f64> = rows
                .iter()
                .filter(|r| r.kind == row.kind)
                .map(|r| r.fit.mean_kl)
                .collect();
            let (mean, stddev) = mean_and_stddev(&values);
            aggregates.push(KindAggregate {
                kind: row.kind,
                runs: values.len(),
                mean_kl_mean: mean,
                mean_kl_stddev: stddev,
            });
        }
    }

    Ok(ComparisonTable {
        language: Some(language.summary()),
        hidden_dim: dim,
        with_bias,
        config: Some(*config),
        rows,
        aggregates,
    })
}

fn mean_and_stddev(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::serialize_report;
    use crate::synthetic::language::generate_language;

    fn quick() -> TrainConfig {
        TrainConfig {
            max_epochs: 200,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn empty_table_serializes() {
        let text = serialize_report(&ComparisonTable::empty()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["rows"], serde_json::json!([]));
    }

    #[test]
    fn two_seeds_two_rows() {
        let lang = generate_language(10, 5, 2, 1.0, 1).unwrap();
        let table = compare_activations(&lang, 2, false, &[ActivationKind::Softmax], &quick(), &[2, 1]).unwrap();
        assert_eq!(table.rows.len(), 2);
        assert_eq!(table.rows[0].seed, 1);
        let again = compare_activations(&lang, 2, false, &[ActivationKind::Softmax], &quick(), &[1, 2]).unwrap();
        assert_eq!(table, again);
        let agg = table.aggregate(ActivationKind::Softmax).unwrap();
        assert_eq!(agg.runs, 2);
    }

    #[test]
    fn rows_sorted_by_kind_then_seed() {
        let lang = generate_language(10, 5, 2, 1.0, 1).unwrap();
        let kinds = [ActivationKind::SigmoidBased, ActivationKind::Softmax];
        let table = compare_activations(&lang, 2, false, &kinds, &quick(), &[3, 1]).unwrap();
        let order: Vec<(&str, u64)> = table.rows.iter().map(|r| (r.kind.name(), r.seed)).collect();
        assert_eq!(
            order,
            [("softmax", 1), ("softmax", 3), ("sigmoid_based", 1), ("sigmoid_based", 3)]
        );
        assert_eq!(table.aggregates.len(), 2);
    }

    #[test]
    fn relu_completes() {
        let lang = generate_language(10, 5, 2, 1.0, 1).unwrap();
        let table =
            compare_activations(&lang, 2, false, &[ActivationKind::relu_based()], &quick(), &[1]).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert!(serialize_report(&table).is_ok());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let lang = generate_language(10, 5, 2, 1.0, 1).unwrap();
        let table = compare_activations(&lang, 2, false, &[ActivationKind::Softmax], &quick(), &[1]).unwrap();
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("kind,seed,mean_kl"));
        assert!(lines[1].starts_with("softmax,1,"));
    }
}
