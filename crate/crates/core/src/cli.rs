//! Command-line front end. Every subcommand prints a JSON report on stdout;
//! exit status is 0 on success, 1 when a check fails or an experiment cannot
//! run, and 2 for usage errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::activation::ActivationKind;
use crate::checks::{counterexample_check, gradient_check, limit_check, DEFAULT_KINK_MARGIN};
use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::rank::{RankReport, RankTrial};
use crate::report::{check_reals, serialize_report, write_singular_values_csv, Report};
use crate::synthetic::{bigram_language_from_text, compare_activations, generate_language, ComparisonTable};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "sigsoftmax", version, about = "Output activation checks and softmax-bottleneck experiments")]
pub struct Cli {
    /// Print wall-clock time to stderr (never part of the JSON report).
    #[arg(long, global = true)]
    pub timing: bool,

    #[command(subcommand)]
    pub command: Command,
}

fn parse_kind(s: &str) -> std::result::Result<ActivationKind, String> {
    s.parse::<ActivationKind>().map_err(|e| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compare closed-form log-output Jacobians with central differences.
    GradCheck {
        #[arg(long, value_parser = parse_kind)]
        kind: ActivationKind,
        #[arg(long, default_value_t = 10)]
        dim: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// ReLU-based draws closer than this to zero are redrawn.
        #[arg(long, default_value_t = DEFAULT_KINK_MARGIN)]
        kink_margin: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Distance between sigsoftmax(z + k) and softmax(z) for k = 0..=kmax.
    LimitCheck {
        #[arg(long, default_value_t = 10)]
        dim: usize,
        #[arg(long, default_value_t = 30)]
        kmax: usize,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Use z = 0 instead of random logits.
        #[arg(long)]
        zero: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Three log-outputs from a one-dimensional input space and their determinant.
    Counterexample {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Numerical rank of a random log-output matrix.
    RankDemo {
        #[arg(long = "M", default_value_t = 50)]
        classes: usize,
        #[arg(long = "d", default_value_t = 5)]
        hidden: usize,
        #[arg(long = "T", default_value_t = 200)]
        samples: usize,
        #[arg(long, value_parser = parse_kind, default_value = "softmax")]
        kind: ActivationKind,
        #[arg(long)]
        bias: bool,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write the singular values here, one per line.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit factor models to a generated low-rank language.
    Bottleneck {
        #[arg(long = "N", default_value_t = 40)]
        contexts: usize,
        #[arg(long = "M", default_value_t = 10)]
        classes: usize,
        #[arg(long, default_value_t = 6)]
        rank: usize,
        #[arg(long, default_value_t = 2.0)]
        concentration: f64,
        #[arg(long, default_value_t = 7)]
        language_seed: u64,
        #[command(flatten)]
        experiment: ExperimentArgs,
    },
    /// Fit factor models to an add-alpha bigram language built from a text file.
    Bigram {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 100)]
        vocab_cap: usize,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[command(flatten)]
        experiment: ExperimentArgs,
    },
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long = "d", default_value_t = 2)]
    pub hidden: usize,
    #[arg(long, value_parser = parse_kind, value_delimiter = ',', default_value = "softmax,sigsoftmax")]
    pub kinds: Vec<ActivationKind>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub bias: bool,
    #[arg(long, default_value_t = 0.5)]
    pub lr: f64,
    #[arg(long, default_value_t = 20_000)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// JSON table path; the CSV table goes next to it with a `.csv` extension.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl ExperimentArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            max_epochs: self.max_epochs,
            tol: self.tol,
            seed: 0,
        }
    }
}

#[derive(Debug, Serialize)]
struct RankDemoReport {
    trial: RankTrial,
    report: RankReport,
    passed: bool,
}

impl Report for RankDemoReport {
    fn non_finite_field(&self) -> Option<String> {
        self.report.non_finite_field()
    }
}

#[derive(Debug, Serialize)]
struct ExperimentReport<'a> {
    table: &'a ComparisonTable,
    completed: bool,
}

impl Report for ExperimentReport<'_> {
    fn non_finite_field(&self) -> Option<String> {
        self.table.non_finite_field()
    }
}

struct Outcome {
    json: String,
    passed: bool,
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(io_error(path))
}

fn emit<R: Report>(report: &R, passed: bool, out: Option<&Path>) -> Result<Outcome> {
    let json = serialize_report(report)?;
    if let Some(path) = out {
        write_text(path, &json)?;
    }
    Ok(Outcome { json, passed })
}

fn write_table_files(table: &ComparisonTable, json: &str, out: &Path) -> Result<()> {
    write_text(out, json)?;
    let csv_path = out.with_extension("csv");
    let file = std::fs::File::create(&csv_path).map_err(io_error(&csv_path))?;
    table.write_csv(std::io::BufWriter::new(file))
}

fn run_experiment(table: ComparisonTable, out: Option<&Path>) -> Result<Outcome> {
    let report = ExperimentReport {
        table: &table,
        completed: true,
    };
    let json = serialize_report(&report)?;
    if let Some(path) = out {
        write_table_files(&table, &json, path)?;
    }
    Ok(Outcome { json, passed: true })
}

fn execute(command: &Command) -> Result<Outcome> {
    match command {
        Command::GradCheck {
            kind,
            dim,
            trials,
            step,
            seed,
            kink_margin,
            out,
        } => {
            let report = gradient_check(*kind, *dim, *trials, *step, *seed, *kink_margin)?;
            emit(&report, report.passed, out.as_deref())
        }
        Command::LimitCheck {
            dim,
            kmax,
            trials,
            seed,
            zero,
            out,
        } => {
            let report = limit_check(*dim, *kmax, *trials, *seed, *zero)?;
            emit(&report, report.passed, out.as_deref())
        }
        Command::Counterexample { out } => {
            let report = counterexample_check();
            emit(&report, report.passed, out.as_deref())
        }
        Command::RankDemo {
            classes,
            hidden,
            samples,
            kind,
            bias,
            seed,
            csv,
            out,
        } => {
            let trial = RankTrial {
                kind: *kind,
                classes: *classes,
                hidden: *hidden,
                samples: *samples,
                bias: *bias,
                seed: *seed,
            };
            let report = trial.run()?;
            let passed = match kind {
                ActivationKind::Softmax => report.bound_respected,
                ActivationKind::Sigsoftmax { .. } => report.numerical_rank > hidden + 1,
                _ => true,
            };
            if let Some(path) = csv {
                let file = std::fs::File::create(path).map_err(io_error(path))?;
                write_singular_values_csv(std::io::BufWriter::new(file), &report.singular_values)?;
            }
            if let Some(f) = check_reals("singular_values", &report.singular_values) {
                return Err(Error::NonFiniteField(f));
            }
            let demo = RankDemoReport { trial, report, passed };
            emit(&demo, passed, out.as_deref())
        }
        Command::Bottleneck {
            contexts,
            classes,
            rank,
            concentration,
            language_seed,
            experiment,
        } => {
            let language = generate_language(*contexts, *classes, *rank, *concentration, *language_seed)?;
            let table = compare_activations(
                &language,
                experiment.hidden,
                experiment.bias,
                &experiment.kinds,
                &experiment.config(),
                &experiment.seeds,
            )?;
            run_experiment(table, experiment.out.as_deref())
        }
        Command::Bigram {
            corpus,
            vocab_cap,
            alpha,
            experiment,
        } => {
            let language = bigram_language_from_text(corpus, *vocab_cap, *alpha)?;
            let table = compare_activations(
                &language,
                experiment.hidden,
                experiment.bias,
                &experiment.kinds,
                &experiment.config(),
                &experiment.seeds,
            )?;
            run_experiment(table, experiment.out.as_deref())
        }
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let started = Instant::now();
    let outcome = execute(&cli.command);
    if cli.timing {
        let _ = writeln!(stderr, "elapsed: {:.3}s", started.elapsed().as_secs_f64());
    }
    match outcome {
        Ok(Outcome { json, passed }) => {
            if stdout.write_all(json.as_bytes()).is_err() {
                return EXIT_FAILED;
            }
            if passed {
                EXIT_OK
            } else {
                let _ = writeln!(stderr, "check failed");
                EXIT_FAILED
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            match e {
                Error::InvalidParameter { .. } | Error::TooFewClasses(_) => EXIT_USAGE,
                _ => EXIT_FAILED,
            }
        }
    }
}
