//! Sigsoftmax and related output activations, with tools for measuring the
//! rank of log-output matrices and for fitting small factor models that expose
//! the softmax bottleneck.
//!
//! ```
//! use sigsoftmax::{forward, ActivationKind, LogitVector};
//!
//! let z = LogitVector::new(vec![1.0, 2.0, 0.0]).unwrap();
//! let p = forward(ActivationKind::sigsoftmax(), &z);
//! assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
//! ```

pub mod activation;
pub mod checks;
pub mod cli;
pub mod config;
pub mod error;
pub mod mixture;
pub mod prng;
pub mod rank;
pub mod report;
pub mod synthetic;

pub use activation::{
    argmax, finite_difference_log_jacobian, forward, log_forward, log_jacobian, logsumexp, nonlinearity_witness,
    sigmoid, softplus, unnormalized_log_g, ActivationKind, JacobianMatrix, LogProbVector, LogitVector,
    ProbabilityVector,
};
pub use config::TrainConfig;
pub use error::{Error, Result};
pub use mixture::{mixture_forward, mixture_log_forward, mixture_priors, MixtureKind, MixtureParams};
pub use prng::{gaussian_matrix, split_seed, Prng};
pub use rank::{
    bottleneck_counterexample, collect_log_outputs, numerical_rank, singular_values, verify_bound,
    LogOutputMatrix, RankReport, RankTrial,
};
pub use report::{serialize_report, Report};
