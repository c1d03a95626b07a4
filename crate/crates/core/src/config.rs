use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Full-batch gradient descent settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Training stops once the loss improves by less than this over
    /// [`TrainConfig::PATIENCE`] epochs.
    pub tol: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub const PATIENCE: usize = 50;

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(
                "learning_rate",
                format!("must be positive, got {}", self.learning_rate),
            ));
        }
        if self.max_epochs == 0 {
            return Err(Error::invalid("max_epochs", "must be at least 1"));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::invalid("tol", format!("must be non-negative, got {}", self.tol)));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        TrainConfig { seed, ..self }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.5,
            max_epochs: 20_000,
            tol: 1e-9,
            seed: 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let base = TrainConfig::default();
        assert!(TrainConfig { learning_rate: 0.0, ..base }.validate().is_err());
        assert!(TrainConfig { learning_rate: f64::NAN, ..base }.validate().is_err());
        assert!(TrainConfig { max_epochs: 0, ..base }.validate().is_err());
        assert!(TrainConfig { tol: -1.0, ..base }.validate().is_err());
    }
}
