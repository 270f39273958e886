use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::kge::ModelFamily;

/// Per-fact regularizer added to the cross-entropy objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegKind {
    /// Squared Frobenius norm of every parameter row the fact touches.
    F2,
    /// Duality-induced regularizer over compositions and targets.
    Dura,
}

impl fmt::Display for RegKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegKind::F2 => "f2",
            RegKind::Dura => "dura",
        })
    }
}

impl FromStr for RegKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "f2" | "fro" | "frobenius" => Ok(RegKind::F2),
            "dura" => Ok(RegKind::Dura),
            _ => Err(format!("unknown regularizer {s:?} (f2|dura)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Optimizer {
    #[default]
    Adagrad,
}

/// Benchmark whose tuned hyperparameters are used as defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Profile {
    #[default]
    Wn18,
    Fb15k,
}

impl Profile {
    /// Step at which CR@k is reported.
    pub fn k_report(self) -> usize {
        match self {
            Profile::Wn18 => 50,
            Profile::Fb15k => 200,
        }
    }

    /// Tuned regularizer and weight per model family.
    pub fn regularization(self, family: ModelFamily) -> (RegKind, f64) {
        use ModelFamily::*;
        use RegKind::*;
        match (self, family) {
            (_, TransE) => (F2, 0.003),
            (Profile::Wn18, Cp) => (F2, 0.001),
            (Profile::Fb15k, Cp) => (F2, 0.0),
            (Profile::Wn18, RotatE) => (F2, 0.005),
            (Profile::Fb15k, RotatE) => (F2, 0.01),
            (_, RotE) => (F2, 0.01),
            (_, ComplEx) => (Dura, 0.001),
            (Profile::Wn18, QuatE) => (F2, 0.003),
            (Profile::Fb15k, QuatE) => (F2, 0.001),
            (Profile::Wn18, Rescal) => (F2, 0.001),
            (Profile::Fb15k, Rescal) => (F2, 0.003),
            (_, UniBiO2) | (_, UniBiO3) => (Dura, 0.01),
        }
    }
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "wn18" => Ok(Profile::Wn18),
            "fb15k" => Ok(Profile::Fb15k),
            _ => Err(format!("unknown profile {s:?} (wn18|fb15k)")),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Wn18 => "wn18",
            Profile::Fb15k => "fb15k",
        })
    }
}

/// Regularization weight grid searched during hyperparameter selection.
pub const REG_WEIGHT_GRID: [f64; 5] = [0.0, 0.001, 0.003, 0.005, 0.01];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Epoch budget for pretraining.
    pub max_epochs: usize,
    /// Epoch budget for each retraining / fine-tuning update.
    pub incremental_epochs: usize,
    pub reg_kind: RegKind,
    /// Weight `λ` of the per-fact regularizer.
    pub lambda: f64,
    /// Weight `μ` of the entity drift penalty during incremental updates.
    pub mu: f64,
    pub dim: usize,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            batch_size: 1000,
            max_epochs: 100,
            incremental_epochs: 20,
            reg_kind: RegKind::F2,
            lambda: 0.0,
            mu: 0.001,
            dim: 500,
            optimizer: Optimizer::Adagrad,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Defaults with the tuned regularizer for `family` on `profile`.
    pub fn tuned(family: ModelFamily, profile: Profile) -> Self {
        let (reg_kind, lambda) = profile.regularization(family);
        TrainConfig {
            reg_kind,
            lambda,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return Err("batch size must be positive".into());
        }
        if self.dim == 0 {
            return Err("dimension must be positive".into());
        }
        if !(self.lambda >= 0.0 && self.mu >= 0.0) {
            return Err("regularization weights must be non-negative".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_hyperparameter_table() {
        let c = TrainConfig::default();
        assert_eq!(c.batch_size, 1000);
        assert_eq!(c.learning_rate, 0.001);
        assert_eq!(c.dim, 500);
        assert_eq!(c.max_epochs, 100);
        assert_eq!(c.incremental_epochs, 20);
        assert_eq!(c.optimizer, Optimizer::Adagrad);
        assert_eq!(REG_WEIGHT_GRID, [0.0, 0.001, 0.003, 0.005, 0.01]);
    }

    #[test]
    fn tuned_settings() {
        let c = TrainConfig::tuned(ModelFamily::ComplEx, Profile::Wn18);
        assert_eq!((c.reg_kind, c.lambda), (RegKind::Dura, 0.001));
        let c = TrainConfig::tuned(ModelFamily::Cp, Profile::Fb15k);
        assert_eq!((c.reg_kind, c.lambda), (RegKind::F2, 0.0));
        assert_eq!(Profile::Wn18.k_report(), 50);
        assert_eq!(Profile::Fb15k.k_report(), 200);
    }
}
