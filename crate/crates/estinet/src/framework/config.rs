use serde::{Deserialize, Serialize};

use super::EstiNetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Procedure {
    /// Pretrain the estimator on a-priori samples, freeze it, then train the
    /// extractor alone.
    Offline,
    /// Joint training; the estimator learns from online-sampled queries.
    Online,
    /// Pretrain without freezing, then continue as online.
    Hybrid,
    /// The comparison baseline: one loss, every parameter updated by it, no
    /// black-box queries.
    EndToEnd,
}

/// Confidence regularization on the extractor's argument distributions. The
/// threshold form penalizes summed entropy above `gamma` with weight
/// `lambda`; the negative form rewards entropy directly. Reproduction
/// configs use the threshold form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyReg {
    Threshold { lambda: f64, gamma: f64 },
    Negative { weight: f64 },
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    /// Fresh a-priori samples drawn per epoch.
    pub samples_per_epoch: usize,
    /// Held-out a-priori samples for the stop rule.
    pub holdout: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop once held-out accuracy reaches this level...
    pub target_accuracy: f64,
    /// ...or once it has not improved for this many consecutive epochs.
    pub patience: usize,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            samples_per_epoch: 2000,
            holdout: 500,
            batch_size: 50,
            max_epochs: 30,
            target_accuracy: 0.9,
            patience: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub procedure: Procedure,
    /// Weight of the online black-box loss.
    pub beta: f64,
    pub entropy: EntropyReg,
    /// Label smoothing epsilon for classification losses.
    pub label_smoothing: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub pretrain: PretrainConfig,
    /// Online-procedure warm-up: for this many initial joint steps only the
    /// estimator updates (from online-sampled queries of the initial
    /// extractor); the extractor starts learning afterwards. Distinct from
    /// offline pretraining, which draws a-priori samples instead.
    #[serde(default)]
    pub online_warmup_steps: usize,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            procedure: Procedure::Hybrid,
            beta: 1.0,
            entropy: EntropyReg::Threshold { lambda: 0.1, gamma: 0.15 },
            label_smoothing: 0.0,
            learning_rate: 0.001,
            batch_size: 20,
            epochs: 5,
            pretrain: PretrainConfig::default(),
            online_warmup_steps: 0,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), EstiNetError> {
        if self.beta < 0.0 {
            return Err(EstiNetError::Config(format!("beta {} negative", self.beta)));
        }
        if let EntropyReg::Threshold { lambda, gamma } = self.entropy {
            if lambda < 0.0 || gamma < 0.0 {
                return Err(EstiNetError::Config(format!(
                    "entropy threshold weights must be non-negative: lambda {lambda}, gamma {gamma}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.label_smoothing) {
            return Err(EstiNetError::Config(format!(
                "label smoothing {} outside [0, 1]",
                self.label_smoothing
            )));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(EstiNetError::Config(
                "batch size and epochs must be positive".into(),
            ));
        }
        if self.learning_rate <= 0.0 {
            return Err(EstiNetError::Config(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        TrainingConfig::default().validate().unwrap();
    }

    #[test]
    fn negative_weights_are_rejected() {
        let mut c = TrainingConfig::default();
        c.beta = -1.0;
        assert!(c.validate().is_err());
        let mut c = TrainingConfig::default();
        c.entropy = EntropyReg::Threshold { lambda: -0.1, gamma: 0.15 };
        assert!(c.validate().is_err());
        let mut c = TrainingConfig::default();
        c.label_smoothing = 1.2;
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_roundtrips_through_json() {
        let c = TrainingConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        let back: TrainingConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(c, back);
    }
}
