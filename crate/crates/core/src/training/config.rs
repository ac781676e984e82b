use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::autodiff::PadMode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    #[serde(rename = "T")]
    pub length: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningRates {
    pub generator: f64,
    pub discriminator: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub adv: f64,
    pub cycle: f64,
    pub fk: f64,
    pub latent: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            adv: 1.0,
            cycle: 10.0,
            fk: 5.0,
            latent: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub window: WindowConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: LearningRates,
    pub weights: LossWeights,
    pub padding: PadMode,
    /// Steps between checkpoints; 0 writes only the final one.
    pub checkpoint_interval: usize,
    /// Stops early once this many steps have run.
    pub max_steps: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            window: WindowConfig {
                length: 64,
                stride: 32,
            },
            batch_size: 8,
            epochs: 200,
            lr: LearningRates {
                generator: 1e-4,
                discriminator: 1e-4,
            },
            weights: LossWeights::default(),
            padding: PadMode::Reflect,
            checkpoint_interval: 500,
            max_steps: None,
        }
    }
}

impl TrainConfig {
    pub fn from_json(text: &str) -> Result<Self, TrainError> {
        let config: TrainConfig =
            serde_json::from_str(text).map_err(|e| TrainError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TrainError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| TrainError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        let t = self.window.length;
        if t < 8 || t % 2 != 0 {
            return bad(format!("window.T must be even and >= 8, got {t}"));
        }
        if self.window.stride == 0 {
            return bad("window.stride must be >= 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        let w = self.weights;
        if [w.adv, w.cycle, w.fk, w.latent]
            .iter()
            .any(|v| !(*v >= 0.0))
        {
            return bad("loss weights must be >= 0".into());
        }
        if !(self.lr.generator > 0.0 && self.lr.discriminator > 0.0) {
            return bad("learning rates must be positive".into());
        }
        Ok(())
    }
}
