//! The two predictor families and a tagged wrapper used by checkpoints and
//! the command line.

mod init;
pub mod prednet;
pub mod simple_cnn;

use serde::{Deserialize, Serialize};

use crate::data::{Episode, Frame};
use crate::engine::ParamSet;
use crate::error::Result;
use crate::rng::Rng;

pub use init::uniform_fan_in;
pub use prednet::{PredNet, PredNetConfig, PredNetState};
pub use simple_cnn::{SimpleCnn, SimpleCnnConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelConfig {
    SimpleCnn(SimpleCnnConfig),
    PredNet(PredNetConfig),
}

impl ModelConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelConfig::SimpleCnn(_) => "simple_cnn",
            ModelConfig::PredNet(_) => "prednet",
        }
    }

    pub fn in_channels(&self) -> usize {
        match self {
            ModelConfig::SimpleCnn(c) => c.in_channels,
            ModelConfig::PredNet(c) => c.in_channels(),
        }
    }
}

/// A model together with its learned parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    SimpleCnn(SimpleCnn),
    PredNet(PredNet),
}

impl Model {
    /// Fresh random initialisation.
    pub fn init(config: &ModelConfig, rng: &mut Rng) -> Result<Self> {
        Ok(match config {
            ModelConfig::SimpleCnn(c) => Model::SimpleCnn(SimpleCnn::new(c.clone(), rng)?),
            ModelConfig::PredNet(c) => Model::PredNet(PredNet::new(c.clone(), rng)?),
        })
    }

    pub fn config(&self) -> ModelConfig {
        match self {
            Model::SimpleCnn(m) => ModelConfig::SimpleCnn(m.config.clone()),
            Model::PredNet(m) => ModelConfig::PredNet(m.config.clone()),
        }
    }

    pub fn params(&self) -> &ParamSet {
        match self {
            Model::SimpleCnn(m) => &m.params,
            Model::PredNet(m) => &m.params,
        }
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        match self {
            Model::SimpleCnn(m) => &mut m.params,
            Model::PredNet(m) => &mut m.params,
        }
    }

    /// Predictions for frames `1..T` of `episode`; element `t` is compared
    /// with `episode.frames[t + 1]`.
    pub fn predict_episode(&self, episode: &Episode) -> Result<Vec<Frame>> {
        match self {
            Model::SimpleCnn(m) => {
                let inputs: Vec<&Frame> = episode
                    .frames
                    .iter()
                    .take(episode.len().saturating_sub(1))
                    .collect();
                if inputs.is_empty() {
                    return Ok(Vec::new());
                }
                m.predict(&inputs)
            }
            Model::PredNet(m) => {
                if episode.is_empty() {
                    return Ok(Vec::new());
                }
                m.rollout(&episode.frames)
            }
        }
    }
}
