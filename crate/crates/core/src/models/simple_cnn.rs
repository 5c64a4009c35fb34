use serde::{Deserialize, Serialize};

use crate::data::{self, Frame};
use crate::engine::{Bound, Padding, ParamSet, Tape, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;

use super::init::uniform_fan_in;

pub const ENCODER_WEIGHT: &str = "encoder.conv.weight";
pub const ENCODER_BIAS: &str = "encoder.conv.bias";
pub const DECODER_WEIGHT: &str = "decoder.deconv.weight";
pub const DECODER_BIAS: &str = "decoder.deconv.bias";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimpleCnnConfig {
    pub in_channels: usize,
    pub latent_channels: usize,
    pub kernel_size: usize,
}

impl Default for SimpleCnnConfig {
    fn default() -> Self {
        Self {
            in_channels: 1,
            latent_channels: 32,
            kernel_size: 3,
        }
    }
}

impl SimpleCnnConfig {
    pub fn with_kernel(kernel_size: usize) -> Self {
        Self {
            kernel_size,
            ..Self::default()
        }
    }

    /// Size-preserving padding at stride 1. Even kernels put the extra row
    /// and column on the top/left.
    pub fn padding(&self) -> Padding {
        let k = self.kernel_size;
        if k % 2 == 1 {
            Padding::same((k - 1) / 2)
        } else {
            Padding::new(k / 2, k / 2 - 1)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.latent_channels == 0 || self.kernel_size == 0 {
            return Err(Error::invalid(
                "simple_cnn",
                "channels and kernel size must be positive",
            ));
        }
        Ok(())
    }
}

/// One convolution into a latent map, ReLU, one transposed convolution back
/// to pixel logits.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpleCnn {
    pub config: SimpleCnnConfig,
    pub params: ParamSet,
}

impl SimpleCnn {
    pub fn new(config: SimpleCnnConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let (c, l, k) = (
            config.in_channels,
            config.latent_channels,
            config.kernel_size,
        );
        let mut params = ParamSet::new();
        params.insert(
            ENCODER_WEIGHT,
            uniform_fan_in(&[l, c, k, k], c * k * k, rng),
        )?;
        params.insert(ENCODER_BIAS, crate::engine::Tensor::zeros(&[l]))?;
        params.insert(
            DECODER_WEIGHT,
            uniform_fan_in(&[l, c, k, k], l * k * k, rng),
        )?;
        params.insert(DECODER_BIAS, crate::engine::Tensor::zeros(&[c]))?;
        Ok(Self { config, params })
    }

    /// Pre-sigmoid outputs for an `N × C × H × W` batch.
    pub fn logits(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        let [_, c, _, _] = tape.value(x).dims4()?;
        if c != self.config.in_channels {
            return Err(Error::invalid(
                "simple_cnn",
                format!(
                    "input has {c} channels, model expects {}",
                    self.config.in_channels
                ),
            ));
        }
        let pad = self.config.padding();
        let h = tape.conv2d(x, p.var(ENCODER_WEIGHT), Some(p.var(ENCODER_BIAS)), 1, pad)?;
        let h = tape.relu(h);
        tape.conv2d_transpose(h, p.var(DECODER_WEIGHT), Some(p.var(DECODER_BIAS)), 1, pad)
    }

    /// Per-pixel probability that the next frame is on.
    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        let z = self.logits(tape, p, x)?;
        Ok(tape.sigmoid(z))
    }

    /// Next-frame probabilities for each input frame.
    pub fn predict(&self, frames: &[&Frame]) -> Result<Vec<Frame>> {
        let mut tape = Tape::new();
        let p = self.params.bind_frozen(&mut tape);
        let x = tape.leaf(data::stack(frames)?);
        let y = self.forward(&mut tape, &p, x)?;
        data::unstack(tape.value(y))
    }

    pub fn predict_one(&self, frame: &Frame) -> Result<Frame> {
        Ok(self.predict(&[frame])?.remove(0))
    }
}
