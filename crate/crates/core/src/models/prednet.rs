//! Hierarchical predictive-coding network.
//!
//! Each layer `l` holds a ConvLSTM representation `R_l`, predicts its target
//! `A_l` as `Â_l`, and emits the rectified positive and negative prediction
//! errors `E_l`. Errors feed the next layer's target through conv + max-pool;
//! representations feed the layer below through nearest upsampling.

use serde::{Deserialize, Serialize};

use crate::data::{self, Frame};
use crate::engine::{Activation, Bound, Padding, ParamSet, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::Rng;

use super::init::uniform_fan_in;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredNetConfig {
    /// Target channels per layer; the first entry is the pixel channel count.
    pub a_channels: Vec<usize>,
    /// Representation channels per layer.
    pub r_channels: Vec<usize>,
    pub kernel_size: usize,
    pub layer_loss_weights: Vec<f64>,
}

impl Default for PredNetConfig {
    fn default() -> Self {
        Self::for_channels(1)
    }
}

impl PredNetConfig {
    pub fn for_channels(in_channels: usize) -> Self {
        Self {
            a_channels: vec![in_channels, 16, 32],
            r_channels: vec![16, 32, 48],
            kernel_size: 3,
            layer_loss_weights: vec![1.0, 0.0, 0.0],
        }
    }

    pub fn num_layers(&self) -> usize {
        self.a_channels.len()
    }

    pub fn in_channels(&self) -> usize {
        self.a_channels[0]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a_channels.len();
        let bad = |msg: &str| Err(Error::invalid("prednet", msg.to_string()));
        if n == 0 || self.r_channels.len() != n || self.layer_loss_weights.len() != n {
            return bad("per-layer lists must be non-empty and of equal length");
        }
        if self
            .a_channels
            .iter()
            .chain(&self.r_channels)
            .any(|&c| c == 0)
        {
            return bad("channel counts must be positive");
        }
        if self.kernel_size % 2 == 0 {
            return bad("kernel size must be odd");
        }
        if self.layer_loss_weights.iter().any(|&w| !(w >= 0.0)) {
            return bad("layer loss weights must be non-negative");
        }
        Ok(())
    }

    /// Weight of the error at step `t` of a `len`-step sequence: nothing for
    /// the first step (there is no prediction yet), equal shares otherwise.
    pub fn time_weight(t: usize, len: usize) -> f64 {
        if t == 0 || len < 2 {
            0.0
        } else {
            1.0 / (len - 1) as f64
        }
    }

    fn lstm_inputs(&self, l: usize) -> usize {
        let up = self.r_channels.get(l + 1).copied().unwrap_or(0);
        2 * self.a_channels[l] + self.r_channels[l] + up
    }
}

pub fn lstm_weight(l: usize) -> String {
    format!("layer{l}.lstm.weight")
}
pub fn lstm_bias(l: usize) -> String {
    format!("layer{l}.lstm.bias")
}
pub fn ahat_weight(l: usize) -> String {
    format!("layer{l}.ahat.weight")
}
pub fn ahat_bias(l: usize) -> String {
    format!("layer{l}.ahat.bias")
}
pub fn target_weight(l: usize) -> String {
    format!("layer{l}.target.weight")
}
pub fn target_bias(l: usize) -> String {
    format!("layer{l}.target.bias")
}

/// Recurrent populations after one step, as handles on the tape that
/// produced them.
#[derive(Debug, Clone)]
pub struct PredNetState {
    pub r: Vec<Var>,
    pub c: Vec<Var>,
    pub e: Vec<Var>,
    batch: usize,
    height: usize,
    width: usize,
}

impl PredNetState {
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.batch, self.height, self.width)
    }
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub state: PredNetState,
    /// Pixel-layer prediction `Â_0` for the frame just consumed.
    pub prediction: Var,
    /// Mean of `E_l` per layer.
    pub layer_errors: Vec<Var>,
    /// `E_l` tensors themselves, for inspection.
    pub errors: Vec<Var>,
}

#[derive(Debug, Clone)]
pub struct Rollout {
    /// `Â_0` from steps `1..T`, i.e. predictions of frames `1..T`.
    pub predictions: Vec<Var>,
    pub loss: Var,
    /// Per-step, per-layer mean errors.
    pub layer_errors: Vec<Vec<Var>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredNet {
    pub config: PredNetConfig,
    pub params: ParamSet,
}

impl PredNet {
    pub fn new(config: PredNetConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let k = config.kernel_size;
        let mut params = ParamSet::new();
        for l in 0..config.num_layers() {
            let (a, r) = (config.a_channels[l], config.r_channels[l]);
            let cin = config.lstm_inputs(l);
            params.insert(
                lstm_weight(l),
                uniform_fan_in(&[4 * r, cin, k, k], cin * k * k, rng),
            )?;
            params.insert(lstm_bias(l), Tensor::zeros(&[4 * r]))?;
            params.insert(
                ahat_weight(l),
                uniform_fan_in(&[a, r, k, k], r * k * k, rng),
            )?;
            params.insert(ahat_bias(l), Tensor::zeros(&[a]))?;
            if let Some(&next) = config.a_channels.get(l + 1) {
                params.insert(
                    target_weight(l),
                    uniform_fan_in(&[next, 2 * a, k, k], 2 * a * k * k, rng),
                )?;
                params.insert(target_bias(l), Tensor::zeros(&[next]))?;
            }
        }
        Ok(Self { config, params })
    }

    fn pad(&self) -> Padding {
        Padding::same(self.config.kernel_size / 2)
    }

    /// All-zero populations for `batch` sequences of `height × width` frames.
    pub fn init_state(
        &self,
        tape: &mut Tape,
        batch: usize,
        height: usize,
        width: usize,
    ) -> Result<PredNetState> {
        let n = self.config.num_layers();
        let div = 1usize << (n - 1);
        if height == 0 || width == 0 || height % div != 0 || width % div != 0 {
            return Err(Error::invalid(
                "prednet",
                format!("frame size {height}×{width} must be divisible by {div}"),
            ));
        }
        let mut st = PredNetState {
            r: Vec::with_capacity(n),
            c: Vec::with_capacity(n),
            e: Vec::with_capacity(n),
            batch,
            height,
            width,
        };
        for l in 0..n {
            let (h, w) = (height >> l, width >> l);
            let r = self.config.r_channels[l];
            let a = self.config.a_channels[l];
            st.r.push(tape.leaf(Tensor::zeros(&[batch, r, h, w])));
            st.c.push(tape.leaf(Tensor::zeros(&[batch, r, h, w])));
            st.e.push(tape.leaf(Tensor::zeros(&[batch, 2 * a, h, w])));
        }
        Ok(st)
    }

    /// Advances one timestep: top-down representation update from the
    /// previous errors, then the bottom-up prediction/error pass on `frame`.
    pub fn step(
        &self,
        tape: &mut Tape,
        p: &Bound,
        state: &PredNetState,
        frame: Var,
    ) -> Result<StepOutput> {
        let n = self.config.num_layers();
        let [b, c, h, w] = tape.value(frame).dims4()?;
        if (b, h, w) != state.dims() || c != self.config.in_channels() {
            return Err(Error::invalid(
                "prednet",
                format!(
                    "frame batch {:?} does not match state {:?} with {} channels",
                    (b, c, h, w),
                    state.dims(),
                    self.config.in_channels()
                ),
            ));
        }
        let pad = self.pad();

        let mut r_new: Vec<Option<Var>> = vec![None; n];
        let mut c_new: Vec<Option<Var>> = vec![None; n];
        for l in (0..n).rev() {
            let mut inputs = vec![state.e[l], state.r[l]];
            if let Some(above) = r_new.get(l + 1).copied().flatten() {
                inputs.push(tape.upsample_nearest2(above)?);
            }
            let x = tape.concat_channels(&inputs)?;
            let gates = tape.conv2d(
                x,
                p.var(&lstm_weight(l)),
                Some(p.var(&lstm_bias(l))),
                1,
                pad,
            )?;
            let rc = self.config.r_channels[l];
            let i = tape.slice_channels(gates, 0, rc)?;
            let i = tape.sigmoid(i);
            let f = tape.slice_channels(gates, rc, rc)?;
            let f = tape.sigmoid(f);
            let o = tape.slice_channels(gates, 2 * rc, rc)?;
            let o = tape.sigmoid(o);
            let g = tape.slice_channels(gates, 3 * rc, rc)?;
            let g = tape.tanh(g);
            let keep = tape.mul(f, state.c[l])?;
            let write = tape.mul(i, g)?;
            let cell = tape.add(keep, write)?;
            let squashed = tape.tanh(cell);
            r_new[l] = Some(tape.mul(o, squashed)?);
            c_new[l] = Some(cell);
        }
        let r: Vec<Var> = r_new
            .into_iter()
            .map(|v| v.expect("every layer updated"))
            .collect();
        let cells: Vec<Var> = c_new
            .into_iter()
            .map(|v| v.expect("every layer updated"))
            .collect();

        let mut target = frame;
        let mut errors = Vec::with_capacity(n);
        let mut layer_errors = Vec::with_capacity(n);
        let mut prediction = None;
        for l in 0..n {
            let ahat = tape.conv2d(
                r[l],
                p.var(&ahat_weight(l)),
                Some(p.var(&ahat_bias(l))),
                1,
                pad,
            )?;
            let mut ahat = tape.relu(ahat);
            if l == 0 {
                ahat = tape.activation(ahat, Activation::HardClip01);
                prediction = Some(ahat);
            }
            let over = tape.sub(target, ahat)?;
            let over = tape.relu(over);
            let under = tape.sub(ahat, target)?;
            let under = tape.relu(under);
            let e = tape.concat2(over, under)?;
            layer_errors.push(tape.l1_mean(e));
            errors.push(e);
            if l + 1 < n {
                let a = tape.conv2d(
                    e,
                    p.var(&target_weight(l)),
                    Some(p.var(&target_bias(l))),
                    1,
                    pad,
                )?;
                let a = tape.relu(a);
                target = tape.pool_max2(a)?;
            }
        }

        Ok(StepOutput {
            state: PredNetState {
                r,
                c: cells,
                e: errors.clone(),
                ..*state
            },
            prediction: prediction.expect("at least one layer"),
            layer_errors,
            errors,
        })
    }

    /// Runs a batch of equally long sequences from a zero state and records
    /// the weighted error loss. `frames[t]` is the `N × C × H × W` batch at
    /// step `t`.
    pub fn unroll(&self, tape: &mut Tape, p: &Bound, frames: &[Tensor]) -> Result<Rollout> {
        let first = frames
            .first()
            .ok_or_else(|| Error::invalid("prednet", "empty sequence"))?;
        let [b, _, h, w] = first.dims4()?;
        let len = frames.len();
        let mut state = self.init_state(tape, b, h, w)?;
        let mut predictions = Vec::with_capacity(len.saturating_sub(1));
        let mut layer_errors = Vec::with_capacity(len);
        let mut loss: Option<Var> = None;
        for (t, f) in frames.iter().enumerate() {
            let x = tape.leaf(f.clone());
            let out = self.step(tape, p, &state, x)?;
            if t > 0 {
                predictions.push(out.prediction);
            }
            let wt = PredNetConfig::time_weight(t, len);
            for (l, &err) in out.layer_errors.iter().enumerate() {
                let wl = self.config.layer_loss_weights[l];
                if wt * wl == 0.0 {
                    continue;
                }
                let term = tape.scale(err, wt * wl);
                loss = Some(match loss {
                    Some(acc) => tape.add(acc, term)?,
                    None => term,
                });
            }
            layer_errors.push(out.layer_errors);
            state = out.state;
        }
        let loss = match loss {
            Some(l) => l,
            None => tape.leaf(Tensor::scalar(0.0)),
        };
        Ok(Rollout {
            predictions,
            loss,
            layer_errors,
        })
    }

    /// Predictions for frames `1..T` of one sequence; prediction `t` has seen
    /// frames `0..=t` and is scored against frame `t + 1`.
    pub fn rollout(&self, frames: &[Frame]) -> Result<Vec<Frame>> {
        if frames.is_empty() {
            return Err(Error::invalid("prednet_rollout", "empty episode"));
        }
        let mut tape = Tape::new();
        let p = self.params.bind_frozen(&mut tape);
        let seq: Vec<Tensor> = frames.iter().map(Frame::to_tensor).collect();
        let out = self.unroll(&mut tape, &p, &seq)?;
        out.predictions
            .iter()
            .map(|&v| Ok(data::unstack(tape.value(v))?.remove(0)))
            .collect()
    }
}
