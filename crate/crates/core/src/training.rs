//! Training loops.
//!
//! Frame pairs and sequences never cross an episode boundary. All randomness
//! (initialisation and per-epoch shuffling) derives from `TrainConfig::seed`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{self, Dataset, Frame};
use crate::engine::{Optimizer, OptimizerConfig, Tape, Tensor};
use crate::error::{Error, Result};
use crate::eval;
use crate::models::{Model, ModelConfig, PredNet, SimpleCnn};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Frame pairs per step for the conv predictor, episodes per step for
    /// the recurrent one.
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    /// Global L2 gradient-norm cap.
    pub grad_clip: Option<f64>,
    /// Validation MSE is computed every this many epochs (and after the last).
    pub eval_every: usize,
    /// Share of episodes held out when no validation set is given.
    pub holdout_fraction: f64,
}

impl TrainConfig {
    pub fn simple_cnn(seed: u64) -> Self {
        Self {
            epochs: 20,
            batch_size: 8,
            // At 1e-3 the predictor is still far from the rule after 20
            // epochs of desk-scale data.
            optimizer: OptimizerConfig::adam(1e-2),
            seed,
            grad_clip: None,
            eval_every: 1,
            holdout_fraction: 0.1,
        }
    }

    pub fn prednet(seed: u64) -> Self {
        Self {
            epochs: 150,
            batch_size: 4,
            optimizer: OptimizerConfig::default(),
            seed,
            grad_clip: Some(5.0),
            eval_every: 10,
            holdout_fraction: 0.1,
        }
    }

    pub fn for_model(config: &ModelConfig, seed: u64) -> Self {
        match config {
            ModelConfig::SimpleCnn(_) => Self::simple_cnn(seed),
            ModelConfig::PredNet(_) => Self::prednet(seed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.eval_every == 0 {
            return Err(Error::invalid(
                "train_config",
                "epochs, batch_size and eval_every must be at least 1",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub val_mse: Option<f64>,
}

impl EpochRecord {
    /// `epoch=3 loss=0.0123 val_mse=0.0456`
    pub fn progress_line(&self) -> String {
        let mut s = format!("epoch={} loss={:.6}", self.epoch, self.loss);
        if let Some(v) = self.val_mse {
            s.push_str(&format!(" val_mse={v:.6}"));
        }
        s
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub wall_time_secs: f64,
    pub checkpoint: Option<String>,
}

impl TrainHistory {
    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss).collect()
    }

    pub fn last_val_mse(&self) -> Option<f64> {
        self.epochs.iter().rev().find_map(|e| e.val_mse)
    }
}

/// Position of frame `t` within episode `episode`; the pair is
/// `(frames[t], frames[t + 1])`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairIndex {
    pub episode: usize,
    pub t: usize,
}

/// Every within-episode consecutive pair, shuffled with `rng` when given.
/// Episodes with fewer than two frames contribute nothing.
pub fn sample_pairs(dataset: &Dataset, rng: Option<&mut Rng>) -> Vec<PairIndex> {
    let mut pairs = Vec::new();
    for (i, e) in dataset.episodes.iter().enumerate() {
        if e.len() < 2 {
            log::warn!("episode {i} has {} frame(s); skipped", e.len());
            continue;
        }
        pairs.extend((0..e.len() - 1).map(|t| PairIndex { episode: i, t }));
    }
    if let Some(r) = rng {
        pairs.shuffle(r);
    }
    pairs
}

pub type Progress<'a> = Option<&'a mut dyn FnMut(&EpochRecord)>;

/// Wall clock for history records. `Instant` is unavailable in browsers, so
/// wasm builds record zero.
struct Stopwatch(Option<std::time::Instant>);

impl Stopwatch {
    fn start() -> Self {
        Self((!cfg!(target_arch = "wasm32")).then(std::time::Instant::now))
    }

    fn secs(&self) -> f64 {
        self.0.map_or(0.0, |t| t.elapsed().as_secs_f64())
    }
}

fn check_finite(loss: f64, epoch: usize, config: &TrainConfig) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteLoss {
            loss,
            epoch,
            lr: config.optimizer.lr(),
        })
    }
}

fn finish_epoch(
    history: &mut TrainHistory,
    epoch: usize,
    loss: f64,
    config: &TrainConfig,
    model: &Model,
    val: Option<&Dataset>,
    progress: &mut Progress,
) -> Result<()> {
    let due = epoch % config.eval_every == 0 || epoch == config.epochs;
    let val_mse = match val {
        Some(v) if due && !v.episodes.is_empty() => Some(eval::model_mse(model, v)?),
        _ => None,
    };
    let rec = EpochRecord {
        epoch,
        loss,
        val_mse,
    };
    if let Some(p) = progress.as_mut() {
        p(&rec);
    }
    history.epochs.push(rec);
    Ok(())
}

/// Epoch-at-a-time trainer for the conv predictor: minimises the Bernoulli
/// NLL of `frames[t + 1]` under the predictor's output for `frames[t]`.
pub struct CnnTrainer {
    model: Model,
    opt: Optimizer,
    shuffle: Rng,
    config: TrainConfig,
    epoch: usize,
}

impl CnnTrainer {
    pub fn new(model: SimpleCnn, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            model: Model::SimpleCnn(model),
            opt: Optimizer::new(config.optimizer)?,
            shuffle: rng::stream(config.seed, 1),
            config: config.clone(),
            epoch: 0,
        })
    }

    pub fn model(&self) -> &SimpleCnn {
        let Model::SimpleCnn(m) = &self.model else {
            unreachable!()
        };
        m
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    /// One pass over every frame pair of `train` in a fresh shuffled order.
    /// Returns the mean per-pair loss.
    pub fn run_epoch(&mut self, train: &Dataset) -> Result<f64> {
        self.epoch += 1;
        let pairs = sample_pairs(train, Some(&mut self.shuffle));
        if pairs.is_empty() {
            return Err(Error::invalid("train", "dataset has no frame pairs"));
        }
        let frame =
            |p: PairIndex, dt: usize| -> &Frame { &train.episodes[p.episode].frames[p.t + dt] };
        let Model::SimpleCnn(m) = &mut self.model else {
            unreachable!()
        };
        let mut total = 0.0;
        for batch in pairs.chunks(self.config.batch_size) {
            let inputs: Vec<&Frame> = batch.iter().map(|&p| frame(p, 0)).collect();
            let targets: Vec<&Frame> = batch.iter().map(|&p| frame(p, 1)).collect();
            let mut tape = Tape::new();
            let bound = m.params.bind(&mut tape);
            let x = tape.leaf(data::stack(&inputs)?);
            let y = tape.leaf(data::stack(&targets)?);
            let z = m.logits(&mut tape, &bound, x)?;
            let loss = tape.bernoulli_nll_with_logits(z, y)?;
            let lv = tape.item(loss);
            check_finite(lv, self.epoch, &self.config)?;
            total += lv * batch.len() as f64;
            tape.backward(loss)?;
            m.params.reset_grads();
            m.params.absorb_grads(&tape, &bound);
            if let Some(c) = self.config.grad_clip {
                m.params.clip_grad_norm(c);
            }
            self.opt.step(&mut m.params)?;
        }
        Ok(total / pairs.len() as f64)
    }

    pub fn into_model(self) -> SimpleCnn {
        let Model::SimpleCnn(m) = self.model else {
            unreachable!()
        };
        m
    }
}

/// Runs [`CnnTrainer`] for `config.epochs` epochs.
pub fn train_simple_cnn(
    model: SimpleCnn,
    train: &Dataset,
    val: Option<&Dataset>,
    config: &TrainConfig,
    mut progress: Progress,
) -> Result<(SimpleCnn, TrainHistory)> {
    let clock = Stopwatch::start();
    let mut trainer = CnnTrainer::new(model, config)?;
    let mut history = TrainHistory::default();
    for epoch in 1..=config.epochs {
        let mean = trainer.run_epoch(train)?;
        finish_epoch(
            &mut history,
            epoch,
            mean,
            config,
            &trainer.model,
            val,
            &mut progress,
        )?;
    }
    history.wall_time_secs = clock.secs();
    Ok((trainer.into_model(), history))
}

/// Minimises the time- and layer-weighted mean error activity over whole
/// episodes, unrolled from a zero state.
pub fn train_prednet(
    model: PredNet,
    train: &Dataset,
    val: Option<&Dataset>,
    config: &TrainConfig,
    mut progress: Progress,
) -> Result<(PredNet, TrainHistory)> {
    config.validate()?;
    let clock = Stopwatch::start();
    let mut model = Model::PredNet(model);
    let mut opt = Optimizer::new(config.optimizer)?;
    let mut shuffle = rng::stream(config.seed, 1);
    let mut history = TrainHistory::default();

    let usable: Vec<usize> = (0..train.episodes.len())
        .filter(|&i| {
            let ok = train.episodes[i].len() >= 2;
            if !ok {
                log::warn!("episode {i} is too short for sequence training; skipped");
            }
            ok
        })
        .collect();
    if usable.is_empty() {
        return Err(Error::invalid("train", "dataset has no usable episodes"));
    }

    for epoch in 1..=config.epochs {
        let mut order = usable.clone();
        order.shuffle(&mut shuffle);
        // Batch only episodes of equal length; stable sort keeps the shuffle
        // within each length class.
        order.sort_by_key(|&i| train.episodes[i].len());
        let mut batches: Vec<Vec<usize>> = Vec::new();
        for i in order {
            match batches.last_mut() {
                Some(b)
                    if b.len() < config.batch_size
                        && train.episodes[b[0]].len() == train.episodes[i].len() =>
                {
                    b.push(i)
                }
                _ => batches.push(vec![i]),
            }
        }
        batches.shuffle(&mut shuffle);

        let mut total = 0.0;
        let mut count = 0usize;
        for batch in &batches {
            let Model::PredNet(m) = &mut model else {
                unreachable!()
            };
            let len = train.episodes[batch[0]].len();
            let seq = (0..len)
                .map(|t| {
                    let frames: Vec<&Frame> = batch
                        .iter()
                        .map(|&e| &train.episodes[e].frames[t])
                        .collect();
                    data::stack(&frames)
                })
                .collect::<Result<Vec<Tensor>>>()?;
            let mut tape = Tape::new();
            let bound = m.params.bind(&mut tape);
            let out = m.unroll(&mut tape, &bound, &seq)?;
            let lv = tape.item(out.loss);
            check_finite(lv, epoch, config)?;
            total += lv * batch.len() as f64;
            count += batch.len();
            tape.backward(out.loss)?;
            m.params.reset_grads();
            m.params.absorb_grads(&tape, &bound);
            // Parameters a zero loss weight never reaches still need a
            // gradient entry for the optimizer.
            for p in m.params.iter_mut() {
                if p.tensor.grad().is_none() {
                    let zeros = vec![0.0; p.tensor.len()];
                    p.tensor.accumulate_grad(&zeros);
                }
            }
            if let Some(c) = config.grad_clip {
                m.params.clip_grad_norm(c);
            }
            opt.step(&mut m.params)?;
        }
        let mean = total / count as f64;
        finish_epoch(
            &mut history,
            epoch,
            mean,
            config,
            &model,
            val,
            &mut progress,
        )?;
    }
    history.wall_time_secs = clock.secs();
    let Model::PredNet(m) = model else {
        unreachable!()
    };
    Ok((m, history))
}

/// Fresh initialisation from `config.seed`, then the matching training loop.
/// Without an explicit validation set a share of episodes is held out.
pub fn train(
    model_config: &ModelConfig,
    dataset: &Dataset,
    val: Option<&Dataset>,
    config: &TrainConfig,
    progress: Progress,
) -> Result<(Model, TrainHistory, Dataset)> {
    let (train_set, held) = match val {
        Some(v) => (dataset.clone(), v.clone()),
        None => dataset.split_holdout(config.holdout_fraction),
    };
    let mut init = rng::stream(config.seed, 0);
    let model = Model::init(model_config, &mut init)?;
    let (model, history) = match model {
        Model::SimpleCnn(m) => {
            let (m, h) = train_simple_cnn(m, &train_set, Some(&held), config, progress)?;
            (Model::SimpleCnn(m), h)
        }
        Model::PredNet(m) => {
            let (m, h) = train_prednet(m, &train_set, Some(&held), config, progress)?;
            (Model::PredNet(m), h)
        }
    };
    Ok((model, history, held))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Episode;
    use crate::gol::{generate_dataset, GenSpec};
    use crate::models::{PredNetConfig, SimpleCnnConfig};

    fn tagged(episodes: usize, len: usize) -> Dataset {
        Dataset::new(
            "tagged",
            (0..episodes)
                .map(|e| Episode::new((0..len).map(|_| Frame::filled(1, 1, 1, e as f64)).collect()))
                .collect(),
        )
    }

    #[test]
    fn pair_counts() {
        assert_eq!(sample_pairs(&tagged(1000, 10), None).len(), 9000);
        assert_eq!(sample_pairs(&tagged(1, 2), None).len(), 1);
        let mut d = tagged(3, 4);
        d.episodes[1].frames.truncate(1);
        assert_eq!(sample_pairs(&d, None).len(), 6);
    }

    #[test]
    fn pairs_never_span_episodes() {
        let d = tagged(20, 5);
        let pairs = sample_pairs(&d, Some(&mut rng::from_seed(3)));
        for p in pairs {
            let e = &d.episodes[p.episode];
            assert_eq!(e.frames[p.t].data(), e.frames[p.t + 1].data());
            assert_eq!(e.frames[p.t].data()[0], p.episode as f64);
        }
    }

    fn small_gol() -> Dataset {
        generate_dataset(&GenSpec {
            episodes: 6,
            steps_per_episode: 4,
            height: 8,
            width: 8,
            seed: 1,
            ..GenSpec::default()
        })
        .unwrap()
    }

    #[test]
    fn simple_cnn_training_is_deterministic_and_pure() {
        let d = small_gol();
        let before = d.clone();
        let cfg = TrainConfig {
            epochs: 2,
            ..TrainConfig::simple_cnn(5)
        };
        let mc = ModelConfig::SimpleCnn(SimpleCnnConfig {
            latent_channels: 4,
            ..SimpleCnnConfig::default()
        });
        let (m1, h1, _) = train(&mc, &d, None, &cfg, None).unwrap();
        let (m2, h2, _) = train(&mc, &d, None, &cfg, None).unwrap();
        assert_eq!(d, before);
        assert_eq!(h1.losses(), h2.losses());
        assert_eq!(m1, m2);
        assert_eq!(h1.epochs.len(), 2);
        assert!(h1.epochs.iter().all(|e| e.val_mse.is_some()));
    }

    #[test]
    fn nan_learning_rate_aborts_with_guidance() {
        let d = small_gol();
        let cfg = TrainConfig {
            epochs: 3,
            optimizer: OptimizerConfig::Sgd {
                lr: 1e300,
                momentum: 0.0,
            },
            ..TrainConfig::simple_cnn(1)
        };
        let mc = ModelConfig::SimpleCnn(SimpleCnnConfig::default());
        match train(&mc, &d, None, &cfg, None) {
            Err(Error::NonFiniteLoss { lr, .. }) => assert_eq!(lr, 1e300),
            other => panic!("expected NonFiniteLoss, got {other:?}"),
        }
    }

    #[test]
    fn prednet_loss_trends_down_on_constant_frames() {
        let eps = (0..4)
            .map(|i| Episode::new(vec![Frame::filled(1, 8, 8, 0.2 + 0.1 * i as f64); 6]))
            .collect();
        let d = Dataset::new("const", eps);
        let cfg = TrainConfig {
            epochs: 30,
            batch_size: 2,
            optimizer: OptimizerConfig::adam(1e-2),
            eval_every: 30,
            ..TrainConfig::prednet(2)
        };
        let mc = ModelConfig::PredNet(PredNetConfig {
            a_channels: vec![1, 2, 2],
            r_channels: vec![2, 2, 2],
            ..PredNetConfig::default()
        });
        let (_, h, _) = train(&mc, &d, Some(&d), &cfg, None).unwrap();
        let losses = h.losses();
        assert!(losses.iter().all(|l| l.is_finite()));
        let avg = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        let first = avg(&losses[..5]);
        let last = avg(&losses[losses.len() - 5..]);
        assert!(last < first, "moving average rose: {first} -> {last}");
    }
}
