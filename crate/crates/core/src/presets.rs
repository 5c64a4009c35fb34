//! Named experiments: a data source, an optional model and training schedule,
//! and the evaluation rows to report. The command line and the acceptance
//! suite run the same definitions.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Episode, Frame};
use crate::error::{Error, Result};
use crate::eval::{self, EvalReport, ReportRow};
use crate::gol::{self, GenSpec};
use crate::models::{Model, ModelConfig, PredNetConfig, SimpleCnnConfig};
use crate::rng;
use crate::training::{self, Progress, TrainConfig, TrainHistory};
use rand::Rng as _;

pub const PRESET_NAMES: [&str; 8] = [
    "gol-cnn",
    "gol-cnn-k2",
    "gol-prednet",
    "glider-memorize",
    "gol-baseline",
    "natural-cnn",
    "transfer-eval",
    "reverse-eval",
];

/// Smooth coloured blobs drifting at constant velocity over a flat
/// background. Stands in for natural video when no ingested frames exist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub episodes: usize,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub blobs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Gol(GenSpec),
    Glider {
        height: usize,
        width: usize,
        frames: usize,
    },
    Scenes(SceneSpec),
}

impl DataSource {
    pub fn build(&self) -> Result<Dataset> {
        match self {
            DataSource::Gol(spec) => gol::generate_dataset(spec),
            DataSource::Glider {
                height,
                width,
                frames,
            } => Ok(Dataset::new(
                "glider",
                vec![gol::glider_episode(*height, *width, *frames)?],
            )),
            DataSource::Scenes(spec) => drifting_scenes(spec),
        }
    }

    pub fn channels(&self) -> usize {
        match self {
            DataSource::Scenes(s) => s.channels,
            _ => 1,
        }
    }
}

pub fn drifting_scenes(spec: &SceneSpec) -> Result<Dataset> {
    if spec.episodes == 0
        || spec.frames == 0
        || spec.height == 0
        || spec.width == 0
        || spec.channels == 0
    {
        return Err(Error::invalid(
            "drifting_scenes",
            "all sizes must be at least 1",
        ));
    }
    let (h, w, c) = (spec.height, spec.width, spec.channels);
    let episodes = (0..spec.episodes)
        .map(|i| {
            let mut r = rng::stream(spec.seed, i as u64);
            let background: Vec<f64> = (0..c).map(|_| r.random_range(0.1..0.3)).collect();
            let blobs: Vec<_> = (0..spec.blobs)
                .map(|_| {
                    let pos = (r.random_range(0.0..h as f64), r.random_range(0.0..w as f64));
                    let vel = (r.random_range(-1.5..1.5), r.random_range(-1.5..1.5));
                    let sigma: f64 = r.random_range(2.0..5.0);
                    let amp: Vec<f64> = (0..c).map(|_| r.random_range(0.3..0.7)).collect();
                    (pos, vel, sigma, amp)
                })
                .collect();
            let frames = (0..spec.frames)
                .map(|t| {
                    let mut data = vec![0.0; c * h * w];
                    for ch in 0..c {
                        for y in 0..h {
                            for x in 0..w {
                                let mut v = background[ch];
                                for ((py, px), (vy, vx), sigma, amp) in &blobs {
                                    let dy = y as f64 - (py + vy * t as f64);
                                    let dx = x as f64 - (px + vx * t as f64);
                                    v += amp[ch]
                                        * (-(dy * dy + dx * dx) / (2.0 * sigma * sigma)).exp();
                                }
                                data[(ch * h + y) * w + x] = v.clamp(0.0, 1.0);
                            }
                        }
                    }
                    Frame::new(c, h, w, data)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Episode::new(frames))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset::new("scenes", episodes))
}

/// 200 episodes of 10 frames at 32×40: the scale every training preset uses.
pub fn desk_gol(seed: u64) -> GenSpec {
    GenSpec {
        episodes: 200,
        height: 32,
        width: 40,
        seed,
        ..GenSpec::default()
    }
}

fn desk_scenes(channels: usize, seed: u64) -> SceneSpec {
    SceneSpec {
        episodes: 200,
        frames: 10,
        height: 32,
        width: 40,
        channels,
        blobs: 4,
        seed,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPreset {
    pub name: String,
    pub summary: String,
    pub data: DataSource,
    /// Evaluate on a different dataset than the one trained on.
    pub eval_data: Option<DataSource>,
    pub model: Option<ModelConfig>,
    pub train: Option<TrainConfig>,
    /// Evaluate on the training data itself instead of a held-out split.
    pub eval_on_train: bool,
    /// Also report every row on time-reversed episodes.
    pub reversed: bool,
}

impl ExperimentPreset {
    fn new(name: &str, summary: &str, data: DataSource) -> Self {
        Self {
            name: name.into(),
            summary: summary.into(),
            data,
            eval_data: None,
            model: None,
            train: None,
            eval_on_train: false,
            reversed: false,
        }
    }

    fn with_model(mut self, model: ModelConfig, seed: u64) -> Self {
        self.train = Some(TrainConfig::for_model(&model, seed));
        self.model = Some(model);
        self
    }

    pub fn digest(&self) -> String {
        eval::config_digest(self)
    }
}

pub fn preset(name: &str, seed: u64) -> Option<ExperimentPreset> {
    let cnn = |k| ModelConfig::SimpleCnn(SimpleCnnConfig::with_kernel(k));
    let gol = DataSource::Gol(desk_gol(seed));
    Some(match name {
        "gol-cnn" => ExperimentPreset::new("gol-cnn", "simple CNN (3x3) on Life", gol)
            .with_model(cnn(3), seed),
        "gol-cnn-k2" => {
            ExperimentPreset::new("gol-cnn-k2", "simple CNN with 2x2 filters on Life", gol)
                .with_model(cnn(2), seed)
        }
        "gol-prednet" => ExperimentPreset::new("gol-prednet", "PredNet retrained on Life", gol)
            .with_model(ModelConfig::PredNet(PredNetConfig::default()), seed),
        "glider-memorize" => {
            let mut p = ExperimentPreset::new(
                "glider-memorize",
                "PredNet trained and scored on one 40-frame glider",
                DataSource::Glider {
                    height: 32,
                    width: 40,
                    frames: 40,
                },
            )
            .with_model(ModelConfig::PredNet(PredNetConfig::default()), seed);
            p.eval_on_train = true;
            p
        }
        "gol-baseline" => ExperimentPreset::new(
            "gol-baseline",
            "previous-frame baseline on the full-size Life dataset",
            DataSource::Gol(GenSpec {
                seed,
                ..GenSpec::default()
            }),
        ),
        "natural-cnn" => {
            let mut c = SimpleCnnConfig::with_kernel(3);
            c.in_channels = 3;
            ExperimentPreset::new(
                "natural-cnn",
                "simple CNN on colour video (synthetic drifting scenes unless --data is given)",
                DataSource::Scenes(desk_scenes(3, seed)),
            )
            .with_model(ModelConfig::SimpleCnn(c), seed)
        }
        "transfer-eval" => {
            let mut p = ExperimentPreset::new(
                "transfer-eval",
                "simple CNN trained on grey scenes, scored on block-upscaled Life",
                DataSource::Scenes(desk_scenes(1, seed)),
            )
            .with_model(cnn(3), seed);
            p.eval_data = Some(DataSource::Gol(GenSpec {
                episodes: 100,
                height: 32,
                width: 40,
                upscale_factor: 4,
                seed,
                ..GenSpec::default()
            }));
            p
        }
        "reverse-eval" => {
            let mut p = ExperimentPreset::new(
                "reverse-eval",
                "simple CNN and baseline on forward and reversed Life",
                gol,
            )
            .with_model(cnn(3), seed);
            p.reversed = true;
            p
        }
        _ => return None,
    })
}

#[derive(Debug)]
pub struct PresetRun {
    pub model: Option<Model>,
    pub history: Option<TrainHistory>,
    /// The dataset the report rows were computed on (before reversal).
    pub eval_set: Dataset,
    pub report: EvalReport,
}

pub fn method_name(config: &ModelConfig) -> String {
    match config {
        ModelConfig::SimpleCnn(c) => format!("simple-cnn-k{}", c.kernel_size),
        ModelConfig::PredNet(_) => "prednet".to_string(),
    }
}

pub const BASELINE_METHOD: &str = "previous-frame";

/// Baseline row, then the model row, for `dataset` and (optionally) its
/// reversal.
pub fn score(
    model: Option<&Model>,
    dataset: &Dataset,
    reversed: bool,
    digest: &str,
) -> Result<EvalReport> {
    let mut report = EvalReport::default();
    let mut sets = vec![dataset.clone()];
    if reversed {
        sets.push(eval::reverse_episodes(dataset));
    }
    for d in &sets {
        report.push(ReportRow::new(
            &d.name,
            BASELINE_METHOD,
            eval::previous_frame_error(d)?,
            digest.to_string(),
        ));
        if let Some(m) = model {
            report.push(ReportRow::new(
                &d.name,
                &method_name(&m.config()),
                eval::model_error(m, d)?,
                digest.to_string(),
            ));
        }
    }
    Ok(report)
}

/// Builds the data, trains if the preset has a model, and scores. `data`
/// overrides the preset's own source (ingested frames, for instance).
pub fn run_preset(
    preset: &ExperimentPreset,
    data: Option<Dataset>,
    progress: Progress,
) -> Result<PresetRun> {
    let dataset = match data {
        Some(d) => d,
        None => preset.data.build()?,
    };
    let digest = preset.digest();
    let (model, history, held) = match (&preset.model, &preset.train) {
        (Some(mc), Some(tc)) => {
            let val = preset.eval_on_train.then_some(&dataset);
            let (m, h, held) = training::train(mc, &dataset, val, tc, progress)?;
            (Some(m), Some(h), held)
        }
        _ => (None, None, dataset),
    };
    let eval_set = match &preset.eval_data {
        Some(src) => src.build()?,
        None => held,
    };
    let report = score(model.as_ref(), &eval_set, preset.reversed, &digest)?;
    Ok(PresetRun {
        model,
        history,
        eval_set,
        report,
    })
}
