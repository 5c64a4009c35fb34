//! Browser bindings: a Life world to poke at, a simple-CNN lab that learns the
//! rule while you watch, and the previous-frame baseline as a function of
//! starting density.

use predcode::data::{Dataset, Frame};
use predcode::eval;
use predcode::gol::{self, Board, GenSpec};
use predcode::models::{SimpleCnn, SimpleCnnConfig};
use predcode::rng;
use predcode::training::{CnnTrainer, TrainConfig};
use wasm_bindgen::prelude::*;

fn js_err(e: predcode::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Grey-level frame to RGBA bytes, optionally tinting cells the model gets
/// wrong against `truth`.
fn to_rgba(frame: &Frame, truth: Option<&Board>) -> Vec<u8> {
    let mut out = Vec::with_capacity(frame.height() * frame.width() * 4);
    for (i, &v) in frame.data().iter().enumerate() {
        let g = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        let wrong = truth.is_some_and(|b| b.cells()[i] != (v >= 0.5));
        if wrong {
            out.extend_from_slice(&[255, 64, 64, 255]);
        } else {
            out.extend_from_slice(&[g, g, g, 255]);
        }
    }
    out
}

#[wasm_bindgen]
pub struct World {
    board: Board,
    generation: u32,
    toroidal: bool,
}

#[wasm_bindgen]
impl World {
    #[wasm_bindgen(constructor)]
    pub fn new(height: usize, width: usize) -> World {
        World {
            board: Board::empty(height, width),
            generation: 0,
            toroidal: false,
        }
    }

    pub fn randomize(&mut self, density: f64, seed: u64) -> Result<(), JsError> {
        let mut r = rng::from_seed(seed);
        self.board = gol::random_board(self.board.height(), self.board.width(), density, &mut r)
            .map_err(js_err)?;
        self.generation = 0;
        Ok(())
    }

    pub fn clear(&mut self) {
        self.board = Board::empty(self.board.height(), self.board.width());
        self.generation = 0;
    }

    pub fn place(&mut self, pattern: &str, row: usize, col: usize) -> Result<(), JsError> {
        let p = gol::Pattern::by_name(pattern)
            .ok_or_else(|| JsError::new(&format!("unknown pattern {pattern}")))?;
        self.board = self.board.place(&p, (row, col)).map_err(js_err)?;
        Ok(())
    }

    pub fn toggle(&mut self, row: usize, col: usize) {
        if row < self.board.height() && col < self.board.width() {
            let alive = self.board.get(row, col);
            self.board.set(row, col, !alive);
        }
    }

    pub fn set_toroidal(&mut self, on: bool) {
        self.toroidal = on;
    }

    pub fn step(&mut self) {
        let boundary = if self.toroidal {
            gol::Boundary::Toroidal
        } else {
            gol::Boundary::Dead
        };
        self.board = self.board.step_with(boundary);
        self.generation += 1;
    }

    pub fn height(&self) -> usize {
        self.board.height()
    }

    pub fn width(&self) -> usize {
        self.board.width()
    }

    pub fn generation(&self) -> u32 {
        self.generation
    }

    pub fn alive(&self) -> usize {
        self.board.alive_count()
    }

    pub fn rgba(&self) -> Vec<u8> {
        to_rgba(&self.board.render(), None)
    }
}

/// Trains a simple CNN on a small random-Life dataset, one epoch per call.
#[wasm_bindgen]
pub struct Lab {
    trainer: CnnTrainer,
    train: Dataset,
    held: Dataset,
    kernel: usize,
}

#[wasm_bindgen]
impl Lab {
    /// `episodes` of 10 frames at 16×20; a tenth is held out.
    #[wasm_bindgen(constructor)]
    pub fn new(kernel: usize, episodes: usize, seed: u64) -> Result<Lab, JsError> {
        Lab::build(kernel, episodes, seed).map_err(js_err)
    }

    fn build(kernel: usize, episodes: usize, seed: u64) -> predcode::Result<Lab> {
        let spec = GenSpec {
            episodes,
            height: 16,
            width: 20,
            seed,
            ..GenSpec::default()
        };
        let (train, held) = gol::generate_dataset(&spec)?.split_holdout(0.1);
        let config = TrainConfig::simple_cnn(seed);
        let model = SimpleCnn::new(
            SimpleCnnConfig::with_kernel(kernel),
            &mut rng::stream(seed, 0),
        )?;
        Ok(Lab {
            trainer: CnnTrainer::new(model, &config)?,
            train,
            held,
            kernel,
        })
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn epochs(&self) -> usize {
        self.trainer.epochs_done()
    }

    /// Mean training loss of the epoch just run.
    pub fn train_epoch(&mut self) -> Result<f64, JsError> {
        self.trainer.run_epoch(&self.train).map_err(js_err)
    }

    pub fn heldout_mse(&self) -> Result<f64, JsError> {
        let m = predcode::models::Model::SimpleCnn(self.trainer.model().clone());
        eval::model_mse(&m, &self.held).map_err(js_err)
    }

    /// How many of the 512 3×3 neighbourhoods the model maps correctly.
    pub fn rule_matches(&self) -> Result<usize, JsError> {
        eval::neighborhood_rule_matches(self.trainer.model()).map_err(js_err)
    }

    /// The model's guess at the world's next generation as RGBA; cells that
    /// disagree with the true rule are drawn red.
    pub fn predict(&self, world: &World) -> Result<Vec<u8>, JsError> {
        let pred = self
            .trainer
            .model()
            .predict_one(&world.board.render())
            .map_err(js_err)?;
        Ok(to_rgba(&pred, Some(&world.board.step())))
    }
}

/// Previous-frame MSE of random-Life episodes for each starting density.
#[wasm_bindgen]
pub fn baseline_curve(
    densities: &[f64],
    height: usize,
    width: usize,
    episodes: usize,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    densities
        .iter()
        .map(|&d| {
            let spec = GenSpec {
                episodes,
                height,
                width,
                alive_density: d,
                seed,
                ..GenSpec::default()
            };
            eval::previous_frame_baseline(&gol::generate_dataset(&spec)?)
        })
        .collect::<predcode::Result<_>>()
        .map_err(js_err)
}
