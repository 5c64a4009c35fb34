//! Next-frame scoring and report assembly.
//!
//! Every scorer pools squared error over all scored pixels of all episodes;
//! the first frame of an episode is never scored.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{Dataset, Episode, Frame};
use crate::error::{Error, Result};
use crate::gol::Board;
use crate::models::{Model, SimpleCnn};

/// Running squared-error total.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SqError {
    pub sum: f64,
    pub pixels: usize,
    pub frames: usize,
}

impl SqError {
    pub fn mse(&self) -> f64 {
        if self.pixels == 0 {
            0.0
        } else {
            self.sum / self.pixels as f64
        }
    }
}

/// Pairwise summation: the result depends only on the order of `xs`, and
/// error grows logarithmically.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

fn combine(parts: &[SqError]) -> SqError {
    let sums: Vec<f64> = parts.iter().map(|p| p.sum).collect();
    SqError {
        sum: pairwise_sum(&sums),
        pixels: parts.iter().map(|p| p.pixels).sum(),
        frames: parts.iter().map(|p| p.frames).sum(),
    }
}

fn frame_sq_error(pred: &Frame, actual: &Frame) -> Result<f64> {
    if pred.dims() != actual.dims() {
        return Err(Error::ShapeMismatch {
            op: "mse",
            left: vec![pred.channels(), pred.height(), pred.width()],
            right: vec![actual.channels(), actual.height(), actual.width()],
        });
    }
    let sq: Vec<f64> = pred
        .data()
        .iter()
        .zip(actual.data())
        .map(|(p, a)| (p - a) * (p - a))
        .collect();
    Ok(pairwise_sum(&sq))
}

/// Squared error of `predictions[t]` against `episode.frames[t + 1]`.
pub fn episode_sq_error(predictions: &[Frame], episode: &Episode) -> Result<SqError> {
    if predictions.len() + 1 != episode.len() {
        return Err(Error::invalid(
            "mse_next_frame",
            format!(
                "{} predictions for a {}-frame episode (expected {})",
                predictions.len(),
                episode.len(),
                episode.len().saturating_sub(1)
            ),
        ));
    }
    let parts = predictions
        .iter()
        .zip(&episode.frames[1..])
        .map(|(p, a)| {
            Ok(SqError {
                sum: frame_sq_error(p, a)?,
                pixels: a.data().len(),
                frames: 1,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(combine(&parts))
}

pub fn mse_next_frame(predictions: &[Frame], episode: &Episode) -> Result<f64> {
    Ok(episode_sq_error(predictions, episode)?.mse())
}

/// Error of predicting each frame with its predecessor.
pub fn previous_frame_error(dataset: &Dataset) -> Result<SqError> {
    let parts = dataset
        .episodes
        .iter()
        .filter(|e| e.len() >= 2)
        .map(|e| episode_sq_error(&e.frames[..e.len() - 1], e))
        .collect::<Result<Vec<_>>>()?;
    Ok(combine(&parts))
}

pub fn previous_frame_baseline(dataset: &Dataset) -> Result<f64> {
    Ok(previous_frame_error(dataset)?.mse())
}

/// Per-step baseline MSE (index `t` scores frame `t + 1`), pooled across
/// episodes.
pub fn previous_frame_curve(dataset: &Dataset) -> Result<Vec<f64>> {
    let len = dataset.episodes.iter().map(Episode::len).max().unwrap_or(0);
    let mut out = Vec::new();
    for t in 1..len {
        let parts = dataset
            .episodes
            .iter()
            .filter(|e| e.len() > t)
            .map(|e| {
                Ok(SqError {
                    sum: frame_sq_error(&e.frames[t - 1], &e.frames[t])?,
                    pixels: e.frames[t].data().len(),
                    frames: 1,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(combine(&parts).mse());
    }
    Ok(out)
}

pub fn model_error(model: &Model, dataset: &Dataset) -> Result<SqError> {
    let parts = dataset
        .episodes
        .iter()
        .filter(|e| e.len() >= 2)
        .map(|e| episode_sq_error(&model.predict_episode(e)?, e))
        .collect::<Result<Vec<_>>>()?;
    Ok(combine(&parts))
}

pub fn model_mse(model: &Model, dataset: &Dataset) -> Result<f64> {
    Ok(model_error(model, dataset)?.mse())
}

/// Fraction of cells where the thresholded prediction equals the
/// Game-of-Life successor of the (thresholded) input frame.
pub fn gol_agreement(model: &Model, dataset: &Dataset) -> Result<f64> {
    let mut agree = 0usize;
    let mut total = 0usize;
    for e in dataset.episodes.iter().filter(|e| e.len() >= 2) {
        let preds = model.predict_episode(e)?;
        for (p, prev) in preds.iter().zip(&e.frames) {
            let want = Board::from_frame(prev).step();
            let got = Board::from_frame(p);
            agree += want
                .cells()
                .iter()
                .zip(got.cells())
                .filter(|(a, b)| a == b)
                .count();
            total += want.cells().len();
        }
    }
    Ok(if total == 0 {
        1.0
    } else {
        agree as f64 / total as f64
    })
}

/// Checks the model's centre-pixel prediction against the rule for all 512
/// 3×3 neighbourhoods, each placed alone on a blank 7×7 frame. Returns the
/// number that match.
pub fn neighborhood_rule_matches(model: &SimpleCnn) -> Result<usize> {
    let mut frames = Vec::with_capacity(512);
    let mut want = Vec::with_capacity(512);
    for code in 0u32..512 {
        let mut f = Frame::zeros(1, 7, 7);
        let mut n = 0;
        for bit in 0..9 {
            if code >> bit & 1 == 1 {
                let (r, c) = (2 + bit / 3, 2 + bit % 3);
                f.data_mut()[(r * 7 + c) as usize] = 1.0;
                if bit != 4 {
                    n += 1;
                }
            }
        }
        let alive = code >> 4 & 1 == 1;
        want.push(n == 3 || (n == 2 && alive));
        frames.push(f);
    }
    let refs: Vec<&Frame> = frames.iter().collect();
    let preds = model.predict(&refs)?;
    Ok(preds
        .iter()
        .zip(want)
        .filter(|(p, w)| (p.get(0, 3, 3) >= 0.5) == *w)
        .count())
}

/// Reverses the frame order inside every episode.
pub fn reverse_episodes(dataset: &Dataset) -> Dataset {
    Dataset {
        name: format!("{}-reversed", dataset.name),
        episodes: dataset.episodes.iter().map(Episode::reversed).collect(),
    }
}

/// First 16 hex digits of the SHA-256 of a value's JSON encoding.
pub fn config_digest<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config serializes");
    hex::encode(Sha256::digest(&json))[..16].to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub method: String,
    pub mse: f64,
    pub frames_scored: usize,
    pub config_digest: String,
}

impl ReportRow {
    pub fn new(dataset: &str, method: &str, err: SqError, config_digest: String) -> Self {
        Self {
            dataset: dataset.to_string(),
            method: method.to_string(),
            mse: err.mse(),
            frames_scored: err.frames,
            config_digest,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
}

/// Rounds half away from zero at four decimals. The small slack absorbs
/// binary representation error, so `0.00015` renders as `0.0002`.
pub fn format_mse(v: f64) -> String {
    let scaled = v * 1e4;
    let r = (scaled.abs() + 0.5 + 1e-9 * scaled.abs().max(1.0)).floor() * scaled.signum();
    format!("{:.4}", r / 1e4)
}

impl EvalReport {
    pub fn push(&mut self, row: ReportRow) {
        self.rows.push(row);
    }

    fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::invalid("report", "no rows"));
        }
        for r in &self.rows {
            if r.dataset.trim().is_empty() || r.method.trim().is_empty() {
                return Err(Error::invalid("report", "empty dataset or method name"));
            }
            if !(r.mse >= 0.0) || r.frames_scored == 0 {
                return Err(Error::invalid(
                    "report",
                    format!(
                        "row {}/{} has mse {} over {} frames",
                        r.dataset, r.method, r.mse, r.frames_scored
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Plain-text table grouped by dataset in first-appearance order, rows
    /// within a group in insertion order.
    pub fn table(&self) -> Result<String> {
        self.validate()?;
        let mut groups: Vec<(&str, Vec<&ReportRow>)> = Vec::new();
        for r in &self.rows {
            match groups.iter_mut().find(|(d, _)| *d == r.dataset) {
                Some((_, rows)) => rows.push(r),
                None => groups.push((&r.dataset, vec![r])),
            }
        }
        let dw = self
            .rows
            .iter()
            .map(|r| r.dataset.len())
            .max()
            .unwrap_or(0)
            .max(7);
        let mw = self
            .rows
            .iter()
            .map(|r| r.method.len())
            .max()
            .unwrap_or(0)
            .max(6);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<dw$}  {:<mw$}  {:>8}  {:>7}",
            "Dataset", "Method", "MSE", "Frames"
        );
        let _ = writeln!(out, "{}", "-".repeat(dw + mw + 21));
        for (dataset, rows) in groups {
            for (i, r) in rows.iter().enumerate() {
                let name = if i == 0 { dataset } else { "" };
                let _ = writeln!(
                    out,
                    "{:<dw$}  {:<mw$}  {:>8}  {:>7}",
                    name,
                    r.method,
                    format_mse(r.mse),
                    r.frames_scored
                );
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        self.validate()?;
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes the table to `path` and the full-precision rows to
    /// `path` with a `.json` extension. Returns the sidecar path.
    pub fn write(&self, path: &Path) -> Result<PathBuf> {
        let table = self.table()?;
        let json = self.to_json()?;
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, table).map_err(|e| Error::io(path, e))?;
        let sidecar = path.with_extension("json");
        std::fs::write(&sidecar, json).map_err(|e| Error::io(&sidecar, e))?;
        Ok(sidecar)
    }
}
