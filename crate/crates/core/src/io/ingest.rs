//! Turning a directory of pre-extracted PGM/PPM frames into a [`Dataset`].

use std::path::{Path, PathBuf};

use crate::data::{Dataset, Episode, Frame};
use crate::error::{Error, Result};

use super::pnm;

/// How source frames are grouped into episodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EpisodeSplit {
    /// Every frame in `src_dir` forms one episode.
    Single,
    /// Consecutive runs of the given lengths over the sorted frame list.
    Lengths(Vec<usize>),
    /// Each subdirectory of `src_dir` is one episode (one source video).
    Subdirectories,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub frames_read: usize,
    pub skipped: Vec<PathBuf>,
    pub episodes: usize,
}

/// Bilinear resampling with half-pixel centres and clamped edges. Same-size
/// input is returned unchanged.
pub fn resize_bilinear(frame: &Frame, height: usize, width: usize) -> Result<Frame> {
    if height == 0 || width == 0 {
        return Err(Error::invalid(
            "resize_bilinear",
            "target size must be positive",
        ));
    }
    let (c, h, w) = frame.dims();
    if (h, w) == (height, width) {
        return Ok(frame.clone());
    }
    // (low index, high index, weight of high) along one axis.
    let taps = |src: usize, dst: usize| -> Vec<(usize, usize, f64)> {
        let scale = src as f64 / dst as f64;
        (0..dst)
            .map(|i| {
                let pos = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
                let lo = pos.floor() as usize;
                let hi = (lo + 1).min(src - 1);
                (lo, hi, pos - lo as f64)
            })
            .collect()
    };
    let ys = taps(h, height);
    let xs = taps(w, width);
    let src = frame.data();
    let mut out = Vec::with_capacity(c * height * width);
    for ch in 0..c {
        let plane = &src[ch * h * w..(ch + 1) * h * w];
        for &(y0, y1, fy) in &ys {
            for &(x0, x1, fx) in &xs {
                let top = plane[y0 * w + x0] * (1.0 - fx) + plane[y0 * w + x1] * fx;
                let bot = plane[y1 * w + x0] * (1.0 - fx) + plane[y1 * w + x1] * fx;
                out.push(top * (1.0 - fy) + bot * fy);
            }
        }
    }
    Frame::new(c, height, width, out)
}

fn frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_pnm = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "pgm" | "ppm" | "pnm"));
        if path.is_file() && is_pnm {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn subdirectories(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}

/// Reads, resizes and groups frames. Frames that fail to decode, or whose
/// channel count differs from the first good frame, are skipped and listed
/// in the report.
pub fn ingest_frames(
    src_dir: &Path,
    target: (usize, usize),
    split: &EpisodeSplit,
) -> Result<(Dataset, IngestReport)> {
    let groups: Vec<Vec<PathBuf>> = match split {
        EpisodeSplit::Single => vec![frame_files(src_dir)?],
        EpisodeSplit::Subdirectories => subdirectories(src_dir)?
            .iter()
            .map(|d| frame_files(d))
            .collect::<Result<_>>()?,
        EpisodeSplit::Lengths(lengths) => {
            let files = frame_files(src_dir)?;
            let total: usize = lengths.iter().sum();
            if total != files.len() {
                return Err(Error::invalid(
                    "ingest_frames",
                    format!(
                        "episode lengths sum to {total} but {} holds {} frames",
                        src_dir.display(),
                        files.len()
                    ),
                ));
            }
            let mut rest = files.as_slice();
            lengths
                .iter()
                .map(|&n| {
                    let (head, tail) = rest.split_at(n);
                    rest = tail;
                    head.to_vec()
                })
                .collect()
        }
    };

    let mut report = IngestReport::default();
    let mut channels = None;
    let mut episodes = Vec::new();
    for group in groups {
        let mut frames = Vec::new();
        for path in group {
            let frame = match pnm::read_frame(&path) {
                Ok(f) if channels.is_none_or(|c| c == f.channels()) => f,
                Ok(f) => {
                    log::warn!(
                        "skipping {}: {} channels, expected {}",
                        path.display(),
                        f.channels(),
                        channels.unwrap_or_default()
                    );
                    report.skipped.push(path);
                    continue;
                }
                Err(e) => {
                    log::warn!("skipping unreadable frame: {e}");
                    report.skipped.push(path);
                    continue;
                }
            };
            channels = Some(frame.channels());
            frames.push(resize_bilinear(&frame, target.0, target.1)?);
            report.frames_read += 1;
        }
        if !frames.is_empty() {
            episodes.push(Episode::new(frames));
        }
    }
    if report.frames_read == 0 {
        return Err(Error::invalid(
            "ingest_frames",
            format!("no usable frames in {}", src_dir.display()),
        ));
    }
    report.episodes = episodes.len();
    let name = src_dir
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("frames")
        .to_string();
    Ok((Dataset::new(name, episodes), report))
}
