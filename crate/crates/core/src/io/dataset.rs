//! Dataset directories: `manifest.json` plus `ep{k:05}/frame{t:04}.pgm`
//! (`.ppm` for colour frames).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Episode};
use crate::error::{Error, Result};
use crate::gol::GenSpec;

use super::pnm;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEpisode {
    pub frames: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub name: String,
    /// `[height, width, channels]`.
    pub frame_size: [usize; 3],
    pub episodes: Vec<ManifestEpisode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GenSpec>,
}

impl Manifest {
    pub fn num_frames(&self) -> usize {
        self.episodes.iter().map(|e| e.frames.len()).sum()
    }
}

pub fn frame_path(episode: usize, t: usize, channels: usize) -> String {
    let ext = if channels == 1 { "pgm" } else { "ppm" };
    format!("ep{episode:05}/frame{t:04}.{ext}")
}

/// Writes every frame and the manifest under `dir`, creating it if needed.
pub fn write_dataset(
    dataset: &Dataset,
    dir: &Path,
    generator: Option<&GenSpec>,
) -> Result<Manifest> {
    let (c, h, w) = dataset.frame_dims()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut episodes = Vec::with_capacity(dataset.episodes.len());
    for (k, ep) in dataset.episodes.iter().enumerate() {
        let sub = dir.join(format!("ep{k:05}"));
        std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        let mut frames = Vec::with_capacity(ep.len());
        for (t, f) in ep.frames.iter().enumerate() {
            let rel = frame_path(k, t, c);
            pnm::write_frame(f, &dir.join(&rel))?;
            frames.push(rel);
        }
        episodes.push(ManifestEpisode { frames });
    }
    let manifest = Manifest {
        format_version: DATASET_FORMAT_VERSION,
        name: dataset.name.clone(),
        frame_size: [h, w, c],
        episodes,
        generator: generator.cloned(),
    };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    if !path.is_file() {
        return Err(Error::NoManifest(dir.to_path_buf()));
    }
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.clone(),
        offset: 0,
        msg: e.to_string(),
    })?;
    if manifest.format_version != DATASET_FORMAT_VERSION {
        return Err(Error::Version {
            path,
            found: manifest.format_version,
            expected: DATASET_FORMAT_VERSION,
        });
    }
    Ok(manifest)
}

/// Loads and validates a dataset directory. Any missing, unreadable or
/// mis-sized frame fails the whole load.
pub fn read_dataset(dir: &Path) -> Result<(Dataset, Manifest)> {
    let manifest = read_manifest(dir)?;
    let [h, w, c] = manifest.frame_size;
    let mut episodes = Vec::with_capacity(manifest.episodes.len());
    for ep in &manifest.episodes {
        let mut frames = Vec::with_capacity(ep.frames.len());
        for rel in &ep.frames {
            let path: PathBuf = dir.join(rel);
            let f = pnm::read_frame(&path)?;
            if f.dims() != (c, h, w) {
                return Err(Error::Format {
                    path,
                    offset: 0,
                    msg: format!("frame is {:?}, manifest says {:?}", f.dims(), (c, h, w)),
                });
            }
            frames.push(f);
        }
        episodes.push(Episode::new(frames));
    }
    Ok((Dataset::new(manifest.name.clone(), episodes), manifest))
}
