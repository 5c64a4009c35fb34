use crate::engine::Tensor;
use crate::error::{Error, Result};

/// One `C × H × W` image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Frame {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::invalid(
                "frame",
                format!(
                    "{channels}×{height}×{width} frame needs {} values, got {}",
                    channels * height * width,
                    data.len()
                ),
            ));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self::filled(channels, height, width, 0.0)
    }

    pub fn filled(channels: usize, height: usize, width: usize, v: f64) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![v; channels * height * width],
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `(channels, height, width)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Thresholds at 0.5.
    pub fn binarized(&self) -> Frame {
        Frame {
            data: self
                .data
                .iter()
                .map(|&v| if v >= 0.5 { 1.0 } else { 0.0 })
                .collect(),
            ..*self
        }
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(
            &[1, self.channels, self.height, self.width],
            self.data.clone(),
        )
        .expect("frame dims match data")
    }
}

/// Stacks same-sized frames into an `N × C × H × W` tensor.
pub fn stack(frames: &[&Frame]) -> Result<Tensor> {
    let first = frames
        .first()
        .ok_or_else(|| Error::invalid("stack", "no frames"))?;
    let dims = first.dims();
    let mut data = Vec::with_capacity(frames.len() * first.data.len());
    for f in frames {
        if f.dims() != dims {
            return Err(Error::ShapeMismatch {
                op: "stack",
                left: vec![dims.0, dims.1, dims.2],
                right: vec![f.channels, f.height, f.width],
            });
        }
        data.extend_from_slice(&f.data);
    }
    Tensor::new(&[frames.len(), dims.0, dims.1, dims.2], data)
}

/// Splits an `N × C × H × W` tensor back into frames.
pub fn unstack(t: &Tensor) -> Result<Vec<Frame>> {
    let [n, c, h, w] = t.dims4()?;
    let plane = c * h * w;
    (0..n)
        .map(|i| Frame::new(c, h, w, t.data()[i * plane..(i + 1) * plane].to_vec()))
        .collect()
}

/// Consecutive frames generated from one initial state or one source video.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Episode {
    pub frames: Vec<Frame>,
}

impl Episode {
    pub fn new(frames: Vec<Frame>) -> Self {
        Self { frames }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn reversed(&self) -> Episode {
        Episode {
            frames: self.frames.iter().rev().cloned().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub name: String,
    pub episodes: Vec<Episode>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, episodes: Vec<Episode>) -> Self {
        Self {
            name: name.into(),
            episodes,
        }
    }

    pub fn num_frames(&self) -> usize {
        self.episodes.iter().map(Episode::len).sum()
    }

    /// Dimensions shared by every frame, or an error naming the first
    /// frame that differs.
    pub fn frame_dims(&self) -> Result<(usize, usize, usize)> {
        let mut frames = self.episodes.iter().flat_map(|e| e.frames.iter());
        let first = frames
            .next()
            .ok_or_else(|| Error::invalid("dataset", format!("`{}` has no frames", self.name)))?
            .dims();
        for (i, f) in frames.enumerate() {
            if f.dims() != first {
                return Err(Error::invalid(
                    "dataset",
                    format!("frame {} is {:?}, expected {first:?}", i + 1, f.dims()),
                ));
            }
        }
        Ok(first)
    }

    /// Splits off the last `fraction` of episodes (at least one when there
    /// are two or more) as a held-out set.
    pub fn split_holdout(&self, fraction: f64) -> (Dataset, Dataset) {
        let n = self.episodes.len();
        let mut held = ((n as f64) * fraction).round() as usize;
        if n >= 2 {
            held = held.clamp(1, n - 1);
        } else {
            held = 0;
        }
        let (train, test) = self.episodes.split_at(n - held);
        (
            Dataset::new(format!("{}-train", self.name), train.to_vec()),
            Dataset::new(format!("{}-heldout", self.name), test.to_vec()),
        )
    }
}
