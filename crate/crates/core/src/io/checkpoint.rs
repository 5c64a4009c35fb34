//! Binary checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic     8 bytes  "PCDCKPT\0"
//! version   u32
//! config    u64 length + UTF-8 JSON (tagged ModelConfig)
//! count     u32
//! per parameter:
//!   name    u32 length + UTF-8
//!   ndim    u32, then ndim × u64 dims
//!   data    product(dims) × f64
//! ```

use std::path::Path;

use crate::engine::Tensor;
use crate::error::{Error, Result};
use crate::models::{Model, ModelConfig};
use crate::rng;

pub const MAGIC: &[u8; 8] = b"PCDCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn from_model(model: &Model) -> Self {
        Self {
            config: model.config(),
            params: model
                .params()
                .iter()
                .map(|p| {
                    let t = Tensor::new(p.tensor.shape(), p.tensor.data().to_vec())
                        .expect("shape preserved");
                    (p.name.clone(), t)
                })
                .collect(),
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let json = serde_json::to_vec(&self.config)?;
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for (name, t) in &self.params {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader {
            bytes,
            pos: 0,
            path,
        };
        if r.take(8)? != MAGIC {
            return Err(r.fail_at(0, "not a checkpoint (bad magic)"));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                path: path.to_path_buf(),
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let len = r.u64()? as usize;
        let at = r.pos;
        let config: ModelConfig = serde_json::from_slice(r.take(len)?)
            .map_err(|e| r.fail_at(at, format!("bad config: {e}")))?;
        let count = r.u32()? as usize;
        let mut params = Vec::with_capacity(count);
        for _ in 0..count {
            let n = r.u32()? as usize;
            let at = r.pos;
            let name = std::str::from_utf8(r.take(n)?)
                .map_err(|_| r.fail_at(at, "parameter name is not UTF-8"))?
                .to_string();
            let ndim = r.u32()? as usize;
            let dims = (0..ndim)
                .map(|_| Ok(r.u64()? as usize))
                .collect::<Result<Vec<_>>>()?;
            let numel: usize = dims.iter().product();
            let raw = r.take(numel * 8)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            params.push((name, Tensor::new(&dims, data)?));
        }
        if r.pos != bytes.len() {
            return Err(r.fail_at(r.pos, "trailing bytes"));
        }
        Ok(Self { config, params })
    }

    /// Copies the stored parameters into `model`, which must have the same
    /// configuration and parameter shapes.
    pub fn load_into(&self, model: &mut Model) -> Result<()> {
        let want = model.config();
        if want.kind() != self.config.kind() {
            return Err(Error::CheckpointMismatch(format!(
                "checkpoint holds a {} model, target is {}",
                self.config.kind(),
                want.kind()
            )));
        }
        let mut problems = Vec::new();
        for p in model.params().iter() {
            match self.params.iter().find(|(n, _)| *n == p.name) {
                None => problems.push(format!("{} (missing)", p.name)),
                Some((_, t)) if t.shape() != p.tensor.shape() => problems.push(format!(
                    "{} (shape {:?}, expected {:?})",
                    p.name,
                    t.shape(),
                    p.tensor.shape()
                )),
                Some(_) => {}
            }
        }
        for (n, _) in &self.params {
            if model.params().get(n).is_none() {
                problems.push(format!("{n} (unexpected)"));
            }
        }
        if !problems.is_empty() {
            return Err(Error::CheckpointMismatch(problems.join(", ")));
        }
        for p in model.params_mut().iter_mut() {
            let (_, t) = self
                .params
                .iter()
                .find(|(n, _)| *n == p.name)
                .expect("checked");
            p.tensor.data_mut().copy_from_slice(t.data());
            p.tensor.zero_grad();
        }
        Ok(())
    }

    /// Rebuilds the model described by the stored configuration.
    pub fn to_model(&self) -> Result<Model> {
        let mut model = Model::init(&self.config, &mut rng::from_seed(0))?;
        self.load_into(&mut model)?;
        Ok(model)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn fail_at(&self, offset: usize, msg: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.to_path_buf(),
            offset,
            msg: msg.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(e) => {
                let s = &self.bytes[self.pos..e];
                self.pos = e;
                Ok(s)
            }
            None => Err(self.fail_at(self.pos, "unexpected end of file")),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

pub fn write_checkpoint(model: &Model, path: &Path) -> Result<()> {
    let bytes = Checkpoint::from_model(model).encode()?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::decode(&bytes, path)
}
