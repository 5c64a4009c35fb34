//! Binary PGM (`P5`) and PPM (`P6`) frames, 8-bit on write.

use std::path::Path;

use crate::data::Frame;
use crate::error::{Error, Result};

/// Byte value for a pixel in `[0, 1]`.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Encodes a 1-channel frame as P5 or a 3-channel frame as P6.
pub fn encode(frame: &Frame) -> Result<Vec<u8>> {
    let (c, h, w) = frame.dims();
    let magic = match c {
        1 => "P5",
        3 => "P6",
        _ => {
            return Err(Error::invalid(
                "write_frame",
                format!("{c}-channel frames have no PNM encoding"),
            ))
        }
    };
    let mut out = format!("{magic}\n{w} {h}\n255\n").into_bytes();
    out.reserve(c * h * w);
    let plane = h * w;
    for i in 0..plane {
        for ch in 0..c {
            out.push(quantize(frame.data()[ch * plane + i]));
        }
    }
    Ok(out)
}

pub fn write_frame(frame: &Frame, path: &Path) -> Result<()> {
    let bytes = encode(frame)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Header<'_> {
    fn fail(&self, msg: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.to_path_buf(),
            offset: self.pos,
            msg: msg.into(),
        }
    }

    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&b| b != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.fail(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| self.fail(format!("{what} out of range")))
    }
}

/// Decodes P5/P6 with any maxval up to 65535, normalising to `[0, 1]`.
pub fn decode(bytes: &[u8], path: &Path) -> Result<Frame> {
    let mut hdr = Header {
        bytes,
        pos: 0,
        path,
    };
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(hdr.fail("missing P5/P6 magic")),
    };
    hdr.pos = 2;
    let width = hdr.number("width")?;
    let height = hdr.number("height")?;
    let maxval = hdr.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(hdr.fail("zero image dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(hdr.fail(format!("maxval {maxval} outside 1..=65535")));
    }
    if !hdr.bytes.get(hdr.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(hdr.fail("expected a single whitespace byte before the raster"));
    }
    hdr.pos += 1;
    let bps = if maxval > 255 { 2 } else { 1 };
    let n = width * height * channels;
    let raster = &bytes[hdr.pos..];
    if raster.len() < n * bps {
        return Err(hdr.fail(format!(
            "raster holds {} bytes, expected {}",
            raster.len(),
            n * bps
        )));
    }
    let plane = width * height;
    let mut data = vec![0.0; n];
    for i in 0..plane {
        for c in 0..channels {
            let k = i * channels + c;
            let v = if bps == 1 {
                raster[k] as usize
            } else {
                (raster[2 * k] as usize) << 8 | raster[2 * k + 1] as usize
            };
            if v > maxval {
                hdr.pos += k * bps;
                return Err(hdr.fail(format!("sample {v} exceeds maxval {maxval}")));
            }
            data[c * plane + i] = v as f64 / maxval as f64;
        }
    }
    Frame::new(channels, height, width, data)
}

pub fn read_frame(path: &Path) -> Result<Frame> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}
