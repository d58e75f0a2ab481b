//! Binary PPM (P6) frames.

use std::path::Path;

use chunkgen_core::Frame;

use crate::error::{HarnessError, Result};

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// `P6` bytes for a 1- or 3-channel frame; single channels are replicated.
pub fn encode_ppm(frame: &Frame) -> Result<Vec<u8>> {
    let fs = frame.shape();
    if fs.channels != 1 && fs.channels != 3 {
        return Err(HarnessError::Config(format!(
            "PPM output needs 1 or 3 channels, frame has {}",
            fs.channels
        )));
    }
    let header = format!("P6\n{} {}\n255\n", fs.width, fs.height);
    let mut out = Vec::with_capacity(header.len() + fs.height * fs.width * 3);
    out.extend_from_slice(header.as_bytes());
    let data = frame.as_slice();
    if fs.channels == 3 {
        out.extend(data.iter().map(|v| to_byte(*v)));
    } else {
        for v in data {
            out.extend([to_byte(*v); 3]);
        }
    }
    Ok(out)
}

pub fn write_ppm(frame: &Frame, path: &Path) -> Result<()> {
    let bytes = encode_ppm(frame)?;
    std::fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ppm {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

/// Parses a `P6` file with maxval 255 and single-whitespace separators, the
/// layout [`encode_ppm`] writes.
pub fn parse_ppm(bytes: &[u8]) -> std::result::Result<Ppm, String> {
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos >= bytes.len() || start == pos {
            return Err("truncated PPM header".into());
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|e| e.to_string())?);
        pos += 1;
    }
    if fields[0] != "P6" {
        return Err(format!("expected P6, found {:?}", fields[0]));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|e| format!("{s:?}: {e}"));
    let (width, height, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
    if maxval != 255 {
        return Err(format!("unsupported maxval {maxval}"));
    }
    let pixels = bytes[pos..].to_vec();
    if pixels.len() != width * height * 3 {
        return Err(format!(
            "expected {} pixel bytes, found {}",
            width * height * 3,
            pixels.len()
        ));
    }
    Ok(Ppm {
        width,
        height,
        pixels,
    })
}
