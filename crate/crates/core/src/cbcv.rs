//! Raw tensor dump: `b"CBCV"`, then frames, height, width, channels as
//! little-endian `u32`, then the data as little-endian `f32` in row-major
//! order.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::tensor::{Domain, Shape, VideoTensor};

pub const MAGIC: &[u8; 4] = b"CBCV";
pub const HEADER_LEN: usize = 20;

pub fn encode(video: &VideoTensor) -> Vec<u8> {
    let s = video.shape();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * s.len());
    out.extend_from_slice(MAGIC);
    for dim in [s.frames, s.height, s.width, s.channels] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    for v in video.as_slice() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn write(mut w: impl Write, video: &VideoTensor) -> std::io::Result<()> {
    w.write_all(&encode(video))
}

pub fn decode(bytes: &[u8]) -> Result<VideoTensor> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format("truncated header".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let dim = |i: usize| {
        let b: [u8; 4] = bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap();
        u32::from_le_bytes(b) as usize
    };
    let shape = Shape::new(dim(0), dim(1), dim(2), dim(3))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != 4 * shape.len() {
        return Err(Error::Format(format!(
            "expected {} data bytes, found {}",
            4 * shape.len(),
            body.len()
        )));
    }
    let data = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    VideoTensor::new(shape, Domain::Pixel, data)
}

pub fn read(mut r: impl Read) -> std::io::Result<Result<VideoTensor>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    Ok(decode(&bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let v = VideoTensor::filled(Shape::new(2, 3, 4, 1).unwrap(), Domain::Pixel, 0.5);
        let b = encode(&v);
        assert_eq!(&b[..4], b"CBCV");
        assert_eq!(&b[4..8], &2u32.to_le_bytes());
        assert_eq!(&b[16..20], &1u32.to_le_bytes());
        assert_eq!(b.len(), 20 + 4 * 24);
        assert_eq!(&b[20..24], &0.5f32.to_le_bytes());
    }

    #[test]
    fn rejects_garbage() {
        assert!(decode(b"CBC").is_err());
        assert!(decode(b"XXXX\x01\0\0\0\x01\0\0\0\x01\0\0\0\x01\0\0\0\0\0\0\0").is_err());
        assert!(decode(b"CBCV\x01\0\0\0\x01\0\0\0\x01\0\0\0\x01\0\0\0\0\0").is_err());
    }

    proptest! {
        #[test]
        fn roundtrip_through_f32(vals in proptest::collection::vec(-4.0f32..4.0, 12)) {
            let data: Vec<f64> = vals.iter().map(|v| *v as f64).collect();
            let v = VideoTensor::new(Shape::new(2, 2, 3, 1).unwrap(), Domain::Pixel, data).unwrap();
            let back = decode(&encode(&v)).unwrap();
            prop_assert_eq!(back.as_slice(), v.as_slice());
        }
    }
}
