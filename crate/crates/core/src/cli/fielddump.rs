//! Binary field dumps.
//!
//! Layout (all little-endian):
//!
//! ```text
//! bytes 0..16   magic "UAPODFLD" followed by 0x00 x 7 and 0x01
//! bytes 16..28  width, height, channels as u32
//! bytes 28..    width * height * channels f64 values, row-major,
//!               channels interleaved per pixel
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 16] = *b"UAPODFLD\0\0\0\0\0\0\0\x01";
const HEADER_LEN: usize = 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldDims {
    pub width: u32,
    pub height: u32,
    pub channels: u32,
}

impl FieldDims {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width: width as u32,
            height: height as u32,
            channels: channels as u32,
        }
    }

    pub fn len(&self) -> usize {
        self.width as usize * self.height as usize * self.channels as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn encode_field(field: &[f64], dims: FieldDims) -> Result<Vec<u8>> {
    if field.len() != dims.len() {
        return Err(Error::DimensionMismatch {
            expected: dims.len(),
            actual: field.len(),
        });
    }
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * field.len());
    out.extend_from_slice(&MAGIC);
    for d in [dims.width, dims.height, dims.channels] {
        out.extend_from_slice(&d.to_le_bytes());
    }
    for v in field {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_field(bytes: &[u8]) -> Result<(FieldDims, Vec<f64>)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "{} bytes is shorter than the header",
            bytes.len()
        )));
    }
    if bytes[..16] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let word =
        |i: usize| u32::from_le_bytes(bytes[16 + 4 * i..20 + 4 * i].try_into().expect("4 bytes"));
    let dims = FieldDims {
        width: word(0),
        height: word(1),
        channels: word(2),
    };
    let body = &bytes[HEADER_LEN..];
    if body.len() != 8 * dims.len() {
        return Err(Error::Format(format!(
            "expected {} payload bytes, found {}",
            8 * dims.len(),
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((dims, values))
}

pub fn dump_field(path: impl AsRef<Path>, field: &[f64], dims: FieldDims) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_field(field, dims)?;
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_field(path: impl AsRef<Path>) -> Result<(FieldDims, Vec<f64>)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_field(&bytes)
}
