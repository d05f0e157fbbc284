//! Raw array files: little-endian `f32` and `u8` masks (0 or 255), row-major,
//! with shapes declared by the owning manifest.

use std::path::{Path, PathBuf};

use acdc_core::bundle::Mask;

use crate::error::IoError;

/// Resolves a manifest file reference inside `dir`, rejecting anything that
/// could escape it.
pub(crate) fn member(dir: &Path, name: &str, at: &str) -> Result<PathBuf, IoError> {
    let bad = name.is_empty()
        || name.contains(['/', '\\'])
        || name == "."
        || name == ".."
        || name.starts_with('.');
    if bad {
        return Err(IoError::InvalidValue {
            at: at.into(),
            detail: format!("`{name}` is not a plain file name"),
        });
    }
    Ok(dir.join(name))
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>, IoError> {
    std::fs::read(path).map_err(IoError::io(path))
}

pub fn read_f32(path: &Path, len: usize) -> Result<Vec<f32>, IoError> {
    let bytes = read_bytes(path)?;
    if bytes.len() != len * 4 {
        return Err(IoError::ShapeMismatch {
            at: path.display().to_string(),
            detail: format!("expected {len} f32 values ({} bytes), found {} bytes", len * 4, bytes.len()),
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub fn encode_f32(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn read_mask(path: &Path, width: usize, height: usize) -> Result<Mask, IoError> {
    let bytes = read_bytes(path)?;
    if bytes.len() != width * height {
        return Err(IoError::ShapeMismatch {
            at: path.display().to_string(),
            detail: format!("expected {width}x{height} mask bytes, found {}", bytes.len()),
        });
    }
    let mut bits = Vec::with_capacity(bytes.len());
    for (i, b) in bytes.iter().enumerate() {
        match b {
            0 => bits.push(false),
            255 => bits.push(true),
            _ => {
                return Err(IoError::InvalidValue {
                    at: format!("{}[{i}]", path.display()),
                    detail: format!("mask byte {b} is neither 0 nor 255"),
                })
            }
        }
    }
    Ok(Mask::new(width, height, bits))
}

pub fn encode_mask(m: &Mask) -> Vec<u8> {
    m.bits.iter().map(|b| if *b { 255 } else { 0 }).collect()
}
