//! Atomic writes and JSON helpers.

use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::IoError;

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(IoError::io(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(IoError::io(dir))?;
    tmp.write_all(bytes).map_err(IoError::io(path))?;
    tmp.as_file().sync_all().map_err(IoError::io(path))?;
    tmp.persist(path).map_err(|e| IoError::io(path)(e.error))?;
    Ok(())
}

/// Canonical JSON text: pretty-printed, two-space indent, trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    write_atomic(path, to_json(value).as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = std::fs::read_to_string(path).map_err(IoError::io(path))?;
    serde_json::from_str(&text).map_err(|e| IoError::parse(path, e))
}
