//! Content hashes recorded in provenance and run manifests.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::arrays::{member, read_bytes};
use crate::bundle_io::{read_bundle_manifest, BUNDLE_MANIFEST};
use crate::db_io::{read_db_manifest, DB_MANIFEST};
use crate::error::IoError;

fn absorb(h: &mut Sha256, name: &str, bytes: &[u8]) {
    h.update(name.as_bytes());
    h.update([0u8]);
    h.update((bytes.len() as u64).to_le_bytes());
    h.update(bytes);
}

/// SHA-256 over the manifest and every file it references, each framed by
/// its name and length, in sorted name order. Files in the directory that
/// the manifest does not reference do not contribute.
pub fn bundle_hash(dir: &Path) -> Result<String, IoError> {
    let mut names = read_bundle_manifest(dir)?.files();
    names.push(BUNDLE_MANIFEST.to_string());
    framed_hash(dir, names)
}

/// Same framing as [`bundle_hash`] over an asset database directory.
pub fn db_hash(dir: &Path) -> Result<String, IoError> {
    let mut names = read_db_manifest(dir)?.files();
    names.push(DB_MANIFEST.to_string());
    framed_hash(dir, names)
}

fn framed_hash(dir: &Path, mut names: Vec<String>) -> Result<String, IoError> {
    names.sort();
    names.dedup();
    let mut h = Sha256::new();
    for name in names {
        let path = member(dir, &name, &name)?;
        absorb(&mut h, &name, &read_bytes(&path)?);
    }
    Ok(hex::encode(h.finalize()))
}

/// SHA-256 of one file's bytes.
pub fn file_hash(path: &Path) -> Result<String, IoError> {
    Ok(hex::encode(Sha256::digest(read_bytes(path)?)))
}
