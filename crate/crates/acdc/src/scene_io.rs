//! Scene description files (`.scene.json`).

use std::path::Path;

use acdc_core::bundle::{validate_scene, SceneDescription};

use crate::error::IoError;
use crate::fsio::{read_json, to_json, write_atomic};

/// Canonical text of a scene: keys in declaration order, pretty-printed,
/// shortest round-trip floats, trailing newline.
pub fn scene_to_string(scene: &SceneDescription) -> String {
    to_json(scene)
}

pub fn write_scene(scene: &SceneDescription, path: &Path) -> Result<(), IoError> {
    write_atomic(path, scene_to_string(scene).as_bytes())
}

pub fn read_scene_unchecked(path: &Path) -> Result<SceneDescription, IoError> {
    read_json(path)
}

/// Reads and validates a scene; support references must resolve.
pub fn read_scene(path: &Path) -> Result<SceneDescription, IoError> {
    let s = read_scene_unchecked(path)?;
    IoError::from_violations("scene", validate_scene(&s), |p| {
        p.strip_prefix("objects[")
            .and_then(|r| r.split(']').next())
            .and_then(|i| i.parse::<usize>().ok())
            .and_then(|i| s.objects.get(i))
            .map_or_else(|| p.to_string(), |o| o.source_object_id.clone())
    })?;
    Ok(s)
}
