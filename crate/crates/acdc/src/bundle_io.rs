//! Extraction bundle directories.
//!
//! ```text
//! manifest.json          schema version, shapes, intrinsics, object table
//! depth.f32              height x width depth samples (m)
//! depth_valid.u8         optional validity mask; defaults to finite and > 0
//! mask_<id>.u8           per-object mask at image resolution
//! feat_<id>.f32          rows x cols x dim patch features
//! label_emb_<id>.f32     label embedding
//! wall_<k>.u8, floor.u8  optional plane masks
//! sidecar.json           optional delegate annotations
//! ```

use std::path::Path;

use acdc_core::bundle::{
    validate_bundle, CameraIntrinsics, DelegateAnnotations, DepthMap, ExtractionBundle, FeatureGrid, ObjectRecord,
};
use acdc_core::math::RigidTransform;
use serde::{Deserialize, Serialize};

use crate::arrays::{encode_f32, encode_mask, member, read_f32, read_mask};
use crate::error::IoError;
use crate::fsio::{read_json, to_json, write_atomic};

pub const BUNDLE_MANIFEST: &str = "manifest.json";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntrinsicsJson {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepthJson {
    #[serde(default = "default_depth")]
    pub file: String,
    /// `[height, width]`.
    pub shape: [usize; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid_file: Option<String>,
}

fn default_depth() -> String {
    "depth.f32".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectJson {
    pub id: String,
    pub label: String,
    #[serde(default)]
    pub articulated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub door_count: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drawer_count: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_embedding: Option<String>,
}

impl ObjectJson {
    fn mask_file(&self) -> String {
        self.mask.clone().unwrap_or_else(|| format!("mask_{}.u8", self.id))
    }

    fn features_file(&self) -> String {
        self.features.clone().unwrap_or_else(|| format!("feat_{}.f32", self.id))
    }

    fn embedding_file(&self) -> String {
        self.label_embedding.clone().unwrap_or_else(|| format!("label_emb_{}.f32", self.id))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleManifest {
    pub schema_version: u32,
    pub intrinsics: IntrinsicsJson,
    pub depth: DepthJson,
    /// `[rows, cols, dim]` of every object's feature grid.
    pub feature_shape: [usize; 3],
    pub label_embedding_dim: usize,
    pub objects: Vec<ObjectJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub wall_masks: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor_mask: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera_to_world: Option<RigidTransform>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sidecar: Option<String>,
}

impl BundleManifest {
    /// Every file the manifest references, in manifest order.
    pub fn files(&self) -> Vec<String> {
        let mut out = vec![self.depth.file.clone()];
        out.extend(self.depth.valid_file.clone());
        for o in &self.objects {
            out.push(o.mask_file());
            out.push(o.features_file());
            out.push(o.embedding_file());
        }
        out.extend(self.wall_masks.iter().cloned());
        out.extend(self.floor_mask.clone());
        out.extend(self.sidecar.clone());
        out
    }
}

pub fn read_bundle_manifest(dir: &Path) -> Result<BundleManifest, IoError> {
    let m: BundleManifest = read_json(&dir.join(BUNDLE_MANIFEST))?;
    if m.schema_version != SCHEMA_VERSION {
        return Err(IoError::InvalidValue {
            at: format!("{BUNDLE_MANIFEST}: schema_version"),
            detail: format!("unsupported version {}", m.schema_version),
        });
    }
    Ok(m)
}

/// Reads a bundle without checking its invariants; only failures that make
/// the arrays unreadable are reported.
pub fn read_bundle_unchecked(dir: &Path) -> Result<ExtractionBundle, IoError> {
    let m = read_bundle_manifest(dir)?;
    let k = &m.intrinsics;
    let [dh, dw] = m.depth.shape;
    let values = read_f32(&member(dir, &m.depth.file, "depth.file")?, dh * dw)?;
    let depth = match &m.depth.valid_file {
        Some(f) => {
            let valid = read_mask(&member(dir, f, "depth.valid_file")?, dw, dh)?;
            DepthMap {
                width: dw,
                height: dh,
                values,
                valid: valid.bits,
            }
        }
        None => DepthMap::from_values(dw, dh, values),
    };
    let [rows, cols, dim] = m.feature_shape;
    let mut objects = Vec::with_capacity(m.objects.len());
    for (i, o) in m.objects.iter().enumerate() {
        let at = |f: &str| format!("objects[{i}].{f}");
        let mask = read_mask(&member(dir, &o.mask_file(), &at("mask"))?, k.width, k.height)?;
        let data = read_f32(&member(dir, &o.features_file(), &at("features"))?, rows * cols * dim)?;
        let emb = read_f32(
            &member(dir, &o.embedding_file(), &at("label_embedding"))?,
            m.label_embedding_dim,
        )?;
        objects.push(ObjectRecord {
            id: o.id.clone(),
            label: o.label.clone(),
            label_embedding: emb,
            mask,
            features: FeatureGrid::new(rows, cols, dim, data),
            articulated: o.articulated,
            door_count: o.door_count,
            drawer_count: o.drawer_count,
        });
    }
    let wall_masks = m
        .wall_masks
        .iter()
        .enumerate()
        .map(|(w, f)| read_mask(&member(dir, f, &format!("wall_masks[{w}]"))?, k.width, k.height))
        .collect::<Result<Vec<_>, _>>()?;
    let floor_mask = match &m.floor_mask {
        Some(f) => Some(read_mask(&member(dir, f, "floor_mask")?, k.width, k.height)?),
        None => None,
    };
    let sidecar: Option<DelegateAnnotations> = match &m.sidecar {
        Some(f) => Some(read_json(&member(dir, f, "sidecar")?)?),
        None => None,
    };
    Ok(ExtractionBundle {
        intrinsics: CameraIntrinsics {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            width: k.width,
            height: k.height,
        },
        depth,
        objects,
        wall_masks,
        floor_mask,
        camera_to_world: m.camera_to_world,
        sidecar,
    })
}

fn object_name(b: &ExtractionBundle) -> impl Fn(&str) -> String + '_ {
    |path| {
        path.strip_prefix("objects[")
            .and_then(|r| r.split(']').next())
            .and_then(|i| i.parse::<usize>().ok())
            .and_then(|i| b.objects.get(i))
            .map_or_else(|| path.to_string(), |o| o.id.clone())
    }
}

/// Reads and fully validates a bundle directory.
pub fn read_bundle(dir: &Path) -> Result<ExtractionBundle, IoError> {
    let b = read_bundle_unchecked(dir)?;
    IoError::from_violations("bundle", validate_bundle(&b), object_name(&b))?;
    Ok(b)
}

/// Writes a bundle directory using the conventional file names.
pub fn write_bundle(dir: &Path, b: &ExtractionBundle) -> Result<BundleManifest, IoError> {
    std::fs::create_dir_all(dir).map_err(IoError::io(dir))?;
    let first = b.objects.first();
    let feature_shape = first.map_or([0, 0, 0], |o| {
        let (r, c, d) = o.features.shape();
        [r, c, d]
    });
    let explicit_valid = b.depth.valid != DepthMap::from_values(b.depth.width, b.depth.height, b.depth.values.clone()).valid;
    let k = &b.intrinsics;
    let manifest = BundleManifest {
        schema_version: SCHEMA_VERSION,
        intrinsics: IntrinsicsJson {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            width: k.width,
            height: k.height,
        },
        depth: DepthJson {
            file: default_depth(),
            shape: [b.depth.height, b.depth.width],
            valid_file: explicit_valid.then(|| "depth_valid.u8".to_string()),
        },
        feature_shape,
        label_embedding_dim: first.map_or(0, |o| o.label_embedding.len()),
        objects: b
            .objects
            .iter()
            .map(|o| ObjectJson {
                id: o.id.clone(),
                label: o.label.clone(),
                articulated: o.articulated,
                door_count: o.door_count,
                drawer_count: o.drawer_count,
                mask: None,
                features: None,
                label_embedding: None,
            })
            .collect(),
        wall_masks: (0..b.wall_masks.len()).map(|k| format!("wall_{k}.u8")).collect(),
        floor_mask: b.floor_mask.as_ref().map(|_| "floor.u8".to_string()),
        camera_to_world: b.camera_to_world,
        sidecar: b.sidecar.as_ref().map(|_| "sidecar.json".to_string()),
    };
    let put = |name: &str, bytes: &[u8]| write_atomic(&member(dir, name, name)?, bytes);
    put(&manifest.depth.file, &encode_f32(&b.depth.values))?;
    if let Some(f) = &manifest.depth.valid_file {
        let bits = b.depth.valid.iter().map(|v| if *v { 255 } else { 0 }).collect::<Vec<u8>>();
        put(f, &bits)?;
    }
    for (o, j) in b.objects.iter().zip(&manifest.objects) {
        put(&j.mask_file(), &encode_mask(&o.mask))?;
        put(&j.features_file(), &encode_f32(&o.features.data))?;
        put(&j.embedding_file(), &encode_f32(&o.label_embedding))?;
    }
    for (m, name) in b.wall_masks.iter().zip(&manifest.wall_masks) {
        put(name, &encode_mask(m))?;
    }
    if let (Some(m), Some(name)) = (&b.floor_mask, &manifest.floor_mask) {
        put(name, &encode_mask(m))?;
    }
    if let (Some(s), Some(name)) = (&b.sidecar, &manifest.sidecar) {
        put(name, to_json(s).as_bytes())?;
    }
    put(BUNDLE_MANIFEST, to_json(&manifest).as_bytes())?;
    Ok(manifest)
}
