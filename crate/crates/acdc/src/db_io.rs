//! Asset database directories.
//!
//! ```text
//! db_manifest.json       schema version, feature shape, asset table
//! snap_<asset>_<s>.f32   snapshot feature grids
//! catemb_<asset>.f32     category embeddings
//! *.obj                  optional link meshes (asset frame)
//! ```

use std::path::Path;

use acdc_core::affordance::LinkMesh;
use acdc_core::bundle::{
    validate_db, AssetDatabase, AssetEntry, AssetSnapshot, FeatureGrid, JointSpec, LinkSpec,
};
use acdc_core::geometry::OrientedBox;
use acdc_core::{Quat, Vec3};
use serde::{Deserialize, Serialize};

use crate::arrays::{encode_f32, member, read_f32};
use crate::error::IoError;
use crate::fsio::{read_json, to_json, write_atomic};
use crate::obj::parse_obj;

pub const DB_MANIFEST: &str = "db_manifest.json";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotJson {
    pub orientation: Quat,
    #[serde(default)]
    pub representative: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkJson {
    pub name: String,
    pub joint: JointSpec,
    pub front_axis: Vec3,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetJson {
    pub id: String,
    pub category: String,
    pub canonical_extents: Vec3,
    #[serde(default)]
    pub door_count: u32,
    #[serde(default)]
    pub drawer_count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category_embedding: Option<String>,
    pub snapshots: Vec<SnapshotJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub links: Vec<LinkJson>,
    /// Defaults to the canonical box.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collision_box: Option<OrientedBox>,
}

impl AssetJson {
    fn embedding_file(&self) -> String {
        self.category_embedding.clone().unwrap_or_else(|| format!("catemb_{}.f32", self.id))
    }

    fn snapshot_file(&self, s: usize) -> String {
        self.snapshots[s].file.clone().unwrap_or_else(|| format!("snap_{}_{s}.f32", self.id))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DbManifest {
    pub schema_version: u32,
    /// `[rows, cols, dim]` of every snapshot grid.
    pub feature_shape: [usize; 3],
    pub embedding_dim: usize,
    pub assets: Vec<AssetJson>,
}

impl DbManifest {
    /// Every file the manifest references, in manifest order.
    pub fn files(&self) -> Vec<String> {
        let mut out = Vec::new();
        for a in &self.assets {
            out.push(a.embedding_file());
            out.extend((0..a.snapshots.len()).map(|s| a.snapshot_file(s)));
            out.extend(a.links.iter().filter_map(|l| l.mesh.clone()));
        }
        out
    }
}

fn asset_name(db: &AssetDatabase) -> impl Fn(&str) -> String + '_ {
    |path| {
        path.strip_prefix("assets[")
            .and_then(|r| r.split(']').next())
            .and_then(|i| i.parse::<usize>().ok())
            .and_then(|i| db.assets.get(i))
            .map_or_else(|| path.to_string(), |a| a.id.clone())
    }
}

pub fn read_db_manifest(dir: &Path) -> Result<DbManifest, IoError> {
    let m: DbManifest = read_json(&dir.join(DB_MANIFEST))?;
    if m.schema_version != SCHEMA_VERSION {
        return Err(IoError::InvalidValue {
            at: format!("{DB_MANIFEST}: schema_version"),
            detail: format!("unsupported version {}", m.schema_version),
        });
    }
    Ok(m)
}

/// Reads a database without checking its invariants.
pub fn read_asset_db_unchecked(dir: &Path) -> Result<AssetDatabase, IoError> {
    let m = read_db_manifest(dir)?;
    let [rows, cols, dim] = m.feature_shape;
    let mut assets = Vec::with_capacity(m.assets.len());
    for (i, a) in m.assets.iter().enumerate() {
        let at = |f: &str| format!("assets[{i}].{f}");
        let category_embedding = read_f32(&member(dir, &a.embedding_file(), &at("category_embedding"))?, m.embedding_dim)?;
        let mut snapshots = Vec::with_capacity(a.snapshots.len());
        for (s, snap) in a.snapshots.iter().enumerate() {
            let data = read_f32(
                &member(dir, &a.snapshot_file(s), &at(&format!("snapshots[{s}]")))?,
                rows * cols * dim,
            )?;
            snapshots.push(AssetSnapshot {
                orientation: snap.orientation,
                features: FeatureGrid::new(rows, cols, dim, data),
                representative: snap.representative,
            });
        }
        for (l, link) in a.links.iter().enumerate() {
            if let Some(mesh) = &link.mesh {
                member(dir, mesh, &at(&format!("links[{l}].mesh")))?;
            }
        }
        assets.push(AssetEntry {
            id: a.id.clone(),
            category: a.category.clone(),
            category_embedding,
            canonical_extents: a.canonical_extents,
            snapshots,
            door_count: a.door_count,
            drawer_count: a.drawer_count,
            links: a
                .links
                .iter()
                .map(|l| LinkSpec {
                    name: l.name.clone(),
                    joint: l.joint,
                    front_axis: l.front_axis,
                    mesh_file: l.mesh.clone(),
                })
                .collect(),
            collision_box: a.collision_box.unwrap_or_else(|| OrientedBox::centered(a.canonical_extents)),
        });
    }
    Ok(AssetDatabase::new(assets))
}

/// Reads and fully validates an asset database directory.
pub fn read_asset_db(dir: &Path) -> Result<AssetDatabase, IoError> {
    let db = read_asset_db_unchecked(dir)?;
    IoError::from_violations("asset db", validate_db(&db), asset_name(&db))?;
    Ok(db)
}

/// Writes a database directory with conventional file names. Link meshes are
/// referenced, not written.
pub fn write_asset_db(dir: &Path, db: &AssetDatabase) -> Result<DbManifest, IoError> {
    std::fs::create_dir_all(dir).map_err(IoError::io(dir))?;
    let feature_shape = db
        .assets
        .iter()
        .flat_map(|a| a.snapshots.first())
        .map(|s| {
            let (r, c, d) = s.features.shape();
            [r, c, d]
        })
        .next()
        .unwrap_or([0, 0, 0]);
    let manifest = DbManifest {
        schema_version: SCHEMA_VERSION,
        feature_shape,
        embedding_dim: db.assets.first().map_or(0, |a| a.category_embedding.len()),
        assets: db
            .assets
            .iter()
            .map(|a| AssetJson {
                id: a.id.clone(),
                category: a.category.clone(),
                canonical_extents: a.canonical_extents,
                door_count: a.door_count,
                drawer_count: a.drawer_count,
                category_embedding: None,
                snapshots: a
                    .snapshots
                    .iter()
                    .map(|s| SnapshotJson {
                        orientation: s.orientation,
                        representative: s.representative,
                        file: None,
                    })
                    .collect(),
                links: a
                    .links
                    .iter()
                    .map(|l| LinkJson {
                        name: l.name.clone(),
                        joint: l.joint,
                        front_axis: l.front_axis,
                        mesh: l.mesh_file.clone(),
                    })
                    .collect(),
                collision_box: (a.collision_box != OrientedBox::centered(a.canonical_extents))
                    .then_some(a.collision_box),
            })
            .collect(),
    };
    let put = |name: &str, bytes: &[u8]| write_atomic(&member(dir, name, name)?, bytes);
    for (a, j) in db.assets.iter().zip(&manifest.assets) {
        put(&j.embedding_file(), &encode_f32(&a.category_embedding))?;
        for (s, snap) in a.snapshots.iter().enumerate() {
            put(&j.snapshot_file(s), &encode_f32(&snap.features.data))?;
        }
    }
    put(DB_MANIFEST, to_json(&manifest).as_bytes())?;
    Ok(manifest)
}

/// Loads the triangle mesh of one articulated link.
pub fn read_link_mesh(dir: &Path, asset: &AssetEntry, link: &str) -> Result<LinkMesh, IoError> {
    let spec = asset.link(link).ok_or_else(|| IoError::InvalidValue {
        at: format!("asset {}", asset.id),
        detail: format!("no link named `{link}`"),
    })?;
    let file = spec.mesh_file.as_deref().ok_or_else(|| IoError::InvalidValue {
        at: format!("asset {} link {link}", asset.id),
        detail: "link has no mesh".into(),
    })?;
    let path = member(dir, file, "mesh")?;
    let text = std::fs::read_to_string(&path).map_err(IoError::io(&path))?;
    let triangles = parse_obj(&text).map_err(|e| IoError::parse(&path, e))?;
    Ok(LinkMesh {
        link: link.to_string(),
        triangles,
        joint: spec.joint,
    })
}
