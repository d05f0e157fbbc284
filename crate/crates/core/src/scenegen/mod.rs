//! Scene compilation: placement, mounting, support inference,
//! de-penetration, collision resolution and kinematic randomization.

mod check;
mod collide;
mod compile;
mod mount;
mod place;
mod randomize;
mod support;
mod wall;

pub use check::{check_post_invariants, PostViolation, POST_TOL};
pub use collide::{overlapping_pairs, resolve_xy, XyReport, XY_MARGIN};
pub use compile::{
    assemble_scene, compile_scene, object_cloud, postprocess, scene_frame, CompileConfig,
    CompileReport, CompiledScene, PostConfig, PostReport, SceneFrame, Thresholds,
};
pub use mount::{classify_mount, MountContext};
pub use place::{place_object, DEGENERATE_EXTENT_RATIO};
pub use randomize::{randomize_scene, sample_scale_multiplier, RandomizationSpec, Randomized};
pub use support::{assign_supports, depenetrate, infer_supports, support_order, Beneath, SUPPORT_OVERLAP};
pub use wall::align_to_wall;

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::bundle::{AssetCatalog, PlacedObject};
use crate::geometry::{project_box, GeometryError, OrientedBox, Plane, Polygon2D};
use crate::matching::MatchError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("object {object}: measured extents are degenerate on every axis")]
    DegenerateExtent { object: String },
    #[error("object {object}: cousin rank {rank} requested but only {available} available")]
    MissingRank {
        object: String,
        rank: usize,
        available: usize,
    },
    #[error("object {object}: no match entry")]
    MissingMatch { object: String },
    #[error("unknown asset {asset}")]
    UnknownAsset { asset: String },
    #[error("object {object}: no points left after masking and filtering")]
    EmptyObjectPoints { object: String },
    #[error("{stage}: {source}")]
    Geometry {
        stage: String,
        #[source]
        source: GeometryError,
    },
    #[error("object {object}: {source}")]
    Match {
        object: String,
        #[source]
        source: MatchError,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub(crate) fn geometry_err(stage: &str) -> impl FnOnce(GeometryError) -> SceneError + '_ {
    move |source| SceneError::Geometry {
        stage: stage.into(),
        source,
    }
}

/// Visual and collision boxes of a placed object in the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Body {
    pub bbox: OrientedBox,
    pub collision: OrientedBox,
}

impl Body {
    pub fn of(obj: &PlacedObject, catalog: &impl AssetCatalog) -> Result<Body, SceneError> {
        let unknown = || SceneError::UnknownAsset {
            asset: obj.asset_id.clone(),
        };
        let ext = catalog.canonical_extents(&obj.asset_id).ok_or_else(unknown)?;
        let coll = catalog.collision_box(&obj.asset_id).ok_or_else(unknown)?;
        Ok(Body {
            bbox: OrientedBox::centered(ext).posed(obj.position, obj.orientation, obj.scale),
            collision: coll.posed(obj.position, obj.orientation, obj.scale),
        })
    }

    /// z of the bounding box's bottom-left vertex.
    pub fn bottom(&self) -> f64 {
        self.bbox.aabb().min.z
    }

    /// z of the bounding box's top-right vertex.
    pub fn top(&self) -> f64 {
        self.bbox.aabb().max.z
    }

    pub fn footprint(&self) -> Polygon2D {
        project_box(&self.bbox)
    }

    pub fn collision_footprint(&self) -> Polygon2D {
        project_box(&self.collision)
    }
}

pub fn bodies(objects: &[PlacedObject], catalog: &impl AssetCatalog) -> Result<Vec<Body>, SceneError> {
    objects.iter().map(|o| Body::of(o, catalog)).collect()
}

/// Height the floor must be lowered by so that no corner of `b` lies below
/// it; zero when the box is on or above the floor.
pub(crate) fn floor_penetration(floor: &Plane, b: &OrientedBox) -> f64 {
    let n = floor.normal;
    if libm::fabs(n.z) < 1e-12 {
        return 0.0;
    }
    b.corners()
        .iter()
        .map(|c| -floor.signed_distance(*c) / n.z)
        .fold(0.0, f64::max)
}

/// Indices of `objects` ordered by source id.
pub(crate) fn id_order(objects: &[PlacedObject]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..objects.len()).collect();
    idx.sort_by(|a, b| objects[*a].source_object_id.cmp(&objects[*b].source_object_id));
    idx
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::bundle::{AssetDatabase, AssetEntry, MountType, SupportRef};
    use crate::math::{Quat, Vec3};
    use alloc::format;
    use alloc::vec;

    /// Database of unit-scale boxes named `box_<w>x<d>x<h>` (centimeters).
    pub fn box_db(sizes: &[Vec3]) -> AssetDatabase {
        AssetDatabase::new(
            sizes
                .iter()
                .map(|e| AssetEntry {
                    id: box_id(*e),
                    category: "box".into(),
                    category_embedding: vec![1.0],
                    canonical_extents: *e,
                    snapshots: vec![],
                    door_count: 0,
                    drawer_count: 0,
                    links: vec![],
                    collision_box: OrientedBox::centered(*e),
                })
                .collect(),
        )
    }

    pub fn box_id(e: Vec3) -> String {
        format!(
            "box_{}x{}x{}",
            libm::round(e.x * 100.0) as i64,
            libm::round(e.y * 100.0) as i64,
            libm::round(e.z * 100.0) as i64
        )
    }

    pub fn placed(id: &str, ext: Vec3, position: Vec3) -> PlacedObject {
        PlacedObject {
            source_object_id: id.into(),
            asset_id: box_id(ext),
            position,
            orientation: Quat::IDENTITY,
            scale: Vec3::splat(1.0),
            mount_type: MountType::OnSupport,
            support: SupportRef::Floor,
        }
    }

    pub fn floor() -> Plane {
        Plane::new(Vec3::ZERO, Vec3::Z)
    }
}
