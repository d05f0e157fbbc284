use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::collide::overlapping_pairs;
use super::support::assign_supports;
use super::{
    align_to_wall, bodies, classify_mount, depenetrate, geometry_err, infer_supports, place_object,
    resolve_xy, MountContext, SceneError, XyReport, SUPPORT_OVERLAP, XY_MARGIN,
};
use crate::bundle::{AssetCatalog, AssetDatabase, ExtractionBundle, PlacedObject, Provenance, SceneDescription};
use crate::diag::{Warning, WarningKind};
use crate::geometry::{
    dbscan_filter, fit_plane_ransac, object_points, unproject, Eps, PixelCloud, Plane, PointCloud,
    RansacParams, DEFAULT_MIN_PTS,
};
use crate::matching::CousinMatch;
use crate::math::{any_orthogonal, Mat3, Quat, RigidTransform, Vec3};

/// Post-processing knobs. The wall and floor thresholds drive the geometric
/// mount fallback.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PostConfig {
    pub wall_proximity: f64,
    pub floor_clearance: f64,
    pub max_xy_passes: usize,
    /// Rounds of support inference, de-penetration and xy resolution.
    pub max_rounds: usize,
}

impl Default for PostConfig {
    fn default() -> Self {
        PostConfig {
            wall_proximity: 0.05,
            floor_clearance: 0.10,
            max_xy_passes: 100,
            max_rounds: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompileConfig {
    /// 1-based rank into each object's cousin list.
    pub cousin_rank: usize,
    pub refine_orientation: bool,
    /// DBSCAN radius in meters; `None` picks it from the cloud.
    pub dbscan_eps: Option<f64>,
    pub dbscan_min_pts: usize,
    pub ransac: RansacParams,
    pub post: PostConfig,
}

impl Default for CompileConfig {
    fn default() -> Self {
        CompileConfig {
            cousin_rank: 1,
            refine_orientation: false,
            dbscan_eps: None,
            dbscan_min_pts: DEFAULT_MIN_PTS,
            ransac: RansacParams::default(),
            post: PostConfig::default(),
        }
    }
}

/// Thresholds in force for a run, echoed into the compile report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub wall_proximity: f64,
    pub floor_clearance: f64,
    pub support_overlap: f64,
    pub xy_margin: f64,
    pub depenetration: String,
}

impl Thresholds {
    fn of(cfg: &PostConfig) -> Thresholds {
        Thresholds {
            wall_proximity: cfg.wall_proximity,
            floor_clearance: cfg.floor_clearance,
            support_overlap: SUPPORT_OVERLAP,
            xy_margin: XY_MARGIN,
            depenetration: "ascending z against already-raised supports".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostReport {
    pub warnings: Vec<Warning>,
    /// Total vertical raise per object id, for objects that moved.
    pub raises: BTreeMap<String, f64>,
    pub rounds: usize,
    pub xy: XyReport,
    pub thresholds: Thresholds,
}

/// Wall alignment, then rounds of support inference, de-penetration and xy
/// resolution until a round changes nothing.
///
/// When the round cap is hit, supports and de-penetration run once more so
/// the vertical invariant holds, and overlaps left are reported.
pub fn postprocess(
    objects: &mut [PlacedObject],
    floor: &Plane,
    walls: &[Plane],
    catalog: &impl AssetCatalog,
    cfg: &PostConfig,
) -> Result<PostReport, SceneError> {
    let mut warnings = Vec::new();
    for o in objects.iter_mut() {
        let Some(k) = o.mount_type.wall() else { continue };
        let ext = catalog
            .canonical_extents(&o.asset_id)
            .ok_or_else(|| SceneError::UnknownAsset { asset: o.asset_id.clone() })?;
        let wall = walls
            .get(k)
            .ok_or_else(|| SceneError::InvalidConfig(format!("object {} names missing wall {k}", o.source_object_id)))?;
        let r = align_to_wall(o, ext, wall);
        if let Some(kind) = r.warning {
            warnings.push(Warning::new(kind, "align_to_wall", format!("wall {k}")).for_object(&o.source_object_id));
        }
        *o = r.value;
    }

    let mut raises: BTreeMap<String, f64> = BTreeMap::new();
    let mut add_raises = |objects: &[PlacedObject], r: &[f64]| {
        let mut any = false;
        for (o, d) in objects.iter().zip(r) {
            if *d > 0.0 {
                *raises.entry(o.source_object_id.clone()).or_insert(0.0) += *d;
                any = true;
            }
        }
        any
    };

    let mut xy = XyReport::default();
    let mut rounds = 0;
    let mut settled = false;
    while rounds < cfg.max_rounds.max(1) {
        rounds += 1;
        let beneath = infer_supports(objects, catalog)?;
        assign_supports(objects, &beneath);
        let r = depenetrate(objects, &beneath, floor, catalog)?;
        let raised = add_raises(objects, &r);
        let round = resolve_xy(objects, catalog, cfg.max_xy_passes)?;
        xy.passes += round.passes;
        xy.moves += round.moves;
        xy.converged = round.converged;
        xy.residual = round.residual;
        if !raised && round.moves == 0 {
            settled = true;
            break;
        }
    }
    if !settled {
        let beneath = infer_supports(objects, catalog)?;
        assign_supports(objects, &beneath);
        let r = depenetrate(objects, &beneath, floor, catalog)?;
        add_raises(objects, &r);
        let left = overlapping_pairs(objects, catalog, 1e-9)?;
        xy.converged = left.is_empty();
        xy.residual = left
            .into_iter()
            .map(|(a, b, _)| [objects[a].source_object_id.clone(), objects[b].source_object_id.clone()])
            .collect();
    }
    if !xy.converged {
        warnings.push(Warning::new(
            WarningKind::CollisionFixpointNotReached,
            "resolve_xy",
            format!("{} overlapping pairs left after {} passes", xy.residual.len(), xy.passes),
        ));
    }
    Ok(PostReport {
        warnings,
        raises,
        rounds,
        xy,
        thresholds: Thresholds::of(cfg),
    })
}

/// Camera-frame cloud, world frame and fitted planes of a bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneFrame {
    pub pixels: PixelCloud,
    pub camera_to_world: RigidTransform,
    /// World-frame floor; `None` when it has to be defaulted from object points.
    pub floor: Option<Plane>,
    pub walls: Vec<Plane>,
    pub warnings: Vec<Warning>,
}

fn transform_plane(t: &RigidTransform, p: &Plane) -> Plane {
    Plane::new(t.apply(p.point), t.apply_vector(p.normal))
}

/// World frame with z along the floor normal, x along the camera x axis
/// projected on the floor, and the origin below the camera.
fn frame_from_up(up: Vec3, floor_offset: f64) -> RigidTransform {
    let z = up;
    let x = (Vec3::X - z * z.dot(Vec3::X)).try_normalize().unwrap_or_else(|| any_orthogonal(z));
    let y = z.cross(x);
    let world_to_camera = Mat3::from_cols(x, y, z);
    let rotation = Quat::from_mat3(&world_to_camera.transpose()).normalize();
    let origin = -(z * floor_offset);
    RigidTransform {
        rotation,
        translation: -rotation.rotate(origin),
    }
}

fn fit_camera_plane(cloud: &PixelCloud, mask: &crate::bundle::Mask, params: &RansacParams) -> Option<Plane> {
    let pts = object_points(cloud, mask).ok()?.value;
    fit_plane_ransac(&pts.points, params).ok().map(|f| f.plane)
}

/// Unprojects depth, fits floor and wall planes and fixes the world frame.
///
/// The world frame is the bundle's camera pose when given; otherwise it is
/// derived from the floor fit, and without a floor it is the camera frame
/// turned z-up (world y = camera forward).
pub fn scene_frame(bundle: &ExtractionBundle, cfg: &CompileConfig) -> Result<SceneFrame, SceneError> {
    let pixels = unproject(&bundle.depth, &bundle.intrinsics).map_err(geometry_err("unproject"))?;
    let mut warnings = Vec::new();
    let floor_cam = bundle.floor_mask.as_ref().and_then(|m| fit_camera_plane(&pixels, m, &cfg.ransac));
    if bundle.floor_mask.is_some() && floor_cam.is_none() {
        warnings.push(Warning::new(
            WarningKind::FloorPlaneDefaulted,
            "scene_frame",
            "floor mask given but no plane could be fitted",
        ));
    }
    let camera_to_world = match (&bundle.camera_to_world, &floor_cam) {
        (Some(t), _) => *t,
        (None, Some(f)) => frame_from_up(f.normal, f.signed_distance(Vec3::ZERO)),
        (None, None) => frame_from_up(Vec3::new(0.0, -1.0, 0.0), 0.0),
    };
    let mut walls = Vec::with_capacity(bundle.wall_masks.len());
    for (k, m) in bundle.wall_masks.iter().enumerate() {
        let pts = object_points(&pixels, m).map_err(geometry_err("wall_plane"))?.value;
        let fit = fit_plane_ransac(&pts.points, &cfg.ransac).map_err(|source| SceneError::Geometry {
            stage: format!("wall_plane[{k}]"),
            source,
        })?;
        walls.push(transform_plane(&camera_to_world, &fit.plane));
    }
    Ok(SceneFrame {
        floor: floor_cam.map(|f| transform_plane(&camera_to_world, &f)),
        pixels,
        camera_to_world,
        walls,
        warnings,
    })
}

/// World-frame points of object `index`: masked depth, DBSCAN-filtered.
pub fn object_cloud(
    bundle: &ExtractionBundle,
    frame: &SceneFrame,
    index: usize,
    cfg: &CompileConfig,
) -> Result<(PointCloud, Vec<Warning>), SceneError> {
    let obj = &bundle.objects[index];
    let raw = object_points(&frame.pixels, &obj.mask).map_err(geometry_err("object_points"))?;
    if raw.value.is_empty() {
        return Err(SceneError::EmptyObjectPoints { object: obj.id.clone() });
    }
    let eps = cfg.dbscan_eps.map_or(Eps::Auto, Eps::Meters);
    let filtered = dbscan_filter(&raw.value, eps, cfg.dbscan_min_pts);
    let mut warnings = Vec::new();
    if let Some(kind) = filtered.warning {
        warnings.push(Warning::new(kind, "dbscan", "point cloud kept unfiltered").for_object(&obj.id));
    }
    Ok((filtered.value.map(|p| frame.camera_to_world.apply(p)), warnings))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompileReport {
    pub cousin_rank: usize,
    pub warnings: Vec<Warning>,
    /// Filtered point count per object id.
    pub point_counts: BTreeMap<String, usize>,
    pub post: PostReport,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledScene {
    pub scene: SceneDescription,
    pub report: CompileReport,
}

/// Compiles per-object clouds (from [`object_cloud`], in bundle order) into a scene.
pub fn assemble_scene(
    bundle: &ExtractionBundle,
    frame: &SceneFrame,
    clouds: Vec<(PointCloud, Vec<Warning>)>,
    matches: &[CousinMatch],
    db: &AssetDatabase,
    cfg: &CompileConfig,
    provenance: Provenance,
) -> Result<CompiledScene, SceneError> {
    if cfg.cousin_rank == 0 {
        return Err(SceneError::InvalidConfig("cousin rank is 1-based".into()));
    }
    if clouds.len() != bundle.objects.len() {
        return Err(SceneError::InvalidConfig("one cloud per bundle object required".into()));
    }
    let mut warnings = frame.warnings.clone();
    let floor = match frame.floor {
        Some(f) => f,
        None => {
            let z = clouds
                .iter()
                .flat_map(|(c, _)| c.points.iter().map(|p| p.z))
                .fold(f64::INFINITY, f64::min);
            if bundle.floor_mask.is_none() {
                warnings.push(Warning::new(
                    WarningKind::FloorPlaneDefaulted,
                    "scene_frame",
                    "no floor mask; floor placed under the lowest object point",
                ));
            }
            Plane::new(Vec3::new(0.0, 0.0, if z.is_finite() { z } else { 0.0 }), Vec3::Z)
        }
    };

    let mut point_counts = BTreeMap::new();
    let mut objects = Vec::with_capacity(bundle.objects.len());
    for (obj, (cloud, w)) in bundle.objects.iter().zip(clouds) {
        warnings.extend(w);
        point_counts.insert(obj.id.clone(), cloud.len());
        let m = matches
            .iter()
            .find(|m| m.object_id == obj.id)
            .ok_or_else(|| SceneError::MissingMatch { object: obj.id.clone() })?;
        let cousin = m.cousins.get(cfg.cousin_rank - 1).ok_or_else(|| SceneError::MissingRank {
            object: obj.id.clone(),
            rank: cfg.cousin_rank,
            available: m.cousins.len(),
        })?;
        let asset = db
            .get(&cousin.asset_id)
            .ok_or_else(|| SceneError::UnknownAsset { asset: cousin.asset_id.clone() })?;
        let placed = place_object(&obj.id, cousin, &cloud, asset, cfg.refine_orientation)?;
        if let Some(kind) = placed.warning {
            warnings.push(Warning::new(kind, "place_object", asset.id.clone()).for_object(&obj.id));
        }
        objects.push(placed.value);
    }

    let placed_bodies = bodies(&objects, db)?;
    let ctx = MountContext {
        floor: &floor,
        walls: &frame.walls,
        bodies: &placed_bodies,
        wall_proximity: cfg.post.wall_proximity,
        floor_clearance: cfg.post.floor_clearance,
    };
    let mut mounts = Vec::with_capacity(objects.len());
    for (i, o) in objects.iter().enumerate() {
        let delegate = bundle.sidecar.as_ref().and_then(|s| s.get(&o.source_object_id));
        let (mount, w) = classify_mount(i, &ctx, delegate)?;
        if let Some(w) = w {
            warnings.push(w.for_object(&o.source_object_id));
        }
        mounts.push(mount);
    }
    for (o, m) in objects.iter_mut().zip(mounts) {
        o.mount_type = m;
    }

    let post = postprocess(&mut objects, &floor, &frame.walls, db, &cfg.post)?;
    warnings.extend(post.warnings.iter().cloned());
    let scene = SceneDescription {
        objects,
        floor_plane: floor,
        wall_planes: frame.walls.clone(),
        provenance: provenance.clone(),
    };
    Ok(CompiledScene {
        scene,
        report: CompileReport {
            cousin_rank: cfg.cousin_rank,
            warnings,
            point_counts,
            post,
            provenance,
        },
    })
}

/// Full pipeline, sequential: planes, placement, mounting, wall alignment,
/// supports, de-penetration, xy resolution and provenance.
pub fn compile_scene(
    bundle: &ExtractionBundle,
    matches: &[CousinMatch],
    db: &AssetDatabase,
    cfg: &CompileConfig,
    provenance: Provenance,
) -> Result<CompiledScene, SceneError> {
    let frame = scene_frame(bundle, cfg)?;
    let clouds = (0..bundle.objects.len())
        .map(|i| object_cloud(bundle, &frame, i, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    assemble_scene(bundle, &frame, clouds, matches, db, cfg, provenance)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_frame_is_z_up_y_forward() {
        let t = frame_from_up(Vec3::new(0.0, -1.0, 0.0), 0.0);
        assert!((t.apply(Vec3::new(0.0, 0.0, 2.0)) - Vec3::new(0.0, 2.0, 0.0)).norm() < 1e-12);
        assert!((t.apply(Vec3::new(0.0, -1.0, 0.0)) - Vec3::Z).norm() < 1e-12);
        assert!((t.apply(Vec3::X) - Vec3::X).norm() < 1e-12);
    }

    #[test]
    fn floor_frame_puts_floor_at_zero() {
        // camera 1.2 m above a floor, pitched down 20 degrees
        let pitch = 20f64.to_radians();
        let up = Vec3::new(0.0, -libm::cos(pitch), -libm::sin(pitch));
        let floor = Plane::new(-(up * 1.2), up);
        let t = frame_from_up(floor.normal, floor.signed_distance(Vec3::ZERO));
        let w = transform_plane(&t, &floor);
        assert!((w.normal - Vec3::Z).norm() < 1e-12);
        assert!(w.point.z.abs() < 1e-12);
        assert!((t.apply(Vec3::ZERO).z - 1.2).abs() < 1e-12);
    }
}
