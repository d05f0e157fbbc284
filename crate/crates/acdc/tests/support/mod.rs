//! Synthetic ground truth shared by the integration tests: a six-object room
//! rendered to an extraction bundle by exact ray casting, and a twin asset
//! database holding each object's exact feature grids.

#![allow(dead_code)]

use std::f64::consts::PI;

use acdc_core::bundle::{
    AssetDatabase, AssetEntry, AssetSnapshot, CameraIntrinsics, DepthMap, ExtractionBundle, FeatureGrid, JointSpec,
    JointType, LinkSpec, Mask, MountType, ObjectRecord, PlacedObject, Provenance, SceneDescription, SupportRef,
};
use acdc_core::geometry::{OrientedBox, Plane};
use acdc_core::math::{Mat3, RigidTransform};
use acdc_core::{Quat, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FEATURE_ROWS: usize = 4;
pub const FEATURE_COLS: usize = 4;
pub const FEATURE_DIM: usize = 8;
pub const TEXT_DIM: usize = 8;
/// Snapshot yaw spacing; ground-truth yaws are multiples of it.
pub const YAW_STEP_DEG: f64 = 15.0;
pub const SNAPSHOTS: usize = 24;

pub struct GtObject {
    pub id: &'static str,
    pub category: &'static str,
    pub extents: Vec3,
    pub position: Vec3,
    pub yaw_deg: f64,
    pub support: SupportRef,
    pub mount: MountType,
    pub doors: u32,
}

/// Floor at z = 0, back wall at y = 3 facing the room.
pub fn gt_objects() -> Vec<GtObject> {
    let floor = SupportRef::Floor;
    vec![
        GtObject {
            id: "table_0",
            category: "table",
            extents: Vec3::new(1.2, 0.7, 0.75),
            position: Vec3::new(0.0, 1.4, 0.375),
            yaw_deg: 0.0,
            support: floor.clone(),
            mount: MountType::OnSupport,
            doors: 0,
        },
        GtObject {
            id: "lamp_0",
            category: "lamp",
            extents: Vec3::new(0.3, 0.3, 0.35),
            position: Vec3::new(0.2, 1.45, 0.75 + 0.175),
            yaw_deg: 15.0,
            support: SupportRef::Object("table_0".into()),
            mount: MountType::OnSupport,
            doors: 0,
        },
        GtObject {
            id: "cabinet_0",
            category: "cabinet",
            extents: Vec3::new(0.5, 0.45, 0.9),
            position: Vec3::new(-1.35, 1.9, 0.45),
            yaw_deg: 30.0,
            support: floor.clone(),
            mount: MountType::OnSupport,
            doors: 2,
        },
        GtObject {
            id: "chair_0",
            category: "chair",
            extents: Vec3::new(0.5, 0.5, 0.85),
            position: Vec3::new(1.3, 0.9, 0.425),
            yaw_deg: -15.0,
            support: floor.clone(),
            mount: MountType::OnSupport,
            doors: 0,
        },
        GtObject {
            id: "shelf_0",
            category: "shelf",
            extents: Vec3::new(0.8, 0.3, 0.4),
            position: Vec3::new(0.9, 3.0 - 0.15, 1.2),
            yaw_deg: 0.0,
            support: SupportRef::Wall(0),
            mount: MountType::WallMounted { wall: 0 },
            doors: 0,
        },
        GtObject {
            id: "bin_0",
            category: "bin",
            extents: Vec3::new(0.35, 0.35, 0.45),
            position: Vec3::new(-0.9, 0.55, 0.225),
            yaw_deg: 60.0,
            support: floor,
            mount: MountType::OnSupport,
            doors: 0,
        },
    ]
}

pub fn floor_plane() -> Plane {
    Plane::new(Vec3::ZERO, Vec3::Z)
}

pub fn back_wall() -> Plane {
    Plane::new(Vec3::new(0.0, 3.0, 0.0), Vec3::new(0.0, -1.0, 0.0))
}

pub fn yaw_quat(deg: f64) -> Quat {
    Quat::from_yaw(deg.to_radians())
}

pub fn snapshot_index(yaw_deg: f64) -> usize {
    let k = (yaw_deg / YAW_STEP_DEG).round() as i64;
    k.rem_euclid(SNAPSHOTS as i64) as usize
}

pub fn category_embedding(category: &str) -> Vec<f32> {
    let cats = ["table", "lamp", "cabinet", "chair", "shelf", "bin"];
    let k = cats.iter().position(|c| *c == category).expect("known category");
    let mut v = vec![0.0; TEXT_DIM];
    v[k] = 1.0;
    v
}

fn random_grid(rng: &mut ChaCha8Rng) -> FeatureGrid {
    let n = FEATURE_ROWS * FEATURE_COLS * FEATURE_DIM;
    FeatureGrid::new(
        FEATURE_ROWS,
        FEATURE_COLS,
        FEATURE_DIM,
        (0..n).map(|_| rng.gen_range(-1.0f32..1.0)).collect(),
    )
}

pub fn twin_id(o: &GtObject) -> String {
    format!("{}_twin", o.category)
}

pub fn alt_id(o: &GtObject) -> String {
    format!("{}_alt", o.category)
}

fn door_link(extents: Vec3) -> LinkSpec {
    LinkSpec {
        name: "door".into(),
        joint: JointSpec {
            joint_type: JointType::Revolute,
            axis: Vec3::Z,
            origin: Vec3::new(-extents.x / 2.0, -extents.y / 2.0, 0.0),
            limits: [0.0, PI / 2.0],
        },
        front_axis: Vec3::new(0.0, -1.0, 0.0),
        mesh_file: Some("cabinet_door.obj".into()),
    }
}

fn asset(id: String, o: &GtObject, extents: Vec3, rng: &mut ChaCha8Rng) -> AssetEntry {
    let snapshots = (0..SNAPSHOTS)
        .map(|s| AssetSnapshot {
            orientation: yaw_quat(s as f64 * YAW_STEP_DEG),
            features: random_grid(rng),
            representative: s == 0,
        })
        .collect();
    AssetEntry {
        id,
        category: o.category.into(),
        category_embedding: category_embedding(o.category),
        canonical_extents: extents,
        snapshots,
        door_count: o.doors,
        drawer_count: 0,
        links: if o.doors > 0 { vec![door_link(extents)] } else { vec![] },
        collision_box: OrientedBox::centered(extents),
    }
}

/// One exact twin and one distractor cousin per category.
pub fn twin_db() -> AssetDatabase {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut assets = Vec::new();
    for o in gt_objects() {
        assets.push(asset(twin_id(&o), &o, o.extents, &mut rng));
        assets.push(asset(alt_id(&o), &o, o.extents * 1.25, &mut rng));
    }
    AssetDatabase::new(assets)
}

pub fn gt_scene() -> SceneDescription {
    SceneDescription {
        objects: gt_objects()
            .iter()
            .map(|o| PlacedObject {
                source_object_id: o.id.into(),
                asset_id: twin_id(o),
                position: o.position,
                orientation: yaw_quat(o.yaw_deg),
                scale: Vec3::splat(1.0),
                mount_type: o.mount,
                support: o.support.clone(),
            })
            .collect(),
        floor_plane: floor_plane(),
        wall_planes: vec![back_wall()],
        provenance: Provenance::default(),
    }
}

pub struct Camera {
    pub intrinsics: CameraIntrinsics,
    pub camera_to_world: RigidTransform,
}

pub fn camera() -> Camera {
    let (w, h) = (1280usize, 960usize);
    let eye = Vec3::new(0.0, -0.3, 4.0);
    let target = Vec3::new(0.0, 2.0, 0.72);
    let f = (target - eye).try_normalize().unwrap();
    let r = f.cross(Vec3::Z).try_normalize().unwrap();
    let d = f.cross(r);
    let rotation = Quat::from_mat3(&Mat3::from_cols(r, d, f)).normalize();
    Camera {
        intrinsics: CameraIntrinsics {
            fx: 875.0,
            fy: 875.0,
            cx: (w as f64 - 1.0) / 2.0,
            cy: (h as f64 - 1.0) / 2.0,
            width: w,
            height: h,
        },
        camera_to_world: RigidTransform {
            rotation,
            translation: eye,
        },
    }
}

/// Ray parameter of the nearest hit of `o + t d` with box `b`, if any.
fn ray_box(o: Vec3, d: Vec3, b: &OrientedBox) -> Option<f64> {
    let inv = b.rotation.conjugate();
    let lo = inv.rotate(o - b.center);
    let ld = inv.rotate(d);
    let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
    for i in 0..3 {
        let (p, v, h) = (lo.axis(i), ld.axis(i), b.half_extents.axis(i));
        if v.abs() < 1e-15 {
            if p.abs() > h {
                return None;
            }
            continue;
        }
        let (a, c) = ((-h - p) / v, (h - p) / v);
        let (a, c) = if a < c { (a, c) } else { (c, a) };
        t0 = t0.max(a);
        t1 = t1.min(c);
        if t0 > t1 {
            return None;
        }
    }
    (t0 > 0.0).then_some(t0)
}

fn ray_plane(o: Vec3, d: Vec3, p: &Plane) -> Option<f64> {
    let den = d.dot(p.normal);
    if den.abs() < 1e-15 {
        return None;
    }
    let t = (p.point - o).dot(p.normal) / den;
    (t > 0.0).then_some(t)
}

#[derive(Clone, Copy, PartialEq)]
enum Hit {
    Nothing,
    Floor,
    Wall,
    Object(usize),
}

/// Depth map and per-surface masks from exact ray casting through pixel centers.
pub fn render(cam: &Camera, boxes: &[OrientedBox]) -> (DepthMap, Vec<Mask>, Mask, Mask) {
    let k = &cam.intrinsics;
    let (w, h) = (k.width, k.height);
    let mut depth = vec![0.0f32; w * h];
    let mut labels = vec![Hit::Nothing; w * h];
    let o = cam.camera_to_world.translation;
    let floor = floor_plane();
    let wall = back_wall();
    for v in 0..h {
        for u in 0..w {
            let dc = Vec3::new((u as f64 - k.cx) / k.fx, (v as f64 - k.cy) / k.fy, 1.0);
            let d = cam.camera_to_world.apply_vector(dc);
            let mut best = (f64::INFINITY, Hit::Nothing);
            if let Some(t) = ray_plane(o, d, &floor) {
                best = (t, Hit::Floor);
            }
            if let Some(t) = ray_plane(o, d, &wall) {
                if t < best.0 && (o + d * t).z >= 0.0 {
                    best = (t, Hit::Wall);
                }
            }
            for (i, b) in boxes.iter().enumerate() {
                if let Some(t) = ray_box(o, d, b) {
                    if t < best.0 {
                        best = (t, Hit::Object(i));
                    }
                }
            }
            if best.1 != Hit::Nothing {
                // the camera-frame ray has unit z, so t is the depth
                depth[v * w + u] = best.0 as f32;
                labels[v * w + u] = best.1;
            }
        }
    }
    let mask_of = |want: Hit| Mask::new(w, h, labels.iter().map(|l| *l == want).collect());
    let objects = (0..boxes.len()).map(|i| mask_of(Hit::Object(i))).collect();
    (
        DepthMap::from_values(w, h, depth),
        objects,
        mask_of(Hit::Wall),
        mask_of(Hit::Floor),
    )
}

pub fn gt_boxes() -> Vec<OrientedBox> {
    gt_objects()
        .iter()
        .map(|o| OrientedBox::new(o.position, o.extents * 0.5, yaw_quat(o.yaw_deg)))
        .collect()
}

/// Bundle of the ground-truth room carrying each object's exact twin features.
pub fn gt_bundle(db: &AssetDatabase) -> ExtractionBundle {
    let cam = camera();
    let (depth, masks, wall, floor) = render(&cam, &gt_boxes());
    let objects = gt_objects()
        .iter()
        .zip(masks)
        .map(|(o, mask)| {
            let twin = db.get(&twin_id(o)).unwrap();
            ObjectRecord {
                id: o.id.into(),
                label: o.category.into(),
                label_embedding: category_embedding(o.category),
                mask,
                features: twin.snapshots[snapshot_index(o.yaw_deg)].features.clone(),
                articulated: o.doors > 0,
                door_count: (o.doors > 0).then_some(o.doors),
                drawer_count: (o.doors > 0).then_some(0),
            }
        })
        .collect();
    ExtractionBundle {
        intrinsics: cam.intrinsics,
        depth,
        objects,
        wall_masks: vec![wall],
        floor_mask: Some(floor),
        camera_to_world: Some(cam.camera_to_world),
        sidecar: None,
    }
}

/// Door panel facing -y with a protruding knob, in the cabinet's frame.
pub struct KnobFixture {
    pub obj: String,
    pub knob_center: Vec3,
    /// Knob face half-size; truth for the handle location is the knob's front face center.
    pub knob_half: f64,
    pub knob_depth: f64,
}

pub fn knob_fixture(extents: Vec3) -> KnobFixture {
    let (hx, hy, hz) = (extents.x / 2.0, extents.y / 2.0, extents.z / 2.0);
    let panel = (Vec3::new(-hx, -hy - 0.02, -hz), Vec3::new(hx, -hy, hz));
    let knob_half = 0.02;
    let knob_depth = 0.03;
    let kc = Vec3::new(hx - 0.08, -hy - 0.02, 0.1);
    let knob = (
        Vec3::new(kc.x - knob_half, kc.y - knob_depth, kc.z - knob_half),
        Vec3::new(kc.x + knob_half, kc.y, kc.z + knob_half),
    );
    let mut s = String::from("# cabinet door with knob\n");
    let mut base = 0;
    for (lo, hi) in [panel, knob] {
        for i in 0..8 {
            let p = Vec3::new(
                if i & 1 == 0 { lo.x } else { hi.x },
                if i & 2 == 0 { lo.y } else { hi.y },
                if i & 4 == 0 { lo.z } else { hi.z },
            );
            s.push_str(&format!("v {} {} {}\n", p.x, p.y, p.z));
        }
        for f in [[0, 2, 3, 1], [4, 5, 7, 6], [0, 1, 5, 4], [2, 6, 7, 3], [0, 4, 6, 2], [1, 3, 7, 5]] {
            s.push_str(&format!(
                "f {} {} {} {}\n",
                base + f[0] + 1,
                base + f[1] + 1,
                base + f[2] + 1,
                base + f[3] + 1
            ));
        }
        base += 8;
    }
    KnobFixture {
        obj: s,
        knob_center: Vec3::new(kc.x, kc.y - knob_depth, kc.z),
        knob_half,
        knob_depth,
    }
}

/// Writes the twin database and ground-truth bundle under `root`.
pub fn write_fixture(root: &std::path::Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let db = twin_db();
    let bundle = gt_bundle(&db);
    let db_dir = root.join("db");
    let bundle_dir = root.join("bundle");
    acdc::write_asset_db(&db_dir, &db).unwrap();
    let cab = db.assets.iter().find(|a| a.category == "cabinet").unwrap();
    std::fs::write(db_dir.join("cabinet_door.obj"), knob_fixture(cab.canonical_extents).obj).unwrap();
    acdc::write_bundle(&bundle_dir, &bundle).unwrap();
    (bundle_dir, db_dir)
}

/// Smallest valid bundle: one object in a 4x4 image.
pub fn tiny_bundle() -> ExtractionBundle {
    let (w, h) = (4, 4);
    let mut mask = vec![false; w * h];
    for i in [5, 6, 9, 10] {
        mask[i] = true;
    }
    ExtractionBundle {
        intrinsics: CameraIntrinsics {
            fx: 4.0,
            fy: 4.0,
            cx: 1.5,
            cy: 1.5,
            width: w,
            height: h,
        },
        depth: DepthMap::from_values(w, h, (0..w * h).map(|i| 1.0 + i as f32 * 0.01).collect()),
        objects: vec![ObjectRecord {
            id: "cab_0".into(),
            label: "cabinet".into(),
            label_embedding: category_embedding("cabinet"),
            mask: Mask::new(w, h, mask),
            features: FeatureGrid::new(2, 2, 4, (0..16).map(|i| i as f32 * 0.125 - 1.0).collect()),
            articulated: false,
            door_count: None,
            drawer_count: None,
        }],
        wall_masks: vec![],
        floor_mask: None,
        camera_to_world: None,
        sidecar: None,
    }
}

/// Two assets sharing the tiny bundle's feature shape.
pub fn tiny_db() -> AssetDatabase {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let assets = ["cabinet", "table"]
        .iter()
        .enumerate()
        .map(|(i, cat)| AssetEntry {
            id: format!("{cat}_{i}"),
            category: (*cat).into(),
            category_embedding: category_embedding(cat),
            canonical_extents: Vec3::new(0.5, 0.4, 0.8),
            snapshots: (0..4)
                .map(|s| AssetSnapshot {
                    orientation: yaw_quat(90.0 * s as f64),
                    features: FeatureGrid::new(2, 2, 4, (0..16).map(|_| rng.gen_range(-1.0f32..1.0)).collect()),
                    representative: s == 0,
                })
                .collect(),
            door_count: 0,
            drawer_count: 0,
            links: vec![],
            collision_box: OrientedBox::centered(Vec3::new(0.5, 0.4, 0.8)),
        })
        .collect();
    AssetDatabase::new(assets)
}
