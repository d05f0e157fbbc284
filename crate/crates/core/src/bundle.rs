//! In-memory data contracts: extraction bundles, the asset database and scene
//! descriptions, plus invariant checking.
//!
//! Values here are plain data. Reading them from disk lives in the `acdc`
//! crate; this module only knows how to say whether a value is well formed.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geometry::{OrientedBox, Plane};
use crate::math::{Quat, RigidTransform, Vec3};

pub const EMBEDDING_NORM_TOL: f64 = 1e-5;
pub const QUAT_NORM_TOL: f64 = 1e-6;
pub const AXIS_NORM_TOL: f64 = 1e-6;
pub const PLANE_NORMAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

/// Row-major boolean image, e.g. an object or wall mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Self {
        Mask { width, height, bits }
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Mask::new(width, height, alloc::vec![value; width * height])
    }

    pub fn get(&self, u: usize, v: usize) -> bool {
        self.bits[v * self.width + u]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    fn shape_ok(&self) -> bool {
        self.bits.len() == self.width * self.height
    }
}

/// Metric depth in meters with a per-pixel validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f32>,
    pub valid: Vec<bool>,
}

impl DepthMap {
    /// Depth grid whose validity is derived from the samples: finite and positive.
    pub fn from_values(width: usize, height: usize, values: Vec<f32>) -> Self {
        let valid = values.iter().map(|d| d.is_finite() && *d > 0.0).collect();
        DepthMap {
            width,
            height,
            values,
            valid,
        }
    }

    pub fn is_valid(&self, idx: usize) -> bool {
        self.valid[idx]
    }
}

/// `rows x cols` grid of `dim`-dimensional patch features, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    pub rows: usize,
    pub cols: usize,
    pub dim: usize,
    pub data: Vec<f32>,
}

impl FeatureGrid {
    pub fn new(rows: usize, cols: usize, dim: usize, data: Vec<f32>) -> Self {
        FeatureGrid {
            rows,
            cols,
            dim,
            data,
        }
    }

    /// Number of feature vectors.
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn vector(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.rows, self.cols, self.dim)
    }

    fn shape_ok(&self) -> bool {
        self.dim > 0 && !self.is_empty() && self.data.len() == self.rows * self.cols * self.dim
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectRecord {
    pub id: String,
    pub label: String,
    pub label_embedding: Vec<f32>,
    pub mask: Mask,
    pub features: FeatureGrid,
    pub articulated: bool,
    /// Observed door / drawer counts, used by the articulation threshold.
    pub door_count: Option<u32>,
    pub drawer_count: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionBundle {
    pub intrinsics: CameraIntrinsics,
    pub depth: DepthMap,
    pub objects: Vec<ObjectRecord>,
    pub wall_masks: Vec<Mask>,
    pub floor_mask: Option<Mask>,
    /// Camera-to-world pose when known; otherwise the world frame is derived
    /// from the floor plane.
    pub camera_to_world: Option<RigidTransform>,
    pub sidecar: Option<DelegateAnnotations>,
}

impl ExtractionBundle {
    pub fn object(&self, id: &str) -> Option<&ObjectRecord> {
        self.objects.iter().find(|o| o.id == id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssetSnapshot {
    pub orientation: Quat,
    pub features: FeatureGrid,
    pub representative: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointType {
    Revolute,
    Prismatic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    #[serde(rename = "type")]
    pub joint_type: JointType,
    pub axis: Vec3,
    pub origin: Vec3,
    pub limits: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec {
    pub name: String,
    pub joint: JointSpec,
    /// Outward direction of the link's front face in the asset frame.
    pub front_axis: Vec3,
    /// Indexed-triangle mesh file, relative to the database directory.
    pub mesh_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssetEntry {
    pub id: String,
    pub category: String,
    pub category_embedding: Vec<f32>,
    /// Full box size at unit scale; the box is centered on the asset origin.
    pub canonical_extents: Vec3,
    pub snapshots: Vec<AssetSnapshot>,
    pub door_count: u32,
    pub drawer_count: u32,
    pub links: Vec<LinkSpec>,
    pub collision_box: OrientedBox,
}

impl AssetEntry {
    pub fn is_articulated(&self) -> bool {
        self.door_count + self.drawer_count > 0
    }

    pub fn representative(&self) -> Option<&AssetSnapshot> {
        self.snapshots.iter().find(|s| s.representative)
    }

    pub fn link(&self, name: &str) -> Option<&LinkSpec> {
        self.links.iter().find(|l| l.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AssetDatabase {
    pub assets: Vec<AssetEntry>,
}

impl AssetDatabase {
    pub fn new(assets: Vec<AssetEntry>) -> Self {
        AssetDatabase { assets }
    }

    pub fn get(&self, id: &str) -> Option<&AssetEntry> {
        self.assets.iter().find(|a| a.id == id)
    }
}

/// Per-asset facts needed to turn a placed object into boxes.
pub trait AssetCatalog {
    fn category(&self, asset_id: &str) -> Option<&str>;
    fn canonical_extents(&self, asset_id: &str) -> Option<Vec3>;
    fn collision_box(&self, asset_id: &str) -> Option<OrientedBox>;
}

impl AssetCatalog for AssetDatabase {
    fn category(&self, asset_id: &str) -> Option<&str> {
        self.get(asset_id).map(|a| a.category.as_str())
    }

    fn canonical_extents(&self, asset_id: &str) -> Option<Vec3> {
        self.get(asset_id).map(|a| a.canonical_extents)
    }

    fn collision_box(&self, asset_id: &str) -> Option<OrientedBox> {
        self.get(asset_id).map(|a| a.collision_box)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MountKind {
    WallMounted,
    OnSupport,
    Mixture,
}

/// Mounting semantics of a placed object. Serialized as `wall_mounted:<k>`,
/// `mixture:<k>` or `on_support`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MountType {
    WallMounted { wall: usize },
    OnSupport,
    Mixture { wall: usize },
}

impl MountType {
    pub fn kind(&self) -> MountKind {
        match self {
            MountType::WallMounted { .. } => MountKind::WallMounted,
            MountType::OnSupport => MountKind::OnSupport,
            MountType::Mixture { .. } => MountKind::Mixture,
        }
    }

    pub fn wall(&self) -> Option<usize> {
        match self {
            MountType::WallMounted { wall } | MountType::Mixture { wall } => Some(*wall),
            MountType::OnSupport => None,
        }
    }
}

impl fmt::Display for MountType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MountType::WallMounted { wall } => write!(f, "wall_mounted:{wall}"),
            MountType::OnSupport => f.write_str("on_support"),
            MountType::Mixture { wall } => write!(f, "mixture:{wall}"),
        }
    }
}

impl FromStr for MountType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "on_support" {
            return Ok(MountType::OnSupport);
        }
        let (kind, wall) = s
            .split_once(':')
            .ok_or_else(|| format!("invalid mount type `{s}`"))?;
        let wall: usize = wall
            .parse()
            .map_err(|_| format!("invalid wall index in mount type `{s}`"))?;
        match kind {
            "wall_mounted" => Ok(MountType::WallMounted { wall }),
            "mixture" => Ok(MountType::Mixture { wall }),
            _ => Err(format!("invalid mount type `{s}`")),
        }
    }
}

impl TryFrom<String> for MountType {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<MountType> for String {
    fn from(m: MountType) -> String {
        m.to_string()
    }
}

/// What an object rests on. Serialized as `floor`, `wall:<k>` or `object:<id>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SupportRef {
    Floor,
    Wall(usize),
    Object(String),
}

impl fmt::Display for SupportRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SupportRef::Floor => f.write_str("floor"),
            SupportRef::Wall(k) => write!(f, "wall:{k}"),
            SupportRef::Object(id) => write!(f, "object:{id}"),
        }
    }
}

impl FromStr for SupportRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "floor" {
            return Ok(SupportRef::Floor);
        }
        if let Some(k) = s.strip_prefix("wall:") {
            return k
                .parse()
                .map(SupportRef::Wall)
                .map_err(|_| format!("invalid wall index in support `{s}`"));
        }
        if let Some(id) = s.strip_prefix("object:") {
            if !id.is_empty() {
                return Ok(SupportRef::Object(id.to_string()));
            }
        }
        Err(format!("invalid support reference `{s}`"))
    }
}

impl TryFrom<String> for SupportRef {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<SupportRef> for String {
    fn from(s: SupportRef) -> String {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedObject {
    pub source_object_id: String,
    pub asset_id: String,
    pub position: Vec3,
    pub orientation: Quat,
    pub scale: Vec3,
    pub mount_type: MountType,
    pub support: SupportRef,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SelectorPath {
    #[default]
    EmbeddingOnly,
    Delegate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Provenance {
    pub bundle_hash: String,
    pub selector_path: SelectorPath,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDescription {
    pub objects: Vec<PlacedObject>,
    pub floor_plane: Plane,
    pub wall_planes: Vec<Plane>,
    pub provenance: Provenance,
}

impl SceneDescription {
    pub fn object(&self, id: &str) -> Option<&PlacedObject> {
        self.objects.iter().find(|o| o.source_object_id == id)
    }
}

/// Choices made by an external delegate for one object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct DelegateChoice {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chosen_model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chosen_orientation_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mount_type: Option<MountKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct DelegateAnnotations {
    pub objects: BTreeMap<String, DelegateChoice>,
}

impl DelegateAnnotations {
    pub fn get(&self, object_id: &str) -> Option<&DelegateChoice> {
        self.objects.get(object_id)
    }
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ViolationCode {
    NonPositiveFocal,
    PrincipalPointOutside,
    ShapeMismatch,
    NonFiniteValue,
    NonPositiveDepth,
    EmptyMask,
    NonUnitEmbedding,
    DuplicateObjectId,
    DuplicateAssetId,
    NonUnitQuaternion,
    RepresentativeCount,
    NoSnapshots,
    NonPositiveExtent,
    NonUnitAxis,
    InvalidJointLimits,
    NonPositiveScale,
    UnresolvedSupport,
    UnresolvedWall,
    SupportCycle,
    NonUnitNormal,
    FeatureShapeMismatch,
    EmbeddingDimMismatch,
    UnknownSidecarObject,
    InvalidMountAnnotation,
}

impl ViolationCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ViolationCode::NonPositiveFocal => "NonPositiveFocal",
            ViolationCode::PrincipalPointOutside => "PrincipalPointOutside",
            ViolationCode::ShapeMismatch => "ShapeMismatch",
            ViolationCode::NonFiniteValue => "NonFiniteValue",
            ViolationCode::NonPositiveDepth => "NonPositiveDepth",
            ViolationCode::EmptyMask => "EmptyMask",
            ViolationCode::NonUnitEmbedding => "NonUnitEmbedding",
            ViolationCode::DuplicateObjectId => "DuplicateObjectId",
            ViolationCode::DuplicateAssetId => "DuplicateAssetId",
            ViolationCode::NonUnitQuaternion => "NonUnitQuaternion",
            ViolationCode::RepresentativeCount => "RepresentativeCount",
            ViolationCode::NoSnapshots => "NoSnapshots",
            ViolationCode::NonPositiveExtent => "NonPositiveExtent",
            ViolationCode::NonUnitAxis => "NonUnitAxis",
            ViolationCode::InvalidJointLimits => "InvalidJointLimits",
            ViolationCode::NonPositiveScale => "NonPositiveScale",
            ViolationCode::UnresolvedSupport => "UnresolvedSupport",
            ViolationCode::UnresolvedWall => "UnresolvedWall",
            ViolationCode::SupportCycle => "SupportCycle",
            ViolationCode::NonUnitNormal => "NonUnitNormal",
            ViolationCode::FeatureShapeMismatch => "FeatureShapeMismatch",
            ViolationCode::EmbeddingDimMismatch => "EmbeddingDimMismatch",
            ViolationCode::UnknownSidecarObject => "UnknownSidecarObject",
            ViolationCode::InvalidMountAnnotation => "InvalidMountAnnotation",
        }
    }
}

/// A broken invariant, located by a JSON-path-like string.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub code: ViolationCode,
    pub path: String,
}

impl Violation {
    pub fn new(code: ViolationCode, path: impl Into<String>) -> Self {
        Violation {
            code,
            path: path.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.code.as_str(), self.path)
    }
}

fn unit_within(norm: f64, tol: f64) -> bool {
    libm::fabs(norm - 1.0) <= tol
}

fn f32_norm(v: &[f32]) -> f64 {
    libm::sqrt(v.iter().map(|x| f64::from(*x) * f64::from(*x)).sum())
}

fn check_embedding(out: &mut Vec<Violation>, v: &[f32], path: String) {
    if v.iter().any(|x| !x.is_finite()) {
        out.push(Violation::new(ViolationCode::NonFiniteValue, path));
    } else if !unit_within(f32_norm(v), EMBEDDING_NORM_TOL) {
        out.push(Violation::new(ViolationCode::NonUnitEmbedding, path));
    }
}

fn check_features(out: &mut Vec<Violation>, g: &FeatureGrid, path: String) {
    if !g.shape_ok() {
        out.push(Violation::new(ViolationCode::ShapeMismatch, path));
    } else if g.data.iter().any(|x| !x.is_finite()) {
        out.push(Violation::new(ViolationCode::NonFiniteValue, path));
    }
}

fn check_quat(out: &mut Vec<Violation>, q: Quat, path: String) {
    if !q.is_finite() {
        out.push(Violation::new(ViolationCode::NonFiniteValue, path));
    } else if !unit_within(q.norm(), QUAT_NORM_TOL) {
        out.push(Violation::new(ViolationCode::NonUnitQuaternion, path));
    }
}

fn check_plane(out: &mut Vec<Violation>, p: &Plane, path: String) {
    if !p.point.is_finite() || !p.normal.is_finite() {
        out.push(Violation::new(ViolationCode::NonFiniteValue, path));
    } else if !unit_within(p.normal.norm(), PLANE_NORMAL_TOL) {
        out.push(Violation::new(ViolationCode::NonUnitNormal, path));
    }
}

fn check_mask(out: &mut Vec<Violation>, m: &Mask, k: &CameraIntrinsics, path: String) {
    if !m.shape_ok() || m.width != k.width || m.height != k.height {
        out.push(Violation::new(ViolationCode::ShapeMismatch, path));
    }
}

/// Every broken invariant of an extraction bundle; empty iff the bundle is valid.
pub fn validate_bundle(b: &ExtractionBundle) -> Vec<Violation> {
    let mut out = Vec::new();
    let k = &b.intrinsics;
    if !(k.fx > 0.0 && k.fy > 0.0) {
        out.push(Violation::new(ViolationCode::NonPositiveFocal, "intrinsics"));
    }
    if !(k.cx >= 0.0 && k.cx < k.width as f64 && k.cy >= 0.0 && k.cy < k.height as f64) {
        out.push(Violation::new(ViolationCode::PrincipalPointOutside, "intrinsics"));
    }

    let d = &b.depth;
    if d.width != k.width
        || d.height != k.height
        || d.values.len() != d.width * d.height
        || d.valid.len() != d.values.len()
    {
        out.push(Violation::new(ViolationCode::ShapeMismatch, "depth"));
    } else {
        for (i, (v, ok)) in d.values.iter().zip(&d.valid).enumerate() {
            if !*ok {
                continue;
            }
            if !v.is_finite() {
                out.push(Violation::new(ViolationCode::NonFiniteValue, format!("depth[{i}]")));
                break;
            }
            if *v <= 0.0 {
                out.push(Violation::new(ViolationCode::NonPositiveDepth, format!("depth[{i}]")));
                break;
            }
        }
    }

    let mut seen = BTreeSet::new();
    let first_shape = b.objects.first().map(|o| o.features.shape());
    let first_text = b.objects.first().map(|o| o.label_embedding.len());
    for (i, o) in b.objects.iter().enumerate() {
        let path = format!("objects[{i}]");
        if !seen.insert(o.id.as_str()) {
            out.push(Violation::new(ViolationCode::DuplicateObjectId, path.clone()));
        }
        check_mask(&mut out, &o.mask, k, format!("{path}.mask"));
        if o.mask.count() == 0 {
            out.push(Violation::new(ViolationCode::EmptyMask, path.clone()));
        }
        check_embedding(&mut out, &o.label_embedding, format!("{path}.label_embedding"));
        check_features(&mut out, &o.features, format!("{path}.feature_patches"));
        if Some(o.features.shape()) != first_shape {
            out.push(Violation::new(
                ViolationCode::FeatureShapeMismatch,
                format!("{path}.feature_patches"),
            ));
        }
        if Some(o.label_embedding.len()) != first_text {
            out.push(Violation::new(
                ViolationCode::EmbeddingDimMismatch,
                format!("{path}.label_embedding"),
            ));
        }
    }
    for (i, m) in b.wall_masks.iter().enumerate() {
        check_mask(&mut out, m, k, format!("wall_masks[{i}]"));
    }
    if let Some(m) = &b.floor_mask {
        check_mask(&mut out, m, k, "floor_mask".to_string());
    }
    if let Some(t) = &b.camera_to_world {
        check_quat(&mut out, t.rotation, "camera_to_world.rotation".to_string());
    }
    if let Some(sc) = &b.sidecar {
        for (id, choice) in &sc.objects {
            if !seen.contains(id.as_str()) {
                out.push(Violation::new(
                    ViolationCode::UnknownSidecarObject,
                    format!("sidecar.objects[{id}]"),
                ));
            }
            let needs_wall = matches!(
                choice.mount_type,
                Some(MountKind::WallMounted) | Some(MountKind::Mixture)
            );
            let wall_ok = choice.wall_index.is_some_and(|w| w < b.wall_masks.len());
            if needs_wall && !wall_ok {
                out.push(Violation::new(
                    ViolationCode::InvalidMountAnnotation,
                    format!("sidecar.objects[{id}]"),
                ));
            }
        }
    }
    out
}

/// Every broken invariant of an asset database.
pub fn validate_db(db: &AssetDatabase) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    let first_shape = db
        .assets
        .iter()
        .flat_map(|a| a.snapshots.first())
        .map(|s| s.features.shape())
        .next();
    let first_text = db.assets.first().map(|a| a.category_embedding.len());
    for (i, a) in db.assets.iter().enumerate() {
        let path = format!("assets[{i}]");
        if !seen.insert(a.id.as_str()) {
            out.push(Violation::new(ViolationCode::DuplicateAssetId, path.clone()));
        }
        check_embedding(&mut out, &a.category_embedding, format!("{path}.category_embedding"));
        if Some(a.category_embedding.len()) != first_text {
            out.push(Violation::new(
                ViolationCode::EmbeddingDimMismatch,
                format!("{path}.category_embedding"),
            ));
        }
        let e = a.canonical_extents;
        if !e.is_finite() {
            out.push(Violation::new(ViolationCode::NonFiniteValue, format!("{path}.canonical_extents")));
        } else if !(e.x > 0.0 && e.y > 0.0 && e.z > 0.0) {
            out.push(Violation::new(ViolationCode::NonPositiveExtent, format!("{path}.canonical_extents")));
        }
        if a.snapshots.is_empty() {
            out.push(Violation::new(ViolationCode::NoSnapshots, format!("{path}.snapshots")));
        } else if a.snapshots.iter().filter(|s| s.representative).count() != 1 {
            out.push(Violation::new(ViolationCode::RepresentativeCount, format!("{path}.snapshots")));
        }
        for (s, snap) in a.snapshots.iter().enumerate() {
            let sp = format!("{path}.snapshots[{s}]");
            check_quat(&mut out, snap.orientation, format!("{sp}.orientation"));
            check_features(&mut out, &snap.features, format!("{sp}.feature_patches"));
            if Some(snap.features.shape()) != first_shape {
                out.push(Violation::new(ViolationCode::FeatureShapeMismatch, format!("{sp}.feature_patches")));
            }
        }
        for (l, link) in a.links.iter().enumerate() {
            let lp = format!("{path}.links[{l}]");
            if !unit_within(link.joint.axis.norm(), AXIS_NORM_TOL) {
                out.push(Violation::new(ViolationCode::NonUnitAxis, format!("{lp}.joint.axis")));
            }
            if !unit_within(link.front_axis.norm(), AXIS_NORM_TOL) {
                out.push(Violation::new(ViolationCode::NonUnitAxis, format!("{lp}.front_axis")));
            }
            let [lo, hi] = link.joint.limits;
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                out.push(Violation::new(ViolationCode::InvalidJointLimits, format!("{lp}.joint.limits")));
            }
        }
        let cb = &a.collision_box;
        check_quat(&mut out, cb.rotation, format!("{path}.collision_box.rotation"));
        let he = cb.half_extents;
        if !(he.x > 0.0 && he.y > 0.0 && he.z > 0.0) {
            out.push(Violation::new(ViolationCode::NonPositiveExtent, format!("{path}.collision_box")));
        }
    }
    out
}

/// Cross-checks that a bundle can be matched against a database.
pub fn validate_pair(b: &ExtractionBundle, db: &AssetDatabase) -> Vec<Violation> {
    let mut out = Vec::new();
    let db_shape = db
        .assets
        .iter()
        .flat_map(|a| a.snapshots.first())
        .map(|s| s.features.shape())
        .next();
    let db_text = db.assets.first().map(|a| a.category_embedding.len());
    for (i, o) in b.objects.iter().enumerate() {
        if db_shape.is_some_and(|(_, _, d)| d != o.features.dim) {
            out.push(Violation::new(
                ViolationCode::FeatureShapeMismatch,
                format!("objects[{i}].feature_patches"),
            ));
        }
        if db_text.is_some_and(|d| d != o.label_embedding.len()) {
            out.push(Violation::new(
                ViolationCode::EmbeddingDimMismatch,
                format!("objects[{i}].label_embedding"),
            ));
        }
    }
    out
}

/// Every broken structural invariant of a scene description.
pub fn validate_scene(s: &SceneDescription) -> Vec<Violation> {
    let mut out = Vec::new();
    check_plane(&mut out, &s.floor_plane, "floor_plane".to_string());
    for (k, w) in s.wall_planes.iter().enumerate() {
        check_plane(&mut out, w, format!("wall_planes[{k}]"));
    }
    let mut ids = BTreeMap::new();
    for (i, o) in s.objects.iter().enumerate() {
        if ids.insert(o.source_object_id.as_str(), i).is_some() {
            out.push(Violation::new(ViolationCode::DuplicateObjectId, format!("objects[{i}]")));
        }
    }
    for (i, o) in s.objects.iter().enumerate() {
        let path = format!("objects[{i}]");
        if !o.position.is_finite() {
            out.push(Violation::new(ViolationCode::NonFiniteValue, format!("{path}.position")));
        }
        check_quat(&mut out, o.orientation, path.clone());
        let sc = o.scale;
        if !sc.is_finite() {
            out.push(Violation::new(ViolationCode::NonFiniteValue, format!("{path}.scale")));
        } else if !(sc.x > 0.0 && sc.y > 0.0 && sc.z > 0.0) {
            out.push(Violation::new(ViolationCode::NonPositiveScale, format!("{path}.scale")));
        }
        if let Some(w) = o.mount_type.wall() {
            if w >= s.wall_planes.len() {
                out.push(Violation::new(ViolationCode::UnresolvedWall, format!("{path}.mount_type")));
            }
        }
        match &o.support {
            SupportRef::Floor => {}
            SupportRef::Wall(k) => {
                if *k >= s.wall_planes.len() {
                    out.push(Violation::new(ViolationCode::UnresolvedSupport, format!("{path}.support")));
                }
            }
            SupportRef::Object(id) => {
                if !ids.contains_key(id.as_str()) || id == &o.source_object_id {
                    out.push(Violation::new(ViolationCode::UnresolvedSupport, format!("{path}.support")));
                }
            }
        }
    }
    // Walk each support chain; a chain longer than the object count loops.
    for (i, o) in s.objects.iter().enumerate() {
        let mut cur = &o.support;
        let mut steps = 0;
        while let SupportRef::Object(id) = cur {
            let Some(&j) = ids.get(id.as_str()) else { break };
            steps += 1;
            if steps > s.objects.len() {
                out.push(Violation::new(ViolationCode::SupportCycle, format!("objects[{i}].support")));
                break;
            }
            cur = &s.objects[j].support;
        }
    }
    out
}
