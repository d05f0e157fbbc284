//! Reconstruction-quality metrics of a generated scene against ground truth.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::{AssetCatalog, PlacedObject, SceneDescription};
use crate::geometry::{intersection_area, project_box, Aabb, OrientedBox};
use crate::math::Quat;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("object {object} has no 1:1 counterpart in the other scene")]
    UnpairedObject { object: String },
    #[error("unknown asset {asset}")]
    UnknownAsset { asset: String },
}

/// Rotation sets under which an asset looks the same, per category.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SymmetryTable {
    #[serde(default)]
    pub categories: BTreeMap<String, Vec<Quat>>,
}

/// `{identity, pi about z}`.
pub fn centrosymmetric() -> Vec<Quat> {
    vec![Quat::IDENTITY, Quat::from_yaw(PI)]
}

impl SymmetryTable {
    /// Marks `categories` as centrosymmetric.
    pub fn with_centrosymmetric<'a>(categories: impl IntoIterator<Item = &'a str>) -> Self {
        SymmetryTable {
            categories: categories
                .into_iter()
                .map(|c| (String::from(c), centrosymmetric()))
                .collect(),
        }
    }

    /// Symmetry group of a category; `{identity}` when not listed.
    pub fn group(&self, category: &str) -> Vec<Quat> {
        let mut g = self.categories.get(category).cloned().unwrap_or_default();
        if !g.iter().any(|q| q.angle_to(Quat::IDENTITY) < 1e-12) {
            g.insert(0, Quat::IDENTITY);
        }
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(Stat {
            mean,
            std: libm::sqrt(var.max(0.0)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectMetrics {
    pub object_id: String,
    pub gt_asset: String,
    pub rec_asset: String,
    pub category_match: bool,
    pub model_match: bool,
    pub center_l2_cm: f64,
    /// Center error divided by the ground-truth scene scale, in cm per meter.
    pub center_l2_per_scale: Option<f64>,
    pub orientation_diff: f64,
    pub bbox_iou: f64,
    pub center_aligned_iou: f64,
    /// IoU of the oriented boxes, footprint intersection times z overlap.
    pub oriented_iou: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub object_count: usize,
    pub category_correct: usize,
    pub model_correct: usize,
    pub category_accuracy: f64,
    pub model_accuracy: f64,
    pub center_l2_cm: Stat,
    pub center_l2_per_scale: Option<Stat>,
    pub orientation_diff: Stat,
    pub bbox_iou: Stat,
    pub center_aligned_iou: Stat,
    pub oriented_iou: Option<Stat>,
}

impl Summary {
    pub fn of(objects: &[ObjectMetrics]) -> Option<Summary> {
        let n = objects.len();
        if n == 0 {
            return None;
        }
        let col = |f: fn(&ObjectMetrics) -> f64| Stat::of(&objects.iter().map(f).collect::<Vec<_>>());
        let opt_col = |f: fn(&ObjectMetrics) -> Option<f64>| {
            let v: Option<Vec<f64>> = objects.iter().map(f).collect();
            v.and_then(|v| Stat::of(&v))
        };
        let cat = objects.iter().filter(|o| o.category_match).count();
        let model = objects.iter().filter(|o| o.model_match).count();
        Some(Summary {
            object_count: n,
            category_correct: cat,
            model_correct: model,
            category_accuracy: cat as f64 / n as f64,
            model_accuracy: model as f64 / n as f64,
            center_l2_cm: col(|o| o.center_l2_cm)?,
            center_l2_per_scale: opt_col(|o| o.center_l2_per_scale),
            orientation_diff: col(|o| o.orientation_diff)?,
            bbox_iou: col(|o| o.bbox_iou)?,
            center_aligned_iou: col(|o| o.center_aligned_iou)?,
            oriented_iou: opt_col(|o| o.oriented_iou),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Diagonal of the ground-truth scene's bounding box (m).
    pub scene_scale: f64,
    /// `None` when there are no objects.
    pub summary: Option<Summary>,
    pub per_object: Vec<ObjectMetrics>,
}

fn posed_box(o: &PlacedObject, catalog: &impl AssetCatalog) -> Result<OrientedBox, MetricsError> {
    let ext = catalog
        .canonical_extents(&o.asset_id)
        .ok_or_else(|| MetricsError::UnknownAsset { asset: o.asset_id.clone() })?;
    Ok(OrientedBox::centered(ext).posed(o.position, o.orientation, o.scale))
}

/// Smallest geodesic angle between `rec` and `gt` composed with any element of `group`.
pub fn orientation_diff(gt: Quat, rec: Quat, group: &[Quat]) -> f64 {
    group
        .iter()
        .map(|g| (gt * *g).angle_to(rec))
        .fold(f64::INFINITY, f64::min)
        .clamp(0.0, PI)
}

/// IoU of two z-up oriented boxes via their footprints and z overlap.
pub fn oriented_iou(a: &OrientedBox, b: &OrientedBox) -> Option<f64> {
    let (pa, pb) = (project_box(a), project_box(b));
    let inter_xy = intersection_area(&pa, &pb).ok()?;
    let (za, zb) = (a.aabb(), b.aabb());
    let dz = (za.max.z.min(zb.max.z) - za.min.z.max(zb.min.z)).max(0.0);
    let inter = inter_xy * dz;
    let union = a.volume() + b.volume() - inter;
    (union > 0.0).then(|| (inter / union).clamp(0.0, 1.0))
}

/// Per-object and summary metrics of `rec` against `gt`, paired by source id.
pub fn evaluate(
    gt: &SceneDescription,
    rec: &SceneDescription,
    catalog: &impl AssetCatalog,
    symmetry: &SymmetryTable,
) -> Result<MetricsReport, MetricsError> {
    let mut rec_by_id: BTreeMap<&str, &PlacedObject> = BTreeMap::new();
    for o in &rec.objects {
        if rec_by_id.insert(o.source_object_id.as_str(), o).is_some() {
            return Err(MetricsError::UnpairedObject {
                object: o.source_object_id.clone(),
            });
        }
    }
    let mut seen: BTreeMap<&str, ()> = BTreeMap::new();
    let mut pairs = Vec::with_capacity(gt.objects.len());
    for g in &gt.objects {
        let id = g.source_object_id.as_str();
        let r = rec_by_id
            .get(id)
            .copied()
            .filter(|_| seen.insert(id, ()).is_none())
            .ok_or_else(|| MetricsError::UnpairedObject { object: id.into() })?;
        pairs.push((g, r));
    }
    if let Some(extra) = rec.objects.iter().find(|o| !seen.contains_key(o.source_object_id.as_str())) {
        return Err(MetricsError::UnpairedObject {
            object: extra.source_object_id.clone(),
        });
    }

    let gt_boxes: Vec<OrientedBox> = gt.objects.iter().map(|o| posed_box(o, catalog)).collect::<Result<_, _>>()?;
    let scene_scale = gt_boxes
        .iter()
        .map(|b| b.aabb())
        .reduce(|a, b| Aabb::new(a.min.min_elem(b.min), a.max.max_elem(b.max)))
        .map_or(0.0, |b| b.extents().norm());

    let mut per_object = Vec::with_capacity(pairs.len());
    for ((g, r), gb) in pairs.into_iter().zip(&gt_boxes) {
        let rb = posed_box(r, catalog)?;
        let gcat = catalog.category(&g.asset_id);
        let rcat = catalog.category(&r.asset_id);
        let (ga, ra) = (gb.aabb(), rb.aabb());
        let (gc, rc) = (ga.center(), ra.center());
        let l2 = (gc - rc).norm() * 100.0;
        let group = symmetry.group(gcat.unwrap_or(""));
        per_object.push(ObjectMetrics {
            object_id: g.source_object_id.clone(),
            gt_asset: g.asset_id.clone(),
            rec_asset: r.asset_id.clone(),
            category_match: gcat.is_some() && gcat == rcat,
            model_match: g.asset_id == r.asset_id,
            center_l2_cm: l2,
            center_l2_per_scale: (scene_scale > 0.0).then(|| l2 / scene_scale),
            orientation_diff: orientation_diff(g.orientation, r.orientation, &group),
            bbox_iou: ga.iou(&ra),
            center_aligned_iou: ga.iou(&ra.translated(gc - rc)),
            oriented_iou: oriented_iou(gb, &rb),
        });
    }
    Ok(MetricsReport {
        scene_scale,
        summary: Summary::of(&per_object),
        per_object,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRow {
    pub scene: String,
    pub summary: Option<Summary>,
    /// Set for reports without objects; such rows are left out of pooling.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateTable {
    pub rows: Vec<SceneRow>,
    pub pooled: Option<Summary>,
}

/// Per-scene rows plus statistics pooled over every object of every
/// non-empty report. Rows keep the input order.
pub fn aggregate(reports: &[(String, MetricsReport)]) -> AggregateTable {
    let rows = reports
        .iter()
        .map(|(name, r)| SceneRow {
            scene: name.clone(),
            summary: r.summary.clone(),
            flagged: r.per_object.is_empty(),
        })
        .collect();
    let all: Vec<ObjectMetrics> = reports
        .iter()
        .flat_map(|(_, r)| r.per_object.iter().cloned())
        .collect();
    AggregateTable {
        rows,
        pooled: Summary::of(&all),
    }
}

fn pm(s: &Stat, scale: f64, digits: usize) -> String {
    format!("{:.*} ± {:.*}", digits, s.mean * scale, digits, s.std * scale)
}

/// Plain-text table with the columns Cat., Mod., L2 Dist. (cm), Ori. Diff.
/// (rad), Bbox IoU and Cen. IoU.
pub fn render_table(table: &AggregateTable) -> String {
    let header = ["Scene", "Cat.", "Mod.", "L2 Dist.", "Ori. Diff.", "Bbox IoU", "Cen. IoU"];
    let mut lines: Vec<[String; 7]> = Vec::new();
    let row = |name: &str, s: &Option<Summary>| -> [String; 7] {
        match s {
            Some(s) => [
                name.into(),
                format!("{}/{}", s.category_correct, s.object_count),
                format!("{}/{}", s.model_correct, s.object_count),
                pm(&s.center_l2_cm, 1.0, 2),
                pm(&s.orientation_diff, 1.0, 2),
                pm(&s.bbox_iou, 1.0, 2),
                pm(&s.center_aligned_iou, 1.0, 2),
            ],
            None => {
                let dash = || String::from("-");
                [format!("{name} (empty)"), dash(), dash(), dash(), dash(), dash(), dash()]
            }
        }
    };
    for r in &table.rows {
        lines.push(row(&r.scene, &r.summary));
    }
    if table.rows.len() > 1 {
        lines.push(row("pooled", &table.pooled));
    }
    let mut widths = header.map(|h| h.chars().count());
    for l in &lines {
        for (w, c) in widths.iter_mut().zip(l) {
            *w = (*w).max(c.chars().count());
        }
    }
    let fmt_line = |cells: &[String]| {
        let mut s = String::new();
        for (k, (c, w)) in cells.iter().zip(widths).enumerate() {
            if k > 0 {
                s.push_str(" | ");
            }
            s.push_str(c);
            for _ in c.chars().count()..w {
                s.push(' ');
            }
        }
        String::from(s.trim_end())
    };
    let mut out = fmt_line(&header.map(String::from));
    out.push('\n');
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    out.push_str(&rule.join("-|-"));
    out.push('\n');
    for l in &lines {
        out.push_str(&fmt_line(l));
        out.push('\n');
    }
    out
}
