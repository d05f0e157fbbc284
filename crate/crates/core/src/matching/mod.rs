//! Digital-cousin selection: category, model and orientation per detected
//! object, with optional delegate (sidecar) overrides.

mod features;

pub use features::{embedding_distance, trim_count, vote_top_k};

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::{AssetDatabase, AssetEntry, DelegateAnnotations, ObjectRecord, SelectorPath};
use crate::diag::{Flagged, Warning, WarningKind};
use crate::geometry::{z_min_obb, PointCloud};
use crate::math::{wrap_quarter_turn, Quat, Vec3};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatchError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no candidates to rank")]
    EmptyCandidates,
    #[error("object {object}: no assets in the selected categories")]
    EmptyCategory { object: String },
    #[error("object {object}: no candidate satisfies the articulation constraints")]
    NoCandidateSatisfiesArticulation { object: String },
    #[error("invalid match configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    pub k_cat: usize,
    pub k_cand: usize,
    pub k_cous: usize,
    pub k_model: usize,
    pub k_ori: usize,
    pub trim_fraction: f64,
    pub selector_path: SelectorPath,
    pub articulation_count_threshold: Option<u32>,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            k_cat: 3,
            k_cand: 10,
            k_cous: 3,
            k_model: 10,
            k_ori: 4,
            trim_fraction: 0.10,
            selector_path: SelectorPath::EmbeddingOnly,
            articulation_count_threshold: None,
        }
    }
}

impl MatchConfig {
    pub fn check(&self) -> Result<(), MatchError> {
        let positive = [self.k_cat, self.k_cand, self.k_cous, self.k_model, self.k_ori];
        if positive.contains(&0) {
            return Err(MatchError::InvalidConfig("k values must be positive".into()));
        }
        if self.k_cous > self.k_cand {
            return Err(MatchError::InvalidConfig("k_cous must not exceed k_cand".into()));
        }
        if !(0.0..1.0).contains(&self.trim_fraction) {
            return Err(MatchError::InvalidConfig("trim_fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Which route produced a choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionSource {
    Embedding,
    Delegate,
    ArticulationThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub model: SelectionSource,
    pub orientation: SelectionSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cousin {
    pub asset_id: String,
    pub snapshot_index: usize,
    pub orientation: Quat,
    pub distance: f64,
    pub trace: SelectionTrace,
    /// Snapshot indices of the voted orientation shortlist, best first.
    pub orientation_candidates: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CousinMatch {
    pub object_id: String,
    pub categories: Vec<String>,
    /// Model shortlist by representative-snapshot distance, best first.
    pub model_candidates: Vec<String>,
    pub cousins: Vec<Cousin>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<Warning>,
}

fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (f64::from(*x), f64::from(*y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (libm::sqrt(na) * libm::sqrt(nb))
}

/// The `k_cat` categories most cosine-similar to `label_embedding`; ties by name.
///
/// A category's embedding is taken from its lexicographically first asset.
pub fn top_categories(
    label_embedding: &[f32],
    db: &AssetDatabase,
    k_cat: usize,
) -> Result<Vec<String>, MatchError> {
    let mut per_category: BTreeMap<&str, &AssetEntry> = BTreeMap::new();
    for a in &db.assets {
        if a.category_embedding.len() != label_embedding.len() {
            return Err(MatchError::DimensionMismatch {
                expected: label_embedding.len(),
                found: a.category_embedding.len(),
            });
        }
        per_category
            .entry(a.category.as_str())
            .and_modify(|e| {
                if a.id < e.id {
                    *e = a;
                }
            })
            .or_insert(a);
    }
    let mut scored: Vec<(&str, f64)> = per_category
        .iter()
        .map(|(c, a)| (*c, cosine(label_embedding, &a.category_embedding)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
    Ok(scored.into_iter().take(k_cat).map(|(c, _)| c.to_string()).collect())
}

struct ScoredAsset<'a> {
    asset: &'a AssetEntry,
    distance: f64,
}

fn by_distance_then_id(a: &ScoredAsset, b: &ScoredAsset) -> Ordering {
    a.distance.total_cmp(&b.distance).then(a.asset.id.cmp(&b.asset.id))
}

struct OrientationChoice {
    snapshot_index: usize,
    distance: f64,
    shortlist: Vec<usize>,
    source: SelectionSource,
}

fn choose_orientation(
    obj: &ObjectRecord,
    asset: &AssetEntry,
    cfg: &MatchConfig,
    delegate_index: Option<usize>,
) -> Result<(OrientationChoice, Option<Warning>), MatchError> {
    let grids: Vec<_> = asset.snapshots.iter().map(|s| &s.features).collect();
    let voted = vote_top_k(&obj.features, &grids, cfg.k_ori, cfg.trim_fraction)?;
    let mut shortlist: Vec<(usize, f64)> = Vec::with_capacity(voted.len());
    for s in voted {
        shortlist.push((s, embedding_distance(&obj.features, grids[s], cfg.trim_fraction)?));
    }
    shortlist.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let indices: Vec<usize> = shortlist.iter().map(|(s, _)| *s).collect();
    let mut warning = None;
    if let Some(di) = delegate_index {
        if let Some((s, d)) = shortlist.iter().find(|(s, _)| *s == di) {
            return Ok((
                OrientationChoice {
                    snapshot_index: *s,
                    distance: *d,
                    shortlist: indices,
                    source: SelectionSource::Delegate,
                },
                None,
            ));
        }
        warning = Some(
            Warning::new(
                WarningKind::DelegateFallback,
                "match",
                format!("delegate orientation {di} of {} is not in the shortlist", asset.id),
            )
            .for_object(&obj.id),
        );
    }
    let (s, d) = shortlist[0];
    Ok((
        OrientationChoice {
            snapshot_index: s,
            distance: d,
            shortlist: indices,
            source: SelectionSource::Embedding,
        },
        warning,
    ))
}

fn within_threshold(obj: &ObjectRecord, a: &AssetEntry, threshold: u32) -> bool {
    let (Some(doors), Some(drawers)) = (obj.door_count, obj.drawer_count) else {
        return true;
    };
    doors.abs_diff(a.door_count) <= threshold && drawers.abs_diff(a.drawer_count) <= threshold
}

/// Ranked digital cousins of one object.
///
/// Categories come from label similarity; models are shortlisted by distance
/// to their representative snapshot; each shortlisted model gets its best
/// voted orientation, and cousins are ranked by that orientation's distance.
/// Delegate and articulation-threshold choices may promote a cousin to rank
/// one; the remaining ranks stay in distance order.
pub fn select_cousins(
    obj: &ObjectRecord,
    db: &AssetDatabase,
    cfg: &MatchConfig,
    sidecar: Option<&DelegateAnnotations>,
) -> Result<CousinMatch, MatchError> {
    cfg.check()?;
    let mut warnings = Vec::new();
    let categories = top_categories(&obj.label_embedding, db, cfg.k_cat)?;

    let in_categories: Vec<&AssetEntry> = db
        .assets
        .iter()
        .filter(|a| categories.contains(&a.category))
        .collect();
    if in_categories.is_empty() {
        return Err(MatchError::EmptyCategory {
            object: obj.id.clone(),
        });
    }
    let pool: Vec<&AssetEntry> = if obj.articulated {
        in_categories.into_iter().filter(|a| a.is_articulated()).collect()
    } else {
        in_categories
    };
    if pool.is_empty() {
        return Err(MatchError::NoCandidateSatisfiesArticulation {
            object: obj.id.clone(),
        });
    }

    let mut models: Vec<ScoredAsset> = Vec::with_capacity(pool.len());
    for a in pool {
        let Some(rep) = a.representative() else { continue };
        models.push(ScoredAsset {
            asset: a,
            distance: embedding_distance(&obj.features, &rep.features, cfg.trim_fraction)?,
        });
    }
    if models.is_empty() {
        return Err(MatchError::EmptyCandidates);
    }
    models.sort_by(by_distance_then_id);
    let model_candidates: Vec<String> = models
        .iter()
        .take(cfg.k_model)
        .map(|m| m.asset.id.clone())
        .collect();

    let choice = match cfg.selector_path {
        SelectorPath::Delegate => sidecar.and_then(|s| s.get(&obj.id)),
        SelectorPath::EmbeddingOnly => None,
    };

    // Delegate model must come from the k_model shortlist.
    let mut delegate_model: Option<&AssetEntry> = None;
    if let Some(id) = choice.and_then(|c| c.chosen_model.as_deref()) {
        match models.iter().take(cfg.k_model).find(|m| m.asset.id == id) {
            Some(m) => delegate_model = Some(m.asset),
            None => warnings.push(
                Warning::new(
                    WarningKind::DelegateFallback,
                    "match",
                    format!("delegate model `{id}` is not among the top {} candidates", cfg.k_model),
                )
                .for_object(&obj.id),
            ),
        }
    }

    let mut shortlist: Vec<&AssetEntry> = models.iter().take(cfg.k_cand).map(|m| m.asset).collect();
    if let Some(d) = delegate_model {
        if !shortlist.iter().any(|a| a.id == d.id) {
            shortlist.push(d);
        }
    }

    let mut cousins: Vec<Cousin> = Vec::with_capacity(shortlist.len());
    for a in shortlist {
        let is_delegate = delegate_model.is_some_and(|d| d.id == a.id);
        let ori_index = if is_delegate {
            choice.and_then(|c| c.chosen_orientation_index)
        } else {
            None
        };
        let (ori, w) = choose_orientation(obj, a, cfg, ori_index)?;
        warnings.extend(w);
        cousins.push(Cousin {
            asset_id: a.id.clone(),
            snapshot_index: ori.snapshot_index,
            orientation: a.snapshots[ori.snapshot_index].orientation,
            distance: ori.distance,
            trace: SelectionTrace {
                model: if is_delegate {
                    SelectionSource::Delegate
                } else {
                    SelectionSource::Embedding
                },
                orientation: ori.source,
            },
            orientation_candidates: ori.shortlist,
        });
    }
    cousins.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.asset_id.cmp(&b.asset_id)));

    if let Some(d) = delegate_model {
        let pos = cousins.iter().position(|c| c.asset_id == d.id).expect("delegate in shortlist");
        let c = cousins.remove(pos);
        cousins.insert(0, c);
    }

    if obj.articulated {
        if let Some(t) = cfg.articulation_count_threshold {
            if obj.door_count.is_none() || obj.drawer_count.is_none() {
                warnings.push(
                    Warning::new(
                        WarningKind::ArticulationCountsMissing,
                        "match",
                        "object has no door/drawer counts; threshold not applied",
                    )
                    .for_object(&obj.id),
                );
            } else {
                let ok = |c: &Cousin| db.get(&c.asset_id).is_some_and(|a| within_threshold(obj, a, t));
                match cousins.iter().position(ok) {
                    Some(0) => {}
                    Some(pos) => {
                        let mut c = cousins.remove(pos);
                        c.trace.model = SelectionSource::ArticulationThreshold;
                        cousins.insert(0, c);
                    }
                    None => {
                        return Err(MatchError::NoCandidateSatisfiesArticulation {
                            object: obj.id.clone(),
                        })
                    }
                }
            }
        }
    }

    cousins.truncate(cfg.k_cous);
    Ok(CousinMatch {
        object_id: obj.id.clone(),
        categories,
        model_candidates,
        cousins,
        warnings,
    })
}

fn heading(v: Vec3) -> f64 {
    libm::atan2(v.y, v.x)
}

/// Snap the yaw of `q_c` onto the minimum-footprint frame of the object cloud.
///
/// Among the four quarter-turn-equivalent corrections the smallest is used.
/// Degenerate clouds leave `q_c` untouched and raise a warning.
pub fn refine_orientation_bbox(q_c: Quat, object_points: &PointCloud) -> Flagged<Quat> {
    let Ok(obb) = z_min_obb(&object_points.points) else {
        return Flagged::warn(q_c, WarningKind::RefinementSkipped);
    };
    let box_heading = -obb.yaw;
    let x = q_c.rotate(Vec3::X);
    let asset_heading = if libm::hypot(x.x, x.y) > 1e-6 {
        heading(x)
    } else {
        heading(q_c.rotate(Vec3::Y)) - core::f64::consts::FRAC_PI_2
    };
    let delta = wrap_quarter_turn(box_heading - asset_heading);
    if delta == 0.0 {
        return Flagged::ok(q_c);
    }
    Flagged::ok((Quat::from_yaw(delta) * q_c).normalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{AssetSnapshot, DelegateChoice, FeatureGrid, Mask};
    use crate::geometry::OrientedBox;
    use alloc::vec;

    fn unit(dim: usize, hot: usize) -> Vec<f32> {
        let mut v = vec![0.0; dim];
        v[hot] = 1.0;
        v
    }

    fn grid(seed: f32) -> FeatureGrid {
        FeatureGrid::new(2, 2, 3, (0..12).map(|i| libm::sinf(seed * 7.3 + i as f32 * 1.7)).collect())
    }

    fn asset(id: &str, cat: usize, snaps: &[f32], doors: u32) -> AssetEntry {
        AssetEntry {
            id: id.into(),
            category: ["cabinet", "shelf", "table"][cat].into(),
            category_embedding: unit(3, cat),
            canonical_extents: Vec3::splat(1.0),
            snapshots: snaps
                .iter()
                .enumerate()
                .map(|(i, s)| AssetSnapshot {
                    orientation: Quat::from_yaw(i as f64 * 0.5),
                    features: grid(*s),
                    representative: i == 0,
                })
                .collect(),
            door_count: doors,
            drawer_count: 0,
            links: vec![],
            collision_box: OrientedBox::centered(Vec3::splat(1.0)),
        }
    }

    fn object(feat: FeatureGrid, cat: usize, articulated: bool) -> ObjectRecord {
        ObjectRecord {
            id: "obj".into(),
            label: "thing".into(),
            label_embedding: unit(3, cat),
            mask: Mask::filled(1, 1, true),
            features: feat,
            articulated,
            door_count: Some(1),
            drawer_count: Some(0),
        }
    }

    #[test]
    fn category_ranking_and_ties() {
        let db = AssetDatabase::new(vec![
            asset("t", 2, &[1.0], 0),
            asset("c", 0, &[2.0], 0),
            asset("s", 1, &[3.0], 0),
        ]);
        assert_eq!(top_categories(&unit(3, 0), &db, 1).unwrap(), vec!["cabinet"]);
        // orthogonal to all three: every score is 0, names decide
        let q = [0.0f32, 0.0, 0.0, 1.0];
        let mut db4 = db.clone();
        for a in &mut db4.assets {
            a.category_embedding.push(0.0);
        }
        assert_eq!(top_categories(&q, &db4, 2).unwrap(), vec!["cabinet", "shelf"]);
        assert!(matches!(top_categories(&q, &db, 1), Err(MatchError::DimensionMismatch { .. })));
    }

    #[test]
    fn twin_is_recovered() {
        let db = AssetDatabase::new(vec![
            asset("a", 0, &[1.0, 2.0, 3.0], 0),
            asset("b", 0, &[4.0, 5.0, 6.0], 0),
        ]);
        let obj = object(grid(5.0), 0, false);
        let m = select_cousins(&obj, &db, &MatchConfig::default(), None).unwrap();
        assert_eq!(m.cousins[0].asset_id, "b");
        assert_eq!(m.cousins[0].snapshot_index, 1);
        assert_eq!(m.cousins[0].distance, 0.0);
        assert!(m.cousins.windows(2).all(|w| w[0].distance <= w[1].distance));
    }

    #[test]
    fn articulation_threshold_violation() {
        let db = AssetDatabase::new(vec![asset("a", 0, &[1.0], 6)]);
        let obj = object(grid(1.0), 0, true);
        let cfg = MatchConfig {
            articulation_count_threshold: Some(2),
            ..MatchConfig::default()
        };
        assert_eq!(
            select_cousins(&obj, &db, &cfg, None),
            Err(MatchError::NoCandidateSatisfiesArticulation { object: "obj".into() })
        );
        // without a threshold the articulated asset is acceptable
        assert!(select_cousins(&obj, &db, &MatchConfig::default(), None).is_ok());
        // no articulated asset at all
        let db = AssetDatabase::new(vec![asset("a", 0, &[1.0], 0)]);
        assert!(matches!(
            select_cousins(&obj, &db, &MatchConfig::default(), None),
            Err(MatchError::NoCandidateSatisfiesArticulation { .. })
        ));
    }

    #[test]
    fn threshold_promotes_compatible_cousin() {
        let db = AssetDatabase::new(vec![asset("near", 0, &[1.0], 6), asset("far", 0, &[9.0], 2)]);
        let obj = object(grid(1.0), 0, true);
        let cfg = MatchConfig {
            articulation_count_threshold: Some(2),
            ..MatchConfig::default()
        };
        let m = select_cousins(&obj, &db, &cfg, None).unwrap();
        assert_eq!(m.cousins[0].asset_id, "far");
        assert_eq!(m.cousins[0].trace.model, SelectionSource::ArticulationThreshold);
    }

    #[test]
    fn delegate_choice_and_fallback() {
        let db = AssetDatabase::new(vec![
            asset("a", 0, &[1.0, 2.0], 0),
            asset("b", 0, &[4.0, 5.0], 0),
        ]);
        let obj = object(grid(1.0), 0, false);
        let mut sc = DelegateAnnotations::default();
        sc.objects.insert(
            "obj".into(),
            DelegateChoice {
                chosen_model: Some("b".into()),
                chosen_orientation_index: Some(1),
                ..Default::default()
            },
        );
        let cfg = MatchConfig {
            selector_path: SelectorPath::Delegate,
            ..MatchConfig::default()
        };
        let m = select_cousins(&obj, &db, &cfg, Some(&sc)).unwrap();
        assert_eq!(m.cousins[0].asset_id, "b");
        assert_eq!(m.cousins[0].snapshot_index, 1);
        assert_eq!(m.cousins[0].trace.model, SelectionSource::Delegate);
        assert_eq!(m.cousins[0].trace.orientation, SelectionSource::Delegate);

        sc.objects.get_mut("obj").unwrap().chosen_model = Some("zzz".into());
        let m = select_cousins(&obj, &db, &cfg, Some(&sc)).unwrap();
        assert_eq!(m.cousins[0].asset_id, "a");
        assert_eq!(m.warnings[0].kind, WarningKind::DelegateFallback);

        // embedding-only ignores the sidecar entirely
        sc.objects.get_mut("obj").unwrap().chosen_model = Some("b".into());
        let m = select_cousins(&obj, &db, &MatchConfig::default(), Some(&sc)).unwrap();
        assert_eq!(m.cousins[0].asset_id, "a");
    }

    fn box_cloud(yaw: f64) -> PointCloud {
        let q = Quat::from_yaw(yaw);
        let mut pts = Vec::new();
        for i in 0..=10 {
            for j in 0..=5 {
                for z in [0.0, 0.3] {
                    pts.push(q.rotate(Vec3::new(i as f64 * 0.1 - 0.5, j as f64 * 0.1 - 0.25, z)));
                }
            }
        }
        PointCloud::new(pts)
    }

    #[test]
    fn refinement() {
        let r = refine_orientation_bbox(Quat::IDENTITY, &box_cloud(0.0));
        assert_eq!(r.value, Quat::IDENTITY);
        let r = refine_orientation_bbox(Quat::IDENTITY, &box_cloud(10f64.to_radians()));
        assert!((Quat::from_yaw(10f64.to_radians()).angle_to(r.value)) < 1e-6);
        let line = PointCloud::new((0..5).map(|i| Vec3::X * i as f64).collect());
        let r = refine_orientation_bbox(Quat::from_yaw(0.3), &line);
        assert_eq!(r.value, Quat::from_yaw(0.3));
        assert_eq!(r.warning, Some(WarningKind::RefinementSkipped));
    }
}
