use alloc::string::String;

use super::SceneError;
use crate::bundle::{AssetEntry, MountType, PlacedObject, SupportRef};
use crate::diag::{Flagged, WarningKind};
use crate::geometry::{aabb, PointCloud};
use crate::matching::{refine_orientation_bbox, Cousin};
use crate::math::Vec3;

/// An axis is degenerate when its measured extent is below this fraction of
/// the largest measured extent.
pub const DEGENERATE_EXTENT_RATIO: f64 = 0.05;

/// Fit a cousin's box to the object's (world-frame) points.
///
/// The asset box is centered on the cloud's bounds taken in the asset's
/// oriented frame and scaled per axis to those bounds. Degenerate axes reuse
/// the scale of the largest axis, keeping the canonical aspect ratio.
pub fn place_object(
    source_object_id: &str,
    cousin: &Cousin,
    points: &PointCloud,
    asset: &AssetEntry,
    refine_orientation: bool,
) -> Result<Flagged<PlacedObject>, SceneError> {
    let degenerate = || SceneError::DegenerateExtent {
        object: String::from(source_object_id),
    };
    if points.is_empty() {
        return Err(degenerate());
    }
    let mut warning = None;
    let mut q = cousin.orientation;
    if refine_orientation {
        let r = refine_orientation_bbox(q, points);
        warning = r.warning;
        q = r.value;
    }
    let inv = q.conjugate();
    let local: alloc::vec::Vec<Vec3> = points.points.iter().map(|p| inv.rotate(*p)).collect();
    let bounds = aabb(&local).map_err(|_| degenerate())?;
    let ext = bounds.extents();
    let largest_axis = (0..3)
        .max_by(|a, b| ext.axis(*a).total_cmp(&ext.axis(*b)).then(b.cmp(a)))
        .unwrap_or(0);
    let largest = ext.axis(largest_axis);
    if !(largest > 0.0) {
        return Err(degenerate());
    }
    let canon = asset.canonical_extents;
    let ref_scale = largest / canon.axis(largest_axis);
    let mut scale = Vec3::ZERO;
    for i in 0..3 {
        let e = ext.axis(i);
        let s = if e < DEGENERATE_EXTENT_RATIO * largest {
            warning = warning.or(Some(WarningKind::DegenerateExtentReplaced));
            ref_scale
        } else {
            e / canon.axis(i)
        };
        scale = scale.with_axis(i, s);
    }
    let placed = PlacedObject {
        source_object_id: source_object_id.into(),
        asset_id: asset.id.clone(),
        position: q.rotate(bounds.center()),
        orientation: q,
        scale,
        mount_type: MountType::OnSupport,
        support: SupportRef::Floor,
    };
    Ok(Flagged {
        value: placed,
        warning,
    })
}
