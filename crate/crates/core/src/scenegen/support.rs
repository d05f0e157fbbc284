use alloc::vec::Vec;

use super::{bodies, floor_penetration, geometry_err, Body, SceneError};
use crate::bundle::{AssetCatalog, MountType, PlacedObject, SupportRef};
use crate::geometry::{intersection_area, Plane};

/// Footprint overlap fraction above which the higher object rests on the lower.
pub const SUPPORT_OVERLAP: f64 = 0.7;

/// Relative slack keeping the threshold strict against rounding in the clip.
const OVERLAP_SLACK: f64 = 1e-9;

/// Raises at or below this are treated as zero, which keeps de-penetration idempotent.
const RAISE_EPS: f64 = 1e-9;

/// `beneath[i]` is the object index directly below object `i`, or `None` for the floor.
pub type Beneath = Vec<Option<usize>>;

/// Indices sorted from low to high by box center z, ties by id.
pub fn support_order(objects: &[PlacedObject], bodies: &[Body]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..objects.len()).collect();
    idx.sort_by(|a, b| {
        bodies[*a]
            .bbox
            .center
            .z
            .total_cmp(&bodies[*b].bbox.center.z)
            .then_with(|| objects[*a].source_object_id.cmp(&objects[*b].source_object_id))
    });
    idx
}

/// On-top inference over projected bounding boxes.
///
/// Object `i` rests on a strictly lower object `j` when their footprints
/// overlap by more than 70% of the smaller footprint. Among several
/// qualifying `j`, the highest top face wins, then the larger overlap, then
/// the smaller id.
pub fn infer_supports(
    objects: &[PlacedObject],
    catalog: &impl AssetCatalog,
) -> Result<Beneath, SceneError> {
    let bodies = bodies(objects, catalog)?;
    let polys: Vec<_> = bodies.iter().map(Body::footprint).collect();
    let order = support_order(objects, &bodies);
    let mut beneath = alloc::vec![None; objects.len()];
    for (pos, &i) in order.iter().enumerate() {
        let zi = bodies[i].bbox.center.z;
        let mut best: Option<(usize, f64, f64)> = None;
        for &j in &order[..pos] {
            if !(bodies[j].bbox.center.z < zi) {
                continue;
            }
            let inter = intersection_area(&polys[i], &polys[j]).map_err(geometry_err("infer_supports"))?;
            let min_area = polys[i].area().min(polys[j].area());
            if !(inter > SUPPORT_OVERLAP * min_area * (1.0 + OVERLAP_SLACK)) {
                continue;
            }
            let top = bodies[j].top();
            let better = match best {
                None => true,
                Some((bj, btop, binter)) => {
                    top > btop
                        || (top == btop && inter > binter)
                        || (top == btop
                            && inter == binter
                            && objects[j].source_object_id < objects[bj].source_object_id)
                }
            };
            if better {
                best = Some((j, top, inter));
            }
        }
        beneath[i] = best.map(|b| b.0);
    }
    Ok(beneath)
}

/// Writes the support field: wall-mounted objects hang on their wall,
/// everything else rests on the object beneath it or the floor.
pub fn assign_supports(objects: &mut [PlacedObject], beneath: &Beneath) {
    let ids: Vec<_> = objects.iter().map(|o| o.source_object_id.clone()).collect();
    for (o, b) in objects.iter_mut().zip(beneath) {
        o.support = match (o.mount_type, b) {
            (MountType::WallMounted { wall }, _) => SupportRef::Wall(wall),
            (_, Some(j)) => SupportRef::Object(ids[*j].clone()),
            (_, None) => SupportRef::Floor,
        };
    }
}

/// Vertical de-penetration.
///
/// Objects are processed from low to high against already-raised supports;
/// each is raised by `max(0, z(top of support) - z(bottom of object))`. The
/// floor acts as the support of objects with nothing beneath them. Returns
/// the raise applied to each object.
pub fn depenetrate(
    objects: &mut [PlacedObject],
    beneath: &Beneath,
    floor: &Plane,
    catalog: &impl AssetCatalog,
) -> Result<Vec<f64>, SceneError> {
    let initial = bodies(objects, catalog)?;
    let order = support_order(objects, &initial);
    let mut raises = alloc::vec![0.0; objects.len()];
    for i in order {
        let body = Body::of(&objects[i], catalog)?;
        let raise = match beneath[i] {
            Some(j) => Body::of(&objects[j], catalog)?.top() - body.bottom(),
            None => floor_penetration(floor, &body.bbox),
        };
        if raise > RAISE_EPS {
            objects[i].position.z += raise;
            raises[i] = raise;
        }
    }
    Ok(raises)
}
