use crate::bundle::PlacedObject;
use crate::diag::{Flagged, WarningKind};
use crate::geometry::Plane;
use crate::math::{Quat, Vec3};

const MIN_ROTATION: f64 = 1e-9;
const MIN_SHIFT: f64 = 1e-9;

/// Snap a wall-attached object onto `wall`.
///
/// The object is rotated by the smallest rotation taking its local +-x or
/// +-y axis onto the (horizontal) wall normal. The depth axis is then
/// rescaled and the object moved along the normal so that the rear face lies
/// on the wall while the front face stays put. When the front face is already
/// behind the wall, the object is moved out so its rear face touches the wall
/// with its depth unchanged, and flagged.
pub fn align_to_wall(obj: &PlacedObject, canonical_extents: Vec3, wall: &Plane) -> Flagged<PlacedObject> {
    let n = wall.normal;
    let Some(nh) = Vec3::new(n.x, n.y, 0.0).try_normalize() else {
        return Flagged::warn(obj.clone(), WarningKind::WallPlaneSkipped);
    };
    let mut best = (0usize, 1.0f64, f64::INFINITY);
    for i in 0..2 {
        for s in [1.0, -1.0] {
            let a = obj.orientation.rotate(Vec3::unit_axis(i)) * s;
            let angle = libm::atan2(a.cross(nh).norm(), a.dot(nh));
            if angle < best.2 {
                best = (i, s, angle);
            }
        }
    }
    let (axis, sign, angle) = best;
    let mut out = obj.clone();
    if angle >= MIN_ROTATION {
        let from = obj.orientation.rotate(Vec3::unit_axis(axis)) * sign;
        out.orientation = (Quat::rotation_between(from, nh) * obj.orientation).normalize();
    }

    let along = n.dot(nh);
    let dist = |p: Vec3| wall.signed_distance(p) / along;
    let canon = canonical_extents.axis(axis);
    let half = 0.5 * out.scale.axis(axis) * canon;
    let dc = dist(out.position);
    let front = dc + half;
    let rear = dc - half;
    if front <= 0.0 {
        out.position += nh * (half - dc);
        return Flagged::warn(out, WarningKind::WallBehindFront);
    }
    if libm::fabs(rear) > MIN_SHIFT {
        out.scale = out.scale.with_axis(axis, front / canon);
        out.position += nh * (0.5 * front - dc);
    }
    Flagged::ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::MountType;
    use crate::scenegen::fixtures::*;

    fn wall() -> Plane {
        Plane::new(Vec3::new(0.0, 2.0, 0.0), Vec3::new(0.0, -1.0, 0.0))
    }

    fn cabinet(pos: Vec3) -> (PlacedObject, Vec3) {
        let e = Vec3::new(0.6, 0.3, 0.5);
        let mut o = placed("cab", e, pos);
        o.mount_type = MountType::WallMounted { wall: 0 };
        (o, e)
    }

    fn front_y(o: &PlacedObject, e: Vec3) -> f64 {
        // front face lies on the -y side (toward the room)
        o.position.y - 0.5 * o.scale.y * e.y
    }

    #[test]
    fn aligned_on_wall_is_unchanged() {
        let (o, e) = cabinet(Vec3::new(0.0, 1.85, 1.5));
        let r = align_to_wall(&o, e, &wall());
        assert!(r.warning.is_none());
        assert_eq!(r.value, o);
    }

    #[test]
    fn five_degree_correction() {
        let (mut o, e) = cabinet(Vec3::new(0.0, 1.85, 1.5));
        let yawed = Quat::from_yaw(5f64.to_radians());
        o.orientation = yawed;
        let r = align_to_wall(&o, e, &wall()).value;
        assert!((r.orientation.angle_to(yawed) - 5f64.to_radians()).abs() < 1e-9);
        assert!(r.orientation.angle_to(Quat::IDENTITY) < 1e-9);
    }

    #[test]
    fn wall_behind_rear_stretches_depth() {
        let (o, e) = cabinet(Vec3::new(0.0, 1.75, 1.5));
        let before = front_y(&o, e);
        let r = align_to_wall(&o, e, &wall()).value;
        assert!((front_y(&r, e) - before).abs() < 1e-6);
        assert!((r.scale.y * e.y - 0.4).abs() < 1e-9);
        assert!((r.position.y + 0.5 * r.scale.y * e.y - 2.0).abs() < 1e-9);
        assert_eq!(r.scale.x, 1.0);
    }

    #[test]
    fn object_behind_wall_is_snapped_and_flagged() {
        let (o, e) = cabinet(Vec3::new(0.0, 2.5, 1.5));
        let r = align_to_wall(&o, e, &wall());
        assert_eq!(r.warning, Some(WarningKind::WallBehindFront));
        assert!((r.value.position.y - 1.85).abs() < 1e-12);
        assert_eq!(r.value.scale, o.scale);
    }
}
