//! Planar convex hull and the z-aligned minimum-footprint box.

use alloc::vec::Vec;

use super::{aabb, Aabb, GeometryError};
use crate::math::{wrap_quarter_turn, Vec3};

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counter-clockwise convex hull (Andrew's monotone chain), collinear points dropped.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut p: Vec<[f64; 2]> = points.to_vec();
    p.sort_unstable_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * p.len());
    for &pt in &p {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], pt) <= 0.0 {
            hull.pop();
        }
        hull.push(pt);
    }
    let lower = hull.len() + 1;
    for &pt in p.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], pt) <= 0.0 {
            hull.pop();
        }
        hull.push(pt);
    }
    hull.pop();
    hull
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZMinObb {
    /// Rotation about +z that best axis-aligns the cloud, in `[-pi/4, pi/4)`.
    pub yaw: f64,
    /// Bounds of the cloud after rotating it by `yaw`.
    pub bounds: Aabb,
}

fn rotate_xy(p: [f64; 2], yaw: f64) -> [f64; 2] {
    let (s, c) = libm::sincos(yaw);
    [c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

fn footprint_at(hull: &[[f64; 2]], yaw: f64) -> f64 {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in hull {
        let r = rotate_xy(*p, yaw);
        for k in 0..2 {
            lo[k] = lo[k].min(r[k]);
            hi[k] = hi[k].max(r[k]);
        }
    }
    (hi[0] - lo[0]) * (hi[1] - lo[1])
}

/// Minimum-area z-aligned bounding box of a cloud by rotating calipers.
///
/// The minimal rectangle shares a side with the hull, so only hull edge
/// directions (plus the axis-aligned frame) are evaluated.
pub fn z_min_obb(points: &[Vec3]) -> Result<ZMinObb, GeometryError> {
    if points.len() < 3 {
        return Err(GeometryError::DegenerateInput("z_min_obb needs at least three points"));
    }
    let xy: Vec<[f64; 2]> = points.iter().map(|p| [p.x, p.y]).collect();
    let hull = convex_hull(&xy);
    if hull.len() < 3 {
        return Err(GeometryError::DegenerateInput("cloud has no xy extent"));
    }
    let area: f64 = (0..hull.len())
        .map(|i| cross([0.0, 0.0], hull[i], hull[(i + 1) % hull.len()]))
        .sum::<f64>()
        * 0.5;
    let scale = footprint_at(&hull, 0.0);
    if !(area > 1e-12 * scale) {
        return Err(GeometryError::DegenerateInput("cloud has no xy extent"));
    }

    let mut best_yaw = 0.0;
    let mut best_area = scale;
    for i in 0..hull.len() {
        let a = hull[i];
        let b = hull[(i + 1) % hull.len()];
        let yaw = wrap_quarter_turn(-libm::atan2(b[1] - a[1], b[0] - a[0]));
        let fa = footprint_at(&hull, yaw);
        let tol = 1e-12 * best_area;
        let better = fa < best_area - tol
            || (fa <= best_area + tol && libm::fabs(yaw) < libm::fabs(best_yaw));
        if better {
            best_area = fa;
            best_yaw = yaw;
        }
    }
    let (s, c) = libm::sincos(best_yaw);
    let rotated: Vec<Vec3> = points
        .iter()
        .map(|p| Vec3::new(c * p.x - s * p.y, s * p.x + c * p.y, p.z))
        .collect();
    Ok(ZMinObb {
        yaw: best_yaw,
        bounds: aabb(&rotated)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Quat;
    use alloc::vec;

    fn unit_cube() -> Vec<Vec3> {
        (0..8)
            .map(|i| {
                Vec3::new(
                    (i & 1) as f64,
                    ((i >> 1) & 1) as f64,
                    ((i >> 2) & 1) as f64,
                )
            })
            .collect()
    }

    #[test]
    fn axis_aligned_cube() {
        let r = z_min_obb(&unit_cube()).unwrap();
        assert_eq!(r.yaw, 0.0);
        assert!((r.bounds.extents() - Vec3::splat(1.0)).norm() < 1e-12);
    }

    #[test]
    fn recovers_thirty_degrees() {
        let q = Quat::from_yaw(30f64.to_radians());
        let pts: Vec<Vec3> = unit_cube().into_iter().map(|p| q.rotate(p)).collect();
        let r = z_min_obb(&pts).unwrap();
        assert!((r.yaw - (-30f64).to_radians()).abs() < 1e-9, "{}", r.yaw);
        assert!((r.bounds.extents() - Vec3::splat(1.0)).norm() < 1e-9);
    }

    #[test]
    fn single_point_is_degenerate() {
        assert!(z_min_obb(&[Vec3::ZERO]).is_err());
        let line = vec![Vec3::ZERO, Vec3::X, Vec3::X * 2.0, Vec3::new(3.0, 0.0, 1.0)];
        assert!(z_min_obb(&line).is_err());
    }

    #[test]
    fn hull_is_ccw() {
        let h = convex_hull(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5], [0.5, 0.0]]);
        assert_eq!(h, vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
    }
}
