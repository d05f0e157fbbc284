//! Convex footprints on the x-y plane.

use alloc::vec::Vec;

use super::hull::convex_hull;
use super::{Aabb, GeometryError, OrientedBox};
use crate::math::Vec3;

/// Counter-clockwise simple polygon.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon2D {
    pub vertices: Vec<[f64; 2]>,
}

impl Polygon2D {
    pub fn new(vertices: Vec<[f64; 2]>) -> Self {
        Polygon2D { vertices }
    }

    pub fn rect(min: [f64; 2], max: [f64; 2]) -> Self {
        Polygon2D::new(alloc::vec![
            [min[0], min[1]],
            [max[0], min[1]],
            [max[0], max[1]],
            [min[0], max[1]],
        ])
    }

    /// Signed shoelace area (positive when counter-clockwise).
    pub fn signed_area(&self) -> f64 {
        let v = &self.vertices;
        let n = v.len();
        (0..n)
            .map(|i| {
                let a = v[i];
                let b = v[(i + 1) % n];
                a[0] * b[1] - b[0] * a[1]
            })
            .sum::<f64>()
            * 0.5
    }

    pub fn area(&self) -> f64 {
        libm::fabs(self.signed_area())
    }

    pub fn centroid(&self) -> [f64; 2] {
        let n = self.vertices.len().max(1) as f64;
        let s = self
            .vertices
            .iter()
            .fold([0.0, 0.0], |a, v| [a[0] + v[0], a[1] + v[1]]);
        [s[0] / n, s[1] / n]
    }

    pub fn translated(&self, d: [f64; 2]) -> Polygon2D {
        Polygon2D::new(self.vertices.iter().map(|v| [v[0] + d[0], v[1] + d[1]]).collect())
    }

    /// Checks the counter-clockwise convex polygon contract of the clipping kernels.
    pub fn check_convex(&self) -> Result<(), GeometryError> {
        let v = &self.vertices;
        if v.len() < 3 {
            return Err(GeometryError::InvalidPolygon("fewer than three vertices"));
        }
        if v.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(GeometryError::InvalidPolygon("non-finite vertex"));
        }
        if !(self.signed_area() > 0.0) {
            return Err(GeometryError::InvalidPolygon("not counter-clockwise or zero area"));
        }
        let n = v.len();
        let scale = self.area();
        for i in 0..n {
            let (a, b, c) = (v[i], v[(i + 1) % n], v[(i + 2) % n]);
            let turn = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
            if turn < -1e-12 * scale {
                return Err(GeometryError::InvalidPolygon("not convex"));
            }
        }
        Ok(())
    }
}

pub fn project_aabb(b: &Aabb) -> Polygon2D {
    Polygon2D::rect([b.min.x, b.min.y], [b.max.x, b.max.y])
}

/// Footprint of an oriented box: hull of its corners dropped onto z = 0.
pub fn project_box(b: &OrientedBox) -> Polygon2D {
    let pts: Vec<[f64; 2]> = b.corners().iter().map(|c: &Vec3| [c.x, c.y]).collect();
    Polygon2D::new(convex_hull(&pts))
}

fn side(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

fn segment_cut(p: [f64; 2], q: [f64; 2], a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let sp = side(a, b, p);
    let sq = side(a, b, q);
    let t = sp / (sp - sq);
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

/// Sutherland-Hodgman clip of `subject` by convex `clip`.
fn clip_convex(subject: &[[f64; 2]], clip: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut out: Vec<[f64; 2]> = subject.to_vec();
    for i in 0..clip.len() {
        if out.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let input = core::mem::take(&mut out);
        for j in 0..input.len() {
            let p = input[j];
            let q = input[(j + 1) % input.len()];
            let p_in = side(a, b, p) >= 0.0;
            let q_in = side(a, b, q) >= 0.0;
            match (p_in, q_in) {
                (true, true) => out.push(q),
                (true, false) => out.push(segment_cut(p, q, a, b)),
                (false, true) => {
                    out.push(segment_cut(p, q, a, b));
                    out.push(q);
                }
                (false, false) => {}
            }
        }
    }
    out
}

/// Area of the intersection of two convex counter-clockwise polygons.
pub fn intersection_area(a: &Polygon2D, b: &Polygon2D) -> Result<f64, GeometryError> {
    a.check_convex()?;
    b.check_convex()?;
    let clipped = clip_convex(&a.vertices, &b.vertices);
    if clipped.len() < 3 {
        return Ok(0.0);
    }
    let area = Polygon2D::new(clipped).area();
    Ok(area.min(a.area()).min(b.area()))
}

/// Separating-axis test. When the polygons overlap, returns the unit
/// direction to push `b` away from `a` and the overlap depth along it.
pub fn min_translation(a: &Polygon2D, b: &Polygon2D) -> Option<([f64; 2], f64)> {
    let mut best: Option<([f64; 2], f64)> = None;
    for poly in [a, b] {
        let v = &poly.vertices;
        for i in 0..v.len() {
            let e = [v[(i + 1) % v.len()][0] - v[i][0], v[(i + 1) % v.len()][1] - v[i][1]];
            let len = libm::sqrt(e[0] * e[0] + e[1] * e[1]);
            if len <= 0.0 {
                continue;
            }
            let axis = [e[1] / len, -e[0] / len];
            let (amin, amax) = extent_along(a, axis);
            let (bmin, bmax) = extent_along(b, axis);
            let overlap = amax.min(bmax) - amin.max(bmin);
            if overlap <= 0.0 {
                return None;
            }
            if best.is_none_or(|(_, d)| overlap < d) {
                best = Some((axis, overlap));
            }
        }
    }
    let (mut axis, depth) = best?;
    let ca = a.centroid();
    let cb = b.centroid();
    if (cb[0] - ca[0]) * axis[0] + (cb[1] - ca[1]) * axis[1] < 0.0 {
        axis = [-axis[0], -axis[1]];
    }
    Some((axis, depth))
}

fn extent_along(p: &Polygon2D, axis: [f64; 2]) -> (f64, f64) {
    p.vertices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        let d = v[0] * axis[0] + v[1] * axis[1];
        (lo.min(d), hi.max(d))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Quat;
    use alloc::vec;

    fn unit() -> Polygon2D {
        Polygon2D::rect([0.0, 0.0], [1.0, 1.0])
    }

    #[test]
    fn square_with_itself() {
        assert_eq!(intersection_area(&unit(), &unit()).unwrap(), 1.0);
    }

    #[test]
    fn offset_square() {
        let b = unit().translated([0.5, 0.0]);
        assert!((intersection_area(&unit(), &b).unwrap() - 0.5).abs() < 1e-12);
        assert!((intersection_area(&b, &unit()).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn disjoint_squares() {
        let b = unit().translated([3.0, 0.0]);
        assert_eq!(intersection_area(&unit(), &b).unwrap(), 0.0);
        assert!(min_translation(&unit(), &b).is_none());
    }

    #[test]
    fn invalid_polygons() {
        let cw = Polygon2D::new(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]);
        assert!(intersection_area(&cw, &unit()).is_err());
        let two = Polygon2D::new(vec![[0.0, 0.0], [1.0, 0.0]]);
        assert!(intersection_area(&two, &unit()).is_err());
        let dart = Polygon2D::new(vec![[0.0, 0.0], [2.0, 0.0], [1.0, 0.2], [1.0, 2.0]]);
        assert!(intersection_area(&dart, &unit()).is_err());
    }

    #[test]
    fn mtv_of_overlapping_unit_boxes() {
        let b = unit().translated([0.98, 0.0]);
        let (axis, depth) = min_translation(&unit(), &b).unwrap();
        assert!((depth - 0.02).abs() < 1e-12);
        assert!((axis[0] - 1.0).abs() < 1e-12 && axis[1].abs() < 1e-12);
    }

    #[test]
    fn rotated_box_footprint() {
        let b = OrientedBox::new(Vec3::ZERO, Vec3::splat(0.5), Quat::from_yaw(core::f64::consts::FRAC_PI_4));
        let p = project_box(&b);
        assert_eq!(p.vertices.len(), 4);
        assert!((p.area() - 1.0).abs() < 1e-12);
        p.check_convex().unwrap();
    }
}
