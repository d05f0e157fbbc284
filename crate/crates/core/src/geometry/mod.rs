//! Point-cloud and planar geometry kernels.

mod cloud;
mod dbscan;
mod hull;
mod polygon;
mod ransac;

pub use cloud::{object_points, project, unproject, PixelCloud};
pub use dbscan::{auto_eps, dbscan_filter, Eps, DEFAULT_MIN_PTS};
pub use hull::{convex_hull, z_min_obb, ZMinObb};
pub use polygon::{intersection_area, min_translation, project_aabb, project_box, Polygon2D};
pub use ransac::{fit_plane_ransac, fit_plane_tls, PlaneFit, RansacParams};

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{Quat, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(&'static str),
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("invalid polygon: {0}")]
    InvalidPolygon(&'static str),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        PointCloud { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Option<Vec3> {
        if self.points.is_empty() {
            return None;
        }
        let sum = self.points.iter().fold(Vec3::ZERO, |a, p| a + *p);
        Some(sum / self.points.len() as f64)
    }

    pub fn map(&self, f: impl Fn(Vec3) -> Vec3) -> PointCloud {
        PointCloud::new(self.points.iter().map(|p| f(*p)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub point: Vec3,
    pub normal: Vec3,
}

impl Plane {
    /// Plane through `point`; `normal` is normalized.
    pub fn new(point: Vec3, normal: Vec3) -> Self {
        Plane {
            point,
            normal: normal.try_normalize().unwrap_or(Vec3::Z),
        }
    }

    pub fn signed_distance(&self, p: Vec3) -> f64 {
        self.normal.dot(p - self.point)
    }

    pub fn flipped(&self) -> Plane {
        Plane {
            point: self.point,
            normal: -self.normal,
        }
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Aabb { min, max }
    }

    pub fn from_center_extents(center: Vec3, extents: Vec3) -> Self {
        Aabb::new(center - extents * 0.5, center + extents * 0.5)
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn extents(&self) -> Vec3 {
        self.max - self.min
    }

    /// Vertex with the largest coordinates.
    pub fn top_right(&self) -> Vec3 {
        self.max
    }

    /// Vertex with the smallest coordinates.
    pub fn bottom_left(&self) -> Vec3 {
        self.min
    }

    pub fn volume(&self) -> f64 {
        let e = self.extents();
        e.x.max(0.0) * e.y.max(0.0) * e.z.max(0.0)
    }

    pub fn footprint_area(&self) -> f64 {
        let e = self.extents();
        e.x * e.y
    }

    pub fn translated(&self, d: Vec3) -> Aabb {
        Aabb::new(self.min + d, self.max + d)
    }

    pub fn intersection_volume(&self, o: &Aabb) -> f64 {
        let lo = self.min.max_elem(o.min);
        let hi = self.max.min_elem(o.max);
        Aabb::new(lo, hi).volume()
    }

    pub fn iou(&self, o: &Aabb) -> f64 {
        let inter = self.intersection_volume(o);
        let union = self.volume() + o.volume() - inter;
        if union <= 0.0 {
            return 0.0;
        }
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Smallest axis-aligned box containing `points`.
pub fn aabb(points: &[Vec3]) -> Result<Aabb, GeometryError> {
    let first = *points
        .first()
        .ok_or(GeometryError::DegenerateInput("aabb of an empty cloud"))?;
    Ok(points
        .iter()
        .fold(Aabb::new(first, first), |b, p| Aabb::new(b.min.min_elem(*p), b.max.max_elem(*p))))
}

/// Box with its own rotation; `center` and `rotation` are in the parent frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub center: Vec3,
    pub half_extents: Vec3,
    pub rotation: Quat,
}

impl OrientedBox {
    pub fn new(center: Vec3, half_extents: Vec3, rotation: Quat) -> Self {
        OrientedBox {
            center,
            half_extents,
            rotation,
        }
    }

    /// The canonical unit-scale box of an asset with full extents `extents`.
    pub fn centered(extents: Vec3) -> Self {
        OrientedBox::new(Vec3::ZERO, extents * 0.5, Quat::IDENTITY)
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let h = self.half_extents;
        let mut out = [Vec3::ZERO; 8];
        for (i, c) in out.iter_mut().enumerate() {
            let s = Vec3::new(
                if i & 1 == 0 { -h.x } else { h.x },
                if i & 2 == 0 { -h.y } else { h.y },
                if i & 4 == 0 { -h.z } else { h.z },
            );
            *c = self.center + self.rotation.rotate(s);
        }
        out
    }

    /// World-axis-aligned bounds.
    pub fn aabb(&self) -> Aabb {
        aabb(&self.corners()).expect("eight corners")
    }

    pub fn volume(&self) -> f64 {
        8.0 * self.half_extents.x * self.half_extents.y * self.half_extents.z
    }

    /// Unit direction of local axis `i` in the parent frame.
    pub fn axis(&self, i: usize) -> Vec3 {
        self.rotation.rotate(Vec3::unit_axis(i))
    }

    /// Place this (asset-frame) box under a pose with per-axis scale.
    pub fn posed(&self, position: Vec3, orientation: Quat, scale: Vec3) -> OrientedBox {
        OrientedBox {
            center: position + orientation.rotate(self.center.mul_elem(scale)),
            half_extents: scaled_half_extents(self, scale),
            rotation: orientation * self.rotation,
        }
    }
}

// Scaling acts along the asset axes; a collision box rotated inside the asset
// frame is scaled by its axes' projections, which is exact for axis-aligned
// collision boxes and conservative otherwise.
fn scaled_half_extents(b: &OrientedBox, scale: Vec3) -> Vec3 {
    let mut out = Vec3::ZERO;
    for i in 0..3 {
        let a = b.axis(i);
        let s = libm::sqrt(
            (a.x * scale.x) * (a.x * scale.x)
                + (a.y * scale.y) * (a.y * scale.y)
                + (a.z * scale.z) * (a.z * scale.z),
        );
        out = out.with_axis(i, b.half_extents.axis(i) * s);
    }
    out
}
