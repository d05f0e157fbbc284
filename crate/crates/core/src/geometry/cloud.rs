use alloc::vec::Vec;

use super::{GeometryError, PointCloud};
use crate::bundle::{CameraIntrinsics, DepthMap, Mask};
use crate::diag::{Flagged, WarningKind};
use crate::math::Vec3;

/// Camera-frame cloud that remembers the source pixel of every point.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelCloud {
    pub width: usize,
    pub height: usize,
    pub cloud: PointCloud,
    /// Row-major pixel index of each point.
    pub pixels: Vec<usize>,
}

/// Back-project every valid depth pixel through the pinhole model.
///
/// Camera frame: +x right, +y down, +z forward.
pub fn unproject(depth: &DepthMap, k: &CameraIntrinsics) -> Result<PixelCloud, GeometryError> {
    if depth.width != k.width
        || depth.height != k.height
        || depth.values.len() != k.width * k.height
        || depth.valid.len() != depth.values.len()
    {
        return Err(GeometryError::ShapeMismatch("depth grid does not match intrinsics"));
    }
    let mut points = Vec::new();
    let mut pixels = Vec::new();
    for v in 0..k.height {
        for u in 0..k.width {
            let idx = v * k.width + u;
            if !depth.valid[idx] {
                continue;
            }
            let z = f64::from(depth.values[idx]);
            points.push(Vec3::new(
                (u as f64 - k.cx) * z / k.fx,
                (v as f64 - k.cy) * z / k.fy,
                z,
            ));
            pixels.push(idx);
        }
    }
    Ok(PixelCloud {
        width: k.width,
        height: k.height,
        cloud: PointCloud::new(points),
        pixels,
    })
}

/// Pinhole projection of a camera-frame point to continuous pixel
/// coordinates `(u, v)` and depth.
pub fn project(p: Vec3, k: &CameraIntrinsics) -> Option<(f64, f64, f64)> {
    if p.z <= 0.0 {
        return None;
    }
    Some((k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy, p.z))
}

/// Points whose source pixel is set in `mask`. Flags an empty result.
pub fn object_points(cloud: &PixelCloud, mask: &Mask) -> Result<Flagged<PointCloud>, GeometryError> {
    if mask.width != cloud.width || mask.height != cloud.height || mask.bits.len() != mask.width * mask.height {
        return Err(GeometryError::ShapeMismatch("mask resolution differs from depth"));
    }
    let points: Vec<Vec3> = cloud
        .cloud
        .points
        .iter()
        .zip(&cloud.pixels)
        .filter(|(_, px)| mask.bits[**px])
        .map(|(p, _)| *p)
        .collect();
    if points.is_empty() {
        Ok(Flagged::warn(PointCloud::new(points), WarningKind::EmptyObjectPoints))
    } else {
        Ok(Flagged::ok(PointCloud::new(points)))
    }
}
