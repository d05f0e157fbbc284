//! Handle localization by ray casting and analytical articulation trajectories.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::{JointSpec, JointType, AXIS_NORM_TOL};
use crate::math::{any_orthogonal, Quat, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AffordanceError {
    #[error("link mesh has no triangles")]
    EmptyMesh,
    #[error("invalid link mesh: {0}")]
    InvalidMesh(&'static str),
    #[error("no ray hit the link mesh")]
    NoHit,
    #[error("handle lies on the revolute axis")]
    DegenerateRadius,
    #[error("a trajectory needs at least two waypoints")]
    TooFewWaypoints,
}

/// Triangles of one link in the asset frame, with its parent joint.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkMesh {
    pub link: String,
    pub triangles: Vec<[Vec3; 3]>,
    pub joint: JointSpec,
}

fn check_joint(j: &JointSpec) -> Result<(), AffordanceError> {
    if !j.axis.is_finite() || libm::fabs(j.axis.norm() - 1.0) > AXIS_NORM_TOL {
        return Err(AffordanceError::InvalidMesh("joint axis is not unit-norm"));
    }
    if !j.origin.is_finite() {
        return Err(AffordanceError::InvalidMesh("joint origin is not finite"));
    }
    let [lo, hi] = j.limits;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(AffordanceError::InvalidMesh("joint limits must be finite with lo < hi"));
    }
    Ok(())
}

impl LinkMesh {
    pub fn check(&self) -> Result<(), AffordanceError> {
        if self.triangles.is_empty() {
            return Err(AffordanceError::EmptyMesh);
        }
        if self.triangles.iter().flatten().any(|v| !v.is_finite()) {
            return Err(AffordanceError::InvalidMesh("non-finite vertex"));
        }
        check_joint(&self.joint)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HandleParams {
    /// Rays per side of the square grid.
    pub grid: usize,
    /// Hits within this distance of the nearest hit belong to the handle (m).
    pub delta: f64,
}

impl Default for HandleParams {
    fn default() -> Self {
        HandleParams {
            grid: 64,
            delta: 0.005,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandleEstimate {
    pub location: Vec3,
    pub hit_count: usize,
    /// Median hit distance minus the nearest hit distance (m).
    pub protrusion: f64,
    pub params: HandleParams,
}

/// Möller-Trumbore ray/triangle distance.
fn ray_triangle(origin: Vec3, dir: Vec3, tri: &[Vec3; 3]) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(e2);
    let det = e1.dot(p);
    let scale = e1.norm() * e2.norm();
    if libm::fabs(det) <= 1e-12 * scale {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(p) * inv;
    const EDGE: f64 = 1e-12;
    if !(-EDGE..=1.0 + EDGE).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = dir.dot(q) * inv;
    if v < -EDGE || u + v > 1.0 + EDGE {
        return None;
    }
    let t = e2.dot(q) * inv;
    (t >= 0.0).then_some(t)
}

/// Casts a `grid x grid` array of parallel rays along `-front_axis` over the
/// link's bounding face and averages the hits nearest to the ray plane.
///
/// The handle is taken to be the most protruding feature: the mean of all
/// hit points within `delta` of the minimum hit distance.
pub fn detect_handle(
    mesh: &LinkMesh,
    front_axis: Vec3,
    params: &HandleParams,
) -> Result<HandleEstimate, AffordanceError> {
    if mesh.triangles.is_empty() {
        return Err(AffordanceError::EmptyMesh);
    }
    if mesh.triangles.iter().flatten().any(|v| !v.is_finite()) {
        return Err(AffordanceError::InvalidMesh("non-finite vertex"));
    }
    let f = front_axis
        .try_normalize()
        .ok_or(AffordanceError::InvalidMesh("front axis is zero"))?;
    let u = any_orthogonal(f);
    let v = f.cross(u);
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in mesh.triangles.iter().flatten() {
        for (k, axis) in [u, v, f].iter().enumerate() {
            let d = p.dot(*axis);
            lo[k] = lo[k].min(d);
            hi[k] = hi[k].max(d);
        }
    }
    let n = params.grid.max(1);
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(hi[2] - lo[2]);
    let start = hi[2] + 0.01 * span.max(1e-6);
    let dir = -f;

    let mut hits: Vec<(f64, Vec3)> = Vec::new();
    for i in 0..n {
        let a = lo[0] + (i as f64 + 0.5) * (hi[0] - lo[0]) / n as f64;
        for j in 0..n {
            let b = lo[1] + (j as f64 + 0.5) * (hi[1] - lo[1]) / n as f64;
            let origin = u * a + v * b + f * start;
            let t = mesh
                .triangles
                .iter()
                .filter_map(|tri| ray_triangle(origin, dir, tri))
                .fold(f64::INFINITY, f64::min);
            if t.is_finite() {
                hits.push((t, origin + dir * t));
            }
        }
    }
    if hits.is_empty() {
        return Err(AffordanceError::NoHit);
    }
    let t_min = hits.iter().map(|h| h.0).fold(f64::INFINITY, f64::min);
    let near: Vec<Vec3> = hits
        .iter()
        .filter(|h| h.0 <= t_min + params.delta)
        .map(|h| h.1)
        .collect();
    let location = near.iter().fold(Vec3::ZERO, |s, p| s + *p) / near.len() as f64;
    let mut ts: Vec<f64> = hits.iter().map(|h| h.0).collect();
    ts.sort_unstable_by(|a, b| a.total_cmp(b));
    let m = ts.len();
    let median = if m % 2 == 1 {
        ts[m / 2]
    } else {
        0.5 * (ts[m / 2 - 1] + ts[m / 2])
    };
    Ok(HandleEstimate {
        location,
        hit_count: near.len(),
        protrusion: median - t_min,
        params: *params,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Skill {
    Open,
    Close,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Quat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub waypoints: Vec<Pose>,
}

/// Handle-frame trajectory sweeping the joint from its lower to its upper
/// limit (open) or back (close), with `n` uniformly spaced waypoints.
///
/// `handle` is the handle position at the lower limit. Revolute joints move
/// the handle on a circular arc about (origin, axis) and rotate its frame with
/// the link; prismatic joints translate it along the axis with fixed frame.
pub fn articulation_trajectory(
    handle: Vec3,
    joint: &JointSpec,
    skill: Skill,
    n: usize,
) -> Result<Trajectory, AffordanceError> {
    if n < 2 {
        return Err(AffordanceError::TooFewWaypoints);
    }
    check_joint(joint)?;
    let axis = joint.axis;
    let [lo, hi] = joint.limits;
    let range = hi - lo;
    let step = |k: usize| range * k as f64 / (n - 1) as f64;
    let mut waypoints: Vec<Pose> = match joint.joint_type {
        JointType::Revolute => {
            let r = handle - joint.origin;
            let radial = r - axis * r.dot(axis);
            if radial.norm() < 1e-9 {
                return Err(AffordanceError::DegenerateRadius);
            }
            (0..n)
                .map(|k| {
                    let q = Quat::from_axis_angle(axis, step(k));
                    Pose {
                        position: joint.origin + q.rotate(r),
                        orientation: q,
                    }
                })
                .collect()
        }
        JointType::Prismatic => (0..n)
            .map(|k| Pose {
                position: handle + axis * step(k),
                orientation: Quat::IDENTITY,
            })
            .collect(),
    };
    if skill == Skill::Close {
        waypoints.reverse();
    }
    Ok(Trajectory { waypoints })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::f64::consts::FRAC_PI_2;

    fn quad(a: Vec3, b: Vec3, c: Vec3, d: Vec3) -> [[Vec3; 3]; 2] {
        [[a, b, c], [a, c, d]]
    }

    /// Axis-aligned box as 12 triangles.
    fn cuboid(min: Vec3, max: Vec3) -> Vec<[Vec3; 3]> {
        let p = |x: bool, y: bool, z: bool| {
            Vec3::new(
                if x { max.x } else { min.x },
                if y { max.y } else { min.y },
                if z { max.z } else { min.z },
            )
        };
        let faces = [
            quad(p(false, false, false), p(true, false, false), p(true, true, false), p(false, true, false)),
            quad(p(false, false, true), p(true, false, true), p(true, true, true), p(false, true, true)),
            quad(p(false, false, false), p(true, false, false), p(true, false, true), p(false, false, true)),
            quad(p(false, true, false), p(true, true, false), p(true, true, true), p(false, true, true)),
            quad(p(false, false, false), p(false, true, false), p(false, true, true), p(false, false, true)),
            quad(p(true, false, false), p(true, true, false), p(true, true, true), p(true, false, true)),
        ];
        faces.iter().flat_map(|f| f.iter().copied()).collect()
    }

    fn joint(t: JointType, axis: Vec3, limits: [f64; 2]) -> JointSpec {
        JointSpec {
            joint_type: t,
            axis,
            origin: Vec3::ZERO,
            limits,
        }
    }

    fn door_with_knob() -> (LinkMesh, Vec3) {
        // door 0.6 (x) by 1.0 (z), 2 cm thick, front +y; 2 cm knob at (0.25, 0.5)
        let mut tris = cuboid(Vec3::new(0.0, -0.02, 0.0), Vec3::new(0.6, 0.0, 1.0));
        tris.extend(cuboid(Vec3::new(0.24, 0.0, 0.49), Vec3::new(0.26, 0.02, 0.51)));
        let mesh = LinkMesh {
            link: "door".into(),
            triangles: tris,
            joint: joint(JointType::Revolute, Vec3::Z, [0.0, FRAC_PI_2]),
        };
        (mesh, Vec3::new(0.25, 0.02, 0.5))
    }

    #[test]
    fn knob_is_found_within_a_cell() {
        let (mesh, truth) = door_with_knob();
        let p = HandleParams::default();
        let h = detect_handle(&mesh, Vec3::Y, &p).unwrap();
        let cell = 1.0 / p.grid as f64;
        assert!((h.location - truth).norm() <= cell, "{:?}", h.location);
        assert!((h.protrusion - 0.02).abs() < 1e-9);
    }

    #[test]
    fn flat_plate_gives_centroid() {
        let tris = quad(
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 1.0),
            Vec3::new(0.0, 0.0, 1.0),
        )
        .to_vec();
        let mesh = LinkMesh {
            link: "plate".into(),
            triangles: tris,
            joint: joint(JointType::Prismatic, Vec3::Y, [0.0, 0.3]),
        };
        let h = detect_handle(&mesh, Vec3::Y, &HandleParams { grid: 16, delta: 0.005 }).unwrap();
        assert_eq!(h.hit_count, 256);
        assert!((h.location - Vec3::new(0.5, 0.0, 0.5)).norm() < 1e-9);
    }

    #[test]
    fn edge_on_mesh_misses() {
        let tri = [Vec3::ZERO, Vec3::X, Vec3::Y];
        let mesh = LinkMesh {
            link: "sliver".into(),
            triangles: vec![tri],
            joint: joint(JointType::Prismatic, Vec3::Y, [0.0, 0.3]),
        };
        assert_eq!(detect_handle(&mesh, Vec3::X, &HandleParams::default()), Err(AffordanceError::NoHit));
        let empty = LinkMesh { triangles: vec![], ..mesh };
        assert_eq!(detect_handle(&empty, Vec3::X, &HandleParams::default()), Err(AffordanceError::EmptyMesh));
    }

    #[test]
    fn prismatic_four_waypoints() {
        let t = articulation_trajectory(Vec3::new(0.1, 0.2, 0.3), &joint(JointType::Prismatic, Vec3::X, [0.0, 0.3]), Skill::Open, 4)
            .unwrap();
        assert_eq!(t.waypoints.len(), 4);
        for (k, w) in t.waypoints.iter().enumerate() {
            assert!((w.position - Vec3::new(0.1 + 0.1 * k as f64, 0.2, 0.3)).norm() < 1e-12);
            assert_eq!(w.orientation, Quat::IDENTITY);
        }
    }

    #[test]
    fn revolute_arc_radius_and_spacing() {
        let j = joint(JointType::Revolute, Vec3::Z, [0.0, FRAC_PI_2]);
        let t = articulation_trajectory(Vec3::new(0.4, 0.0, 0.5), &j, Skill::Open, 32).unwrap();
        let chord = |a: &Pose, b: &Pose| (a.position - b.position).norm();
        let c0 = chord(&t.waypoints[0], &t.waypoints[1]);
        for (k, w) in t.waypoints.iter().enumerate() {
            let r = Vec3::new(w.position.x, w.position.y, 0.0).norm();
            assert!((r - 0.4).abs() <= 1e-9);
            assert!((w.position.z - 0.5).abs() <= 1e-12);
            if k > 0 {
                assert!((chord(&t.waypoints[k - 1], w) - c0).abs() < 1e-12);
            }
        }
        let last = t.waypoints.last().unwrap().position;
        assert!((last - Vec3::new(0.0, 0.4, 0.5)).norm() < 1e-12);
    }

    #[test]
    fn close_reverses_open() {
        let j = joint(JointType::Revolute, Vec3::Z, [-0.3, 1.2]);
        let h = Vec3::new(0.3, 0.1, 0.2);
        let mut open = articulation_trajectory(h, &j, Skill::Open, 9).unwrap();
        let close = articulation_trajectory(h, &j, Skill::Close, 9).unwrap();
        open.waypoints.reverse();
        assert_eq!(open, close);
    }

    #[test]
    fn handle_on_axis_is_degenerate() {
        let j = joint(JointType::Revolute, Vec3::Z, [0.0, 1.0]);
        assert_eq!(
            articulation_trajectory(Vec3::new(0.0, 0.0, 0.7), &j, Skill::Open, 4),
            Err(AffordanceError::DegenerateRadius)
        );
        assert_eq!(
            articulation_trajectory(Vec3::X, &j, Skill::Open, 1),
            Err(AffordanceError::TooFewWaypoints)
        );
    }
}
