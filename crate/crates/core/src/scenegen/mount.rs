use alloc::format;

use super::{geometry_err, Body, SceneError, SUPPORT_OVERLAP};
use crate::bundle::{DelegateChoice, MountKind, MountType};
use crate::diag::{Warning, WarningKind};
use crate::geometry::{intersection_area, Plane};

/// Scene facts the geometric mount fallback looks at.
#[derive(Debug, Clone, Copy)]
pub struct MountContext<'a> {
    pub floor: &'a Plane,
    pub walls: &'a [Plane],
    /// Bodies of every placed object, including the one being classified.
    pub bodies: &'a [Body],
    /// Rear face within this distance of a wall counts as touching it (m).
    pub wall_proximity: f64,
    /// Minimum bottom height above the floor for a wall-mounted object (m).
    pub floor_clearance: f64,
}

/// Mount type of object `index`.
///
/// A delegate annotation wins when it names a usable wall (or on-support).
/// Otherwise: touching a wall with the bottom at least `floor_clearance` above
/// the floor and nothing beneath is wall-mounted; touching a wall otherwise is
/// a mixture; everything else is on-support.
pub fn classify_mount(
    index: usize,
    ctx: &MountContext<'_>,
    delegate: Option<&DelegateChoice>,
) -> Result<(MountType, Option<Warning>), SceneError> {
    let mut warning = None;
    if let Some(kind) = delegate.and_then(|d| d.mount_type) {
        let wall = delegate.and_then(|d| d.wall_index).filter(|k| *k < ctx.walls.len());
        match (kind, wall) {
            (MountKind::OnSupport, _) => return Ok((MountType::OnSupport, None)),
            (MountKind::WallMounted, Some(wall)) => return Ok((MountType::WallMounted { wall }, None)),
            (MountKind::Mixture, Some(wall)) => return Ok((MountType::Mixture { wall }, None)),
            _ => {
                warning = Some(Warning::new(
                    WarningKind::DelegateFallback,
                    "classify_mount",
                    format!("delegate mount {kind:?} names no valid wall; using geometry"),
                ));
            }
        }
    }
    Ok((geometric_mount(index, ctx)?, warning))
}

fn geometric_mount(index: usize, ctx: &MountContext<'_>) -> Result<MountType, SceneError> {
    let body = &ctx.bodies[index];
    let corners = body.bbox.corners();
    let mut nearest: Option<(usize, f64)> = None;
    for (k, wall) in ctx.walls.iter().enumerate() {
        let d = corners
            .iter()
            .map(|c| wall.signed_distance(*c))
            .fold(f64::INFINITY, f64::min);
        if d <= ctx.wall_proximity && nearest.is_none_or(|(_, bd)| libm::fabs(d) < libm::fabs(bd)) {
            nearest = Some((k, d));
        }
    }
    let Some((wall, _)) = nearest else {
        return Ok(MountType::OnSupport);
    };
    let clearance = corners
        .iter()
        .map(|c| ctx.floor.signed_distance(*c))
        .fold(f64::INFINITY, f64::min);
    let poly = body.footprint();
    let mut supported = false;
    for (j, other) in ctx.bodies.iter().enumerate() {
        if j == index || !(other.bbox.center.z < body.bbox.center.z) {
            continue;
        }
        let o = other.footprint();
        let inter = intersection_area(&poly, &o).map_err(geometry_err("classify_mount"))?;
        if inter > SUPPORT_OVERLAP * poly.area().min(o.area()) {
            supported = true;
            break;
        }
    }
    Ok(if clearance >= ctx.floor_clearance && !supported {
        MountType::WallMounted { wall }
    } else {
        MountType::Mixture { wall }
    })
}
