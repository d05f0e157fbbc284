use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{id_order, Body, SceneError};
use crate::bundle::{AssetCatalog, PlacedObject, SupportRef};
use crate::geometry::min_translation;
use crate::math::Vec3;

/// Extra clearance added to every xy separation (m).
pub const XY_MARGIN: f64 = 1e-3;

/// Vertical overlap below this does not count as a collision (m).
const Z_CONTACT: f64 = 1e-6;

/// Penetration depths at or below this are treated as touching (m).
const XY_CONTACT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct XyReport {
    /// Passes over all pairs, including the final clean pass when converged.
    pub passes: usize,
    pub moves: usize,
    pub converged: bool,
    /// Pairs (by id) still overlapping when resolution stopped.
    pub residual: Vec<[String; 2]>,
}

struct Relations {
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    pinned: Vec<bool>,
}

impl Relations {
    fn of(objects: &[PlacedObject]) -> Relations {
        let index: BTreeMap<&str, usize> = objects
            .iter()
            .enumerate()
            .map(|(i, o)| (o.source_object_id.as_str(), i))
            .collect();
        let parent: Vec<Option<usize>> = objects
            .iter()
            .map(|o| match &o.support {
                SupportRef::Object(id) => index.get(id.as_str()).copied(),
                _ => None,
            })
            .collect();
        let mut children = alloc::vec![Vec::new(); objects.len()];
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(i);
            }
        }
        Relations {
            parent,
            children,
            pinned: objects.iter().map(|o| o.mount_type.wall().is_some()).collect(),
        }
    }

    fn is_ancestor(&self, a: usize, mut b: usize) -> bool {
        for _ in 0..self.parent.len() {
            match self.parent[b] {
                Some(p) if p == a => return true,
                Some(p) => b = p,
                None => return false,
            }
        }
        false
    }

    /// `i` and every unpinned object resting on it, transitively.
    fn carried(&self, i: usize) -> Vec<usize> {
        let mut out = alloc::vec![i];
        let mut k = 0;
        while k < out.len() {
            for &c in &self.children[out[k]] {
                if !self.pinned[c] && !out.contains(&c) {
                    out.push(c);
                }
            }
            k += 1;
        }
        out
    }
}

/// Penetration of two collision boxes as (push direction for `b`, depth),
/// when they overlap both vertically and in the x-y plane.
fn penetration(a: &Body, b: &Body) -> Option<([f64; 2], f64)> {
    let (za, zb) = (a.collision.aabb(), b.collision.aabb());
    if za.max.z.min(zb.max.z) - za.min.z.max(zb.min.z) <= Z_CONTACT {
        return None;
    }
    min_translation(&a.collision_footprint(), &b.collision_footprint()).filter(|(_, d)| *d > XY_CONTACT)
}

/// Pairs (in id order) whose collision boxes still interpenetrate by more than `tol`.
pub fn overlapping_pairs(
    objects: &[PlacedObject],
    catalog: &impl AssetCatalog,
    tol: f64,
) -> Result<Vec<(usize, usize, f64)>, SceneError> {
    let rel = Relations::of(objects);
    let bodies = super::bodies(objects, catalog)?;
    let order = id_order(objects);
    let mut out = Vec::new();
    for (x, &a) in order.iter().enumerate() {
        for &b in &order[x + 1..] {
            if rel.is_ancestor(a, b) || rel.is_ancestor(b, a) {
                continue;
            }
            if let Some((_, d)) = penetration(&bodies[a], &bodies[b]) {
                if d > tol {
                    out.push((a, b, d));
                }
            }
        }
    }
    Ok(out)
}

/// Pairwise x-y collision resolution.
///
/// Pairs are visited in id order. An interpenetrating pair is separated along
/// the minimal translation of its projected collision boxes by the depth plus
/// [`XY_MARGIN`]; the object with the smaller footprint moves (the later id
/// on ties), carrying whatever rests on it. Wall-attached objects never move;
/// a pair of them is left as is. Repeats until a pass moves nothing or
/// `max_passes` passes have run.
pub fn resolve_xy(
    objects: &mut [PlacedObject],
    catalog: &impl AssetCatalog,
    max_passes: usize,
) -> Result<XyReport, SceneError> {
    let rel = Relations::of(objects);
    let order = id_order(objects);
    let mut bodies = super::bodies(objects, catalog)?;
    let mut report = XyReport::default();
    for pass in 1..=max_passes {
        report.passes = pass;
        let mut moved = false;
        for (x, &a) in order.iter().enumerate() {
            for &b in &order[x + 1..] {
                if rel.is_ancestor(a, b) || rel.is_ancestor(b, a) {
                    continue;
                }
                let Some((axis, depth)) = penetration(&bodies[a], &bodies[b]) else {
                    continue;
                };
                let mover = match (rel.pinned[a], rel.pinned[b]) {
                    (true, true) => continue,
                    (true, false) => b,
                    (false, true) => a,
                    (false, false) => {
                        let area_a = bodies[a].collision_footprint().area();
                        let area_b = bodies[b].collision_footprint().area();
                        if area_a < area_b {
                            a
                        } else {
                            b
                        }
                    }
                };
                let sign = if mover == b { 1.0 } else { -1.0 };
                let step = sign * (depth + XY_MARGIN);
                let delta = Vec3::new(axis[0] * step, axis[1] * step, 0.0);
                for k in rel.carried(mover) {
                    objects[k].position += delta;
                    bodies[k] = Body::of(&objects[k], catalog)?;
                }
                report.moves += 1;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    let residual = overlapping_pairs(objects, catalog, XY_CONTACT)?;
    report.converged = residual.is_empty();
    report.residual = residual
        .into_iter()
        .map(|(a, b, _)| [objects[a].source_object_id.clone(), objects[b].source_object_id.clone()])
        .collect();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::MountType;
    use crate::scenegen::fixtures::*;
    use alloc::vec;

    #[test]
    fn disjoint_scene_unchanged() {
        let e = Vec3::splat(1.0);
        let db = box_db(&[e]);
        let mut objs = vec![placed("a", e, Vec3::new(0.0, 0.0, 0.5)), placed("b", e, Vec3::new(1.5, 0.0, 0.5))];
        let before = objs.clone();
        let r = resolve_xy(&mut objs, &db, 100).unwrap();
        assert_eq!(objs, before);
        assert!(r.converged);
        assert_eq!(r.passes, 1);
        assert_eq!(r.moves, 0);
    }

    #[test]
    fn two_cm_overlap_moves_later_id() {
        let e = Vec3::splat(1.0);
        let db = box_db(&[e]);
        let mut objs = vec![placed("a", e, Vec3::new(0.0, 0.0, 0.5)), placed("b", e, Vec3::new(0.98, 0.0, 0.5))];
        let r = resolve_xy(&mut objs, &db, 100).unwrap();
        assert!(r.converged);
        assert_eq!(objs[0].position, Vec3::new(0.0, 0.0, 0.5));
        assert!((objs[1].position.x - (0.98 + 0.021)).abs() < 1e-12);
        assert_eq!(objs[1].position.y, 0.0);
    }

    #[test]
    fn lighter_footprint_moves_with_its_load() {
        let big = Vec3::new(2.0, 2.0, 1.0);
        let small = Vec3::new(0.5, 0.5, 0.5);
        let cup = Vec3::splat(0.1);
        let db = box_db(&[big, small, cup]);
        let mut objs = vec![
            placed("a_small", small, Vec3::new(1.2, 0.0, 0.25)),
            placed("b_big", big, Vec3::new(0.0, 0.0, 0.5)),
            placed("c_cup", cup, Vec3::new(1.2, 0.0, 0.55)),
        ];
        objs[2].support = SupportRef::Object("a_small".into());
        resolve_xy(&mut objs, &db, 100).unwrap();
        assert_eq!(objs[1].position, Vec3::new(0.0, 0.0, 0.5));
        assert!((objs[0].position.x - 1.251).abs() < 1e-12);
        assert!((objs[2].position.x - 1.251).abs() < 1e-12);
    }

    #[test]
    fn stacked_pairs_are_not_collisions() {
        let e = Vec3::splat(1.0);
        let db = box_db(&[e]);
        let mut objs = vec![placed("a", e, Vec3::new(0.0, 0.0, 0.5)), placed("b", e, Vec3::new(0.0, 0.0, 1.5))];
        objs[1].support = SupportRef::Object("a".into());
        let before = objs.clone();
        resolve_xy(&mut objs, &db, 100).unwrap();
        assert_eq!(objs, before);
    }

    #[test]
    fn wedged_triple_hits_cap_and_reports_residual() {
        let wall_box = Vec3::new(1.0, 1.0, 1.0);
        let db = box_db(&[wall_box]);
        // a free box squeezed between two pinned boxes 1.5 m apart
        let mut objs = vec![
            placed("left", wall_box, Vec3::new(-0.75, 0.0, 0.5)),
            placed("mid", wall_box, Vec3::new(0.0, 0.0, 0.5)),
            placed("right", wall_box, Vec3::new(0.75, 0.0, 0.5)),
        ];
        objs[0].mount_type = MountType::Mixture { wall: 0 };
        objs[2].mount_type = MountType::Mixture { wall: 1 };
        let r = resolve_xy(&mut objs, &db, 100).unwrap();
        assert_eq!(r.passes, 100);
        assert!(!r.converged);
        assert!(!r.residual.is_empty());
        assert_eq!(objs[0].position.x, -0.75);
        assert_eq!(objs[2].position.x, 0.75);
    }
}
