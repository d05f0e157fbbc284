use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::collide::overlapping_pairs;
use super::{bodies, floor_penetration, SceneError};
use crate::bundle::{AssetCatalog, SceneDescription, SupportRef};

/// Tolerance of the post-processing invariants (m).
pub const POST_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PostViolation {
    /// Object sinks into its support (an object or the floor).
    VerticalPenetration { object: String, support: String, depth: f64 },
    /// Collision boxes overlap in x-y without being reported as residual.
    XyOverlap { a: String, b: String, depth: f64 },
    /// Following supports from this object never reaches floor or a wall.
    SupportCycle { object: String },
    DanglingSupport { object: String },
}

/// Checks the post-compile invariants of a scene.
///
/// `flagged` lists the id pairs the collision resolver reported as residual.
pub fn check_post_invariants(
    scene: &SceneDescription,
    catalog: &impl AssetCatalog,
    flagged: &[[String; 2]],
) -> Result<Vec<PostViolation>, SceneError> {
    let objs = &scene.objects;
    let bodies = bodies(objs, catalog)?;
    let index: BTreeMap<&str, usize> = objs
        .iter()
        .enumerate()
        .map(|(i, o)| (o.source_object_id.as_str(), i))
        .collect();
    let mut out = Vec::new();
    for (i, o) in objs.iter().enumerate() {
        match &o.support {
            SupportRef::Floor => {
                let depth = floor_penetration(&scene.floor_plane, &bodies[i].bbox);
                if depth > POST_TOL {
                    out.push(PostViolation::VerticalPenetration {
                        object: o.source_object_id.clone(),
                        support: "floor".into(),
                        depth,
                    });
                }
            }
            SupportRef::Object(id) => match index.get(id.as_str()) {
                Some(&j) => {
                    let depth = bodies[j].top() - bodies[i].bottom();
                    if depth > POST_TOL {
                        out.push(PostViolation::VerticalPenetration {
                            object: o.source_object_id.clone(),
                            support: id.clone(),
                            depth,
                        });
                    }
                }
                None => out.push(PostViolation::DanglingSupport {
                    object: o.source_object_id.clone(),
                }),
            },
            SupportRef::Wall(k) => {
                if *k >= scene.wall_planes.len() {
                    out.push(PostViolation::DanglingSupport {
                        object: o.source_object_id.clone(),
                    });
                }
            }
        }
        let mut cur = i;
        let mut terminated = false;
        for _ in 0..=objs.len() {
            match &objs[cur].support {
                SupportRef::Object(id) => match index.get(id.as_str()) {
                    Some(&j) => cur = j,
                    None => {
                        terminated = true;
                        break;
                    }
                },
                _ => {
                    terminated = true;
                    break;
                }
            }
        }
        if !terminated {
            out.push(PostViolation::SupportCycle {
                object: o.source_object_id.clone(),
            });
        }
    }
    let is_flagged = |a: &str, b: &str| {
        flagged
            .iter()
            .any(|[x, y]| (x == a && y == b) || (x == b && y == a))
    };
    for (a, b, depth) in overlapping_pairs(objs, catalog, POST_TOL)? {
        let (ia, ib) = (&objs[a].source_object_id, &objs[b].source_object_id);
        if !is_flagged(ia, ib) {
            out.push(PostViolation::XyOverlap {
                a: ia.clone(),
                b: ib.clone(),
                depth,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{PlacedObject, Provenance};
    use crate::geometry::Plane;
    use crate::math::Vec3;
    use crate::scenegen::fixtures::*;
    use crate::scenegen::{postprocess, PostConfig};
    use alloc::vec;

    fn scene(objects: Vec<PlacedObject>) -> SceneDescription {
        SceneDescription {
            objects,
            floor_plane: floor(),
            wall_planes: vec![Plane::new(Vec3::new(0.0, 2.0, 0.0), Vec3::new(0.0, -1.0, 0.0))],
            provenance: Provenance::default(),
        }
    }

    #[test]
    fn detects_penetration_overlap_and_cycles() {
        let e = Vec3::splat(1.0);
        let db = box_db(&[e]);
        let mut objs = vec![
            placed("a", e, Vec3::new(0.0, 0.0, 0.5)),
            placed("b", e, Vec3::new(0.0, 0.0, 1.4)),
            placed("c", e, Vec3::new(0.5, 0.0, 0.5)),
        ];
        objs[1].support = SupportRef::Object("a".into());
        let v = check_post_invariants(&scene(objs.clone()), &db, &[]).unwrap();
        assert!(v.iter().any(|x| matches!(x, PostViolation::VerticalPenetration { object, .. } if object == "b")));
        assert!(v.iter().any(|x| matches!(x, PostViolation::XyOverlap { a, b, .. } if a == "a" && b == "c")));
        let flagged = [[String::from("a"), String::from("c")]];
        let v = check_post_invariants(&scene(objs.clone()), &db, &flagged).unwrap();
        assert!(!v.iter().any(|x| matches!(x, PostViolation::XyOverlap { a, b, .. } if a == "a" && b == "c")));

        objs[0].support = SupportRef::Object("b".into());
        let v = check_post_invariants(&scene(objs), &db, &[]).unwrap();
        assert!(v.iter().any(|x| matches!(x, PostViolation::SupportCycle { .. })));
    }

    #[test]
    fn postprocess_clears_a_messy_scene() {
        let table = Vec3::new(1.2, 0.8, 0.75);
        let cup = Vec3::new(0.1, 0.1, 0.12);
        let chair = Vec3::new(0.5, 0.5, 0.9);
        let db = box_db(&[table, cup, chair]);
        let mut objs = vec![
            placed("table", table, Vec3::new(0.0, 0.0, 0.36)),
            placed("cup", cup, Vec3::new(0.2, 0.1, 0.78)),
            placed("chair", chair, Vec3::new(0.7, 0.0, 0.44)),
        ];
        let s = scene(objs.clone());
        let r = postprocess(&mut objs, &s.floor_plane, &s.wall_planes, &db, &PostConfig::default()).unwrap();
        let out = scene(objs);
        assert!(r.xy.converged);
        assert_eq!(out.objects[1].support, SupportRef::Object("table".into()));
        assert_eq!(check_post_invariants(&out, &db, &r.xy.residual).unwrap(), vec![]);

        // a second pass is a no-op
        let mut again = out.objects.clone();
        postprocess(&mut again, &out.floor_plane, &out.wall_planes, &db, &PostConfig::default()).unwrap();
        assert_eq!(again, out.objects);
    }
}
