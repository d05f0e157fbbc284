use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{id_order, postprocess, PostConfig, PostReport, SceneError};
use crate::bundle::{AssetCatalog, SceneDescription};
use crate::matching::CousinMatch;
use crate::math::{Quat, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomizationSpec {
    pub seed: u64,
    /// Uniform x and y offset bound (m).
    pub xy_jitter: f64,
    /// Uniform yaw offset bound (rad).
    pub yaw_jitter: f64,
    /// Per-axis scale multipliers are drawn from `[1 - r, 1 + r]`.
    pub scale_range: f64,
    /// Replace each asset by another entry of its ranked cousin list.
    pub instance_swap: bool,
}

impl Default for RandomizationSpec {
    fn default() -> Self {
        RandomizationSpec {
            seed: 0,
            xy_jitter: 0.0,
            yaw_jitter: 0.0,
            scale_range: 0.0,
            instance_swap: false,
        }
    }
}

impl RandomizationSpec {
    pub fn check(&self) -> Result<(), SceneError> {
        let ranges = [self.xy_jitter, self.yaw_jitter, self.scale_range];
        if ranges.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(SceneError::InvalidConfig("randomization ranges must be finite and non-negative".into()));
        }
        if self.scale_range >= 1.0 {
            return Err(SceneError::InvalidConfig("scale_range must be below 1".into()));
        }
        Ok(())
    }
}

/// Uniform draw in `[-a, a]`. Always consumes one value so the stream layout
/// does not depend on which ranges are zero.
fn symmetric(rng: &mut ChaCha8Rng, a: f64) -> f64 {
    let u: f64 = rng.gen();
    if a > 0.0 {
        a * (2.0 * u - 1.0)
    } else {
        0.0
    }
}

/// Per-axis scale multiplier in `[1 - r, 1 + r]`.
pub fn sample_scale_multiplier(rng: &mut ChaCha8Rng, r: f64) -> Vec3 {
    Vec3::new(
        1.0 + symmetric(rng, r),
        1.0 + symmetric(rng, r),
        1.0 + symmetric(rng, r),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct Randomized {
    pub scene: SceneDescription,
    /// Object id to (old asset, new asset) for swapped instances.
    pub swaps: Vec<(String, String, String)>,
    pub post: PostReport,
}

/// Kinematic and instance randomization followed by post-processing.
///
/// Objects are visited in id order and each consumes a fixed number of draws:
/// x, y, yaw, three scale factors and a swap pick. Wall-attached objects only
/// move along their wall. A swap keeps the pose and the box size, choosing
/// uniformly among the object's other ranked cousins.
pub fn randomize_scene(
    scene: &SceneDescription,
    spec: &RandomizationSpec,
    matches: &[CousinMatch],
    catalog: &impl AssetCatalog,
    post: &PostConfig,
) -> Result<Randomized, SceneError> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = scene.clone();
    out.provenance.seed = spec.seed;
    let mut swaps = Vec::new();
    for i in id_order(&scene.objects) {
        let dx = symmetric(&mut rng, spec.xy_jitter);
        let dy = symmetric(&mut rng, spec.xy_jitter);
        let dyaw = symmetric(&mut rng, spec.yaw_jitter);
        let m = sample_scale_multiplier(&mut rng, spec.scale_range);
        let pick: f64 = rng.gen();

        let o = &mut out.objects[i];
        let mut d = Vec3::new(dx, dy, 0.0);
        if let Some(wall) = o.mount_type.wall().and_then(|k| scene.wall_planes.get(k)) {
            if let Some(n) = Vec3::new(wall.normal.x, wall.normal.y, 0.0).try_normalize() {
                d -= n * d.dot(n);
            }
        }
        if d != Vec3::ZERO {
            o.position += d;
        }
        if dyaw != 0.0 {
            o.orientation = (Quat::from_yaw(dyaw) * o.orientation).normalize();
        }
        o.scale = o.scale.mul_elem(m);

        if spec.instance_swap {
            let others: Vec<&str> = matches
                .iter()
                .find(|mm| mm.object_id == o.source_object_id)
                .map(|mm| {
                    mm.cousins
                        .iter()
                        .map(|c| c.asset_id.as_str())
                        .filter(|a| *a != o.asset_id)
                        .collect()
                })
                .unwrap_or_default();
            if !others.is_empty() {
                let k = ((pick * others.len() as f64) as usize).min(others.len() - 1);
                let new_id = others[k];
                let unknown = |a: &str| SceneError::UnknownAsset { asset: a.into() };
                let old_ext = catalog.canonical_extents(&o.asset_id).ok_or_else(|| unknown(&o.asset_id))?;
                let new_ext = catalog.canonical_extents(new_id).ok_or_else(|| unknown(new_id))?;
                o.scale = o.scale.mul_elem(old_ext).div_elem(new_ext);
                swaps.push((o.source_object_id.clone(), o.asset_id.clone(), String::from(new_id)));
                o.asset_id = new_id.into();
            }
        }
    }
    let report = postprocess(&mut out.objects, &out.floor_plane, &out.wall_planes, catalog, post)?;
    Ok(Randomized {
        scene: out,
        swaps,
        post: report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_sampler_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut sum = 0.0;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for _ in 0..1000 {
            let m = sample_scale_multiplier(&mut rng, 0.75);
            for v in [m.x, m.y, m.z] {
                lo = lo.min(v);
                hi = hi.max(v);
                sum += v;
            }
        }
        let mean = sum / 3000.0;
        assert!(lo >= 0.25 && hi <= 1.75, "{lo} {hi}");
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn spec_checks() {
        assert!(RandomizationSpec::default().check().is_ok());
        let bad = RandomizationSpec {
            scale_range: 1.0,
            ..Default::default()
        };
        assert!(bad.check().is_err());
        let neg = RandomizationSpec {
            xy_jitter: -0.1,
            ..Default::default()
        };
        assert!(neg.check().is_err());
    }
}
