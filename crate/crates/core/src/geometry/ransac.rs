use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GeometryError, Plane};
use crate::math::{Mat3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacParams {
    pub inlier_tol: f64,
    pub iters: usize,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        RansacParams {
            inlier_tol: 0.01,
            iters: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneFit {
    pub plane: Plane,
    /// Indices of points within `inlier_tol` of `plane`, ascending.
    pub inliers: Vec<usize>,
}

fn covariance(points: &[Vec3], idx: impl Iterator<Item = usize> + Clone) -> (Vec3, Mat3, usize) {
    let mut n = 0usize;
    let mut sum = Vec3::ZERO;
    for i in idx.clone() {
        sum += points[i];
        n += 1;
    }
    let c = sum / n.max(1) as f64;
    let mut m = [[0.0; 3]; 3];
    for i in idx {
        let d = points[i] - c;
        let d = [d.x, d.y, d.z];
        for (r, row) in m.iter_mut().enumerate() {
            for (k, v) in row.iter_mut().enumerate() {
                *v += d[r] * d[k];
            }
        }
    }
    (c, Mat3 { m }, n)
}

/// Total-least-squares plane through the selected points.
pub fn fit_plane_tls(points: &[Vec3], idx: &[usize]) -> Result<Plane, GeometryError> {
    if idx.len() < 3 {
        return Err(GeometryError::DegenerateInput("plane fit needs at least three points"));
    }
    let (c, cov, _) = covariance(points, idx.iter().copied());
    let (vals, vecs) = cov.symmetric_eigen();
    if !(vals[1] > 1e-12 * vals[2].max(1e-300)) {
        return Err(GeometryError::DegenerateInput("points are collinear"));
    }
    Ok(Plane::new(c, vecs[0]))
}

fn inliers_of(points: &[Vec3], plane: &Plane, tol: f64) -> Vec<usize> {
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| libm::fabs(plane.signed_distance(**p)) <= tol)
        .map(|(i, _)| i)
        .collect()
}

fn orient_toward_origin(plane: Plane) -> Plane {
    if plane.signed_distance(Vec3::ZERO) < 0.0 {
        plane.flipped()
    } else {
        plane
    }
}

/// Deterministic RANSAC plane fit with a least-squares polish.
///
/// The normal faces the side of the coordinate origin (the camera, for
/// camera-frame clouds). Every returned inlier lies within `inlier_tol` of
/// the returned plane.
pub fn fit_plane_ransac(points: &[Vec3], params: &RansacParams) -> Result<PlaneFit, GeometryError> {
    if points.len() < 3 {
        return Err(GeometryError::DegenerateInput("plane fit needs at least three points"));
    }
    let (_, cov, _) = covariance(points, 0..points.len());
    let (vals, _) = cov.symmetric_eigen();
    if !(vals[1] > 1e-12 * vals[2].max(1e-300)) {
        return Err(GeometryError::DegenerateInput("points are collinear"));
    }

    let tol = params.inlier_tol.max(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = points.len();
    let mut best: Option<(usize, Plane)> = None;
    for _ in 0..params.iters.max(1) {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        let c = rng.gen_range(0..n);
        if a == b || b == c || a == c {
            continue;
        }
        let (pa, pb, pc) = (points[a], points[b], points[c]);
        let Some(normal) = (pb - pa).cross(pc - pa).try_normalize() else {
            continue;
        };
        let plane = Plane { point: pa, normal };
        let count = points
            .iter()
            .filter(|p| libm::fabs(plane.signed_distance(**p)) <= tol)
            .count();
        if best.as_ref().is_none_or(|(bc, _)| count > *bc) {
            best = Some((count, plane));
        }
    }
    let (_, coarse) = match best {
        Some(b) => b,
        // Every sample was degenerate; fall back to the global fit.
        None => {
            let all: Vec<usize> = (0..n).collect();
            (n, fit_plane_tls(points, &all)?)
        }
    };

    let coarse_inliers = inliers_of(points, &coarse, tol);
    let mut result = PlaneFit {
        plane: coarse,
        inliers: coarse_inliers,
    };
    if let Ok(refined) = fit_plane_tls(points, &result.inliers) {
        let refined_inliers = inliers_of(points, &refined, tol);
        if refined_inliers.len() >= result.inliers.len() {
            result = PlaneFit {
                plane: refined,
                inliers: refined_inliers,
            };
        }
    }
    result.plane = orient_toward_origin(result.plane);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn exact_plane() {
        let mut pts = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                pts.push(Vec3::new(i as f64 * 0.1, j as f64 * 0.1, 1.0));
            }
        }
        let fit = fit_plane_ransac(&pts, &RansacParams::default()).unwrap();
        assert!((fit.plane.normal - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-9);
        assert_eq!(fit.inliers.len(), 100);
    }

    #[test]
    fn degenerate_inputs() {
        let two = vec![Vec3::ZERO, Vec3::X];
        assert!(matches!(
            fit_plane_ransac(&two, &RansacParams::default()),
            Err(GeometryError::DegenerateInput(_))
        ));
        let line: Vec<Vec3> = (0..10).map(|i| Vec3::X * i as f64).collect();
        assert!(fit_plane_ransac(&line, &RansacParams::default()).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let pts: Vec<Vec3> = (0..200)
            .map(|i| {
                let t = i as f64;
                Vec3::new(libm::sin(t), libm::cos(t * 1.3), 0.01 * libm::sin(t * 7.0) + 2.0)
            })
            .collect();
        let p = RansacParams {
            inlier_tol: 0.005,
            iters: 300,
            seed: 42,
        };
        assert_eq!(fit_plane_ransac(&pts, &p).unwrap(), fit_plane_ransac(&pts, &p).unwrap());
    }
}
