//! Density-based outlier filtering of object clouds.
//!
//! Clusters are the connected components of core points; a border point joins
//! every cluster whose core reaches it. Both are set properties, so the
//! retained set does not depend on point order.

use alloc::vec;
use alloc::vec::Vec;

use super::PointCloud;
use crate::diag::{Flagged, WarningKind};
use crate::math::Vec3;

pub const DEFAULT_MIN_PTS: usize = 10;
const AUTO_EPS_NEIGHBOR: usize = 4;
const AUTO_EPS_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Eps {
    Meters(f64),
    /// Twice the median distance to the fourth nearest neighbor.
    Auto,
}

type CellKey = (i64, i64, i64);

/// Uniform grid over a point set; cells are located by binary search.
struct SpatialGrid<'a> {
    points: &'a [Vec3],
    cell: f64,
    // (key, point index), sorted by key
    entries: Vec<(CellKey, usize)>,
    lo: CellKey,
    hi: CellKey,
}

impl<'a> SpatialGrid<'a> {
    fn new(points: &'a [Vec3], cell: f64) -> Self {
        let cell = if cell.is_finite() && cell > 0.0 { cell } else { 1.0 };
        let mut entries: Vec<(CellKey, usize)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (key_of(*p, cell), i))
            .collect();
        entries.sort_unstable();
        let lo = entries.iter().fold((i64::MAX, i64::MAX, i64::MAX), |a, (k, _)| {
            (a.0.min(k.0), a.1.min(k.1), a.2.min(k.2))
        });
        let hi = entries.iter().fold((i64::MIN, i64::MIN, i64::MIN), |a, (k, _)| {
            (a.0.max(k.0), a.1.max(k.1), a.2.max(k.2))
        });
        SpatialGrid {
            points,
            cell,
            entries,
            lo,
            hi,
        }
    }

    fn cell_members(&self, key: CellKey) -> &[(CellKey, usize)] {
        let start = self.entries.partition_point(|(k, _)| *k < key);
        let end = start + self.entries[start..].partition_point(|(k, _)| *k == key);
        &self.entries[start..end]
    }

    /// Indices of all points within `r` of point `i` (including `i`).
    fn within(&self, i: usize, r: f64, out: &mut Vec<usize>) {
        out.clear();
        let p = self.points[i];
        let c = key_of(p, self.cell);
        let span = libm::ceil(r / self.cell) as i64;
        let r2 = r * r;
        for dx in -span..=span {
            for dy in -span..=span {
                for dz in -span..=span {
                    for (_, j) in self.cell_members((c.0 + dx, c.1 + dy, c.2 + dz)) {
                        if (self.points[*j] - p).norm_squared() <= r2 {
                            out.push(*j);
                        }
                    }
                }
            }
        }
    }

    /// Distance from point `i` to its `k`-th nearest other point.
    fn kth_neighbor_distance(&self, i: usize, k: usize) -> f64 {
        let p = self.points[i];
        let c = key_of(p, self.cell);
        let max_ring = (self.hi.0 - self.lo.0)
            .max(self.hi.1 - self.lo.1)
            .max(self.hi.2 - self.lo.2)
            + 1;
        let mut found: Vec<f64> = Vec::new();
        let mut ring = 0i64;
        loop {
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    for dz in -ring..=ring {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != ring {
                            continue;
                        }
                        for (_, j) in self.cell_members((c.0 + dx, c.1 + dy, c.2 + dz)) {
                            if *j != i {
                                found.push((self.points[*j] - p).norm_squared());
                            }
                        }
                    }
                }
            }
            // Everything within ring * cell of p has now been seen.
            if found.len() >= k {
                found.sort_unstable_by(|a, b| a.total_cmp(b));
                let d = libm::sqrt(found[k - 1]);
                if d <= ring as f64 * self.cell || ring >= max_ring {
                    return d;
                }
            } else if ring >= max_ring {
                return libm::sqrt(found.iter().copied().fold(0.0f64, f64::max));
            }
            ring += 1;
        }
    }
}

fn key_of(p: Vec3, cell: f64) -> CellKey {
    (
        libm::floor(p.x / cell) as i64,
        libm::floor(p.y / cell) as i64,
        libm::floor(p.z / cell) as i64,
    )
}

fn knn_cell_size(points: &[Vec3]) -> f64 {
    let (lo, hi) = points
        .iter()
        .fold((points[0], points[0]), |(lo, hi), p| (lo.min_elem(*p), hi.max_elem(*p)));
    let mut e = [hi.x - lo.x, hi.y - lo.y, hi.z - lo.z];
    e.sort_unstable_by(|a, b| b.total_cmp(a));
    let n = points.len() as f64;
    // Depth clouds are surfaces; the area estimate dominates for them.
    let surface = libm::sqrt(e[0] * e[1] / n);
    let volume = libm::cbrt(e[0] * e[1] * e[2] / n);
    let c = 2.0 * surface.max(volume);
    if c > 0.0 {
        c
    } else if e[0] > 0.0 {
        e[0] / n
    } else {
        1.0
    }
}

/// Scale-adaptive neighborhood radius: twice the median distance to the
/// fourth nearest neighbor (or the farthest one, for tiny clouds).
pub fn auto_eps(points: &[Vec3]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let k = AUTO_EPS_NEIGHBOR.min(points.len() - 1);
    let grid = SpatialGrid::new(points, knn_cell_size(points));
    let mut d: Vec<f64> = (0..points.len())
        .map(|i| grid.kth_neighbor_distance(i, k))
        .collect();
    d.sort_unstable_by(|a, b| a.total_cmp(b));
    AUTO_EPS_FACTOR * d[(d.len() - 1) / 2]
}

fn cmp_points(a: &Vec3, b: &Vec3) -> core::cmp::Ordering {
    a.z.total_cmp(&b.z)
        .then(a.y.total_cmp(&b.y))
        .then(a.x.total_cmp(&b.x))
}

struct Cluster {
    members: Vec<usize>,
    centroid_z: f64,
    min_point: Vec3,
}

/// Keep the largest DBSCAN cluster of `cloud`.
///
/// Size ties go to the cluster whose centroid is closest to the camera
/// (smallest z in the camera frame). When every point is noise the input is
/// returned unchanged with [`WarningKind::AllNoise`].
pub fn dbscan_filter(cloud: &PointCloud, eps: Eps, min_pts: usize) -> Flagged<PointCloud> {
    let pts = &cloud.points;
    if pts.is_empty() {
        return Flagged::warn(cloud.clone(), WarningKind::AllNoise);
    }
    let eps = match eps {
        Eps::Meters(e) => e.max(0.0),
        Eps::Auto => auto_eps(pts),
    };
    let min_pts = min_pts.max(1);
    let grid = SpatialGrid::new(pts, if eps > 0.0 { eps } else { 1.0 });

    let mut neighbors: Vec<Vec<usize>> = Vec::with_capacity(pts.len());
    let mut buf = Vec::new();
    for i in 0..pts.len() {
        grid.within(i, eps, &mut buf);
        neighbors.push(buf.clone());
    }
    let core: Vec<bool> = neighbors.iter().map(|n| n.len() >= min_pts).collect();

    // Connected components over core points.
    const UNSET: usize = usize::MAX;
    let mut comp = vec![UNSET; pts.len()];
    let mut n_comp = 0;
    let mut stack = Vec::new();
    for s in 0..pts.len() {
        if !core[s] || comp[s] != UNSET {
            continue;
        }
        comp[s] = n_comp;
        stack.push(s);
        while let Some(i) = stack.pop() {
            for &j in &neighbors[i] {
                if core[j] && comp[j] == UNSET {
                    comp[j] = n_comp;
                    stack.push(j);
                }
            }
        }
        n_comp += 1;
    }
    if n_comp == 0 {
        return Flagged::warn(cloud.clone(), WarningKind::AllNoise);
    }

    let mut member_sets: Vec<Vec<usize>> = vec![Vec::new(); n_comp];
    for i in 0..pts.len() {
        if core[i] {
            member_sets[comp[i]].push(i);
            continue;
        }
        let mut reached: Vec<usize> = neighbors[i]
            .iter()
            .filter(|j| core[**j])
            .map(|j| comp[*j])
            .collect();
        reached.sort_unstable();
        reached.dedup();
        for c in reached {
            member_sets[c].push(i);
        }
    }

    let clusters: Vec<Cluster> = member_sets
        .into_iter()
        .map(|members| {
            // Order-independent summation.
            let mut sorted: Vec<Vec3> = members.iter().map(|i| pts[*i]).collect();
            sorted.sort_unstable_by(cmp_points);
            let z_sum: f64 = sorted.iter().map(|p| p.z).sum();
            Cluster {
                centroid_z: z_sum / sorted.len() as f64,
                min_point: sorted[0],
                members,
            }
        })
        .collect();

    let best = clusters
        .iter()
        .min_by(|a, b| {
            b.members
                .len()
                .cmp(&a.members.len())
                .then(a.centroid_z.total_cmp(&b.centroid_z))
                .then(cmp_points(&a.min_point, &b.min_point))
        })
        .expect("at least one cluster");
    let mut keep = best.members.clone();
    keep.sort_unstable();
    Flagged::ok(PointCloud::new(keep.into_iter().map(|i| pts[i]).collect()))
}
