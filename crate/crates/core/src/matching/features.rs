//! Patch-feature nearest-neighbor scoring.
//!
//! The search is exact and brute force; grids are small (tens to a few
//! thousand vectors) and results must not depend on an index structure.

use alloc::vec;
use alloc::vec::Vec;

use super::MatchError;
use crate::bundle::FeatureGrid;

pub(crate) fn sq_dist(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = f64::from(*x) - f64::from(*y);
            d * d
        })
        .sum()
}

fn nearest_sq(v: &[f32], grid: &FeatureGrid) -> f64 {
    grid.vectors()
        .map(|w| sq_dist(v, w))
        .fold(f64::INFINITY, f64::min)
}

fn check_dims(query: &FeatureGrid, other: &FeatureGrid) -> Result<(), MatchError> {
    if query.dim != other.dim || query.is_empty() || other.is_empty() {
        return Err(MatchError::DimensionMismatch {
            expected: query.dim,
            found: other.dim,
        });
    }
    Ok(())
}

/// Number of largest distances excluded by `trim_fraction` out of `n`.
///
/// Uses the ceiling, with a small slack so `0.1 * 30` trims exactly 3, and
/// always keeps at least one distance.
pub fn trim_count(n: usize, trim_fraction: f64) -> usize {
    if n == 0 {
        return 0;
    }
    let raw = libm::ceil(trim_fraction * n as f64 - 1e-9).max(0.0) as usize;
    raw.min(n - 1)
}

/// Trimmed mean nearest-neighbor L2 distance from each query vector into `matched`.
pub fn embedding_distance(
    query: &FeatureGrid,
    matched: &FeatureGrid,
    trim_fraction: f64,
) -> Result<f64, MatchError> {
    check_dims(query, matched)?;
    let mut d: Vec<f64> = query
        .vectors()
        .map(|v| libm::sqrt(nearest_sq(v, matched)))
        .collect();
    d.sort_unstable_by(|a, b| a.total_cmp(b));
    let keep = d.len() - trim_count(d.len(), trim_fraction);
    Ok(d[..keep].iter().sum::<f64>() / keep as f64)
}

/// Iterative nearest-neighbor voting over candidate grids.
///
/// Each round, every query vector votes for the candidate owning its nearest
/// vector among the remaining candidates; the candidate with the most votes
/// is ranked next and removed. Vote ties go to the smaller trimmed embedding
/// distance, then to the lower index. Returns up to `k` candidate indices.
pub fn vote_top_k(
    query: &FeatureGrid,
    candidates: &[&FeatureGrid],
    k: usize,
    trim_fraction: f64,
) -> Result<Vec<usize>, MatchError> {
    if candidates.is_empty() {
        return Err(MatchError::EmptyCandidates);
    }
    for c in candidates {
        check_dims(query, c)?;
    }
    // nearest[i][j]: squared distance from query vector i to candidate j.
    let nearest: Vec<Vec<f64>> = query
        .vectors()
        .map(|v| candidates.iter().map(|c| nearest_sq(v, c)).collect())
        .collect();
    let mut distance_cache: Vec<Option<f64>> = vec![None; candidates.len()];
    let mut remaining: Vec<usize> = (0..candidates.len()).collect();
    let mut ranked = Vec::new();
    while ranked.len() < k && !remaining.is_empty() {
        let mut votes = vec![0usize; candidates.len()];
        for row in &nearest {
            let mut best = remaining[0];
            for &j in &remaining[1..] {
                if row[j] < row[best] {
                    best = j;
                }
            }
            votes[best] += 1;
        }
        let top = remaining.iter().map(|j| votes[*j]).max().unwrap_or(0);
        let tied: Vec<usize> = remaining.iter().copied().filter(|j| votes[*j] == top).collect();
        let winner = if tied.len() == 1 {
            tied[0]
        } else {
            let mut best = tied[0];
            let mut best_d = f64::INFINITY;
            for j in tied {
                let d = match distance_cache[j] {
                    Some(d) => d,
                    None => {
                        let d = embedding_distance(query, candidates[j], trim_fraction)?;
                        distance_cache[j] = Some(d);
                        d
                    }
                };
                if d < best_d {
                    best = j;
                    best_d = d;
                }
            }
            best
        };
        ranked.push(winner);
        remaining.retain(|j| *j != winner);
    }
    Ok(ranked)
}
