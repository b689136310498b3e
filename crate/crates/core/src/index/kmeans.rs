//! k-means coarse quantizer with k-means++ seeding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Centroids, IndexError};
use crate::embedder::EmbeddingVector;

pub const DEFAULT_MAX_ITERS: usize = 25;

fn sq_dist(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).fold(0.0f32, |acc, (x, y)| {
        let t = x - y;
        acc + t * t
    })
}

fn nearest(point: &[f32], centroids: &[Vec<f32>]) -> (usize, f32) {
    let mut best = (0, f32::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let dist = sq_dist(point, centroid);
        if dist < best.1 {
            best = (c, dist);
        }
    }
    best
}

/// Clusters `vectors` into `nlist` centroids under squared Euclidean
/// distance.
///
/// Deterministic for a given seed: seeding draws from a ChaCha stream, the
/// assignment step is parallel but per-point, and the update step reduces
/// sequentially in point order. Stops after `max_iters` rounds or once no
/// assignment changes. A centroid that loses all its points is moved onto the
/// point currently farthest from its own centroid.
pub fn train_centroids(
    vectors: &[EmbeddingVector],
    nlist: usize,
    seed: u64,
    max_iters: usize,
) -> Result<Centroids, IndexError> {
    if nlist == 0 || vectors.len() < nlist {
        return Err(IndexError::TooFewVectors {
            have: vectors.len(),
            need: nlist.max(1),
        });
    }
    let d = vectors[0].dim();
    if let Some(bad) = vectors.iter().find(|v| v.dim() != d) {
        return Err(IndexError::DimensionMismatch {
            expected: d,
            got: bad.dim(),
        });
    }
    let points: Vec<&[f32]> = vectors.iter().map(EmbeddingVector::as_slice).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_seed(&points, nlist, &mut rng);

    let mut assignment: Vec<usize> = vec![usize::MAX; points.len()];
    for iter in 0..max_iters.max(1) {
        let assigned: Vec<(usize, f32)> = points.par_iter().map(|p| nearest(p, &centroids)).collect();
        let changed = assigned
            .iter()
            .zip(&assignment)
            .filter(|((c, _), old)| c != *old)
            .count();
        for (slot, (c, _)) in assignment.iter_mut().zip(&assigned) {
            *slot = *c;
        }
        if iter > 0 && changed == 0 {
            break;
        }

        let mut sums = vec![vec![0.0f64; d]; nlist];
        let mut counts = vec![0usize; nlist];
        for (p, &c) in points.iter().zip(&assignment) {
            counts[c] += 1;
            for (s, &x) in sums[c].iter_mut().zip(p.iter()) {
                *s += f64::from(x);
            }
        }
        // Empty clusters take the worst-served points, farthest first.
        let mut by_distance: Vec<usize> = (0..points.len()).collect();
        let empty: Vec<usize> = (0..nlist).filter(|&c| counts[c] == 0).collect();
        if !empty.is_empty() {
            by_distance.sort_by(|&a, &b| assigned[b].1.total_cmp(&assigned[a].1).then(a.cmp(&b)));
        }
        let mut donors = by_distance.into_iter();
        for c in 0..nlist {
            if counts[c] == 0 {
                if let Some(p) = donors.next() {
                    centroids[c] = points[p].to_vec();
                }
            } else {
                let n = counts[c] as f64;
                centroids[c] = sums[c].iter().map(|s| (s / n) as f32).collect();
            }
        }
    }
    Centroids::new(d, centroids)
}

fn plus_plus_seed(points: &[&[f32]], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f32>> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..points.len())].to_vec());
    let mut dist: Vec<f64> = points
        .iter()
        .map(|p| f64::from(sq_dist(p, &centroids[0])))
        .collect();
    while centroids.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total <= 0.0 {
            // Every point coincides with a chosen centroid.
            rng.gen_range(0..points.len())
        } else {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, &w) in dist.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        };
        let c = points[pick].to_vec();
        for (dst, p) in dist.iter_mut().zip(points) {
            *dst = dst.min(f64::from(sq_dist(p, &c)));
        }
        centroids.push(c);
    }
    centroids
}
