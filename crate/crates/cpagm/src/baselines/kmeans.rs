//! Lloyd's algorithm with k-means++ initialization and multiple restarts,
//! used by the feature-based and local-model clustering baselines.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::par;

pub(crate) struct KMeansOutcome {
    pub labels: Vec<usize>,
    pub inertia: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..points.len())].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            rng.random_range(0..points.len())
        } else {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        };
        centroids.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, centroids.last().unwrap()));
        }
    }
    centroids
}

fn lloyd(points: &[Vec<f64>], k: usize, max_iter: usize, rng: &mut ChaCha8Rng) -> KMeansOutcome {
    let dim = points[0].len();
    let mut centroids = plus_plus_init(points, k, rng);
    let mut labels = vec![0usize; points.len()];
    let mut previous_inertia = f64::INFINITY;
    let mut inertia = f64::INFINITY;
    for _ in 0..max_iter {
        inertia = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (best, d) = centroids
                .iter()
                .enumerate()
                .map(|(c, ctr)| (c, sq_dist(p, ctr)))
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                .unwrap();
            labels[i] = best;
            inertia += d;
        }
        // Standard invariant: with clusters that lose all members keeping
        // their previous centroid, the objective never increases.
        debug_assert!(inertia <= previous_inertia + 1e-9 * previous_inertia.abs().max(1.0));
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut moved = false;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let new: Vec<f64> = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            if new != centroids[c] {
                moved = true;
                centroids[c] = new;
            }
        }
        if inertia >= previous_inertia || !moved {
            break;
        }
        previous_inertia = inertia;
    }
    KMeansOutcome { labels, inertia }
}

/// Clusters `points` into `k` groups, keeping the best of `restarts`
/// seeded k-means++ runs by inertia.
pub(crate) fn kmeans(
    points: &[Vec<f64>],
    k: usize,
    restarts: usize,
    max_iter: usize,
    seed: u64,
) -> Result<KMeansOutcome> {
    if points.is_empty() || k == 0 || k > points.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot split {} points into {k} clusters",
            points.len()
        )));
    }
    let mut distinct: Vec<&Vec<f64>> = Vec::new();
    for p in points {
        if !distinct.contains(&p) {
            distinct.push(p);
        }
    }
    if distinct.len() < k {
        return Err(Error::DuplicateCollapse(format!(
            "only {} distinct points for {k} clusters",
            distinct.len()
        )));
    }
    let outcomes = par::map_indexed(restarts.max(1), |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(par::derive_seed(seed, r as u64));
        lloyd(points, k, max_iter, &mut rng)
    });
    Ok(outcomes
        .into_iter()
        .min_by(|a, b| a.inertia.total_cmp(&b.inertia))
        .unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_obvious_blobs() {
        let points: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                let base = if i < 6 { 0.0 } else { 10.0 };
                vec![base + (i % 3) as f64 * 0.01, base - (i % 2) as f64 * 0.01]
            })
            .collect();
        let out = kmeans(&points, 2, 10, 100, 7).unwrap();
        assert_eq!(crate::metrics::ari(&out.labels, &[vec![0; 6], vec![1; 6]].concat()).unwrap(), 1.0);
    }

    #[test]
    fn duplicate_points_collapse_is_detected() {
        let points = vec![vec![1.0, 2.0]; 5];
        assert!(matches!(
            kmeans(&points, 2, 5, 50, 1),
            Err(Error::DuplicateCollapse(_))
        ));
    }

    #[test]
    fn deterministic_under_seed() {
        let points: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.61).cos()])
            .collect();
        let a = kmeans(&points, 3, 10, 100, 5).unwrap();
        let b = kmeans(&points, 3, 10, 100, 5).unwrap();
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.inertia, b.inertia);
    }
}
