//! Lloyd's K-means with k-means++ seeding.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

pub const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    /// Within-cluster sum of squares after each centroid update.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid; ties go to the lowest index.
pub fn nearest(centroids: &[Vec<f64>], x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, mu) in centroids.iter().enumerate() {
        let d = squared_distance(mu, x);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

pub fn count_distinct(points: &[Vec<f64>]) -> usize {
    let mut keys: Vec<Vec<u64>> = points
        .iter()
        .map(|p| p.iter().map(|v| (v + 0.0).to_bits()).collect())
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

fn inertia(points: &[Vec<f64>], centroids: &[Vec<f64>], labels: &[usize]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| squared_distance(p, &centroids[l]))
        .sum()
}

/// Cluster `points` into `k` groups. Converges when assignments stop
/// changing or after [`MAX_ITERATIONS`] updates.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeans> {
    if k == 0 {
        return Err(Error::precondition("k must be at least 1"));
    }
    let distinct = count_distinct(points);
    if distinct < k {
        return Err(Error::precondition(format!(
            "{distinct} distinct points cannot form {k} clusters"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let n = points.len();

    let mut centroids = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| squared_distance(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let mut target = rng.random_range(0.0..total);
        let mut pick = n - 1;
        for (i, w) in d2.iter().enumerate() {
            if *w > 0.0 && target < *w {
                pick = i;
                break;
            }
            target -= w;
        }
        // Rounding can walk past the last positive weight.
        if d2[pick] == 0.0 {
            pick = (0..n).rev().find(|&i| d2[i] > 0.0).expect("distinct points remain");
        }
        let c = points[pick].clone();
        for (w, p) in d2.iter_mut().zip(points) {
            *w = w.min(squared_distance(p, &c));
        }
        centroids.push(c);
    }

    let dim = points[0].len();
    let mut labels: Vec<usize> = points.iter().map(|p| nearest(&centroids, p)).collect();
    let mut history = Vec::new();
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        // An emptied cluster takes over the point farthest from its centroid.
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .max_by(|&i, &j| {
                        let di = squared_distance(&points[i], &centroids[labels[i]]);
                        let dj = squared_distance(&points[j], &centroids[labels[j]]);
                        di.total_cmp(&dj).then(j.cmp(&i))
                    })
                    .expect("nonempty");
                counts[labels[far]] -= 1;
                labels[far] = c;
                counts[c] = 1;
                centroids[c] = points[far].clone();
            }
        }
        history.push(inertia(points, &centroids, &labels));
        let next: Vec<usize> = points.iter().map(|p| nearest(&centroids, p)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    Ok(KMeans {
        centroids,
        labels,
        inertia_history: history,
        iterations,
    })
}
