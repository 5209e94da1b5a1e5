//! Lloyd k-means with seeded k-means++ initialization.
//!
//! Assignment ties break toward the lower centroid id. After convergence the
//! assignments are recomputed once from the final centroids, so re-assigning
//! the training data against the returned centroids reproduces the returned
//! labels exactly. Clusters are renumbered by descending size (ties by the
//! pre-renumber centroid id) and the centroid rows reordered to match.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid by Euclidean distance, lower id on ties.
pub fn nearest_centroid(x: &[f64], centroids: &Matrix) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, row) in centroids.iter_rows().enumerate() {
        let d = squared_distance(x, row);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

fn kmeanspp_init(data: &Matrix, k: usize, rng: &mut ChaCha12Rng) -> Matrix {
    let n = data.n_rows();
    let mut chosen: Vec<usize> = vec![rng.random_range(0..n)];
    let mut dist2: Vec<f64> = (0..n)
        .map(|i| squared_distance(data.row(i), data.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = dist2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, &d) in dist2.iter().enumerate() {
                acc += d;
                if target < acc {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            // all remaining mass zero: duplicate points, pick uniformly
            rng.random_range(0..n)
        };
        chosen.push(pick);
        for i in 0..n {
            let d = squared_distance(data.row(i), data.row(pick));
            if d < dist2[i] {
                dist2[i] = d;
            }
        }
    }
    Matrix::from_rows(&chosen.iter().map(|&i| data.row(i).to_vec()).collect::<Vec<_>>())
}

/// Returns `(labels, centroids)`; labels use cluster ids `0..k'` where
/// `k' <= k` (empty clusters are dropped by the renumbering).
pub fn kmeans(data: &Matrix, k: usize, max_iters: usize, seed: u64) -> Result<(Vec<i32>, Matrix)> {
    let n = data.n_rows();
    if n == 0 {
        return Err(Error::Data("kmeans on empty vector set".into()));
    }
    if k == 0 {
        return Err(Error::Config("kmeans k must be >= 1".into()));
    }
    if k > n {
        return Err(Error::TooManyClusters { k, docs: n });
    }
    let d = data.n_cols();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut centroids = kmeanspp_init(data, k, &mut rng);
    let mut labels: Vec<usize> = (0..n).map(|i| nearest_centroid(data.row(i), &centroids)).collect();
    for _ in 0..max_iters {
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(data.row(i)) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                continue; // empty cluster keeps its previous centroid
            }
            for (dst, s) in centroids.row_mut(c).iter_mut().zip(&sums[c]) {
                *dst = s / counts[c] as f64;
            }
        }
        let next: Vec<usize> = (0..n).map(|i| nearest_centroid(data.row(i), &centroids)).collect();
        let converged = next == labels;
        labels = next;
        if converged {
            break;
        }
    }
    // renumber by size, drop empty clusters, reorder centroid rows
    let mut size = vec![0usize; k];
    for &l in &labels {
        size[l] += 1;
    }
    let mut order: Vec<usize> = (0..k).filter(|&c| size[c] > 0).collect();
    order.sort_by(|&a, &b| size[b].cmp(&size[a]).then(a.cmp(&b)));
    let mut remap = vec![0usize; k];
    let mut final_centroids = Vec::with_capacity(order.len());
    for (new, &old) in order.iter().enumerate() {
        remap[old] = new;
        final_centroids.push(centroids.row(old).to_vec());
    }
    let labels: Vec<i32> = labels.iter().map(|&l| remap[l] as i32).collect();
    Ok((labels, Matrix::from_rows(&final_centroids)))
}
