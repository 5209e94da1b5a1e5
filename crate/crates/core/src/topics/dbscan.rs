//! Density clustering. Brute-force neighborhoods, exact semantics:
//!
//! - neighborhood membership uses `dist <= eps` and includes the point
//!   itself, so a core point satisfies `|N_eps(p)| >= min_pts` with self
//!   counted;
//! - clusters are the connected components of the core points;
//! - a border point joins the cluster of its nearest core neighbor (ties to
//!   the lower point index), which makes the partition invariant to input
//!   order;
//! - everything else is noise, labeled -1.
//!
//! Cluster ids are renumbered by descending size, ties broken by the
//! smallest member index.

use crate::error::{Error, Result};
use crate::matrix::{euclidean, Matrix};

pub fn dbscan(data: &Matrix, eps: f64, min_pts: usize) -> Result<Vec<i32>> {
    if data.n_rows() == 0 {
        return Err(Error::Data("dbscan on empty vector set".into()));
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::Config("dbscan eps must be positive".into()));
    }
    if min_pts == 0 {
        return Err(Error::Config("dbscan min_pts must be >= 1".into()));
    }
    let n = data.n_rows();
    let mut neighbors: Vec<Vec<u32>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if euclidean(data.row(i), data.row(j)) <= eps {
                neighbors[i].push(j as u32);
            }
        }
    }
    let core: Vec<bool> = neighbors.iter().map(|ns| ns.len() >= min_pts).collect();
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        if !core[i] {
            continue;
        }
        for &j in &neighbors[i] {
            if core[j as usize] {
                uf.union(i, j as usize);
            }
        }
    }
    let mut labels = vec![-1i32; n];
    let mut cluster_of_root: Vec<Option<usize>> = vec![None; n];
    let mut next = 0usize;
    for i in 0..n {
        if !core[i] {
            continue;
        }
        let root = uf.find(i);
        let c = *cluster_of_root[root].get_or_insert_with(|| {
            let c = next;
            next += 1;
            c
        });
        labels[i] = c as i32;
    }
    for i in 0..n {
        if core[i] {
            continue;
        }
        let mut best: Option<(f64, u32)> = None;
        for &j in &neighbors[i] {
            if !core[j as usize] {
                continue;
            }
            let d = euclidean(data.row(i), data.row(j as usize));
            let better = match best {
                None => true,
                Some((bd, bj)) => d < bd || (d == bd && j < bj),
            };
            if better {
                best = Some((d, j));
            }
        }
        if let Some((_, j)) = best {
            labels[i] = labels[j as usize];
        }
    }
    Ok(renumber_by_size(&labels))
}

/// Relabel clusters 0.. by descending size; ties go to the cluster whose
/// smallest member index is lower. Noise (-1) is untouched.
pub fn renumber_by_size(labels: &[i32]) -> Vec<i32> {
    let n_clusters = labels.iter().copied().max().map_or(0, |m| (m + 1).max(0)) as usize;
    let mut size = vec![0usize; n_clusters];
    let mut first = vec![usize::MAX; n_clusters];
    for (i, &l) in labels.iter().enumerate() {
        if l >= 0 {
            let l = l as usize;
            size[l] += 1;
            first[l] = first[l].min(i);
        }
    }
    let mut order: Vec<usize> = (0..n_clusters).filter(|&c| size[c] > 0).collect();
    order.sort_by(|&a, &b| size[b].cmp(&size[a]).then(first[a].cmp(&first[b])));
    let mut remap = vec![-1i32; n_clusters];
    for (new, &old) in order.iter().enumerate() {
        remap[old] = new as i32;
    }
    labels
        .iter()
        .map(|&l| if l >= 0 { remap[l as usize] } else { -1 })
        .collect()
}

/// Distance from each point to its `k`-th nearest other point (`k` clamped
/// to `n-1`). Used for the k-distance eps heuristic.
pub fn kth_nearest_distances(data: &Matrix, k: usize) -> Vec<f64> {
    let n = data.n_rows();
    if n <= 1 {
        return vec![0.0; n];
    }
    let k = k.clamp(1, n - 1);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut dists: Vec<f64> = (0..n)
            .filter(|&j| j != i)
            .map(|j| euclidean(data.row(i), data.row(j)))
            .collect();
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.push(dists[k - 1]);
    }
    out
}

/// Median of a non-empty slice; even lengths average the two middle values.
pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, i: usize) -> usize {
        let mut root = i;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = i;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        // lower root wins so components are index-stable
        if ra < rb {
            self.parent[rb] = ra;
        } else if rb < ra {
            self.parent[ra] = rb;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn blob(cx: f64, cy: f64, n: usize, spread: f64) -> Vec<Vec<f64>> {
        // deterministic ring layout, no rng needed
        (0..n)
            .map(|i| {
                let a = i as f64 * std::f64::consts::TAU / n as f64;
                vec![cx + spread * a.cos(), cy + spread * a.sin()]
            })
            .collect()
    }

    /// Canonical partition: clusters as sorted member sets plus noise set.
    fn partition(labels: &[i32]) -> (BTreeSet<Vec<usize>>, BTreeSet<usize>) {
        let mut clusters: std::collections::HashMap<i32, Vec<usize>> = Default::default();
        let mut noise = BTreeSet::new();
        for (i, &l) in labels.iter().enumerate() {
            if l < 0 {
                noise.insert(i);
            } else {
                clusters.entry(l).or_default().push(i);
            }
        }
        (clusters.into_values().collect(), noise)
    }

    #[test]
    fn two_blobs_and_outlier() {
        let mut rows = blob(0.0, 0.0, 20, 0.5);
        rows.extend(blob(10.0, 10.0, 20, 0.5));
        rows.push(vec![100.0, 100.0]);
        let labels = dbscan(&Matrix::from_rows(&rows), 1.0, 3).unwrap();
        let (clusters, noise) = partition(&labels);
        assert_eq!(clusters.len(), 2);
        assert_eq!(noise, BTreeSet::from([40]));
        assert!(clusters.iter().all(|c| c.len() == 20));
        // renumbering: ids 0 and 1 only
        assert_eq!(labels.iter().copied().max(), Some(1));
    }

    #[test]
    fn huge_eps_single_cluster() {
        let mut rows = blob(0.0, 0.0, 10, 1.0);
        rows.extend(blob(5.0, 5.0, 10, 1.0));
        let labels = dbscan(&Matrix::from_rows(&rows), 1e6, 3).unwrap();
        assert!(labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn min_pts_above_n_all_noise() {
        let rows = blob(0.0, 0.0, 5, 1.0);
        let labels = dbscan(&Matrix::from_rows(&rows), 10.0, 50).unwrap();
        assert!(labels.iter().all(|&l| l == -1));
    }

    #[test]
    fn partition_invariant_to_input_order() {
        let mut rows = blob(0.0, 0.0, 15, 0.8);
        rows.extend(blob(6.0, 0.0, 12, 0.8));
        rows.push(vec![3.0, 30.0]);
        let labels = dbscan(&Matrix::from_rows(&rows), 1.2, 4).unwrap();

        // reverse the input and map the partition back to original indices
        let reversed: Vec<Vec<f64>> = rows.iter().rev().cloned().collect();
        let rev_labels = dbscan(&Matrix::from_rows(&reversed), 1.2, 4).unwrap();
        let n = rows.len();
        let mut mapped = vec![0i32; n];
        for (rev_i, &l) in rev_labels.iter().enumerate() {
            mapped[n - 1 - rev_i] = l;
        }
        let (c1, n1) = partition(&labels);
        let (c2, n2) = partition(&mapped);
        assert_eq!(c1, c2);
        assert_eq!(n1, n2);
    }

    #[test]
    fn sizes_non_increasing_after_renumber() {
        let mut rows = blob(0.0, 0.0, 6, 0.5);
        rows.extend(blob(10.0, 0.0, 14, 0.5));
        rows.extend(blob(0.0, 10.0, 9, 0.5));
        let labels = dbscan(&Matrix::from_rows(&rows), 1.0, 3).unwrap();
        let mut sizes = std::collections::HashMap::new();
        for &l in &labels {
            if l >= 0 {
                *sizes.entry(l).or_insert(0usize) += 1;
            }
        }
        assert_eq!(sizes.len(), 3);
        assert_eq!(sizes[&0], 14);
        assert_eq!(sizes[&1], 9);
        assert_eq!(sizes[&2], 6);
    }

    #[test]
    fn invalid_params_rejected() {
        let m = Matrix::from_rows(&[vec![0.0, 0.0]]);
        assert!(matches!(dbscan(&m, 0.0, 3), Err(Error::Config(_))));
        assert!(matches!(dbscan(&m, 1.0, 0), Err(Error::Config(_))));
        let empty = Matrix::zeros(0, 2);
        assert!(matches!(dbscan(&empty, 1.0, 3), Err(Error::Data(_))));
    }

    #[test]
    fn kth_distances_on_a_line() {
        // points 0, 1, 3
        let m = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![3.0]]);
        assert_eq!(kth_nearest_distances(&m, 1), vec![1.0, 1.0, 2.0]);
        assert_eq!(kth_nearest_distances(&m, 2), vec![3.0, 2.0, 3.0]);
        // k beyond n-1 clamps
        assert_eq!(kth_nearest_distances(&m, 10), vec![3.0, 2.0, 3.0]);
    }

    #[test]
    fn median_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[7.0]), 7.0);
    }
}
