//! Principal component analysis via a cyclic Jacobi eigensolver on the
//! covariance matrix. Self-contained so the reduction step needs no linear
//! algebra dependency; tests cross-check against an independent
//! eigendecomposition.

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

/// Fitted projection: `project` maps a raw vector into the reduced space.
#[derive(Debug, Clone)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// `target_dim x input_dim`; row i is the i-th principal axis.
    pub components: Matrix,
    /// Top eigenvalues of the covariance matrix, descending.
    pub explained_variance: Vec<f64>,
    /// Eigenvalue share of total variance, descending.
    pub explained_variance_ratio: Vec<f64>,
}

impl Pca {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.components.n_rows()
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                left: x.len(),
                right: self.input_dim(),
            });
        }
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        Ok(self
            .components
            .iter_rows()
            .map(|c| dot(&centered, c))
            .collect())
    }

    pub fn project_rows(&self, data: &Matrix) -> Result<Matrix> {
        let mut rows = Vec::with_capacity(data.n_rows());
        for r in data.iter_rows() {
            rows.push(self.project(r)?);
        }
        Ok(Matrix::from_rows(&rows))
    }
}

const MAX_SWEEPS: usize = 64;

/// Cyclic Jacobi eigendecomposition of a symmetric `d x d` matrix (flat
/// row-major). Returns eigenvalues and column-major eigenvectors, unsorted.
fn jacobi_eigen(mut a: Vec<f64>, d: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    let frobenius: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if frobenius == 0.0 {
        return Ok(((0..d).map(|i| a[i * d + i]).collect(), v));
    }
    let tol = 1e-14 * frobenius;
    for sweep in 0..MAX_SWEEPS {
        let off: f64 = {
            let mut s = 0.0;
            for p in 0..d {
                for q in (p + 1)..d {
                    s += a[p * d + q] * a[p * d + q];
                }
            }
            (2.0 * s).sqrt()
        };
        if off <= tol {
            return Ok(((0..d).map(|i| a[i * d + i]).collect(), v));
        }
        if sweep + 1 == MAX_SWEEPS {
            return Err(Error::Divergence(sweep));
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq.abs() <= tol / (d * d) as f64 {
                    continue;
                }
                let theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let (app, aqq) = (a[p * d + p], a[q * d + q]);
                a[p * d + p] = app - t * apq;
                a[q * d + q] = aqq + t * apq;
                a[p * d + q] = 0.0;
                a[q * d + p] = 0.0;
                for i in 0..d {
                    if i == p || i == q {
                        continue;
                    }
                    let (aip, aiq) = (a[i * d + p], a[i * d + q]);
                    a[i * d + p] = c * aip - s * aiq;
                    a[p * d + i] = a[i * d + p];
                    a[i * d + q] = s * aip + c * aiq;
                    a[q * d + i] = a[i * d + q];
                }
                for i in 0..d {
                    let (vip, viq) = (v[i * d + p], v[i * d + q]);
                    v[i * d + p] = c * vip - s * viq;
                    v[i * d + q] = s * vip + c * viq;
                }
            }
        }
    }
    unreachable!("sweep loop always returns");
}

/// Fit a PCA projection onto `target_dim` components.
///
/// Requires at least 2 rows, finite data, and
/// `1 <= target_dim <= min(dim, n_rows)`. Data with zero total variance is
/// rejected. Eigenvector signs are fixed so the entry of largest magnitude is
/// positive, making the projection deterministic.
pub fn fit_pca(data: &Matrix, target_dim: usize) -> Result<Pca> {
    let (n, d) = (data.n_rows(), data.n_cols());
    if n < 2 {
        return Err(Error::DegenerateInput);
    }
    if !data.is_finite() {
        return Err(Error::Data("non-finite document vector".into()));
    }
    if target_dim == 0 || target_dim > d.min(n) {
        return Err(Error::TargetDimTooLarge {
            target: target_dim,
            dim: d,
            docs: n,
        });
    }
    let mut mean = vec![0.0; d];
    for row in data.iter_rows() {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = vec![0.0; d * d];
    for row in data.iter_rows() {
        let centered: Vec<f64> = row.iter().zip(&mean).map(|(x, m)| x - m).collect();
        for i in 0..d {
            for j in i..d {
                cov[i * d + j] += centered[i] * centered[j];
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..d {
        for j in i..d {
            cov[i * d + j] /= denom;
            cov[j * d + i] = cov[i * d + j];
        }
    }
    let (eigenvalues, eigenvectors) = jacobi_eigen(cov, d)?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eigenvalues[j].partial_cmp(&eigenvalues[i]).unwrap().then(i.cmp(&j)));
    // clamp tiny negative eigenvalues produced by rounding
    let clamped: Vec<f64> = order.iter().map(|&i| eigenvalues[i].max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateInput);
    }
    let mut components = Vec::with_capacity(target_dim);
    for &col in order.iter().take(target_dim) {
        let mut axis: Vec<f64> = (0..d).map(|i| eigenvectors[i * d + col]).collect();
        let lead = axis
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap().then(b.0.cmp(&a.0)))
            .map(|(_, &x)| x)
            .unwrap_or(0.0);
        if lead < 0.0 {
            for x in &mut axis {
                *x = -*x;
            }
        }
        components.push(axis);
    }
    let explained_variance: Vec<f64> = clamped[..target_dim].to_vec();
    let explained_variance_ratio: Vec<f64> =
        explained_variance.iter().map(|&l| l / total).collect();
    Ok(Pca {
        mean,
        components: Matrix::from_rows(&components),
        explained_variance,
        explained_variance_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn jacobi_known_2x2() {
        // [[2,1],[1,2]] has eigenvalues 3 and 1
        let (vals, vecs) = jacobi_eigen(vec![2.0, 1.0, 1.0, 2.0], 2).unwrap();
        let mut sorted = vals.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!((sorted[0] - 3.0).abs() < 1e-12);
        assert!((sorted[1] - 1.0).abs() < 1e-12);
        // eigenvector columns stay orthonormal
        for j in 0..2 {
            let n: f64 = (0..2).map(|i| vecs[i * 2 + j] * vecs[i * 2 + j]).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_one_line_explains_everything() {
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|t| {
                let t = t as f64;
                vec![t, 2.0 * t, 3.0 * t]
            })
            .collect();
        let pca = fit_pca(&Matrix::from_rows(&rows), 1).unwrap();
        assert!((pca.explained_variance_ratio[0] - 1.0).abs() < 1e-9);
        // axis is (1,2,3)/sqrt(14), sign-fixed positive on the largest entry
        let c = pca.components.row(0);
        let scale = 14.0f64.sqrt();
        assert!((c[0] - 1.0 / scale).abs() < 1e-9);
        assert!((c[2] - 3.0 / scale).abs() < 1e-9);
    }

    #[test]
    fn full_rank_projection_captures_total_variance() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let pca = fit_pca(&Matrix::from_rows(&rows), 3).unwrap();
        let total: f64 = pca.explained_variance_ratio.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        let ratios = &pca.explained_variance_ratio;
        assert!(ratios[0] >= ratios[1] && ratios[1] >= ratios[2]);
    }

    #[test]
    fn matches_nalgebra_eigendecomposition() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let (n, d) = (50, 10);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let data = Matrix::from_rows(&rows);
        let pca = fit_pca(&data, d).unwrap();

        let mut mean = vec![0.0; d];
        for r in &rows {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x / n as f64;
            }
        }
        let mut cov = nalgebra::DMatrix::<f64>::zeros(d, d);
        for r in &rows {
            let c: Vec<f64> = r.iter().zip(&mean).map(|(x, m)| x - m).collect();
            for i in 0..d {
                for j in 0..d {
                    cov[(i, j)] += c[i] * c[j] / (n as f64 - 1.0);
                }
            }
        }
        let mut reference: Vec<f64> = nalgebra::SymmetricEigen::new(cov)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        reference.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (ours, theirs) in pca.explained_variance.iter().zip(&reference) {
            assert!((ours - theirs).abs() < 1e-8, "{ours} vs {theirs}");
        }
    }

    #[test]
    fn project_centers_then_rotates() {
        let rows = vec![vec![1.0, 1.0], vec![3.0, 3.0], vec![5.0, 5.0]];
        let pca = fit_pca(&Matrix::from_rows(&rows), 1).unwrap();
        // mean is (3,3); the mean projects to the origin
        let at_mean = pca.project(&[3.0, 3.0]).unwrap();
        assert!(at_mean[0].abs() < 1e-12);
        let p1 = pca.project(&[1.0, 1.0]).unwrap();
        let p5 = pca.project(&[5.0, 5.0]).unwrap();
        assert!((p1[0] + p5[0]).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_and_oversized() {
        let same = Matrix::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]]);
        assert!(matches!(fit_pca(&same, 1), Err(Error::DegenerateInput)));
        let one = Matrix::from_rows(&[vec![1.0, 2.0]]);
        assert!(matches!(fit_pca(&one, 1), Err(Error::DegenerateInput)));
        let ok = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert!(matches!(
            fit_pca(&ok, 3),
            Err(Error::TargetDimTooLarge { target: 3, dim: 2, docs: 2 })
        ));
        let wrong_dim = fit_pca(&ok, 1).unwrap().project(&[1.0, 2.0, 3.0]);
        assert!(matches!(wrong_dim, Err(Error::DimensionMismatch { .. })));
    }
}
