use crate::error::{config_err, shape_err, Error, Result};
use crate::tensor::{Tensor, TensorRef};

/// Per-(batch) channel mean vector and inverse square root of the channel
/// covariance matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct WhiteningStats {
    n: usize,
    c: usize,
    mean: Vec<f32>,
    inv_sqrt_cov: Vec<f32>,
}

impl WhiteningStats {
    pub fn new(n: usize, c: usize, mean: Vec<f32>, inv_sqrt_cov: Vec<f32>) -> Result<Self> {
        if mean.len() != n * c || inv_sqrt_cov.len() != n * c * c {
            return Err(shape_err!(
                "whitening stats need {n}x{c} means and {n}x{c}x{c} matrix entries"
            ));
        }
        Ok(WhiteningStats { n, c, mean, inv_sqrt_cov })
    }

    pub fn batch(&self) -> usize {
        self.n
    }

    pub fn channels(&self) -> usize {
        self.c
    }

    pub fn mean(&self) -> &[f32] {
        &self.mean
    }

    /// Row-major `c × c` matrix for batch item `n`.
    pub fn inv_sqrt_cov(&self, n: usize) -> &[f32] {
        let cc = self.c * self.c;
        &self.inv_sqrt_cov[n * cc..(n + 1) * cc]
    }

    pub fn inv_sqrt_cov_all(&self) -> &[f32] {
        &self.inv_sqrt_cov
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` where eigenvector `k` is column `k`
/// of the row-major `n × n` matrix.
pub fn symmetric_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale = m.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for _sweep in 0..64 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j].powi(2))
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                // smaller root of t² + 2θt - 1 = 0
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let values = (0..n).map(|i| m[i * n + i]).collect();
    (values, v)
}

/// `V diag(max(λ, eps)^-1/2) Vᵀ`, symmetrized.
pub(crate) fn inverse_sqrt_psd(cov: &[f64], n: usize, eps: f64) -> Vec<f64> {
    let (vals, vecs) = symmetric_eigen(cov, n);
    let inv: Vec<f64> = vals.iter().map(|&l| 1.0 / l.max(eps).sqrt()).collect();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let s: f64 = (0..n).map(|k| vecs[i * n + k] * inv[k] * vecs[j * n + k]).sum();
            out[i * n + j] = s;
            out[j * n + i] = s;
        }
    }
    out
}

/// Population channel covariance over spatial positions, per batch item.
pub(crate) fn covariance(x: TensorRef<'_>) -> (Vec<f64>, Vec<f64>) {
    let d = x.dims();
    let count = d.plane() as f64;
    let mut means = Vec::with_capacity(d.n * d.c);
    let mut covs = vec![0.0; d.n * d.c * d.c];
    for n in 0..d.n {
        let m: Vec<f64> = (0..d.c)
            .map(|c| x.plane(n, c).iter().map(|&v| v as f64).sum::<f64>() / count)
            .collect();
        let base = n * d.c * d.c;
        for i in 0..d.c {
            let pi = x.plane(n, i);
            for j in i..d.c {
                let pj = x.plane(n, j);
                let s: f64 = pi
                    .iter()
                    .zip(pj)
                    .map(|(&a, &b)| (a as f64 - m[i]) * (b as f64 - m[j]))
                    .sum();
                covs[base + i * d.c + j] = s / count;
                covs[base + j * d.c + i] = s / count;
            }
        }
        means.extend(m);
    }
    (means, covs)
}

pub fn whitening_stats(x: &Tensor, eps: f32) -> Result<WhiteningStats> {
    whitening_stats_view(x.view(), eps)
}

pub(crate) fn whitening_stats_view(x: TensorRef<'_>, eps: f32) -> Result<WhiteningStats> {
    let d = x.dims();
    if d.plane() < 2 {
        return Err(shape_err!("whitening needs at least 2 spatial samples, got {}x{}", d.h, d.w));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Argument(format!("eigenvalue floor must be positive, got {eps}")));
    }
    let (means, covs) = covariance(x);
    let cc = d.c * d.c;
    let mut inv = Vec::with_capacity(d.n * cc);
    for n in 0..d.n {
        let m = inverse_sqrt_psd(&covs[n * cc..(n + 1) * cc], d.c, eps as f64);
        inv.extend(m.into_iter().map(|v| v as f32));
    }
    Ok(WhiteningStats {
        n: d.n,
        c: d.c,
        mean: means.into_iter().map(|v| v as f32).collect(),
        inv_sqrt_cov: inv,
    })
}

pub fn instance_whiten(x: &Tensor, eps: f32) -> Result<Tensor> {
    let stats = whitening_stats(x, eps)?;
    thumbnail_instance_whiten(x, &stats)
}

/// `y = Σ(t)^-1/2 (x - μ(t))` at every spatial position of `x`.
pub fn thumbnail_instance_whiten(x: &Tensor, stats: &WhiteningStats) -> Result<Tensor> {
    let mut out = Tensor::with_capacity(x.len());
    whiten_into(x.view(), stats, &mut out)?;
    Ok(out)
}

pub(crate) fn whiten_into(x: TensorRef<'_>, stats: &WhiteningStats, out: &mut Tensor) -> Result<()> {
    let d = x.dims();
    if stats.c != d.c || (stats.n != 1 && stats.n != d.n) {
        return Err(config_err!(
            "whitening stats for {}x{} do not match a {}-item, {}-channel input",
            stats.n,
            stats.c,
            d.n,
            d.c
        ));
    }
    out.reset(d);
    let mut centred = vec![0f64; d.c];
    for n in 0..d.n {
        let row = if stats.n == 1 { 0 } else { n };
        let mat = stats.inv_sqrt_cov(row);
        let mean = &stats.mean[row * d.c..(row + 1) * d.c];
        for p in 0..d.plane() {
            for c in 0..d.c {
                centred[c] = (x.plane(n, c)[p] - mean[c]) as f64;
            }
            for i in 0..d.c {
                let s: f64 = mat[i * d.c..(i + 1) * d.c]
                    .iter()
                    .zip(&centred)
                    .map(|(&m, &v)| m as f64 * v)
                    .sum();
                out.plane_mut(n, i)[p] = s as f32;
            }
        }
    }
    Ok(())
}
