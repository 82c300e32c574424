use rand::Rng as _;

use super::{Gmm, GmmParams};
use crate::error::{Error, Result};
use crate::rng::rng;
use crate::sample::Sample;

const COV_FLOOR: f64 = 1e-6;

/// Result of [`fit_gmm_em`]: the fitted mixture and the log-likelihood
/// (summed over the sample) after each iteration.
#[derive(Debug, Clone)]
pub struct EmFit {
    pub params: GmmParams,
    pub log_likelihood: Vec<f64>,
}

/// Fits a `k`-component Gaussian mixture by expectation-maximization.
///
/// Means start from k-means++ seeding, covariances from the pooled sample
/// covariance, weights uniform. Each M-step adds `1e-6·I` to every covariance.
/// A component that loses all its mass is re-seeded at a random data point.
pub fn fit_gmm_em(sample: &Sample, k: usize, iters: usize, seed: u64) -> Result<EmFit> {
    let n = sample.n();
    let d = sample.dim();
    if k == 0 {
        return Err(Error::Config("number of components must be positive".into()));
    }
    if n < k {
        return Err(Error::SampleSize { got: n, need: k });
    }
    let mut r = rng(seed);

    // k-means++ seeding
    let mut means: Vec<Vec<f64>> = vec![sample.row(r.random_range(0..n)).to_vec()];
    let mut dist2: Vec<f64> = sample.rows().map(|x| sq_dist(x, &means[0])).collect();
    while means.len() < k {
        let total: f64 = dist2.iter().sum();
        let pick = if total > 0.0 {
            let u = r.random::<f64>() * total;
            let mut acc = 0.0;
            dist2.iter().position(|w| {
                acc += w;
                acc > u
            }).unwrap_or(n - 1)
        } else {
            r.random_range(0..n)
        };
        let c = sample.row(pick).to_vec();
        for (dd, x) in dist2.iter_mut().zip(sample.rows()) {
            *dd = dd.min(sq_dist(x, &c));
        }
        means.push(c);
    }

    let pooled = to_nested(&sample.covariance(), d);
    let mut params = GmmParams {
        weights: vec![1.0 / k as f64; k],
        means,
        covariances: vec![floored(pooled, d); k],
    };

    let mut trace = Vec::with_capacity(iters);
    let mut resp = vec![0.0; n * k];
    for _ in 0..iters {
        // E-step
        let gmm = Gmm::new(params.clone())?;
        let mut ll = 0.0;
        for (x, rrow) in sample.rows().zip(resp.chunks_exact_mut(k)) {
            let (rk, lse) = gmm.responsibilities(x);
            rrow.copy_from_slice(&rk);
            ll += lse;
        }
        trace.push(ll);

        // M-step
        for j in 0..k {
            let nk: f64 = (0..n).map(|i| resp[i * k + j]).sum();
            if nk < 1e-10 {
                let x = sample.row(r.random_range(0..n)).to_vec();
                params.means[j] = x;
                params.covariances[j] = floored(to_nested(&sample.covariance(), d), d);
                params.weights[j] = 1.0 / n as f64;
                continue;
            }
            let mut mean = vec![0.0; d];
            for (i, x) in sample.rows().enumerate() {
                let w = resp[i * k + j];
                mean.iter_mut().zip(x).for_each(|(m, v)| *m += w * v);
            }
            mean.iter_mut().for_each(|m| *m /= nk);
            let mut cov = vec![0.0; d * d];
            for (i, x) in sample.rows().enumerate() {
                let w = resp[i * k + j];
                for a in 0..d {
                    let da = x[a] - mean[a];
                    for b in a..d {
                        cov[a * d + b] += w * da * (x[b] - mean[b]);
                    }
                }
            }
            for a in 0..d {
                for b in a..d {
                    cov[a * d + b] /= nk;
                    cov[b * d + a] = cov[a * d + b];
                }
            }
            params.means[j] = mean;
            params.covariances[j] = floored(to_nested(&cov, d), d);
            params.weights[j] = nk / n as f64;
        }
        let total: f64 = params.weights.iter().sum();
        params.weights.iter_mut().for_each(|w| *w /= total);
    }
    Ok(EmFit { params, log_likelihood: trace })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn to_nested(m: &[f64], d: usize) -> Vec<Vec<f64>> {
    m.chunks_exact(d).map(<[f64]>::to_vec).collect()
}

fn floored(mut c: Vec<Vec<f64>>, d: usize) -> Vec<Vec<f64>> {
    for (i, row) in c.iter_mut().enumerate().take(d) {
        row[i] += COV_FLOOR;
    }
    c
}
