//! Null distributions, thresholds, and the FSSD / KSD / LKS test procedures.

use std::time::Instant;

use nalgebra::SymmetricEigen;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::kernel::GaussKernel;
use crate::models::ScoredModel;
use crate::rng::{derive_seed, rng};
use crate::sample::Sample;
use crate::stein::{self, SteinFeatures, TestLocations};

/// Draws of the weighted chi-square null used by default.
pub const DEFAULT_NULL_DRAWS: usize = 10_000;
/// Bootstrap replicates used by default for the KSD test.
pub const DEFAULT_BOOTSTRAP: usize = 500;

// Draws are generated in fixed-size blocks, each with its own derived seed.
const BLOCK: usize = 1024;

/// Weighted chi-square null `Σ_i (Z_i² − 1) ν_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullSpec {
    pub eigenvalues: Vec<f64>,
    pub n_draws: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestMethod {
    Fssd,
    Ksd,
    Lks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSeeds {
    /// Seed of the null simulation or bootstrap; `None` for the LKS normal threshold.
    pub null: Option<u64>,
    /// Seed that produced the data, when known.
    pub data: Option<u64>,
}

/// Outcome of one goodness-of-fit test. `reject` is `statistic > threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub method: TestMethod,
    pub statistic: f64,
    pub threshold: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    pub n: usize,
    /// Seconds spent computing the statistic and its threshold.
    pub wall_time: f64,
    pub seeds: TestSeeds,
}

/// All eigenvalues of `Σ̂_q`, negatives clamped to zero, sorted descending.
pub fn null_eigs(features: &SteinFeatures) -> Result<Vec<f64>> {
    let s = &features.sigma_q_hat;
    if !s.is_square() {
        return Err(Error::Internal("covariance is not square".into()));
    }
    let scale = s.amax().max(f64::MIN_POSITIVE);
    if (s - s.transpose()).amax() > 1e-12 * scale {
        return Err(Error::Internal("covariance is not symmetric".into()));
    }
    let eig = SymmetricEigen::new(s.clone());
    let mut ev: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    Ok(ev)
}

/// Sorted (ascending) draws from the weighted chi-square null.
pub fn simulate_null(spec: &NullSpec) -> Result<Vec<f64>> {
    if spec.n_draws < 100 {
        return Err(Error::Config(format!("need at least 100 null draws, got {}", spec.n_draws)));
    }
    if spec.eigenvalues.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Config("null eigenvalues must be finite and nonnegative".into()));
    }
    let ev: Vec<f64> = spec.eigenvalues.iter().copied().filter(|v| *v > 0.0).collect();
    let mut draws = vec![0.0; spec.n_draws];
    draws.par_chunks_mut(BLOCK).enumerate().for_each(|(b, chunk)| {
        let mut r = rng(derive_seed(spec.seed, b as u64));
        for o in chunk.iter_mut() {
            *o = ev
                .iter()
                .map(|w| {
                    let z: f64 = r.sample(StandardNormal);
                    (z * z - 1.0) * w
                })
                .sum();
        }
    });
    draws.sort_by(f64::total_cmp);
    Ok(draws)
}

/// Empirical `(1 − α)`-quantile of sorted draws, rounding the position up.
pub fn threshold(sorted_draws: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if sorted_draws.is_empty() {
        return Err(Error::Config("no null draws".into()));
    }
    let pos = (sorted_draws.len() - 1) as f64 * (1.0 - alpha);
    let idx = ((pos - 1e-9).ceil().max(0.0) as usize).min(sorted_draws.len() - 1);
    Ok(sorted_draws[idx])
}

/// Fraction of draws at or above `stat`.
pub fn p_value(sorted_draws: &[f64], stat: f64) -> f64 {
    let below = sorted_draws.partition_point(|v| *v < stat);
    (sorted_draws.len() - below) as f64 / sorted_draws.len() as f64
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// FSSD test: statistic `n·FSSD²`, threshold from the eigenvalues of `Σ̂_q`.
pub fn fssd_test(
    model: &dyn ScoredModel,
    sample: &Sample,
    locs: &TestLocations,
    alpha: f64,
    n_draws: usize,
    seed: u64,
) -> Result<TestResult> {
    check_alpha(alpha)?;
    let start = Instant::now();
    let features = stein::moments(model, sample, locs)?;
    fssd_test_from_features(&features, alpha, n_draws, seed, start, sample.seed)
}

pub(crate) fn fssd_test_from_features(
    features: &SteinFeatures,
    alpha: f64,
    n_draws: usize,
    seed: u64,
    start: Instant,
    data_seed: Option<u64>,
) -> Result<TestResult> {
    let n = features.n;
    let stat = n as f64 * features.fssd2();
    let eigenvalues = null_eigs(features)?;
    let draws = simulate_null(&NullSpec { eigenvalues, n_draws, seed })?;
    let t = threshold(&draws, alpha)?;
    Ok(TestResult {
        method: TestMethod::Fssd,
        statistic: stat,
        threshold: t,
        p_value: p_value(&draws, stat),
        reject: stat > t,
        alpha,
        n,
        wall_time: start.elapsed().as_secs_f64(),
        seeds: TestSeeds { null: Some(seed), data: data_seed },
    })
}

/// Bootstrap replicate `Σ_{i≠j} ε_i ε_j H_ij` with `H` row-major and zero diagonal.
fn bootstrap_replicate(h_offdiag: &[f64], eps: &[f64]) -> f64 {
    let n = eps.len();
    let mut total = 0.0;
    for (i, row) in h_offdiag.chunks_exact(n).enumerate() {
        if eps[i] == 0.0 {
            continue;
        }
        let inner: f64 = row.iter().zip(eps).map(|(h, e)| h * e).sum();
        total += eps[i] * inner;
    }
    total
}

/// Multinomial weighted bootstrap draws for the KSD U-statistic, sorted ascending.
///
/// Replicate `b` uses weights `w ~ Multinomial(n; 1/n,…,1/n)/n` drawn from
/// the stream `(seed, b)`.
pub fn ksd_bootstrap(h_gram: &[f64], n: usize, n_boot: usize, seed: u64) -> Vec<f64> {
    let mut h = h_gram.to_vec();
    for i in 0..n {
        h[i * n + i] = 0.0;
    }
    let mut draws: Vec<f64> = (0..n_boot)
        .into_par_iter()
        .map(|b| {
            let mut r = rng(derive_seed(seed, b as u64));
            let mut counts = vec![0u32; n];
            for _ in 0..n {
                counts[r.random_range(0..n)] += 1;
            }
            let eps: Vec<f64> = counts.iter().map(|&c| (c as f64 - 1.0) / n as f64).collect();
            bootstrap_replicate(&h, &eps)
        })
        .collect();
    draws.sort_by(f64::total_cmp);
    draws
}

/// Quadratic-time KSD test with a multinomial bootstrap threshold.
pub fn ksd_test(
    model: &dyn ScoredModel,
    sample: &Sample,
    kernel: &GaussKernel,
    alpha: f64,
    n_boot: usize,
    seed: u64,
) -> Result<TestResult> {
    check_alpha(alpha)?;
    if n_boot == 0 {
        return Err(Error::Config("need at least one bootstrap replicate".into()));
    }
    let n = sample.n();
    let start = Instant::now();
    let gram = stein::hp_gram(model, sample, kernel)?;
    let off: f64 = gram.iter().sum::<f64>() - (0..n).map(|i| gram[i * n + i]).sum::<f64>();
    let stat = off / (n as f64 * (n as f64 - 1.0));
    let draws = ksd_bootstrap(&gram, n, n_boot, seed);
    let t = threshold(&draws, alpha)?;
    Ok(TestResult {
        method: TestMethod::Ksd,
        statistic: stat,
        threshold: t,
        p_value: p_value(&draws, stat),
        reject: stat > t,
        alpha,
        n,
        wall_time: start.elapsed().as_secs_f64(),
        seeds: TestSeeds { null: Some(seed), data: sample.seed },
    })
}

/// Linear-time KSD test: studentized pair mean against a one-sided normal threshold.
pub fn lks_test(model: &dyn ScoredModel, sample: &Sample, kernel: &GaussKernel, alpha: f64) -> Result<TestResult> {
    check_alpha(alpha)?;
    if sample.n() < 4 {
        return Err(Error::SampleSize { got: sample.n(), need: 4 });
    }
    let start = Instant::now();
    let lks = stein::lks2_stat(model, sample, kernel)?;
    if lks.std.is_nan() || lks.std <= 0.0 {
        return Err(Error::Degenerate("pair evaluations have zero variance".into()));
    }
    let stat = (lks.pairs as f64).sqrt() * lks.mean / lks.std;
    let normal = Normal::standard();
    let t = normal.inverse_cdf(1.0 - alpha);
    Ok(TestResult {
        method: TestMethod::Lks,
        statistic: stat,
        threshold: t,
        p_value: normal.sf(stat),
        reject: stat > t,
        alpha,
        n: sample.n(),
        wall_time: start.elapsed().as_secs_f64(),
        seeds: TestSeeds { null: None, data: sample.seed },
    })
}
