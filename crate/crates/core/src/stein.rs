//! Stein feature map, the FSSD / KSD / LKS statistics, and feature moments.
//!
//! With `ξ_p(x, v) = s_p(x)·k(x, v) + ∇_x k(x, v)` and locations `v_1..v_J`,
//! the stacked feature `τ(x) ∈ R^{dJ}` has entry `j·d + i` equal to
//! `ξ_{p,i}(x, v_j) / √(dJ)`. The FSSD² U-statistic is the mean of
//! `τ(x_a)ᵀτ(x_b)` over distinct pairs, computed in linear time.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{sq_dist, GaussKernel};
use crate::models::ScoredModel;
use crate::sample::Sample;

/// The `J` test locations (rows of `V`, each in `R^d`) and the kernel bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LocationsRepr", into = "LocationsRepr")]
pub struct TestLocations {
    v: Vec<f64>,
    d: usize,
    kernel: GaussKernel,
}

#[derive(Serialize, Deserialize)]
struct LocationsRepr {
    #[serde(rename = "V")]
    v: Vec<Vec<f64>>,
    bandwidth_sq: f64,
}

impl TryFrom<LocationsRepr> for TestLocations {
    type Error = Error;
    fn try_from(r: LocationsRepr) -> Result<Self> {
        let d = r.v.first().map(Vec::len).unwrap_or(0);
        if r.v.iter().any(|row| row.len() != d) {
            return Err(Error::Config("test locations have ragged rows".into()));
        }
        TestLocations::new(r.v.concat(), d, GaussKernel::new(r.bandwidth_sq)?)
    }
}

impl From<TestLocations> for LocationsRepr {
    fn from(t: TestLocations) -> Self {
        LocationsRepr {
            v: t.v.chunks_exact(t.d).map(<[f64]>::to_vec).collect(),
            bandwidth_sq: t.kernel.bandwidth_sq(),
        }
    }
}

impl TestLocations {
    /// `v` is row-major `J x d`. Rows must be finite and pairwise distinct.
    pub fn new(v: Vec<f64>, d: usize, kernel: GaussKernel) -> Result<Self> {
        let t = Self::new_unchecked(v, d, kernel)?;
        for a in 0..t.num_locations() {
            for b in a + 1..t.num_locations() {
                if t.location(a) == t.location(b) {
                    return Err(Error::Config(format!("test locations {a} and {b} coincide")));
                }
            }
        }
        Ok(t)
    }

    /// Skips the distinctness check; used where duplicated locations are intended.
    pub(crate) fn new_unchecked(v: Vec<f64>, d: usize, kernel: GaussKernel) -> Result<Self> {
        if d == 0 || v.is_empty() || !v.len().is_multiple_of(d) {
            return Err(Error::Config(format!("{} values do not form J >= 1 rows of length {d}", v.len())));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("test locations must be finite".into()));
        }
        Ok(Self { v, d, kernel })
    }

    pub fn from_rows(rows: &[Vec<f64>], kernel: GaussKernel) -> Result<Self> {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Config("test locations have ragged rows".into()));
        }
        Self::new(rows.concat(), d, kernel)
    }

    pub fn num_locations(&self) -> usize {
        self.v.len() / self.d
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `d·J`, the length of `τ(x)`.
    pub fn feature_dim(&self) -> usize {
        self.v.len()
    }

    pub fn location(&self, j: usize) -> &[f64] {
        &self.v[j * self.d..(j + 1) * self.d]
    }

    pub fn locations(&self) -> &[f64] {
        &self.v
    }

    pub fn kernel(&self) -> GaussKernel {
        self.kernel
    }

    pub fn with_kernel(&self, kernel: GaussKernel) -> Self {
        Self { kernel, ..self.clone() }
    }
}

/// `ξ_p(x, v) = s_p(x)·k(x, v) + ∇_x k(x, v)`.
pub fn xi(model: &dyn ScoredModel, x: &[f64], v: &[f64], kernel: &GaussKernel) -> Vec<f64> {
    let s = model.score(x);
    let k = kernel.eval(x, v);
    let s2 = kernel.bandwidth_sq();
    s.iter().zip(x).zip(v).map(|((si, xi), vi)| k * (si - (xi - vi) / s2)).collect()
}

/// Writes `τ(x)` given the precomputed score `s = s_p(x)`.
pub(crate) fn tau_from_score(x: &[f64], s: &[f64], locs: &TestLocations, out: &mut [f64]) {
    let d = locs.d;
    let s2 = locs.kernel.bandwidth_sq();
    let norm = 1.0 / (locs.feature_dim() as f64).sqrt();
    for (v, block) in locs.v.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
        let k = (-sq_dist(x, v) / (2.0 * s2)).exp() * norm;
        for (((o, si), xi), vi) in block.iter_mut().zip(s).zip(x).zip(v) {
            *o = k * (si - (xi - vi) / s2);
        }
    }
}

/// `τ(x) = vec(Ξ(x))`, length `dJ`.
pub fn tau(model: &dyn ScoredModel, x: &[f64], locs: &TestLocations) -> Vec<f64> {
    let s = model.score(x);
    let mut out = vec![0.0; locs.feature_dim()];
    tau_from_score(x, &s, locs, &mut out);
    out
}

fn check_dims(model: &dyn ScoredModel, sample: &Sample, locs: Option<&TestLocations>) -> Result<()> {
    if model.dim() != sample.dim() {
        return Err(Error::Dimension { expected: model.dim(), got: sample.dim() });
    }
    if let Some(l) = locs {
        if l.dim() != sample.dim() {
            return Err(Error::Dimension { expected: sample.dim(), got: l.dim() });
        }
    }
    Ok(())
}

/// Row-major `n x dJ` matrix of `τ(x_i)`.
pub fn tau_matrix(model: &dyn ScoredModel, sample: &Sample, locs: &TestLocations) -> Result<Vec<f64>> {
    check_dims(model, sample, Some(locs))?;
    let scores = model.scores(sample);
    Ok(tau_matrix_from_scores(sample, &scores, locs))
}

pub(crate) fn tau_matrix_from_scores(sample: &Sample, scores: &[f64], locs: &TestLocations) -> Vec<f64> {
    let d = sample.dim();
    let dj = locs.feature_dim();
    let mut out = vec![0.0; sample.n() * dj];
    out.par_chunks_mut(dj).enumerate().for_each(|(i, row)| {
        tau_from_score(sample.row(i), &scores[i * d..(i + 1) * d], locs, row);
    });
    out
}

/// FSSD² U-statistic from the rows of `τ`: `(‖Σ τ_i‖² − Σ ‖τ_i‖²) / (n(n−1))`.
pub fn fssd2_from_tau(tau_rows: &[f64], dj: usize) -> Result<f64> {
    let n = tau_rows.len() / dj;
    if n < 2 {
        return Err(Error::SampleSize { got: n, need: 2 });
    }
    let mut sum = vec![0.0; dj];
    let mut sq = 0.0;
    for row in tau_rows.chunks_exact(dj) {
        for (a, b) in sum.iter_mut().zip(row) {
            *a += b;
        }
        sq += row.iter().map(|v| v * v).sum::<f64>();
    }
    let total: f64 = sum.iter().map(|v| v * v).sum();
    Ok((total - sq) / (n as f64 * (n as f64 - 1.0)))
}

/// Unbiased linear-time estimate of FSSD².
pub fn fssd2_ustat(model: &dyn ScoredModel, sample: &Sample, locs: &TestLocations) -> Result<f64> {
    if sample.n() < 2 {
        return Err(Error::SampleSize { got: sample.n(), need: 2 });
    }
    fssd2_from_tau(&tau_matrix(model, sample, locs)?, locs.feature_dim())
}

/// `τ` rows with their mean and the biased (`1/n`) covariance `Σ̂_q`.
#[derive(Debug, Clone)]
pub struct SteinFeatures {
    pub tau_rows: Vec<f64>,
    pub n: usize,
    pub dim: usize,
    pub mu_hat: Vec<f64>,
    pub sigma_q_hat: DMatrix<f64>,
}

impl SteinFeatures {
    pub fn from_tau(tau_rows: Vec<f64>, dim: usize) -> Result<Self> {
        let n = tau_rows.len() / dim;
        if n < 2 {
            return Err(Error::SampleSize { got: n, need: 2 });
        }
        let mut mu = vec![0.0; dim];
        for row in tau_rows.chunks_exact(dim) {
            mu.iter_mut().zip(row).for_each(|(m, v)| *m += v);
        }
        mu.iter_mut().for_each(|m| *m /= n as f64);
        let mut centered = tau_rows.clone();
        for row in centered.chunks_exact_mut(dim) {
            row.iter_mut().zip(&mu).for_each(|(v, m)| *v -= m);
        }
        let c = DMatrix::from_row_slice(n, dim, &centered);
        let mut sigma = c.tr_mul(&c) / n as f64;
        // exact symmetry
        for a in 0..dim {
            for b in a + 1..dim {
                let v = 0.5 * (sigma[(a, b)] + sigma[(b, a)]);
                sigma[(a, b)] = v;
                sigma[(b, a)] = v;
            }
        }
        Ok(Self { tau_rows, n, dim, mu_hat: mu, sigma_q_hat: sigma })
    }

    pub fn fssd2(&self) -> f64 {
        // n ≥ 2 is checked at construction
        fssd2_from_tau(&self.tau_rows, self.dim).unwrap_or(0.0)
    }
}

/// Feature moments of a sample under `model` at `locs`.
pub fn moments(model: &dyn ScoredModel, sample: &Sample, locs: &TestLocations) -> Result<SteinFeatures> {
    SteinFeatures::from_tau(tau_matrix(model, sample, locs)?, locs.feature_dim())
}

/// `4 μ̂ᵀ Σ̂_q μ̂`, clamped at zero.
pub fn sigma_h1_hat(features: &SteinFeatures) -> f64 {
    let mu = nalgebra::DVector::from_column_slice(&features.mu_hat);
    let q = (mu.transpose() * &features.sigma_q_hat * &mu)[0];
    (4.0 * q).max(0.0)
}

/// KSD U-statistic kernel given precomputed scores `sx = s_p(x)`, `sy = s_p(y)`.
pub fn hp_from_scores(x: &[f64], y: &[f64], sx: &[f64], sy: &[f64], kernel: &GaussKernel) -> f64 {
    let s2 = kernel.bandwidth_sq();
    let r2 = sq_dist(x, y);
    let k = (-r2 / (2.0 * s2)).exp();
    let mut ss = 0.0;
    let mut cross = 0.0;
    for i in 0..x.len() {
        let r = x[i] - y[i];
        ss += sx[i] * sy[i];
        // s(y)ᵀ∇_x k + s(x)ᵀ∇_y k = (s(x) − s(y))ᵀ(x − y) k / σ²
        cross += (sx[i] - sy[i]) * r;
    }
    k * (ss + cross / s2 + x.len() as f64 / s2 - r2 / (s2 * s2))
}

/// `h_p(x, y) = s(x)ᵀs(y)k + s(y)ᵀ∇_x k + s(x)ᵀ∇_y k + Σ_i ∂²k/∂x_i∂y_i`.
pub fn hp(model: &dyn ScoredModel, x: &[f64], y: &[f64], kernel: &GaussKernel) -> f64 {
    hp_from_scores(x, y, &model.score(x), &model.score(y), kernel)
}

/// Symmetric `n x n` Gram matrix of `h_p` (row-major), diagonal included.
pub fn hp_gram(model: &dyn ScoredModel, sample: &Sample, kernel: &GaussKernel) -> Result<Vec<f64>> {
    check_dims(model, sample, None)?;
    let n = sample.n();
    let d = sample.dim();
    let scores = model.scores(sample);
    let mut g = vec![0.0; n * n];
    g.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let xi = sample.row(i);
        let si = &scores[i * d..(i + 1) * d];
        for (j, o) in row.iter_mut().enumerate() {
            *o = hp_from_scores(xi, sample.row(j), si, &scores[j * d..(j + 1) * d], kernel);
        }
    });
    Ok(g)
}

/// Quadratic-time KSD² U-statistic `2/(n(n−1)) Σ_{i<j} h_p(x_i, x_j)`.
pub fn ksd2_ustat(model: &dyn ScoredModel, sample: &Sample, kernel: &GaussKernel) -> Result<f64> {
    check_dims(model, sample, None)?;
    let n = sample.n();
    if n < 2 {
        return Err(Error::SampleSize { got: n, need: 2 });
    }
    let d = sample.dim();
    let scores = model.scores(sample);
    let row_sums: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = sample.row(i);
            let si = &scores[i * d..(i + 1) * d];
            (i + 1..n)
                .map(|j| hp_from_scores(xi, sample.row(j), si, &scores[j * d..(j + 1) * d], kernel))
                .sum::<f64>()
        })
        .collect();
    let total: f64 = row_sums.iter().sum();
    Ok(2.0 * total / (n as f64 * (n as f64 - 1.0)))
}

/// Linear-time KSD² estimate from disjoint consecutive pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LksStat {
    /// Mean of `h_p(x_{2i−1}, x_{2i})`.
    pub mean: f64,
    /// Sample standard deviation of the pair values (`m − 1` denominator; 0 for one pair).
    pub std: f64,
    /// Number of pairs `m = ⌊n/2⌋`.
    pub pairs: usize,
}

/// Pairs `(x_1, x_2), (x_3, x_4), …`; with odd `n` the last point is dropped.
pub fn lks2_stat(model: &dyn ScoredModel, sample: &Sample, kernel: &GaussKernel) -> Result<LksStat> {
    check_dims(model, sample, None)?;
    let n = sample.n();
    if n < 2 {
        return Err(Error::SampleSize { got: n, need: 2 });
    }
    let m = n / 2;
    let vals: Vec<f64> = (0..m)
        .map(|i| hp(model, sample.row(2 * i), sample.row(2 * i + 1), kernel))
        .collect();
    let mean = vals.iter().sum::<f64>() / m as f64;
    let std = if m > 1 {
        (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m as f64 - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(LksStat { mean, std, pairs: m })
}
