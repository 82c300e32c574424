//! Power criterion `FSSD² / (σ_H1 + γ)` and gradient ascent over the test
//! locations and the log kernel bandwidth.
//!
//! The score is evaluated at the data points only, so its values are computed
//! once per sample and the gradient with respect to `V` and `log σ²` needs no
//! derivative of the score.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::kernel::{median_heuristic_seeded, sq_dist, GaussKernel};
use crate::models::{sample_standard, Covariance, Distribution, Gaussian, ScoredModel};
use crate::rng::{derive_seed, rng};
use crate::sample::Sample;
use crate::stein::{self, TestLocations};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Regularizer added to `σ_H1` in the denominator.
    pub gamma: f64,
    pub step_size: f64,
    pub max_iters: usize,
    /// Halvings tried in the backtracking line search before stopping.
    pub max_halvings: usize,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { gamma: 1e-4, step_size: 0.1, max_iters: 200, max_halvings: 10, train_fraction: 0.2, seed: 0 }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be nonnegative, got {}", self.gamma)));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::Config(format!("step size must be positive, got {}", self.step_size)));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!("train fraction must lie in (0, 1), got {}", self.train_fraction)));
        }
        Ok(())
    }
}

/// `FSSD²̂ / (σ̂_H1 + γ)` where `σ̂_H1 = sqrt(4 μ̂ᵀ Σ̂_q μ̂)`.
pub fn power_criterion(model: &dyn ScoredModel, sample: &Sample, locs: &TestLocations, gamma: f64) -> Result<f64> {
    let f = stein::moments(model, sample, locs)?;
    Ok(f.fssd2() / (stein::sigma_h1_hat(&f).sqrt() + gamma))
}

/// Gradient of [`power_criterion`] with respect to the entries of `V`
/// (row-major) followed by `log σ²`; length `J·d + 1`.
pub fn power_criterion_grad(
    model: &dyn ScoredModel,
    sample: &Sample,
    locs: &TestLocations,
    gamma: f64,
) -> Result<Vec<f64>> {
    let obj = Objective::new(model, sample, gamma)?;
    Ok(obj.value_and_grad(&Params::from_locations(locs), true).1)
}

/// Normal approximation of `P_H1(n·FSSD²̂ > r)`.
pub fn approx_power(r: f64, n: usize, fssd2: f64, sigma_h1: f64) -> Result<f64> {
    if sigma_h1.is_nan() || sigma_h1 <= 0.0 {
        return Err(Error::Config(format!("sigma_h1 must be positive, got {sigma_h1}")));
    }
    let rn = (n as f64).sqrt();
    Ok(Normal::standard().sf(r / (rn * sigma_h1) - rn * fssd2 / sigma_h1))
}

/// Disjoint seeded train/test partition; each part keeps the original row order.
pub fn split(sample: &Sample, train_fraction: f64, seed: u64) -> Result<(Sample, Sample)> {
    let n = sample.n();
    if n < 4 {
        return Err(Error::SampleSize { got: n, need: 4 });
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!("train fraction must lie in (0, 1), got {train_fraction}")));
    }
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(2, n - 2);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng(seed));
    let (tr, te) = idx.split_at_mut(n_train);
    tr.sort_unstable();
    te.sort_unstable();
    let mut train = sample.select(tr)?;
    let mut test = sample.select(te)?;
    train.seed = sample.seed;
    test.seed = sample.seed;
    Ok((train, test))
}

/// Test locations drawn from a normal fitted to the sample, with the
/// median-heuristic bandwidth.
pub fn random_locations(sample: &Sample, j: usize, seed: u64) -> Result<TestLocations> {
    if j == 0 {
        return Err(Error::Config("need at least one test location".into()));
    }
    let d = sample.dim();
    let mean = sample.mean();
    let cov = sample.covariance();
    let scale = (0..d).map(|i| cov[i * d + i]).fold(0.0f64, f64::max).max(1e-12);
    let mut ridge = 1e-6 * scale;
    let fitted = loop {
        let mut c = DMatrix::from_row_slice(d, d, &cov);
        for i in 0..d {
            c[(i, i)] += ridge;
        }
        match Gaussian::new(mean.clone(), Covariance::Full(c)) {
            Ok(g) => break g,
            Err(_) if ridge < 1e6 * scale => ridge *= 10.0,
            Err(e) => return Err(e),
        }
    };
    let v = sample_standard(&Distribution::Gauss(fitted), j, derive_seed(seed, 1))?;
    let med = median_heuristic_seeded(sample, derive_seed(seed, 2))?;
    TestLocations::new(v.as_slice().to_vec(), d, GaussKernel::new(med * med)?)
}

/// Output of [`optimize_locations_traced`].
#[derive(Debug, Clone)]
pub struct Optimized {
    pub locations: TestLocations,
    pub initial_criterion: f64,
    /// Criterion after each accepted step, starting with the initial value.
    pub trace: Vec<f64>,
}

impl Optimized {
    pub fn final_criterion(&self) -> f64 {
        *self.trace.last().unwrap_or(&self.initial_criterion)
    }
}

/// Gradient ascent from random initial locations; see [`optimize_locations_traced`].
pub fn optimize_locations(
    model: &dyn ScoredModel,
    train: &Sample,
    j: usize,
    config: &OptimizerConfig,
) -> Result<TestLocations> {
    Ok(optimize_locations_traced(model, train, j, config)?.locations)
}

/// Maximizes the power criterion on `train` over `V` and `log σ²`.
///
/// A step is accepted only if it does not decrease the criterion; otherwise
/// the step is halved up to `max_halvings` times, after which the search stops.
pub fn optimize_locations_traced(
    model: &dyn ScoredModel,
    train: &Sample,
    j: usize,
    config: &OptimizerConfig,
) -> Result<Optimized> {
    config.validate()?;
    if train.n() < 2 * j {
        return Err(Error::SampleSize { got: train.n(), need: 2 * j });
    }
    let init = random_locations(train, j, config.seed)?;
    optimize_from(model, train, init, config)
}

/// Gradient ascent starting from the given locations.
pub fn optimize_from(
    model: &dyn ScoredModel,
    train: &Sample,
    init: TestLocations,
    config: &OptimizerConfig,
) -> Result<Optimized> {
    config.validate()?;
    let obj = Objective::new(model, train, config.gamma)?;
    let mut params = Params::from_locations(&init);
    let (mut value, mut grad) = obj.value_and_grad(&params, true);
    let initial = value;
    let mut trace = vec![value];
    for _ in 0..config.max_iters {
        if grad.iter().all(|g| *g == 0.0) || !value.is_finite() {
            break;
        }
        let mut step = config.step_size;
        let mut accepted = None;
        for _ in 0..=config.max_halvings {
            let cand = params.stepped(&grad, step);
            let (v, _) = obj.value_and_grad(&cand, false);
            if v.is_finite() && v >= value {
                accepted = Some(cand);
                break;
            }
            step *= 0.5;
        }
        let Some(next) = accepted else { break };
        params = next;
        (value, grad) = obj.value_and_grad(&params, true);
        trace.push(value);
    }
    let locations = TestLocations::new(params.v, params.d, GaussKernel::new(params.log_bw.exp())?)?;
    Ok(Optimized { locations, initial_criterion: initial, trace })
}

#[derive(Debug, Clone)]
struct Params {
    v: Vec<f64>,
    d: usize,
    log_bw: f64,
}

impl Params {
    fn from_locations(l: &TestLocations) -> Self {
        Self { v: l.locations().to_vec(), d: l.dim(), log_bw: l.kernel().bandwidth_sq().ln() }
    }

    fn stepped(&self, grad: &[f64], step: f64) -> Self {
        let v = self.v.iter().zip(grad).map(|(a, g)| a + step * g).collect();
        Self { v, d: self.d, log_bw: self.log_bw + step * grad[self.v.len()] }
    }
}

/// Sample with cached scores.
struct Objective<'a> {
    sample: &'a Sample,
    scores: Vec<f64>,
    gamma: f64,
}

impl<'a> Objective<'a> {
    fn new(model: &dyn ScoredModel, sample: &'a Sample, gamma: f64) -> Result<Self> {
        if model.dim() != sample.dim() {
            return Err(Error::Dimension { expected: model.dim(), got: sample.dim() });
        }
        if sample.n() < 2 {
            return Err(Error::SampleSize { got: sample.n(), need: 2 });
        }
        Ok(Self { sample, scores: model.scores(sample), gamma })
    }

    fn value_and_grad(&self, p: &Params, with_grad: bool) -> (f64, Vec<f64>) {
        let d = p.d;
        let jn = p.v.len() / d;
        let dj = p.v.len();
        let n = self.sample.n();
        let nf = n as f64;
        let s2 = p.log_bw.exp();
        let norm = 1.0 / (dj as f64).sqrt();
        let Ok(kernel) = GaussKernel::new(s2) else {
            return (f64::NAN, vec![0.0; dj + 1]);
        };
        let Ok(locs) = TestLocations::new_unchecked(p.v.clone(), d, kernel) else {
            return (f64::NAN, vec![0.0; dj + 1]);
        };
        let tau = stein::tau_matrix_from_scores(self.sample, &self.scores, &locs);

        let mut sum = vec![0.0; dj];
        let mut sq = 0.0;
        for row in tau.chunks_exact(dj) {
            sum.iter_mut().zip(row).for_each(|(a, b)| *a += b);
            sq += row.iter().map(|v| v * v).sum::<f64>();
        }
        let u = (sum.iter().map(|v| v * v).sum::<f64>() - sq) / (nf * (nf - 1.0));
        let mu: Vec<f64> = sum.iter().map(|v| v / nf).collect();
        let m: f64 = mu.iter().map(|v| v * v).sum();
        let a: Vec<f64> = tau.chunks_exact(dj).map(|row| dot(row, &mu)).collect();
        let q = a.iter().map(|v| v * v).sum::<f64>() / nf - m * m;
        let var_h1 = 4.0 * q;
        let sigma = var_h1.max(0.0).sqrt();
        let denom = sigma + self.gamma;
        let value = u / denom;
        if !with_grad {
            return (value, Vec::new());
        }

        // dF/dτ_i = dU/dτ_i / denom − U/denom² · dσ/dτ_i
        let mut w = vec![0.0; dj];
        for (row, ai) in tau.chunks_exact(dj).zip(&a) {
            w.iter_mut().zip(row).for_each(|(o, t)| *o += ai * t / nf);
        }
        let cu = 2.0 / (nf * (nf - 1.0)) / denom;
        let cs = if var_h1 > 0.0 { -u / (denom * denom) * (2.0 / sigma) * (2.0 / nf) } else { 0.0 };

        let mut grad = vec![0.0; dj + 1];
        let mut g = vec![0.0; dj];
        for (i, row) in tau.chunks_exact(dj).enumerate() {
            for l in 0..dj {
                g[l] = cu * (sum[l] - row[l]) + cs * (a[i] * mu[l] + w[l] - 2.0 * m * mu[l]);
            }
            let x = self.sample.row(i);
            for jj in 0..jn {
                let v = &p.v[jj * d..(jj + 1) * d];
                let gb = &g[jj * d..(jj + 1) * d];
                let tb = &row[jj * d..(jj + 1) * d];
                let r2 = sq_dist(x, v);
                let k = (-r2 / (2.0 * s2)).exp() * norm;
                // G·τ_block = k·G·(s − r/σ²)
                let gt = dot(gb, tb);
                let gr: f64 = gb.iter().zip(x).zip(v).map(|((g, xi), vi)| g * (xi - vi)).sum();
                for mm in 0..d {
                    let r = x[mm] - v[mm];
                    grad[jj * d + mm] += gt * r / s2 + k * gb[mm] / s2;
                }
                grad[dj] += gt * r2 / (2.0 * s2) + k * gr / s2;
            }
        }
        (value, grad)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
