//! Gaussian kernel `k(x, y) = exp(−‖x − y‖² / 2σ²)` and its derivatives.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng;
use crate::sample::Sample;

/// Largest sample used as-is by the median heuristic.
pub const MEDIAN_MAX_POINTS: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussKernel {
    bandwidth_sq: f64,
}

impl GaussKernel {
    pub fn new(bandwidth_sq: f64) -> Result<Self> {
        if !(bandwidth_sq > 0.0 && bandwidth_sq.is_finite()) {
            return Err(Error::Config(format!("kernel bandwidth must be positive, got {bandwidth_sq}")));
        }
        Ok(Self { bandwidth_sq })
    }

    /// Kernel whose width is the median pairwise distance of `sample`.
    pub fn from_median(sample: &Sample) -> Result<Self> {
        let med = median_heuristic(sample)?;
        Self::new(med * med)
    }

    pub fn bandwidth_sq(&self) -> f64 {
        self.bandwidth_sq
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        (-sq_dist(x, y) / (2.0 * self.bandwidth_sq)).exp()
    }

    /// `∇_x k(x, y) = −(x − y)/σ² · k(x, y)`
    pub fn grad_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let k = self.eval(x, y);
        x.iter().zip(y).map(|(a, b)| -(a - b) / self.bandwidth_sq * k).collect()
    }

    /// `∇_y k(x, y) = (x − y)/σ² · k(x, y)`
    pub fn grad_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let k = self.eval(x, y);
        x.iter().zip(y).map(|(a, b)| (a - b) / self.bandwidth_sq * k).collect()
    }

    /// `Σ_i ∂²k / ∂x_i ∂y_i = k(x, y)·(d/σ² − ‖x − y‖²/σ⁴)`
    pub fn cross_trace(&self, x: &[f64], y: &[f64]) -> f64 {
        let r2 = sq_dist(x, y);
        let s2 = self.bandwidth_sq;
        (-r2 / (2.0 * s2)).exp() * (x.len() as f64 / s2 - r2 / (s2 * s2))
    }
}

pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Median pairwise Euclidean distance (lower median for even pair counts).
///
/// Samples larger than [`MEDIAN_MAX_POINTS`] are subsampled with seed 0;
/// see [`median_heuristic_seeded`].
pub fn median_heuristic(sample: &Sample) -> Result<f64> {
    median_heuristic_seeded(sample, 0)
}

pub fn median_heuristic_seeded(sample: &Sample, seed: u64) -> Result<f64> {
    let n = sample.n();
    if n < 2 {
        return Err(Error::SampleSize { got: n, need: 2 });
    }
    let idx: Vec<usize> = if n > MEDIAN_MAX_POINTS {
        let mut v = index::sample(&mut rng(seed), n, MEDIAN_MAX_POINTS).into_vec();
        v.sort_unstable();
        v
    } else {
        (0..n).collect()
    };
    let mut dists = Vec::with_capacity(idx.len() * (idx.len() - 1) / 2);
    for (a, &i) in idx.iter().enumerate() {
        let xi = sample.row(i);
        for &j in &idx[a + 1..] {
            dists.push(sq_dist(xi, sample.row(j)));
        }
    }
    let mid = (dists.len() - 1) / 2;
    let (_, m, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    let med = m.sqrt();
    if med <= 0.0 {
        if dists.iter().all(|d| *d == 0.0) {
            return Err(Error::Degenerate("all pairwise distances are zero".into()));
        }
        return Err(Error::Degenerate("median pairwise distance is zero".into()));
    }
    Ok(med)
}
