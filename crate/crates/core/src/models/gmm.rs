use nalgebra::DMatrix;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Covariance, Gaussian, ScoredModel};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Parameters of a Gaussian mixture. Covariances are row-major `d x d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmParams {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<Vec<f64>>>,
}

impl GmmParams {
    pub fn dim(&self) -> usize {
        self.means.first().map(Vec::len).unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.weights.len();
        if k == 0 {
            return Err(Error::InvalidModel("mixture needs at least one component".into()));
        }
        if self.means.len() != k || self.covariances.len() != k {
            return Err(Error::InvalidModel(format!(
                "{k} weights but {} means and {} covariances",
                self.means.len(),
                self.covariances.len()
            )));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidModel("weights must be nonnegative".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel(format!("weights sum to {total}, not 1")));
        }
        let d = self.dim();
        if d == 0 || self.means.iter().any(|m| m.len() != d) {
            return Err(Error::InvalidModel("component means have inconsistent dimension".into()));
        }
        if self.covariances.iter().any(|c| c.len() != d || c.iter().any(|r| r.len() != d)) {
            return Err(Error::InvalidModel("covariances must be d x d".into()));
        }
        Ok(())
    }
}

/// A Gaussian mixture ready for scoring and sampling.
#[derive(Debug, Clone)]
pub struct Gmm {
    params: GmmParams,
    log_weights: Vec<f64>,
    components: Vec<Gaussian>,
    precisions: Vec<DMatrix<f64>>,
}

impl Gmm {
    pub fn new(params: GmmParams) -> Result<Self> {
        params.validate()?;
        let d = params.dim();
        let components = params
            .means
            .iter()
            .zip(&params.covariances)
            .map(|(m, c)| {
                let cov = DMatrix::from_row_iterator(d, d, c.iter().flatten().copied());
                Gaussian::new(m.clone(), Covariance::Full(cov))
            })
            .collect::<Result<Vec<_>>>()?;
        let precisions = components.iter().map(Gaussian::precision).collect();
        let log_weights = params.weights.iter().map(|w| w.ln()).collect();
        Ok(Self { params, log_weights, components, precisions })
    }

    pub fn params(&self) -> &GmmParams {
        &self.params
    }

    /// Posterior responsibilities and `log p(x)`, via log-sum-exp.
    pub fn responsibilities(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let logs: Vec<f64> = self
            .components
            .iter()
            .zip(&self.log_weights)
            .map(|(c, lw)| lw + c.log_pdf(x))
            .collect();
        let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = logs.iter().map(|l| (l - m).exp()).sum();
        let lse = m + s.ln();
        (logs.iter().map(|l| (l - lse).exp()).collect(), lse)
    }

    pub(crate) fn draw_into(&self, rng: &mut Rng, out: &mut [f64]) {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut k = self.components.len() - 1;
        for (i, w) in self.params.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                k = i;
                break;
            }
        }
        self.components[k].draw_into(rng, out);
    }
}

impl ScoredModel for Gmm {
    fn dim(&self) -> usize {
        self.params.dim()
    }

    fn score_into(&self, x: &[f64], out: &mut [f64]) {
        let (r, _) = self.responsibilities(x);
        let d = self.dim();
        out.iter_mut().for_each(|o| *o = 0.0);
        for ((rk, p), mean) in r.iter().zip(&self.precisions).zip(&self.params.means) {
            if *rk == 0.0 {
                continue;
            }
            for i in 0..d {
                let mut acc = 0.0;
                for j in 0..d {
                    acc += p[(i, j)] * (mean[j] - x[j]);
                }
                out[i] += rk * acc;
            }
        }
    }

    fn log_density_unnorm(&self, x: &[f64]) -> Option<f64> {
        Some(self.responsibilities(x).1)
    }
}
