use rand::Rng as _;
use rayon::prelude::*;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ScoredModel;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng};
use crate::sample::Sample;

/// Gaussian-Bernoulli RBM with hidden units in `{±1}`:
/// `p(x, h) ∝ exp(xᵀBh + bᵀx + cᵀh − ½‖x‖²)`.
///
/// `weights` is `B`, `d` rows of length `d_h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbmParams {
    #[serde(rename = "B")]
    pub weights: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl RbmParams {
    pub fn validate(&self) -> Result<()> {
        let d = self.b.len();
        let dh = self.c.len();
        if d == 0 || dh == 0 {
            return Err(Error::InvalidModel("RBM needs d >= 1 and d_h >= 1".into()));
        }
        if self.weights.len() != d || self.weights.iter().any(|r| r.len() != dh) {
            return Err(Error::InvalidModel(format!("B must be {d} x {dh}")));
        }
        let finite = self.weights.iter().flatten().chain(&self.b).chain(&self.c).all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidModel("RBM parameters must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Rbm {
    params: RbmParams,
    // row-major d x d_h copy of B
    w: Vec<f64>,
}

impl Rbm {
    pub fn new(params: RbmParams) -> Result<Self> {
        params.validate()?;
        let w = params.weights.concat();
        Ok(Self { params, w })
    }

    pub fn params(&self) -> &RbmParams {
        &self.params
    }

    pub fn hidden_dim(&self) -> usize {
        self.params.c.len()
    }

    /// `Bᵀx + c`
    fn activation(&self, x: &[f64], out: &mut [f64]) {
        let dh = self.hidden_dim();
        out.copy_from_slice(&self.params.c);
        for (xi, row) in x.iter().zip(self.w.chunks_exact(dh)) {
            for (o, bij) in out.iter_mut().zip(row) {
                *o += xi * bij;
            }
        }
    }
}

fn log_2cosh(a: f64) -> f64 {
    let t = a.abs();
    t + (-2.0 * t).exp().ln_1p()
}

impl ScoredModel for Rbm {
    fn dim(&self) -> usize {
        self.params.b.len()
    }

    fn score_into(&self, x: &[f64], out: &mut [f64]) {
        let dh = self.hidden_dim();
        let mut a = vec![0.0; dh];
        self.activation(x, &mut a);
        a.iter_mut().for_each(|v| *v = v.tanh());
        for (i, row) in self.w.chunks_exact(dh).enumerate() {
            let bt: f64 = row.iter().zip(&a).map(|(w, t)| w * t).sum();
            out[i] = self.params.b[i] - x[i] + bt;
        }
    }

    fn log_density_unnorm(&self, x: &[f64]) -> Option<f64> {
        let mut a = vec![0.0; self.hidden_dim()];
        self.activation(x, &mut a);
        let lin: f64 = self.params.b.iter().zip(x).map(|(b, x)| b * x).sum();
        let sq: f64 = x.iter().map(|v| v * v).sum();
        Some(lin - 0.5 * sq + a.iter().map(|v| log_2cosh(*v)).sum::<f64>())
    }
}

/// Blocked Gibbs sampling: `n` independent chains, each started at `N(0, I)`
/// and run for `burn_in` sweeps; the last state of each chain is returned.
///
/// Chain `i` uses its own stream derived from `(seed, i)`, so the output does
/// not depend on the thread pool size.
pub fn sample_rbm_gibbs(rbm: &Rbm, n: usize, burn_in: usize, seed: u64) -> Result<Sample> {
    if n == 0 {
        return Err(Error::SampleSize { got: 0, need: 1 });
    }
    let d = rbm.dim();
    let dh = rbm.hidden_dim();
    let mut data = vec![0.0; n * d];
    data.par_chunks_mut(d).enumerate().for_each(|(chain, x)| {
        let mut r = rng(derive_seed(seed, chain as u64));
        for v in x.iter_mut() {
            *v = r.sample(StandardNormal);
        }
        let mut a = vec![0.0; dh];
        let mut h = vec![0.0; dh];
        for _ in 0..burn_in {
            rbm.activation(x, &mut a);
            for (hj, aj) in h.iter_mut().zip(&a) {
                // P(h = +1 | x) = e^a / (e^a + e^-a)
                let p = 1.0 / (1.0 + (-2.0 * aj).exp());
                *hj = if r.random::<f64>() < p { 1.0 } else { -1.0 };
            }
            for (i, row) in rbm.w.chunks_exact(dh).enumerate() {
                let bh: f64 = row.iter().zip(&h).map(|(w, h)| w * h).sum();
                let z: f64 = r.sample(StandardNormal);
                x[i] = bh + rbm.params.b[i] + z;
            }
        }
    });
    Ok(Sample::from_raw(data, d)?.with_seed(seed))
}
