//! Score-function models `p` and samplers `q`.
//!
//! A model only has to expose `∇ log p(x)`; the normalizer never appears.

mod em;
mod gaussian;
mod gmm;
mod laplace;
mod rbm;

pub use em::{fit_gmm_em, EmFit};
pub use gaussian::{gaussian_score, Covariance, Gaussian};
pub use gmm::{Gmm, GmmParams};
pub use laplace::LaplaceProduct;
pub use rbm::{sample_rbm_gibbs, Rbm, RbmParams};

use crate::error::Result;
use crate::rng;
use crate::sample::Sample;

/// A density known up to normalization.
pub trait ScoredModel: Send + Sync {
    fn dim(&self) -> usize;

    /// Writes `∇_x log p(x)` into `out`.
    fn score_into(&self, x: &[f64], out: &mut [f64]);

    fn score(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.score_into(x, &mut out);
        out
    }

    /// Unnormalized log density, when the model can evaluate one cheaply.
    fn log_density_unnorm(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    /// Scores of every row, row-major `n x d`.
    fn scores(&self, sample: &Sample) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; sample.n() * d];
        for (x, o) in sample.rows().zip(out.chunks_exact_mut(d)) {
            self.score_into(x, o);
        }
        out
    }
}

impl<M: ScoredModel + ?Sized> ScoredModel for &M {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn score_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).score_into(x, out)
    }
    fn log_density_unnorm(&self, x: &[f64]) -> Option<f64> {
        (**self).log_density_unnorm(x)
    }
}

impl<M: ScoredModel + ?Sized> ScoredModel for Box<M> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn score_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).score_into(x, out)
    }
    fn log_density_unnorm(&self, x: &[f64]) -> Option<f64> {
        (**self).log_density_unnorm(x)
    }
}

/// Distributions with a direct i.i.d. sampler.
#[derive(Debug, Clone)]
pub enum Distribution {
    Gauss(Gaussian),
    LaplaceProduct(LaplaceProduct),
    Gmm(Gmm),
}

impl Distribution {
    pub fn dim(&self) -> usize {
        match self {
            Self::Gauss(g) => g.dim(),
            Self::LaplaceProduct(l) => l.dim(),
            Self::Gmm(g) => g.dim(),
        }
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Sample> {
        sample_standard(self, n, seed)
    }

    /// The same distribution viewed as a scored model.
    pub fn as_model(&self) -> &dyn ScoredModel {
        match self {
            Self::Gauss(g) => g,
            Self::LaplaceProduct(l) => l,
            Self::Gmm(g) => g,
        }
    }
}

/// Draws `n` i.i.d. points. Deterministic given `seed`.
pub fn sample_standard(dist: &Distribution, n: usize, seed: u64) -> Result<Sample> {
    let mut r = rng::rng(seed);
    let d = dist.dim();
    let mut data = vec![0.0; n * d];
    for row in data.chunks_exact_mut(d) {
        match dist {
            Distribution::Gauss(g) => g.draw_into(&mut r, row),
            Distribution::LaplaceProduct(l) => l.draw_into(&mut r, row),
            Distribution::Gmm(g) => g.draw_into(&mut r, row),
        }
    }
    Ok(Sample::from_raw(data, d)?.with_seed(seed))
}

/// Central finite difference of `log_density_unnorm`; `None` if the model has no log density.
pub fn finite_difference_score(model: &dyn ScoredModel, x: &[f64], h: f64) -> Option<Vec<f64>> {
    let mut xp = x.to_vec();
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        let fp = model.log_density_unnorm(&xp)?;
        xp[i] = x[i] - h;
        let fm = model.log_density_unnorm(&xp)?;
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    Some(g)
}
