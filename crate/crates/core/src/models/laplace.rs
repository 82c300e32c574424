use rand::Rng as _;

use super::ScoredModel;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Product of independent Laplace marginals `Π_i Laplace(x_i | loc_i, scale)`.
///
/// The default scale `1/√2` gives unit variance, matching a standard normal in
/// the first two moments.
#[derive(Debug, Clone)]
pub struct LaplaceProduct {
    loc: Vec<f64>,
    scale: f64,
}

impl LaplaceProduct {
    pub fn new(loc: Vec<f64>, scale: f64) -> Result<Self> {
        if loc.is_empty() {
            return Err(Error::InvalidModel("empty location".into()));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidModel(format!("Laplace scale must be positive, got {scale}")));
        }
        Ok(Self { loc, scale })
    }

    /// Zero location, scale `1/√2`.
    pub fn unit_variance(d: usize) -> Self {
        Self { loc: vec![0.0; d], scale: std::f64::consts::FRAC_1_SQRT_2 }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub(crate) fn draw_into(&self, rng: &mut Rng, out: &mut [f64]) {
        for (o, m) in out.iter_mut().zip(&self.loc) {
            // inverse CDF on u ∈ (−1/2, 1/2)
            let u: f64 = rng.random::<f64>() - 0.5;
            let t = (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE);
            *o = m - self.scale * u.signum() * t.ln();
        }
    }
}

impl ScoredModel for LaplaceProduct {
    fn dim(&self) -> usize {
        self.loc.len()
    }

    fn score_into(&self, x: &[f64], out: &mut [f64]) {
        for ((o, a), m) in out.iter_mut().zip(x).zip(&self.loc) {
            let r = a - m;
            *o = if r > 0.0 {
                -1.0 / self.scale
            } else if r < 0.0 {
                1.0 / self.scale
            } else {
                0.0
            };
        }
    }

    fn log_density_unnorm(&self, x: &[f64]) -> Option<f64> {
        Some(-x.iter().zip(&self.loc).map(|(a, m)| (a - m).abs()).sum::<f64>() / self.scale)
    }
}
