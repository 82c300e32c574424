use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::ScoredModel;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Covariance of a normal: isotropic scalar or a full SPD matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Scalar(f64),
    Full(DMatrix<f64>),
}

/// `−Σ⁻¹(x − mean)`.
pub fn gaussian_score(x: &[f64], mean: &[f64], cov: &Covariance) -> Result<Vec<f64>> {
    if x.len() != mean.len() {
        return Err(Error::Dimension { expected: mean.len(), got: x.len() });
    }
    let g = Gaussian::new(mean.to_vec(), cov.clone())?;
    Ok(g.score(x))
}

/// Multivariate normal `N(mean, cov)`.
#[derive(Debug, Clone)]
pub struct Gaussian {
    mean: Vec<f64>,
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    Isotropic { var: f64 },
    Full { precision: DMatrix<f64>, chol: DMatrix<f64>, log_det: f64 },
}

impl Gaussian {
    pub fn new(mean: Vec<f64>, cov: Covariance) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::InvalidModel("empty mean".into()));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidModel("non-finite mean".into()));
        }
        let d = mean.len();
        let kind = match cov {
            Covariance::Scalar(var) => {
                if !(var > 0.0 && var.is_finite()) {
                    return Err(Error::InvalidModel(format!("variance must be positive, got {var}")));
                }
                Kind::Isotropic { var }
            }
            Covariance::Full(c) => {
                if c.nrows() != d || c.ncols() != d {
                    return Err(Error::Dimension { expected: d, got: c.nrows() });
                }
                if (&c - c.transpose()).amax() > 1e-10 * c.amax().max(1.0) {
                    return Err(Error::InvalidModel("covariance is not symmetric".into()));
                }
                let chol = c
                    .clone()
                    .cholesky()
                    .ok_or_else(|| Error::InvalidModel("covariance is not positive definite".into()))?;
                let l = chol.l();
                let log_det = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
                Kind::Full { precision: chol.inverse(), chol: l, log_det }
            }
        };
        Ok(Self { mean, kind })
    }

    pub fn standard(d: usize) -> Self {
        Self { mean: vec![0.0; d], kind: Kind::Isotropic { var: 1.0 } }
    }

    pub fn isotropic(mean: Vec<f64>, var: f64) -> Result<Self> {
        Self::new(mean, Covariance::Scalar(var))
    }

    /// Diagonal covariance.
    pub fn diagonal(mean: Vec<f64>, vars: &[f64]) -> Result<Self> {
        let c = DMatrix::from_diagonal(&DVector::from_column_slice(vars));
        Self::new(mean, Covariance::Full(c))
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        match &self.kind {
            Kind::Isotropic { var } => DMatrix::identity(self.dim(), self.dim()) * *var,
            Kind::Full { chol, .. } => chol * chol.transpose(),
        }
    }

    pub(crate) fn precision(&self) -> DMatrix<f64> {
        match &self.kind {
            Kind::Isotropic { var } => DMatrix::identity(self.dim(), self.dim()) / *var,
            Kind::Full { precision, .. } => precision.clone(),
        }
    }

    /// Log density including the normalizer.
    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let d = self.dim() as f64;
        let (quad, log_det) = match &self.kind {
            Kind::Isotropic { var } => {
                let q: f64 = x.iter().zip(&self.mean).map(|(a, m)| (a - m).powi(2)).sum();
                (q / var, d * var.ln())
            }
            Kind::Full { precision, log_det, .. } => {
                let r = DVector::from_iterator(x.len(), x.iter().zip(&self.mean).map(|(a, m)| a - m));
                ((r.transpose() * precision * &r)[0], *log_det)
            }
        };
        -0.5 * (quad + log_det + d * (2.0 * std::f64::consts::PI).ln())
    }

    pub(crate) fn draw_into(&self, rng: &mut Rng, out: &mut [f64]) {
        match &self.kind {
            Kind::Isotropic { var } => {
                let s = var.sqrt();
                for (o, m) in out.iter_mut().zip(&self.mean) {
                    let z: f64 = rng.sample(StandardNormal);
                    *o = m + s * z;
                }
            }
            Kind::Full { chol, .. } => {
                let d = self.dim();
                let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                for i in 0..d {
                    let mut acc = self.mean[i];
                    for j in 0..=i {
                        acc += chol[(i, j)] * z[j];
                    }
                    out[i] = acc;
                }
            }
        }
    }
}

impl ScoredModel for Gaussian {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn score_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            Kind::Isotropic { var } => {
                for ((o, a), m) in out.iter_mut().zip(x).zip(&self.mean) {
                    *o = (m - a) / var;
                }
            }
            Kind::Full { precision, .. } => {
                let d = self.dim();
                for i in 0..d {
                    let mut acc = 0.0;
                    for j in 0..d {
                        acc -= precision[(i, j)] * (x[j] - self.mean[j]);
                    }
                    out[i] = acc;
                }
            }
        }
    }

    fn log_density_unnorm(&self, x: &[f64]) -> Option<f64> {
        Some(self.log_pdf(x))
    }
}
