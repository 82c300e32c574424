//! JSON model documents: `{"type": ..., "params": {...}}`.

use std::path::Path;

use fssd_core::models::{Covariance, Distribution, Gaussian, Gmm, GmmParams, LaplaceProduct, Rbm, RbmParams, ScoredModel};
use fssd_core::nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CovarianceConfig {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussConfig {
    pub mean: Vec<f64>,
    #[serde(default = "unit_cov")]
    pub cov: CovarianceConfig,
}

fn unit_cov() -> CovarianceConfig {
    CovarianceConfig::Scalar(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceConfig {
    pub loc: Vec<f64>,
    #[serde(default = "unit_variance_scale")]
    pub scale: f64,
}

fn unit_variance_scale() -> f64 {
    std::f64::consts::FRAC_1_SQRT_2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "params", rename_all = "snake_case")]
pub enum ModelConfig {
    Gauss(GaussConfig),
    LaplaceProduct(LaplaceConfig),
    Gmm(GmmParams),
    Rbm(RbmParams),
}

/// A model built from a [`ModelConfig`].
#[derive(Debug, Clone)]
pub enum Model {
    Direct(Distribution),
    Rbm(Rbm),
}

impl Model {
    pub fn as_scored(&self) -> &dyn ScoredModel {
        match self {
            Model::Direct(d) => d.as_model(),
            Model::Rbm(r) => r,
        }
    }
}

impl ModelConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn build(&self) -> Result<Model> {
        Ok(match self {
            ModelConfig::Gauss(g) => {
                let cov = match &g.cov {
                    CovarianceConfig::Scalar(v) => Covariance::Scalar(*v),
                    CovarianceConfig::Matrix(rows) => Covariance::Full(matrix(rows, g.mean.len())?),
                };
                Model::Direct(Distribution::Gauss(Gaussian::new(g.mean.clone(), cov)?))
            }
            ModelConfig::LaplaceProduct(l) => {
                Model::Direct(Distribution::LaplaceProduct(LaplaceProduct::new(l.loc.clone(), l.scale)?))
            }
            ModelConfig::Gmm(p) => Model::Direct(Distribution::Gmm(Gmm::new(p.clone())?)),
            ModelConfig::Rbm(p) => Model::Rbm(Rbm::new(p.clone())?),
        })
    }
}

fn matrix(rows: &[Vec<f64>], d: usize) -> Result<DMatrix<f64>> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(HarnessError::Config(format!("covariance must be {d}x{d}")));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}
