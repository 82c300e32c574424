//! Sweeps of the Gaussian mean-shift slopes and efficiency.

use std::io::Write;

use fssd_core::bahadur::{efficiency_gauss, fssd_slope_gauss, lks_slope_gauss, SlopeConfig};
use fssd_core::Error;
use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeRow {
    #[serde(flatten)]
    pub config: SlopeConfig,
    pub c_fssd: f64,
    pub c_lks: f64,
    /// NaN when both slopes vanish.
    pub efficiency: f64,
}

pub fn slope_row(config: SlopeConfig) -> Result<SlopeRow> {
    config.validate()?;
    let c_fssd = fssd_slope_gauss(&config)?;
    let c_lks = lks_slope_gauss(config.mu_q, config.sigma_q_sq, config.kappa_sq)?;
    let efficiency = match efficiency_gauss(&config) {
        Ok(e) => e,
        Err(Error::UndefinedEfficiency) => f64::NAN,
        Err(e) => return Err(e.into()),
    };
    Ok(SlopeRow { config, c_fssd, c_lks, efficiency })
}

/// `μ_q ∈ ±[0.25, 3]` in steps of 0.05.
pub fn default_mu_grid() -> Vec<f64> {
    let pos: Vec<f64> = (5..=60).map(|k| k as f64 * 0.05).collect();
    pos.iter().rev().map(|m| -m).chain(pos.iter().copied()).collect()
}

/// All combinations of `mu_list × kappa_list` with `v = v_ratio · μ_q`.
pub fn slope_grid(
    mu_list: &[f64],
    kappa_list: &[f64],
    v_ratio: f64,
    sigma_k_sq: f64,
    sigma_q_sq: f64,
) -> Result<Vec<SlopeRow>> {
    let mut rows = Vec::with_capacity(mu_list.len() * kappa_list.len());
    for &mu_q in mu_list {
        for &kappa_sq in kappa_list {
            rows.push(slope_row(SlopeConfig { mu_q, sigma_q_sq, v: v_ratio * mu_q, sigma_k_sq, kappa_sq })?);
        }
    }
    Ok(rows)
}

pub fn write_slope_csv<W: Write>(rows: &[SlopeRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["mu_q", "sigma_q_sq", "v", "sigma_k_sq", "kappa_sq", "c_fssd", "c_lks", "efficiency"])?;
    for r in rows {
        let c = &r.config;
        w.write_record(
            [c.mu_q, c.sigma_q_sq, c.v, c.sigma_k_sq, c.kappa_sq, r.c_fssd, r.c_lks, r.efficiency].map(|x| x.to_string()),
        )?;
    }
    w.flush()?;
    Ok(())
}
