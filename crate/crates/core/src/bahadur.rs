//! Closed-form approximate Bahadur slopes for `p = N(0, 1)`, `q = N(μ_q, σ_q²)`
//! with one FSSD test location `v`, and the relative efficiency of the FSSD
//! test over the linear-time KSD test.
//!
//! Every expression is assembled in log-space; `e^{v²/(σ_k²+2)}` and similar
//! factors overflow long before the slopes themselves do.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeConfig {
    pub mu_q: f64,
    pub sigma_q_sq: f64,
    /// FSSD test location.
    pub v: f64,
    /// FSSD kernel bandwidth.
    pub sigma_k_sq: f64,
    /// LKS kernel bandwidth.
    pub kappa_sq: f64,
}

impl SlopeConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {x}")))
            }
        };
        pos("sigma_q_sq", self.sigma_q_sq)?;
        pos("sigma_k_sq", self.sigma_k_sq)?;
        pos("kappa_sq", self.kappa_sq)?;
        if !(self.mu_q.is_finite() && self.v.is_finite()) {
            return Err(Error::Config("mu_q and v must be finite".into()));
        }
        Ok(())
    }
}

/// `ln(s³ + 4s² + (v² + 5)s + 2)` for `s = σ_k²`.
fn ln_fssd_poly(s: f64, v: f64) -> f64 {
    ((s * s * s) + 4.0 * s * s + (v * v + 5.0) * s + 2.0).ln()
}

/// `ln(t⁴ + 8t³ + 21t² + 20t + 12)` for `t = κ²`.
fn ln_lks_poly(t: f64) -> f64 {
    if t > 1.0 {
        let u = 1.0 / t;
        4.0 * t.ln() + (1.0 + u * (8.0 + u * (21.0 + u * (20.0 + 12.0 * u)))).ln()
    } else {
        (12.0 + t * (20.0 + t * (21.0 + t * (8.0 + t)))).ln()
    }
}

/// Population `FSSD²` for `J = 1`.
pub fn fssd2_population_gauss(cfg: &SlopeConfig) -> f64 {
    let SlopeConfig { mu_q, sigma_q_sq: sq, v, sigma_k_sq: sk, .. } = *cfg;
    let lin = (sk + 1.0) * mu_q + v * (sq - 1.0);
    if lin == 0.0 {
        return 0.0;
    }
    (sk.ln() - (v - mu_q).powi(2) / (sk + sq) + 2.0 * lin.abs().ln() - 3.0 * (sk + sq).ln()).exp()
}

/// `E_{x∼p}[ξ_p(x, v)²]`, the single eigenvalue `ω₁` of `Σ_p` when `d = J = 1`.
pub fn xi_second_moment_gauss(v: f64, sigma_k_sq: f64) -> f64 {
    let sk = sigma_k_sq;
    (-v * v / (sk + 2.0) + ln_fssd_poly(sk, v) - 0.5 * sk.ln() - 2.5 * (sk + 2.0).ln()).exp()
}

/// Approximate Bahadur slope of `n·FSSD²̂`.
pub fn fssd_slope_gauss(cfg: &SlopeConfig) -> Result<f64> {
    cfg.validate()?;
    let SlopeConfig { mu_q, sigma_q_sq: sq, v, sigma_k_sq: sk, .. } = *cfg;
    let lin = (sk + 1.0) * mu_q + v * (sq - 1.0);
    if lin == 0.0 {
        return Ok(0.0);
    }
    let ln_c = 1.5 * sk.ln() + 2.5 * (sk + 2.0).ln() + v * v / (sk + 2.0) - (v - mu_q).powi(2) / (sk + sq)
        + 2.0 * lin.abs().ln()
        - 3.0 * (sk + sq).ln()
        - ln_fssd_poly(sk, v);
    Ok(ln_c.exp())
}

fn check_lks(sigma_q_sq: f64, kappa_sq: f64, mu_q: f64) -> Result<()> {
    SlopeConfig { mu_q, sigma_q_sq, v: 0.0, sigma_k_sq: 1.0, kappa_sq }.validate()
}

/// Population KSD² `S_p²(q)`.
pub fn ksd_population_gauss(mu_q: f64, sigma_q_sq: f64, kappa_sq: f64) -> Result<f64> {
    check_lks(sigma_q_sq, kappa_sq, mu_q)?;
    let (sq, t) = (sigma_q_sq, kappa_sq);
    let a = mu_q * mu_q * (t + 2.0 * sq) + (sq - 1.0).powi(2);
    Ok(a / ((t + 2.0 * sq) * (2.0 * sq / t + 1.0).sqrt()))
}

/// `E_{x,x'∼p}[h_p(x, x')²]` for the KSD kernel with bandwidth `κ²`.
pub fn hp_second_moment_gauss(kappa_sq: f64) -> f64 {
    let t = kappa_sq;
    ((t + 4.0) * (t * t + 4.0 * t + 5.0) * t + 12.0) / (t.powf(1.5) * (t + 4.0).powf(2.5))
}

/// Approximate Bahadur slope of `√n·Ŝ_l²`.
pub fn lks_slope_gauss(mu_q: f64, sigma_q_sq: f64, kappa_sq: f64) -> Result<f64> {
    check_lks(sigma_q_sq, kappa_sq, mu_q)?;
    let (sq, t) = (sigma_q_sq, kappa_sq);
    let a = mu_q * mu_q * (t + 2.0 * sq) + (sq - 1.0).powi(2);
    if a == 0.0 {
        return Ok(0.0);
    }
    let ln_c = 2.5 * t.ln() + 2.5 * (t + 4.0).ln() + 2.0 * a.ln()
        - std::f64::consts::LN_2
        - ln_lks_poly(t)
        - 3.0 * (t + 2.0 * sq).ln();
    Ok(ln_c.exp())
}

/// Efficiency `E₁ = c^(FSSD) / c^(LKS)`.
pub fn efficiency_gauss(cfg: &SlopeConfig) -> Result<f64> {
    let lks = lks_slope_gauss(cfg.mu_q, cfg.sigma_q_sq, cfg.kappa_sq)?;
    if lks == 0.0 {
        return Err(Error::UndefinedEfficiency);
    }
    Ok(fssd_slope_gauss(cfg)? / lks)
}

/// Lower bound `g(μ) = 9√3 e^{5μ²/6} / (μ²(4μ² + 12))` on the efficiency with
/// `σ_q² = 1`, `σ_k² = 1` and `v = 2μ`, valid for every `κ²`.
pub fn efficiency_lower_bound(mu_q: f64) -> Result<f64> {
    if mu_q == 0.0 || !mu_q.is_finite() {
        return Err(Error::UndefinedEfficiency);
    }
    let m2 = mu_q * mu_q;
    Ok(9.0 * 3f64.sqrt() * (5.0 * m2 / 6.0 - (m2 * (4.0 * m2 + 12.0)).ln()).exp())
}

/// Minimizer `±√(3(√41 − 1)/10)` of [`efficiency_lower_bound`] and the minimum value.
pub fn efficiency_lower_bound_minimum() -> (f64, f64) {
    let r = 41f64.sqrt();
    let mu = (0.3 * (r - 1.0)).sqrt();
    let g = 25.0 * 3f64.sqrt() * ((r - 1.0) / 4.0).exp() / (8.0 * (r + 4.0));
    (mu, g)
}
