//! Benchmark problems and the run specification.

use fssd_core::models::{sample_rbm_gibbs, Distribution, Gaussian, Gmm, GmmParams, LaplaceProduct, Rbm, RbmParams};
use fssd_core::rng::{derive_seed, rng};
use fssd_core::testing::{DEFAULT_BOOTSTRAP, DEFAULT_NULL_DRAWS};
use fssd_core::Sample;
use rand::Rng;
use rand_distr::{Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::Model;
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    /// `p = q = N(0, I)`.
    SameGauss,
    /// `p = N(0, I)`, `q` a product of unit-variance Laplace marginals.
    GaussVsLaplace,
    /// `p = N(0, I)`, `q = N(μ_q e₁, I)`.
    GaussMeanShift,
    /// `p = N(0, I)`, `q = N(0, diag(var_q, 1, …, 1))`.
    GaussVarDiff,
    /// `p = N(0, I)`, `q = (1−w) N(0, I) + w N(0, s² I)`.
    GmmVsGauss,
    /// `p` a random RBM, `q` the same RBM with every weight perturbed.
    RbmPerturbAll,
    /// `p` a random RBM, `q` the same RBM with `B₁₁` perturbed.
    RbmPerturbOne,
}

impl Problem {
    pub fn name(self) -> &'static str {
        match self {
            Problem::SameGauss => "same_gauss",
            Problem::GaussVsLaplace => "gauss_vs_laplace",
            Problem::GaussMeanShift => "gauss_mean_shift",
            Problem::GaussVarDiff => "gauss_var_diff",
            Problem::GmmVsGauss => "gmm_vs_gauss",
            Problem::RbmPerturbAll => "rbm_perturb_all",
            Problem::RbmPerturbOne => "rbm_perturb_one",
        }
    }

    pub fn is_rbm(self) -> bool {
        matches!(self, Problem::RbmPerturbAll | Problem::RbmPerturbOne)
    }

    /// Name and value of the parameter that indexes this problem's curves.
    pub fn key_parameter(self, spec: &RunSpec) -> (&'static str, f64) {
        let pp = &spec.problem_params;
        match self {
            Problem::GaussMeanShift => ("mu_q", pp.mu_q),
            Problem::GaussVarDiff => ("var_q", pp.var_q),
            Problem::GmmVsGauss => ("mixture_weight", pp.mixture_weight),
            Problem::RbmPerturbAll => ("sigma_per", pp.sigma_per),
            Problem::RbmPerturbOne => ("sigma_per", pp.sigma_per_one),
            Problem::SameGauss | Problem::GaussVsLaplace => ("d", spec.d as f64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    FssdOpt,
    FssdRand,
    Ksd,
    Lks,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::FssdOpt, Method::FssdRand, Method::Ksd, Method::Lks];

    pub fn name(self) -> &'static str {
        match self {
            Method::FssdOpt => "fssd_opt",
            Method::FssdRand => "fssd_rand",
            Method::Ksd => "ksd",
            Method::Lks => "lks",
        }
    }

    pub(crate) fn stream(self) -> u64 {
        match self {
            Method::FssdOpt => 10,
            Method::FssdRand => 11,
            Method::Ksd => 12,
            Method::Lks => 13,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProblemParams {
    pub mu_q: f64,
    pub var_q: f64,
    pub mixture_weight: f64,
    pub mixture_var: f64,
    pub d_h: usize,
    pub sigma_per: f64,
    /// Standard deviation of the single-entry perturbation.
    pub sigma_per_one: f64,
    pub burn_in: usize,
}

impl Default for ProblemParams {
    fn default() -> Self {
        Self {
            mu_q: 1.0,
            var_q: 2.0,
            mixture_weight: 0.1,
            mixture_var: 0.01,
            d_h: 10,
            sigma_per: 0.0,
            sigma_per_one: 0.1,
            burn_in: 2000,
        }
    }
}

fn default_alpha() -> f64 {
    0.05
}
fn default_j() -> usize {
    5
}
fn default_train_fraction() -> f64 {
    0.2
}
fn default_n_draws() -> usize {
    DEFAULT_NULL_DRAWS
}
fn default_n_boot() -> usize {
    DEFAULT_BOOTSTRAP
}

/// One benchmark experiment: a problem, the tests to run, and the trial protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub problem: Problem,
    pub methods: Vec<Method>,
    pub n: usize,
    pub d: usize,
    pub trials: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_j", alias = "J")]
    pub j: usize,
    #[serde(default)]
    pub problem_params: ProblemParams,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_n_draws")]
    pub n_draws: usize,
    #[serde(default = "default_n_boot")]
    pub n_boot: usize,
}

impl RunSpec {
    pub fn new(problem: Problem, methods: Vec<Method>, n: usize, d: usize, trials: usize) -> Self {
        Self {
            problem,
            methods,
            n,
            d,
            trials,
            alpha: default_alpha(),
            j: default_j(),
            problem_params: ProblemParams::default(),
            master_seed: 0,
            train_fraction: default_train_fraction(),
            n_draws: default_n_draws(),
            n_boot: default_n_boot(),
        }
    }

    /// Checks every field and reports all offending ones together.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let pp = &self.problem_params;
        if self.trials == 0 {
            bad.push("trials must be at least 1".to_string());
        }
        if self.methods.is_empty() {
            bad.push("methods must be non-empty".to_string());
        }
        if self.d == 0 {
            bad.push("d must be at least 1".to_string());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            bad.push(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.j == 0 {
            bad.push("J must be at least 1".to_string());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            bad.push(format!("train_fraction must lie in (0, 1), got {}", self.train_fraction));
        }
        if self.n_draws < 100 {
            bad.push(format!("n_draws must be at least 100, got {}", self.n_draws));
        }
        if self.n_boot == 0 && self.methods.contains(&Method::Ksd) {
            bad.push("n_boot must be at least 1".to_string());
        }
        let need_n = if self.methods.contains(&Method::FssdOpt) {
            // training split needs 2J points and the test split at least 2
            let train = (self.n as f64 * self.train_fraction).round() as usize;
            if train < 2 * self.j || self.n < train + 2 {
                bad.push(format!(
                    "n = {} with train_fraction {} leaves too few points to optimize {} locations",
                    self.n, self.train_fraction, self.j
                ));
            }
            4
        } else if self.methods.contains(&Method::Lks) {
            4
        } else {
            2
        };
        if self.n < need_n {
            bad.push(format!("n must be at least {need_n}, got {}", self.n));
        }
        match self.problem {
            Problem::GaussMeanShift if !pp.mu_q.is_finite() => bad.push("mu_q must be finite".into()),
            Problem::GaussVarDiff if !(pp.var_q > 0.0 && pp.var_q.is_finite()) => {
                bad.push(format!("var_q must be positive, got {}", pp.var_q))
            }
            Problem::GmmVsGauss => {
                if !(0.0..=1.0).contains(&pp.mixture_weight) {
                    bad.push(format!("mixture_weight must lie in [0, 1], got {}", pp.mixture_weight));
                }
                if !(pp.mixture_var > 0.0 && pp.mixture_var.is_finite()) {
                    bad.push(format!("mixture_var must be positive, got {}", pp.mixture_var));
                }
            }
            Problem::RbmPerturbAll | Problem::RbmPerturbOne => {
                if pp.d_h == 0 {
                    bad.push("d_h must be at least 1".into());
                }
                if !(pp.sigma_per >= 0.0 && pp.sigma_per.is_finite()) {
                    bad.push(format!("sigma_per must be nonnegative, got {}", pp.sigma_per));
                }
                if !(pp.sigma_per_one >= 0.0 && pp.sigma_per_one.is_finite()) {
                    bad.push(format!("sigma_per_one must be nonnegative, got {}", pp.sigma_per_one));
                }
            }
            _ => {}
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Config(bad.join("; ")))
        }
    }
}

/// The model `p` and a fresh sample from `q` for one trial.
pub struct Instance {
    pub model: Model,
    pub sample: Sample,
}

/// Draws the trial's model and data. Everything is a function of `trial_seed`.
pub fn draw_instance(spec: &RunSpec, trial_seed: u64) -> Result<Instance> {
    let d = spec.d;
    let pp = &spec.problem_params;
    let data_seed = derive_seed(trial_seed, 0);
    let standard = || Model::Direct(Distribution::Gauss(Gaussian::standard(d)));
    let direct = |q: Distribution| -> Result<Instance> {
        Ok(Instance { model: standard(), sample: q.sample(spec.n, data_seed)?.with_seed(data_seed) })
    };
    match spec.problem {
        Problem::SameGauss => direct(Distribution::Gauss(Gaussian::standard(d))),
        Problem::GaussVsLaplace => direct(Distribution::LaplaceProduct(LaplaceProduct::unit_variance(d))),
        Problem::GaussMeanShift => {
            let mut mean = vec![0.0; d];
            mean[0] = pp.mu_q;
            direct(Distribution::Gauss(Gaussian::isotropic(mean, 1.0)?))
        }
        Problem::GaussVarDiff => {
            let mut vars = vec![1.0; d];
            vars[0] = pp.var_q;
            direct(Distribution::Gauss(Gaussian::diagonal(vec![0.0; d], &vars)?))
        }
        Problem::GmmVsGauss => {
            let cov = |s: f64| (0..d).map(|i| (0..d).map(|j| if i == j { s } else { 0.0 }).collect()).collect();
            let gmm = Gmm::new(GmmParams {
                weights: vec![1.0 - pp.mixture_weight, pp.mixture_weight],
                means: vec![vec![0.0; d]; 2],
                covariances: vec![cov(1.0), cov(pp.mixture_var)],
            })?;
            direct(Distribution::Gmm(gmm))
        }
        Problem::RbmPerturbAll | Problem::RbmPerturbOne => {
            let p = random_rbm(d, pp.d_h, derive_seed(trial_seed, 1));
            let mut r = rng(derive_seed(trial_seed, 2));
            let mut q = p.clone();
            if spec.problem == Problem::RbmPerturbAll {
                if pp.sigma_per > 0.0 {
                    let noise = Normal::new(0.0, pp.sigma_per).expect("validated");
                    for row in &mut q.weights {
                        for w in row.iter_mut() {
                            *w += r.sample(noise);
                        }
                    }
                }
            } else if pp.sigma_per_one > 0.0 {
                q.weights[0][0] += pp.sigma_per_one * r.sample::<f64, _>(StandardNormal);
            }
            let q = Rbm::new(q)?;
            let sample = sample_rbm_gibbs(&q, spec.n, pp.burn_in, data_seed)?.with_seed(data_seed);
            Ok(Instance { model: Model::Rbm(Rbm::new(p)?), sample })
        }
    }
}

/// RBM parameters with `B` entries in `{±1}` and standard normal biases.
pub fn random_rbm(d: usize, d_h: usize, seed: u64) -> RbmParams {
    let mut r = rng(seed);
    let weights = (0..d)
        .map(|_| (0..d_h).map(|_| if r.random::<bool>() { 1.0 } else { -1.0 }).collect())
        .collect();
    let b = (0..d).map(|_| r.sample(StandardNormal)).collect();
    let c = (0..d_h).map(|_| r.sample(StandardNormal)).collect();
    RbmParams { weights, b, c }
}
