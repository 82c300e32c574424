//! Trial protocol, aggregation, and CSV output for benchmark runs.

use std::io::Write;
use std::time::Instant;

use fssd_core::kernel::GaussKernel;
use fssd_core::optimize::{optimize_locations, random_locations, split, OptimizerConfig};
use fssd_core::rng::derive_seed;
use fssd_core::testing::{fssd_test, ksd_test, lks_test};
use fssd_core::{Sample, ScoredModel, TestResult};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::problems::{draw_instance, Method, RunSpec};

/// Settings shared by all test methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub alpha: f64,
    pub j: usize,
    pub train_fraction: f64,
    pub n_draws: usize,
    pub n_boot: usize,
    pub optimizer: OptimizerConfig,
}

impl MethodConfig {
    pub fn from_spec(spec: &RunSpec) -> Self {
        Self {
            alpha: spec.alpha,
            j: spec.j,
            train_fraction: spec.train_fraction,
            n_draws: spec.n_draws,
            n_boot: spec.n_boot,
            optimizer: OptimizerConfig { train_fraction: spec.train_fraction, ..Default::default() },
        }
    }
}

/// A test result plus the time spent optimizing locations (zero for other methods).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub result: TestResult,
    pub opt_time: f64,
}

/// Runs one method on one sample.
///
/// `fssd_opt` optimizes on a training split and tests on the rest; the
/// other methods use the whole sample with the median-heuristic bandwidth.
/// The reported wall time covers everything after the data exist,
/// including optimization.
pub fn run_method(
    method: Method,
    model: &dyn ScoredModel,
    sample: &Sample,
    cfg: &MethodConfig,
    seed: u64,
) -> Result<MethodOutcome> {
    let start = Instant::now();
    let mut opt_time = 0.0;
    let mut result = match method {
        Method::FssdOpt => {
            let (train, test) = split(sample, cfg.train_fraction, derive_seed(seed, 0))?;
            let opt = OptimizerConfig { seed: derive_seed(seed, 1), ..cfg.optimizer.clone() };
            let locs = optimize_locations(model, &train, cfg.j, &opt)?;
            opt_time = start.elapsed().as_secs_f64();
            fssd_test(model, &test, &locs, cfg.alpha, cfg.n_draws, derive_seed(seed, 2))?
        }
        Method::FssdRand => {
            let locs = random_locations(sample, cfg.j, derive_seed(seed, 1))?;
            fssd_test(model, sample, &locs, cfg.alpha, cfg.n_draws, derive_seed(seed, 2))?
        }
        Method::Ksd => {
            let k = GaussKernel::from_median(sample)?;
            ksd_test(model, sample, &k, cfg.alpha, cfg.n_boot, derive_seed(seed, 2))?
        }
        Method::Lks => lks_test(model, sample, &GaussKernel::from_median(sample)?, cfg.alpha)?,
    };
    result.wall_time = start.elapsed().as_secs_f64();
    result.seeds.data = sample.seed;
    Ok(MethodOutcome { result, opt_time })
}

/// Outcome of one method in one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub problem: String,
    pub method: Method,
    pub trial: usize,
    pub trial_seed: u64,
    pub n: usize,
    pub reject: bool,
    pub statistic: f64,
    pub threshold: f64,
    pub p_value: f64,
    pub wall_time: f64,
    pub opt_time: f64,
}

/// Aggregated rejections of one method at one parameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub problem: String,
    pub method: Method,
    pub parameter: String,
    pub value: f64,
    pub rejections: usize,
    pub trials: usize,
    /// Exactly `rejections / trials`.
    pub rejection_rate: f64,
    pub mean_wall_time: f64,
    pub mean_opt_time: f64,
}

#[derive(Debug, Clone, Default)]
pub struct BenchmarkOutput {
    pub rows: Vec<BenchmarkRow>,
    pub records: Vec<TrialRecord>,
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start worker pool: {e}")))
}

fn run_trials(spec: &RunSpec, workers: Option<usize>) -> Result<Vec<TrialRecord>> {
    spec.validate()?;
    let cfg = MethodConfig::from_spec(spec);
    let per_trial = pool(workers)?.install(|| {
        (0..spec.trials)
            .into_par_iter()
            .map(|t| -> Result<Vec<TrialRecord>> {
                let trial_seed = derive_seed(spec.master_seed, t as u64);
                let inst = draw_instance(spec, trial_seed)?;
                spec.methods
                    .iter()
                    .map(|&m| {
                        let out =
                            run_method(m, inst.model.as_scored(), &inst.sample, &cfg, derive_seed(trial_seed, m.stream()))?;
                        Ok(TrialRecord {
                            problem: spec.problem.name().to_string(),
                            method: m,
                            trial: t,
                            trial_seed,
                            n: out.result.n,
                            reject: out.result.reject,
                            statistic: out.result.statistic,
                            threshold: out.result.threshold,
                            p_value: out.result.p_value,
                            wall_time: out.result.wall_time,
                            opt_time: out.opt_time,
                        })
                    })
                    .collect()
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(per_trial.into_iter().flatten().collect())
}

fn aggregate(spec: &RunSpec, parameter: &str, value: f64, records: &[TrialRecord]) -> Vec<BenchmarkRow> {
    spec.methods
        .iter()
        .map(|&m| {
            let mine: Vec<&TrialRecord> = records.iter().filter(|r| r.method == m).collect();
            let trials = mine.len();
            let rejections = mine.iter().filter(|r| r.reject).count();
            let mean = |f: fn(&TrialRecord) -> f64| mine.iter().map(|r| f(r)).sum::<f64>() / trials as f64;
            BenchmarkRow {
                problem: spec.problem.name().to_string(),
                method: m,
                parameter: parameter.to_string(),
                value,
                rejections,
                trials,
                rejection_rate: rejections as f64 / trials as f64,
                mean_wall_time: mean(|r| r.wall_time),
                mean_opt_time: mean(|r| r.opt_time),
            }
        })
        .collect()
}

/// Runs every trial of `spec` on `workers` threads (all cores when `None`).
///
/// Trial `t` uses the seed `derive_seed(master_seed, t)`, so decisions do not
/// depend on the number of workers.
pub fn run_benchmark(spec: &RunSpec, workers: Option<usize>) -> Result<BenchmarkOutput> {
    let records = run_trials(spec, workers)?;
    let (name, value) = spec.problem.key_parameter(spec);
    Ok(BenchmarkOutput { rows: aggregate(spec, name, value, &records), records })
}

/// One benchmark per entry of `j_list`, with an even train/test split.
pub fn run_power_vs_j(spec: &RunSpec, j_list: &[usize], workers: Option<usize>) -> Result<BenchmarkOutput> {
    if j_list.is_empty() {
        return Err(HarnessError::Config("J list must be non-empty".into()));
    }
    let mut out = BenchmarkOutput::default();
    for &j in j_list {
        let s = RunSpec { j, train_fraction: 0.5, ..spec.clone() };
        let records = run_trials(&s, workers)?;
        out.rows.extend(aggregate(&s, "J", j as f64, &records));
        out.records.extend(records);
    }
    Ok(out)
}

/// Median per-test wall time of each method at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeRow {
    pub problem: String,
    pub method: Method,
    pub n: usize,
    pub trials: usize,
    pub median_wall_time: f64,
    pub median_opt_time: f64,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len();
    if m % 2 == 1 {
        xs[m / 2]
    } else {
        0.5 * (xs[m / 2 - 1] + xs[m / 2])
    }
}

/// Wall time per test against `n`, one test at a time on a single thread.
///
/// Data generation is excluded; optimization is included for `fssd_opt`.
pub fn run_runtime_scaling(spec: &RunSpec, n_list: &[usize]) -> Result<Vec<RuntimeRow>> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HarnessError::Config("n list must be non-empty and increasing".into()));
    }
    let mut rows = Vec::new();
    for &n in n_list {
        let s = RunSpec { n, ..spec.clone() };
        let records = run_trials(&s, Some(1))?;
        for &m in &s.methods {
            let mine: Vec<&TrialRecord> = records.iter().filter(|r| r.method == m).collect();
            rows.push(RuntimeRow {
                problem: s.problem.name().to_string(),
                method: m,
                n,
                trials: mine.len(),
                median_wall_time: median(mine.iter().map(|r| r.wall_time).collect()),
                median_opt_time: median(mine.iter().map(|r| r.opt_time).collect()),
            });
        }
    }
    Ok(rows)
}

/// Writes benchmark rows as CSV. Timing columns are optional because they
/// are the only part of a run that is not reproducible.
pub fn write_rows_csv<W: Write>(rows: &[BenchmarkRow], out: W, timing: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["problem", "method", "parameter", "value", "rejections", "trials", "rejection_rate"];
    if timing {
        header.extend(["mean_wall_time", "mean_opt_time"]);
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.problem.clone(),
            r.method.name().to_string(),
            r.parameter.clone(),
            r.value.to_string(),
            r.rejections.to_string(),
            r.trials.to_string(),
            r.rejection_rate.to_string(),
        ];
        if timing {
            rec.push(r.mean_wall_time.to_string());
            rec.push(r.mean_opt_time.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_runtime_csv<W: Write>(rows: &[RuntimeRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["problem", "method", "n", "trials", "median_wall_time", "median_opt_time"])?;
    for r in rows {
        w.write_record([
            r.problem.clone(),
            r.method.name().to_string(),
            r.n.to_string(),
            r.trials.to_string(),
            r.median_wall_time.to_string(),
            r.median_opt_time.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
