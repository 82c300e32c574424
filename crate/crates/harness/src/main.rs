use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fssd_core::bahadur::SlopeConfig;
use fssd_core::optimize::{optimize_locations, OptimizerConfig};
use fssd_core::testing::{fssd_test, DEFAULT_BOOTSTRAP, DEFAULT_NULL_DRAWS};
use fssd_core::TestLocations;
use fssd_harness::bench::{write_rows_csv, write_runtime_csv};
use fssd_harness::slope::{default_mu_grid, slope_grid, slope_row, write_slope_csv};
use fssd_harness::surface::write_surface_csv;
use fssd_harness::{
    ingest_csv, run_benchmark, run_method, run_power_vs_j, run_runtime_scaling, run_surface_scan, GridSpec,
    HarnessError, Method, MethodConfig, ModelConfig, RunSpec, ScanSpec,
};

#[derive(Parser)]
#[command(name = "fssd", version, about = "Linear-time kernel goodness-of-fit tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Significance level.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Fraction of the data used to optimize test locations.
    #[arg(long, default_value_t = 0.2)]
    train_fraction: f64,
    /// Number of test locations.
    #[arg(long, default_value_t = 5)]
    j: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one test on a dataset and print the result as JSON.
    Test {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = parse_method, default_value = "fssd_opt")]
        method: Method,
        /// Test locations JSON; when given, the FSSD test uses them on the full data.
        #[arg(long)]
        locations: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_NULL_DRAWS)]
        n_draws: usize,
        #[arg(long, default_value_t = DEFAULT_BOOTSTRAP)]
        n_boot: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Optimize test locations on a dataset and print them as JSON.
    Optimize {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 200)]
        max_iters: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Run a benchmark described by a RunSpec JSON file and write CSV tables.
    Benchmark {
        #[arg(long)]
        spec: PathBuf,
        /// Worker threads (all cores when omitted).
        #[arg(long)]
        workers: Option<usize>,
        /// Sweep the number of test locations instead of a single run.
        #[arg(long, value_delimiter = ',')]
        j_list: Vec<usize>,
        /// Measure runtime at these sample sizes instead of rejection rates.
        #[arg(long, value_delimiter = ',')]
        runtime_n: Vec<usize>,
        /// Include mean wall times in the rejection table.
        #[arg(long)]
        timing: bool,
        /// Overrides the spec's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Approximate Bahadur slopes for the Gaussian mean-shift problem.
    Slope {
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        mu_q: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma_q_sq: f64,
        /// FSSD test location (defaults to 2·μ_q).
        #[arg(long, allow_negative_numbers = true)]
        v: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        sigma_k_sq: f64,
        #[arg(long, default_value_t = 1.0)]
        kappa_sq: f64,
        /// Write a CSV sweep over μ_q ∈ ±[0.25, 3] and the κ² list to this file.
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "0.1,1,10,100")]
        kappa_list: Vec<f64>,
        /// Ratio v / μ_q used by the sweep.
        #[arg(long, default_value_t = 2.0)]
        v_ratio: f64,
    },
    /// Evaluate the power criterion over a grid of one test location (d ≤ 2).
    Surface {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = -4.0, allow_negative_numbers = true)]
        lo: f64,
        #[arg(long, default_value_t = 4.0, allow_negative_numbers = true)]
        hi: f64,
        /// Grid points per axis.
        #[arg(long, default_value_t = 81)]
        steps: usize,
        /// Kernel bandwidth σ² (median heuristic when omitted).
        #[arg(long)]
        bandwidth_sq: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: HarnessError| e.to_string())
}

fn sink(out: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: serde::Serialize>(value: &T, out: &Option<PathBuf>) -> fssd_harness::Result<()> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn load(model: &Path, data: &Path) -> fssd_harness::Result<(fssd_harness::Model, fssd_core::Sample)> {
    let model = ModelConfig::from_path(model)?.build()?;
    let d = model.as_scored().dim();
    Ok((model, ingest_csv(data, Some(d))?))
}

fn run(cli: Cli) -> fssd_harness::Result<()> {
    match cli.command {
        Command::Test { model, data, method, locations, n_draws, n_boot, common } => {
            let (model, sample) = load(&model, &data)?;
            let result = match (&locations, method) {
                (Some(path), Method::FssdOpt | Method::FssdRand) => {
                    let locs: TestLocations = serde_json::from_str(&std::fs::read_to_string(path)?)?;
                    fssd_test(model.as_scored(), &sample, &locs, common.alpha, n_draws, common.seed)?
                }
                (Some(_), _) => return Err(HarnessError::Config("--locations applies to FSSD methods only".into())),
                (None, _) => {
                    let cfg = MethodConfig {
                        alpha: common.alpha,
                        j: common.j,
                        train_fraction: common.train_fraction,
                        n_draws,
                        n_boot,
                        optimizer: OptimizerConfig { train_fraction: common.train_fraction, ..Default::default() },
                    };
                    run_method(method, model.as_scored(), &sample, &cfg, common.seed)?.result
                }
            };
            write_json(&result, &common.out)
        }
        Command::Optimize { model, data, max_iters, common } => {
            let (model, sample) = load(&model, &data)?;
            let cfg = OptimizerConfig {
                max_iters,
                train_fraction: common.train_fraction,
                seed: common.seed,
                ..Default::default()
            };
            let locs = optimize_locations(model.as_scored(), &sample, common.j, &cfg)?;
            write_json(&locs, &common.out)
        }
        Command::Benchmark { spec, workers, j_list, runtime_n, timing, seed, out } => {
            let mut spec: RunSpec = serde_json::from_str(&std::fs::read_to_string(&spec)?)?;
            if let Some(s) = seed {
                spec.master_seed = s;
            }
            std::fs::create_dir_all(&out)?;
            let methods: Vec<&str> = spec.methods.iter().map(|m| m.name()).collect();
            let stem = format!("{}_{}_n{}_d{}_seed{}", spec.problem.name(), methods.join("-"), spec.n, spec.d, spec.master_seed);
            if !runtime_n.is_empty() {
                let rows = run_runtime_scaling(&spec, &runtime_n)?;
                write_runtime_csv(&rows, File::create(out.join(format!("{stem}_runtime.csv")))?)?;
                return Ok(());
            }
            let (result, stem) = if j_list.is_empty() {
                (run_benchmark(&spec, workers)?, stem)
            } else {
                (run_power_vs_j(&spec, &j_list, workers)?, format!("{stem}_power_vs_j"))
            };
            write_rows_csv(&result.rows, File::create(out.join(format!("{stem}.csv")))?, timing)?;
            let records = File::create(out.join(format!("{stem}_trials.json")))?;
            serde_json::to_writer_pretty(records, &result.records)?;
            Ok(())
        }
        Command::Slope { mu_q, sigma_q_sq, v, sigma_k_sq, kappa_sq, grid, kappa_list, v_ratio } => match grid {
            Some(path) => {
                let rows = slope_grid(&default_mu_grid(), &kappa_list, v_ratio, sigma_k_sq, sigma_q_sq)?;
                write_slope_csv(&rows, File::create(path)?)
            }
            None => {
                let cfg = SlopeConfig { mu_q, sigma_q_sq, v: v.unwrap_or(2.0 * mu_q), sigma_k_sq, kappa_sq };
                write_json(&slope_row(cfg)?, &None)
            }
        },
        Command::Surface { model, data, lo, hi, steps, bandwidth_sq, out } => {
            let (model, sample) = load(&model, &data)?;
            let d = sample.dim();
            if d > 2 {
                return Err(HarnessError::UnsupportedScan(d));
            }
            let scan = ScanSpec { bandwidth_sq, ..ScanSpec::new(GridSpec::uniform(d, lo, hi, steps)) };
            let surface = run_surface_scan(model.as_scored(), &sample, &scan)?;
            write_surface_csv(&surface, sink(&out)?)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
