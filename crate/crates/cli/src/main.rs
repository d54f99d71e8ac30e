//! `bayescoint` command-line front end.
//!
//! Exit status: 0 on success, 2 for data or configuration errors, 3 for
//! numerical failures.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use bayescoint::ar1::{ar1_test, phi_posterior, PhiGrid};
use bayescoint::arp::{gibbs_run, McmcConfig};
use bayescoint::classical::engle_granger_test;
use bayescoint::datagen::{generate_indexed, GenConfig, OrderChoice};
use bayescoint::harness::{
    order_study_settings, residual_posterior_summary, run_order_study, run_roc_study,
    save_roc_study, write_order_rows, write_order_trials, StudySettings, DESK_ORDER_TRIALS,
    DESK_ROC_TRIALS, FULL_ORDER_TRIALS, FULL_ROC_TRIALS,
};
use bayescoint::io::{
    format_f64, load_csv, load_draws, save_dataset, save_draws, save_phi_posterior, save_truth,
    write_atomic, write_result_kv,
};
use bayescoint::order::{rjmcmc_test, Conditioning, RjConfig};
use bayescoint::{Error, Method, RegressionSpec, TestResult};

#[derive(Parser, Debug)]
#[command(
    name = "bayescoint",
    version,
    about = "Bayesian residual-based cointegration tests"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a cointegration test on a CSV file.
    Test(TestArgs),
    /// Write a synthetic instance and its ground truth.
    Simulate(SimulateArgs),
    /// ROC study of the tests on synthetic instances.
    BenchRoc(BenchRocArgs),
    /// Order-recovery study of the reversible-jump sampler.
    BenchOrder(BenchOrderArgs),
    /// Summarise a draws file, optionally with residual bands.
    Summarize(SummarizeArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum MethodArg {
    Ar1Bf,
    Ar1Credible,
    Gibbs,
    Rjmcmc,
    EngleGranger,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Ar1Bf => Method::Ar1BayesFactor,
            MethodArg::Ar1Credible => Method::Ar1Credible,
            MethodArg::Gibbs => Method::GibbsFixedOrder,
            MethodArg::Rjmcmc => Method::RjMcmc,
            MethodArg::EngleGranger => Method::EngleGranger,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ConditioningArg {
    PairMax,
    Uniform,
}

/// Sampler flags shared by several commands.
#[derive(Args, Debug, Clone)]
struct McmcArgs {
    /// Total sweeps per chain.
    #[arg(long)]
    iterations: Option<usize>,
    /// Sweeps discarded at the start.
    #[arg(long)]
    burn_in: Option<usize>,
    /// Keep every n-th sweep after burn-in.
    #[arg(long, default_value_t = 1)]
    thin: usize,
    /// Random seed; `BAYESCOINT_SEED` overrides the default of 0.
    #[arg(long, env = "BAYESCOINT_SEED", default_value_t = 0)]
    seed: u64,
}

impl McmcArgs {
    fn config(&self, iterations: usize, burn_in: usize) -> McmcConfig {
        McmcConfig {
            iterations: self.iterations.unwrap_or(iterations),
            burn_in: self.burn_in.unwrap_or(burn_in),
            thin: self.thin,
            seed: self.seed,
            ..McmcConfig::default()
        }
    }
}

#[derive(Args, Debug)]
struct TestArgs {
    #[arg(long)]
    input: PathBuf,
    /// Column label of the regressand; defaults to the first numeric column.
    #[arg(long)]
    regressand: Option<String>,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Include an intercept in the cointegrating regression (default).
    #[arg(long, overrides_with = "no_intercept")]
    intercept: bool,
    #[arg(long)]
    no_intercept: bool,
    /// Residual order of the fixed-order Gibbs test.
    #[arg(long)]
    order: Option<usize>,
    /// Largest order for the reversible-jump sampler and the ADF lag search.
    #[arg(long, default_value_t = 5)]
    k_max: usize,
    /// Decision threshold; defaults to 1 for the Bayes factor, 0.05 otherwise.
    #[arg(long)]
    alpha: Option<f64>,
    /// Spread of the order proposal.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, value_enum, default_value = "pair-max")]
    conditioning: ConditioningArg,
    #[command(flatten)]
    mcmc: McmcArgs,
    /// Directory for posterior and draw files.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Series length.
    #[arg(long = "T", default_value_t = 200)]
    t: usize,
    /// Residual order.
    #[arg(long, default_value_t = 1)]
    order: usize,
    /// Draw the order uniformly from 1..=order instead.
    #[arg(long)]
    uniform_order: bool,
    #[arg(long, default_value_t = 0.5)]
    p_unit_root: f64,
    /// Instance index within the seeded stream.
    #[arg(long, default_value_t = 0)]
    index: u64,
    #[arg(long, env = "BAYESCOINT_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
    /// File stem; writes `<prefix>.csv` and `<prefix>_truth.csv`.
    #[arg(long, default_value = "instance")]
    prefix: String,
}

#[derive(Args, Debug)]
struct BenchRocArgs {
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long = "T", default_value_t = 200)]
    t: usize,
    /// Residual order of the generated instances and the Gibbs test.
    #[arg(long, default_value_t = 1)]
    order: usize,
    /// Methods to compare; defaults by order.
    #[arg(long, value_enum, value_delimiter = ',')]
    methods: Vec<MethodArg>,
    /// Use the full-scale trial count.
    #[arg(long)]
    full_scale: bool,
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    mcmc: McmcArgs,
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
}

#[derive(Args, Debug)]
struct BenchOrderArgs {
    #[arg(long)]
    trials: Option<usize>,
    /// Series lengths, comma separated.
    #[arg(long = "T", value_delimiter = ',', default_values_t = [100, 200, 500, 750, 1000])]
    t: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    k_max: usize,
    #[arg(long)]
    full_scale: bool,
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    mcmc: McmcArgs,
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
}

#[derive(Args, Debug)]
struct SummarizeArgs {
    /// Draws file written by `test`.
    #[arg(long)]
    draws: PathBuf,
    /// Data the draws came from; adds residual bands.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    regressand: Option<String>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = match cli.command {
        Command::Test(a) => run_test(a),
        Command::Simulate(a) => run_simulate(a),
        Command::BenchRoc(a) => run_bench_roc(a),
        Command::BenchOrder(a) => run_bench_order(a),
        Command::Summarize(a) => run_summarize(a),
    };
    match out {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { 2 } else { 3 })
        }
    }
}

fn ensure_dir(dir: &Path) -> bayescoint::Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn load(path: &Path, regressand: Option<&str>) -> bayescoint::Result<bayescoint::Dataset> {
    let data = load_csv(path)?;
    match regressand {
        Some(label) => data.select_regressand(label),
        None => Ok(data),
    }
}

fn print_result(r: &TestResult) -> bayescoint::Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "method:    {}", r.method)?;
    writeln!(out, "verdict:   {}", r.verdict)?;
    writeln!(out, "statistic: {}", r.statistic)?;
    writeln!(out, "threshold: {}", r.threshold)?;
    for (k, v) in &r.diagnostics {
        writeln!(out, "  {k}: {v}")?;
    }
    writeln!(out)?;
    write_result_kv(&mut out, r)?;
    Ok(())
}

fn run_test(a: TestArgs) -> bayescoint::Result<()> {
    let data = load(&a.input, a.regressand.as_deref())?;
    let method = Method::from(a.method);
    let mut spec = RegressionSpec::new(method)
        .intercept(!a.no_intercept)
        .k_max(a.k_max);
    if let Some(k) = a.order {
        spec = spec.order(k);
    }
    if let Some(alpha) = a.alpha {
        spec = spec.alpha(alpha);
    }
    spec.validate()?;
    let mcmc = a.mcmc.config(25_000, 5_000);
    if let Some(dir) = &a.output_dir {
        ensure_dir(dir)?;
    }
    let result = match method {
        Method::Ar1BayesFactor => ar1_test(&data, &spec)?,
        Method::Ar1Credible => {
            let r = ar1_test(&data, &spec)?;
            if let Some(dir) = &a.output_dir {
                let post = phi_posterior(&data, spec.intercept, &PhiGrid::default())?;
                save_phi_posterior(dir.join("phi_posterior.csv"), &post)?;
            }
            r
        }
        Method::GibbsFixedOrder => {
            let k = spec.order.unwrap_or(1);
            let draws = gibbs_run(&data, k, spec.intercept, &mcmc)?;
            if let Some(dir) = &a.output_dir {
                save_draws(dir.join("draws.csv"), &draws)?;
            }
            bayescoint::arp::gibbs_test(&data, &spec, &mcmc)?
        }
        Method::RjMcmc => {
            let rj = RjConfig {
                lambda: a.lambda,
                conditioning: match a.conditioning {
                    ConditioningArg::PairMax => Conditioning::PairMax,
                    ConditioningArg::Uniform => Conditioning::Uniform,
                },
                initial_order: spec.order,
            };
            let r = rjmcmc_test(&data, &spec, &mcmc, &rj)?;
            if let Some(dir) = &a.output_dir {
                let out = bayescoint::order::rjmcmc_run(&data, &spec, &mcmc, &rj)?;
                save_draws(dir.join("draws.csv"), &out.draws)?;
                write_atomic(dir.join("order_posterior.csv"), |w| {
                    writeln!(w, "k,mass")?;
                    for (k, m) in r.posterior.mass.iter().enumerate() {
                        writeln!(w, "{k},{}", format_f64(*m))?;
                    }
                    Ok(())
                })?;
            }
            r.result
        }
        Method::EngleGranger => engle_granger_test(&data, &spec)?,
    };
    if let Some(dir) = &a.output_dir {
        write_atomic(dir.join("result.txt"), |w| write_result_kv(w, &result))?;
    }
    print_result(&result)
}

fn run_simulate(a: SimulateArgs) -> bayescoint::Result<()> {
    let cfg = GenConfig {
        t: a.t,
        order: if a.uniform_order {
            OrderChoice::UniformUpTo(a.order)
        } else {
            OrderChoice::Fixed(a.order)
        },
        p_unit_root: a.p_unit_root,
        seed: a.seed,
        ..GenConfig::default()
    };
    let inst = generate_indexed(&cfg, a.index)?;
    ensure_dir(&a.output_dir)?;
    let data_path = a.output_dir.join(format!("{}.csv", a.prefix));
    let truth_path = a.output_dir.join(format!("{}_truth.csv", a.prefix));
    save_dataset(&data_path, &inst.data)?;
    save_truth(&truth_path, &inst)?;
    println!("label={}", inst.label);
    println!("order={}", inst.order());
    println!("data={}", data_path.display());
    println!("truth={}", truth_path.display());
    Ok(())
}

fn run_bench_roc(a: BenchRocArgs) -> bayescoint::Result<()> {
    let trials = a.trials.unwrap_or(if a.full_scale {
        FULL_ROC_TRIALS
    } else {
        DESK_ROC_TRIALS
    });
    let methods: Vec<Method> = if a.methods.is_empty() {
        if a.order == 1 {
            vec![
                Method::Ar1BayesFactor,
                Method::Ar1Credible,
                Method::EngleGranger,
            ]
        } else {
            vec![Method::GibbsFixedOrder, Method::EngleGranger]
        }
    } else {
        a.methods.iter().map(|m| Method::from(*m)).collect()
    };
    let settings = StudySettings {
        gen: GenConfig {
            t: a.t,
            order: OrderChoice::Fixed(a.order),
            seed: a.mcmc.seed,
            ..GenConfig::default()
        },
        trials,
        mcmc: a.mcmc.config(5_000, 1_000),
        gibbs_order: Some(a.order),
        workers: a.workers,
        ..StudySettings::default()
    };
    let study = run_roc_study(&settings, &methods)?;
    ensure_dir(&a.output_dir)?;
    save_roc_study(&a.output_dir, "roc", &study)?;
    for (m, c) in &study.curves {
        println!(
            "{m}: auc={} failures={}",
            format_f64(c.auc),
            study.failures[m]
        );
    }
    Ok(())
}

fn run_bench_order(a: BenchOrderArgs) -> bayescoint::Result<()> {
    let trials = a.trials.unwrap_or(if a.full_scale {
        FULL_ORDER_TRIALS
    } else {
        DESK_ORDER_TRIALS
    });
    let settings = StudySettings {
        mcmc: a.mcmc.config(25_000, 5_000),
        k_max: a.k_max,
        workers: a.workers,
        ..order_study_settings(a.mcmc.seed, trials)
    };
    let (rows, per_trial) = run_order_study(&settings, &a.t)?;
    ensure_dir(&a.output_dir)?;
    write_atomic(a.output_dir.join("order_summary.csv"), |w| {
        write_order_rows(w, &rows)
    })?;
    write_atomic(a.output_dir.join("order_trials.csv"), |w| {
        write_order_trials(w, &per_trial)
    })?;
    write_order_rows(&mut std::io::stdout().lock(), &rows)?;
    Ok(())
}

fn run_summarize(a: SummarizeArgs) -> bayescoint::Result<()> {
    let draws = load_draws(&a.draws)?;
    if draws.draws.is_empty() {
        return Err(Error::InsufficientData("draws file has no rows".into()));
    }
    let n = draws.draws.len() as f64;
    let rho = draws.rho();
    let mean = rho.iter().sum::<f64>() / n;
    let sd = (rho.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
    println!("draws={}", draws.draws.len());
    println!("rho_mean={}", format_f64(mean));
    println!("rho_sd={}", format_f64(sd));
    println!("prob_rho_ge_1={}", format_f64(draws.unit_root_fraction()));
    println!("sigma2_mean={}", format_f64(draws.mean_sigma2()));
    for (j, b) in draws.mean_beta2().iter().enumerate() {
        println!("beta2_{}_mean={}", j + 1, format_f64(*b));
    }
    let k_max = draws.draws.iter().map(|s| s.k).max().unwrap_or(0);
    for k in 0..=k_max {
        let m = draws.draws.iter().filter(|s| s.k == k).count() as f64 / n;
        println!("order_mass_{k}={}", format_f64(m));
    }
    if let Some(path) = &a.data {
        let data = load(path, a.regressand.as_deref())?;
        let band = residual_posterior_summary(&data, &draws)?;
        let dir = a.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
        ensure_dir(&dir)?;
        let p = dir.join("residual_band.csv");
        write_atomic(&p, |w| {
            writeln!(w, "t,mean,sd,lower,upper")?;
            for t in 0..band.mean.len() {
                writeln!(
                    w,
                    "{t},{},{},{},{}",
                    format_f64(band.mean[t]),
                    format_f64(band.sd[t]),
                    format_f64(band.lower[t]),
                    format_f64(band.upper[t])
                )?;
            }
            Ok(())
        })?;
        println!("residual_band={}", p.display());
    }
    Ok(())
}
