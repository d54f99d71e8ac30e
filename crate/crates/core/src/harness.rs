//! Simulation studies: ROC curves for the tests on generated instances, the
//! order-recovery study for the reversible-jump sampler against BIC, and
//! posterior bands for fitted residuals.
//!
//! Every trial derives its own generator streams from the study seed and
//! its index, so results do not depend on the worker count.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::ar1::{bayes_factor, phi_posterior, PhiGrid};
use crate::arp::{gibbs_run, McmcConfig, PosteriorDraws};
use crate::classical::{adf_test_with, ols, AdfConfig};
use crate::data::{Dataset, Method, RegressionSpec};
use crate::datagen::{generate_indexed, GenConfig, GenInstance, OrderChoice};
use crate::error::{Error, Result};
use crate::io::{format_f64, write_atomic};
use crate::order::{rjmcmc_run, RjConfig};

/// Offset separating sampler seeds from generator seeds of the same study.
const SAMPLER_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

/// Desk-scale and full-scale trial counts.
pub const DESK_ROC_TRIALS: usize = 200;
pub const DESK_ORDER_TRIALS: usize = 50;
pub const FULL_ROC_TRIALS: usize = 2500;
pub const FULL_ORDER_TRIALS: usize = 250;

/// Receiver operating characteristic of one method.
///
/// Statistics are oriented so larger means more unit-root-like; a threshold
/// `s` declares cointegration for every statistic `≤ s`.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub thresholds: Vec<f64>,
    pub tpr: Vec<f64>,
    pub fpr: Vec<f64>,
    pub auc: f64,
    pub positives: usize,
    pub negatives: usize,
}

/// ROC of `scores` against `cointegrated` labels.
pub fn roc_curve(scores: &[f64], cointegrated: &[bool]) -> Result<RocCurve> {
    if scores.len() != cointegrated.len() {
        return Err(Error::Dimension(format!(
            "{} scores for {} labels",
            scores.len(),
            cointegrated.len()
        )));
    }
    if let Some(bad) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::InvalidConfig(format!(
            "score {bad} cannot be ranked"
        )));
    }
    let pos = cointegrated.iter().filter(|c| **c).count();
    let neg = cointegrated.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InsufficientData(format!(
            "ROC needs both classes, got {pos} positive and {neg} negative"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut thresholds = vec![f64::NEG_INFINITY];
    let mut tpr = vec![0.0];
    let mut fpr = vec![0.0];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if cointegrated[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        thresholds.push(s);
        tpr.push(tp as f64 / pos as f64);
        fpr.push(fp as f64 / neg as f64);
    }
    let auc = fpr
        .windows(2)
        .zip(tpr.windows(2))
        .map(|(f, t)| 0.5 * (f[1] - f[0]) * (t[0] + t[1]))
        .sum();
    Ok(RocCurve {
        thresholds,
        tpr,
        fpr,
        auc,
        positives: pos,
        negatives: neg,
    })
}

/// What a study runs on each instance.
#[derive(Debug, Clone, PartialEq)]
pub struct StudySettings {
    pub gen: GenConfig,
    pub trials: usize,
    /// Sampler settings; `seed` and `stream` are overwritten per trial.
    pub mcmc: McmcConfig,
    pub intercept: bool,
    /// Fixed order for the Gibbs test; `None` uses the generator's order.
    pub gibbs_order: Option<usize>,
    pub k_max: usize,
    pub rj: RjConfig,
    /// Worker threads; `None` uses every core.
    pub workers: Option<usize>,
}

impl Default for StudySettings {
    fn default() -> Self {
        Self {
            gen: GenConfig::default(),
            trials: DESK_ROC_TRIALS,
            mcmc: McmcConfig {
                iterations: 5000,
                burn_in: 1000,
                ..McmcConfig::default()
            },
            intercept: true,
            gibbs_order: None,
            k_max: 5,
            rj: RjConfig::default(),
            workers: None,
        }
    }
}

impl StudySettings {
    fn sampler(&self, trial: usize) -> McmcConfig {
        McmcConfig {
            seed: self.gen.seed.wrapping_add(SAMPLER_SEED_OFFSET),
            stream: trial as u64,
            ..self.mcmc
        }
    }
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Ordering statistic of `method` on `data`: log Bayes factor, unit-root
/// tail mass, or the ADF t-ratio. Larger is more unit-root-like for all.
pub fn method_statistic(
    method: Method,
    data: &Dataset,
    settings: &StudySettings,
    trial: usize,
    true_order: usize,
) -> Result<f64> {
    let mcmc = settings.sampler(trial);
    match method {
        Method::Ar1BayesFactor => Ok(bayes_factor(data, settings.intercept)?.log_k),
        Method::Ar1Credible => {
            Ok(phi_posterior(data, settings.intercept, &PhiGrid::default())?.prob_phi_ge_1)
        }
        Method::GibbsFixedOrder => {
            let k = settings.gibbs_order.unwrap_or(true_order);
            Ok(gibbs_run(data, k, settings.intercept, &mcmc)?.unit_root_fraction())
        }
        Method::RjMcmc => {
            let spec = RegressionSpec::new(Method::RjMcmc)
                .intercept(settings.intercept)
                .k_max(settings.k_max);
            Ok(rjmcmc_run(data, &spec, &mcmc, &settings.rj)?
                .draws
                .unit_root_fraction())
        }
        Method::EngleGranger => {
            let fit = ols(&data.y(), &data.x(), settings.intercept)?;
            let adf = adf_test_with(
                fit.residuals.as_slice(),
                &AdfConfig {
                    k_max: settings.k_max,
                    level: 0.05,
                    n_series: data.n_series(),
                },
            )?;
            Ok(adf.statistic)
        }
    }
}

/// One method on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub method: Method,
    pub cointegrated: bool,
    pub order: usize,
    /// The statistic, or the error message of a failed run.
    pub outcome: std::result::Result<f64, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocStudy {
    pub records: Vec<TrialRecord>,
    pub curves: BTreeMap<Method, RocCurve>,
    pub failures: BTreeMap<Method, usize>,
}

fn instance(settings: &StudySettings, trial: usize) -> Result<GenInstance> {
    generate_indexed(&settings.gen, trial as u64)
}

/// Runs every method on `settings.trials` generated instances. Failed runs
/// are excluded from that method's curve only and counted.
pub fn run_roc_study(settings: &StudySettings, methods: &[Method]) -> Result<RocStudy> {
    if settings.trials < 2 {
        return Err(Error::InvalidConfig(
            "a study needs at least 2 trials".into(),
        ));
    }
    settings.gen.validate()?;
    let per_trial: Vec<Result<Vec<TrialRecord>>> = with_pool(settings.workers, || {
        (0..settings.trials)
            .into_par_iter()
            .map(|trial| {
                let inst = instance(settings, trial)?;
                Ok(methods
                    .iter()
                    .map(|&method| TrialRecord {
                        trial,
                        method,
                        cointegrated: inst.is_cointegrated(),
                        order: inst.order(),
                        outcome: method_statistic(
                            method,
                            &inst.data,
                            settings,
                            trial,
                            inst.order(),
                        )
                        .map_err(|e| e.to_string()),
                    })
                    .collect())
            })
            .collect()
    })?;
    let mut records = Vec::with_capacity(settings.trials * methods.len());
    for r in per_trial {
        records.extend(r?);
    }
    let mut curves = BTreeMap::new();
    let mut failures = BTreeMap::new();
    for &method in methods {
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        let mut failed = 0;
        for r in records.iter().filter(|r| r.method == method) {
            match &r.outcome {
                Ok(s) if !s.is_nan() => {
                    scores.push(*s);
                    labels.push(r.cointegrated);
                }
                _ => failed += 1,
            }
        }
        failures.insert(method, failed);
        curves.insert(method, roc_curve(&scores, &labels)?);
    }
    Ok(RocStudy {
        records,
        curves,
        failures,
    })
}

/// Order-recovery summary at one series length.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderStudyRow {
    pub t: usize,
    /// Fraction of trials whose posterior mode equals the true order.
    pub accuracy_mode: f64,
    /// Posterior variance of the order, averaged over trials.
    pub mean_variance: f64,
    /// Accuracy of the BIC lag choice in the Engle-Granger regression.
    pub bic_accuracy: f64,
    pub trials: usize,
    pub failures: usize,
    pub bic_failures: usize,
}

/// Per-trial outcome of the order study.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderTrial {
    pub t: usize,
    pub trial: usize,
    pub true_order: usize,
    pub mode: std::result::Result<(usize, f64), String>,
    pub bic_order: std::result::Result<usize, String>,
}

/// AR order chosen by BIC: augmentation lags plus one.
pub fn bic_order(data: &Dataset, intercept: bool, k_max: usize) -> Result<usize> {
    let fit = ols(&data.y(), &data.x(), intercept)?;
    let adf = adf_test_with(
        fit.residuals.as_slice(),
        &AdfConfig {
            k_max: k_max.saturating_sub(1),
            level: 0.05,
            n_series: data.n_series(),
        },
    )?;
    Ok(adf.selected_lags + 1)
}

/// Reversible-jump order recovery for each length in `lengths`, with orders
/// drawn uniformly from `{1..=3}` unless `settings.gen.order` says otherwise.
pub fn run_order_study(
    settings: &StudySettings,
    lengths: &[usize],
) -> Result<(Vec<OrderStudyRow>, Vec<OrderTrial>)> {
    if settings.trials < 2 {
        return Err(Error::InvalidConfig(
            "a study needs at least 2 trials".into(),
        ));
    }
    let spec = RegressionSpec::new(Method::RjMcmc)
        .intercept(settings.intercept)
        .k_max(settings.k_max);
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = lengths
        .iter()
        .flat_map(|&t| (0..settings.trials).map(move |i| (t, i)))
        .collect();
    let trials: Vec<Result<OrderTrial>> = with_pool(settings.workers, || {
        jobs.par_iter()
            .map(|&(t, trial)| {
                let gen = GenConfig { t, ..settings.gen };
                let inst = generate_indexed(&gen, trial as u64)?;
                let mcmc = settings.sampler(trial);
                let mode = rjmcmc_run(&inst.data, &spec, &mcmc, &settings.rj)
                    .map(|o| (o.posterior.mode, o.posterior.variance))
                    .map_err(|e| e.to_string());
                let bic = bic_order(&inst.data, settings.intercept, settings.k_max)
                    .map_err(|e| e.to_string());
                Ok(OrderTrial {
                    t,
                    trial,
                    true_order: inst.order(),
                    mode,
                    bic_order: bic,
                })
            })
            .collect()
    })?;
    let trials = trials.into_iter().collect::<Result<Vec<_>>>()?;
    let rows = lengths
        .iter()
        .map(|&t| {
            let at: Vec<&OrderTrial> = trials.iter().filter(|r| r.t == t).collect();
            let ok: Vec<(usize, f64, usize)> = at
                .iter()
                .filter_map(|r| r.mode.as_ref().ok().map(|(m, v)| (*m, *v, r.true_order)))
                .collect();
            let bic: Vec<(usize, usize)> = at
                .iter()
                .filter_map(|r| r.bic_order.as_ref().ok().map(|b| (*b, r.true_order)))
                .collect();
            let frac = |hits: usize, n: usize| {
                if n == 0 {
                    f64::NAN
                } else {
                    hits as f64 / n as f64
                }
            };
            OrderStudyRow {
                t,
                accuracy_mode: frac(ok.iter().filter(|(m, _, k)| m == k).count(), ok.len()),
                mean_variance: if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().map(|(_, v, _)| v).sum::<f64>() / ok.len() as f64
                },
                bic_accuracy: frac(bic.iter().filter(|(b, k)| b == k).count(), bic.len()),
                trials: at.len(),
                failures: at.len() - ok.len(),
                bic_failures: at.len() - bic.len(),
            }
        })
        .collect();
    Ok((rows, trials))
}

/// Defaults for the order study: orders uniform on `{1,2,3}`.
pub fn order_study_settings(seed: u64, trials: usize) -> StudySettings {
    StudySettings {
        gen: GenConfig {
            order: OrderChoice::UniformUpTo(3),
            seed,
            ..GenConfig::default()
        },
        trials,
        mcmc: McmcConfig::default(),
        ..StudySettings::default()
    }
}

/// Pointwise posterior summary of the fitted residual `y_t − β₂ᵀx_t − α`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBand {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    /// `mean − 3·sd`.
    pub lower: Vec<f64>,
    /// `mean + 3·sd`.
    pub upper: Vec<f64>,
}

/// Mean and three-standard-deviation band of the residual over draws.
pub fn residual_posterior_summary(data: &Dataset, draws: &PosteriorDraws) -> Result<ResidualBand> {
    if draws.draws.is_empty() {
        return Err(Error::InsufficientData("no posterior draws".into()));
    }
    let y = data.y();
    let x = data.x();
    let t = data.len();
    let mut sum = vec![0.0; t];
    let mut sum2 = vec![0.0; t];
    let n = draws.draws.len() as f64;
    for s in &draws.draws {
        if s.beta2.len() != x.ncols() {
            return Err(Error::Dimension(format!(
                "draw has {} coefficients for {} regressors",
                s.beta2.len(),
                x.ncols()
            )));
        }
        let alpha = s.alpha.unwrap_or(0.0);
        let r = &y - &x * &s.beta2;
        for i in 0..t {
            let v = r[i] - alpha;
            sum[i] += v;
            sum2[i] += v * v;
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let sd: Vec<f64> = sum2
        .iter()
        .zip(&mean)
        .map(|(s2, m)| (s2 / n - m * m).max(0.0).sqrt())
        .collect();
    Ok(ResidualBand {
        lower: mean.iter().zip(&sd).map(|(m, s)| m - 3.0 * s).collect(),
        upper: mean.iter().zip(&sd).map(|(m, s)| m + 3.0 * s).collect(),
        mean,
        sd,
    })
}

/// `trial,method,label,order,statistic,status`; failed runs leave the
/// statistic blank and carry the error as status.
pub fn write_roc_records(w: &mut dyn Write, study: &RocStudy) -> std::io::Result<()> {
    writeln!(w, "trial,method,label,order,statistic,status")?;
    for r in &study.records {
        let label = if r.cointegrated {
            "cointegrated"
        } else {
            "not-cointegrated"
        };
        match &r.outcome {
            Ok(s) => writeln!(
                w,
                "{},{},{label},{},{},ok",
                r.trial,
                r.method,
                r.order,
                format_f64(*s)
            )?,
            Err(e) => writeln!(
                w,
                "{},{},{label},{},,\"{}\"",
                r.trial,
                r.method,
                r.order,
                e.replace('"', "'")
            )?,
        }
    }
    Ok(())
}

/// `method,auc,positives,negatives,failures` rows.
pub fn write_roc_summary(w: &mut dyn Write, study: &RocStudy) -> std::io::Result<()> {
    writeln!(w, "method,auc,positives,negatives,failures")?;
    for (m, c) in &study.curves {
        writeln!(
            w,
            "{m},{},{},{},{}",
            format_f64(c.auc),
            c.positives,
            c.negatives,
            study.failures[m]
        )?;
    }
    Ok(())
}

/// `method,threshold,fpr,tpr` for every point of every curve.
pub fn write_roc_points(w: &mut dyn Write, study: &RocStudy) -> std::io::Result<()> {
    writeln!(w, "method,threshold,fpr,tpr")?;
    for (m, c) in &study.curves {
        for i in 0..c.tpr.len() {
            writeln!(
                w,
                "{m},{},{},{}",
                format_f64(c.thresholds[i]),
                format_f64(c.fpr[i]),
                format_f64(c.tpr[i])
            )?;
        }
    }
    Ok(())
}

/// Gnuplot data: one indexed block of `fpr tpr` pairs per method.
pub fn write_roc_gnuplot(w: &mut dyn Write, study: &RocStudy) -> std::io::Result<()> {
    for (i, (m, c)) in study.curves.iter().enumerate() {
        if i > 0 {
            writeln!(w, "\n")?;
        }
        writeln!(w, "# {m} auc={}", format_f64(c.auc))?;
        for (f, t) in c.fpr.iter().zip(&c.tpr) {
            writeln!(w, "{} {}", format_f64(*f), format_f64(*t))?;
        }
    }
    Ok(())
}

pub fn write_order_rows(w: &mut dyn Write, rows: &[OrderStudyRow]) -> std::io::Result<()> {
    writeln!(
        w,
        "T,accuracy_mode,mean_variance,bic_accuracy,trials,failures,bic_failures"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.t,
            format_f64(r.accuracy_mode),
            format_f64(r.mean_variance),
            format_f64(r.bic_accuracy),
            r.trials,
            r.failures,
            r.bic_failures
        )?;
    }
    Ok(())
}

pub fn write_order_trials(w: &mut dyn Write, trials: &[OrderTrial]) -> std::io::Result<()> {
    writeln!(w, "T,trial,true_order,rj_mode,rj_variance,bic_order,status")?;
    for r in trials {
        let (mode, var, mut status) = match &r.mode {
            Ok((m, v)) => (m.to_string(), format_f64(*v), "ok".to_string()),
            Err(e) => (String::new(), String::new(), e.replace(['"', ','], " ")),
        };
        let bic = match &r.bic_order {
            Ok(b) => b.to_string(),
            Err(e) => {
                status = format!("{status}; bic: {}", e.replace(['"', ','], " "));
                String::new()
            }
        };
        writeln!(
            w,
            "{},{},{},{mode},{var},{bic},{status}",
            r.t, r.trial, r.true_order
        )?;
    }
    Ok(())
}

/// Writes the ROC study reports into `dir` and returns their paths.
pub fn save_roc_study(
    dir: &Path,
    prefix: &str,
    study: &RocStudy,
) -> Result<Vec<std::path::PathBuf>> {
    let files = [
        (
            format!("{prefix}_results.csv"),
            write_roc_records as fn(&mut dyn Write, &RocStudy) -> _,
        ),
        (format!("{prefix}_summary.csv"), write_roc_summary),
        (format!("{prefix}_points.csv"), write_roc_points),
        (format!("{prefix}_roc.dat"), write_roc_gnuplot),
    ];
    let mut out = Vec::new();
    for (name, f) in files {
        let p = dir.join(name);
        write_atomic(&p, |w| f(w, study))?;
        out.push(p);
    }
    Ok(out)
}
