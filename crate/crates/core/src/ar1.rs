//! Exact tests for first-order autoregressive residuals.
//!
//! With `R_t = φ R_{t−1} + ε_t` the regression coefficients (and intercept)
//! and the noise variance integrate out in closed form under the prior
//! `p(α, β₂, φ, σ²) ∝ σ⁻²`, leaving a marginal likelihood in φ alone:
//!
//! ```text
//! p(y | x, φ) ∝ w(φ)^{1/2} · g(φ)^{−ν/2} · |L_XX(φ)|^{−1/2}
//! ```
//!
//! where `L_XX`, `L_XY`, `L_YY` are the cross-products of the quasi-differenced
//! data `v_t − φ v_{t−1}` (with `v_t = (1, x_t)` when an intercept is used),
//! `g = L_YY − L_XYᵀ L_XX⁻¹ L_XY`, `ν` is the number of likelihood terms minus
//! the number of regression coefficients, and `w(φ)` is the variance weight
//! of the initial observation.
//!
//! Everything is evaluated in terms of `ε = 1 − φ`: the cross-products are
//! stored as `D + ε(C + Cᵀ) + ε² S` with `D` built from first differences,
//! which keeps evaluations near the unit root free of cancellation.

use nalgebra::{DMatrix, DVector};

use crate::data::{Dataset, Method, RegressionSpec, TestResult};
use crate::error::{Error, Result};
use crate::numerics::{
    adaptive_log_integral, richardson_limit, AdaptiveOptions, Cholesky, LimitEstimate,
    QuadratureDiagnostics, RichardsonOptions,
};

/// Treatment of the first observation `R_1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialObs {
    /// `R_1 ~ N(0, σ²/(1−φ²))`; only defined for `|φ| < 1`.
    StationaryPrior,
    /// `R_1 ~ N(0, σ²)` for every φ.
    UnitVariancePrior,
    /// Condition on `y_1`; the likelihood covers `t ≥ 2` only.
    Conditional,
}

/// Cross-product statistics at one value of φ.
#[derive(Debug, Clone, PartialEq)]
pub struct Ar1SuffStats {
    pub phi: f64,
    pub l_xx: DMatrix<f64>,
    pub l_xy: DVector<f64>,
    pub l_yy: f64,
    pub g: f64,
    /// Degrees of freedom `ν_p`.
    pub nu_p: f64,
    /// Scale `s_p = √(g/ν_p)`.
    pub s_p: f64,
}

/// Precomputed cross-products of one dataset; evaluates the marginal
/// likelihood at any φ in `O(m³)` for `m` regression coefficients.
#[derive(Debug, Clone)]
pub struct Ar1Kernel {
    mode: InitialObs,
    /// Regression coefficients (intercept included).
    m: usize,
    /// Likelihood terms.
    terms: usize,
    first: DMatrix<f64>,
    diff: DMatrix<f64>,
    cross_sym: DMatrix<f64>,
    lag: DMatrix<f64>,
}

impl Ar1Kernel {
    pub fn new(data: &Dataset, intercept: bool, mode: InitialObs) -> Self {
        let design = data.design(intercept);
        let y = data.y();
        let t = data.len();
        let m = design.ncols();
        // u_t = (v_t, y_t)
        let u =
            |i: usize| DVector::from_fn(m + 1, |j, _| if j < m { design[(i, j)] } else { y[i] });
        let u1 = u(0);
        let first = &u1 * u1.transpose();
        let mut diff = DMatrix::zeros(m + 1, m + 1);
        let mut cross = DMatrix::zeros(m + 1, m + 1);
        let mut lag = DMatrix::zeros(m + 1, m + 1);
        let mut prev = u1;
        for i in 1..t {
            let cur = u(i);
            let d = &cur - &prev;
            diff += &d * d.transpose();
            cross += &d * prev.transpose();
            lag += &prev * prev.transpose();
            prev = cur;
        }
        let cross_sym = &cross + cross.transpose();
        let terms = match mode {
            InitialObs::Conditional => t - 1,
            _ => t,
        };
        Self {
            mode,
            m,
            terms,
            first,
            diff,
            cross_sym,
            lag,
        }
    }

    pub fn mode(&self) -> InitialObs {
        self.mode
    }

    /// Number of regression coefficients integrated out.
    pub fn n_coefficients(&self) -> usize {
        self.m
    }

    /// Exponent `ν` of `g^{−ν/2}`.
    pub fn dof(&self) -> f64 {
        self.terms as f64 - self.m as f64
    }

    fn initial_weight(&self, eps: f64) -> f64 {
        match self.mode {
            InitialObs::StationaryPrior => eps * (2.0 - eps),
            InitialObs::UnitVariancePrior => 1.0,
            InitialObs::Conditional => 0.0,
        }
    }

    fn check_domain(&self, eps: f64) -> Result<()> {
        if !eps.is_finite() {
            return Err(Error::Domain(format!("phi = {}", 1.0 - eps)));
        }
        if self.mode == InitialObs::StationaryPrior && !(eps > 0.0 && eps < 2.0) {
            return Err(Error::Domain(format!(
                "stationary initial-observation prior needs |phi| < 1, got {}",
                1.0 - eps
            )));
        }
        Ok(())
    }

    /// Joint cross-product matrix of `(v, y)` at `φ = 1 − eps`.
    fn joint(&self, eps: f64) -> DMatrix<f64> {
        let w = self.initial_weight(eps);
        let mut a = &self.diff + &self.cross_sym * eps + &self.lag * (eps * eps);
        if w != 0.0 {
            a += &self.first * w;
        }
        a
    }

    pub fn suff_stats(&self, phi: f64) -> Result<Ar1SuffStats> {
        let eps = 1.0 - phi;
        self.check_domain(eps)?;
        let a = self.joint(eps);
        let m = self.m;
        let l_xx = a.view((0, 0), (m, m)).into_owned();
        let l_xy = a.view((0, m), (m, 1)).column(0).into_owned();
        let l_yy = a[(m, m)];
        let g = if m == 0 {
            l_yy
        } else {
            let chol = Cholesky::new(&l_xx).map_err(|e| collinear(phi, e))?;
            l_yy - chol.inv_quad(&l_xy)
        };
        let nu_p = self.dof();
        Ok(Ar1SuffStats {
            phi,
            l_xx,
            l_xy,
            l_yy,
            g,
            nu_p,
            s_p: (g.max(0.0) / nu_p).sqrt(),
        })
    }

    /// Log marginal likelihood at `φ = 1 − eps`, up to a φ-independent constant.
    pub fn log_marginal_eps(&self, eps: f64) -> Result<f64> {
        self.check_domain(eps)?;
        let a = self.joint(eps);
        // The last squared pivot of the joint factor is g; the others give |L_XX|.
        let chol = Cholesky::new(&a).map_err(|e| collinear(1.0 - eps, e))?;
        let l = chol.l();
        let m = self.m;
        let log_det_xx: f64 = 2.0 * (0..m).map(|i| l[(i, i)].ln()).sum::<f64>();
        let log_g = 2.0 * l[(m, m)].ln();
        let mut v = -0.5 * self.dof() * log_g - 0.5 * log_det_xx;
        if self.mode == InitialObs::StationaryPrior {
            v += 0.5 * (eps * (2.0 - eps)).ln();
        }
        Ok(v)
    }

    pub fn log_marginal(&self, phi: f64) -> Result<f64> {
        self.log_marginal_eps(1.0 - phi)
    }
}

fn collinear(phi: f64, e: Error) -> Error {
    match e {
        Error::SingularCovariance { index, pivot } => Error::CollinearRegressors(format!(
            "cross-product matrix singular at phi = {phi} (pivot {pivot:e} at {index})"
        )),
        other => other,
    }
}

/// Cross-product statistics of `data` at `phi`.
pub fn suff_stats(
    data: &Dataset,
    phi: f64,
    intercept: bool,
    initial_obs: InitialObs,
) -> Result<Ar1SuffStats> {
    Ar1Kernel::new(data, intercept, initial_obs).suff_stats(phi)
}

/// Log of the φ-dependent part of the marginal likelihood.
pub fn log_marginal_likelihood(
    data: &Dataset,
    phi: f64,
    intercept: bool,
    initial_obs: InitialObs,
) -> Result<f64> {
    Ar1Kernel::new(data, intercept, initial_obs).log_marginal(phi)
}

/// Log likelihood at the unit root, on the same scale as
/// [`log_marginal_likelihood`] for the matching configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitRootLikelihood {
    pub log_value: f64,
    /// Extrapolation record when the value is a limit.
    pub limit: Option<LimitEstimate>,
}

/// Likelihood at `φ = 1`.
///
/// With an intercept the stationary-prior likelihood is undefined at the
/// unit root and the value is its limit as `φ → 1⁻`, obtained by Richardson
/// extrapolation over `ε = 1 − φ`. Without an intercept the conditional
/// likelihood is continuous at 1 and is evaluated directly.
pub fn log_likelihood_at_unit_root(data: &Dataset, intercept: bool) -> Result<UnitRootLikelihood> {
    log_likelihood_at_unit_root_with(data, intercept, &RichardsonOptions::default())
}

pub fn log_likelihood_at_unit_root_with(
    data: &Dataset,
    intercept: bool,
    opts: &RichardsonOptions,
) -> Result<UnitRootLikelihood> {
    if intercept {
        let kernel = Ar1Kernel::new(data, true, InitialObs::StationaryPrior);
        // Collinear regressors make every φ singular; report that instead of
        // a divergent limit.
        kernel.log_marginal(0.0)?;
        let limit = richardson_limit(|eps| kernel.log_marginal_eps(eps), opts)?;
        Ok(UnitRootLikelihood {
            log_value: limit.value,
            limit: Some(limit),
        })
    } else {
        let kernel = Ar1Kernel::new(data, false, InitialObs::Conditional);
        Ok(UnitRootLikelihood {
            log_value: kernel.log_marginal_eps(0.0)?,
            limit: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesFactorResult {
    /// `K = L(φ=1) / (½ ∫₋₁¹ L(φ) dφ)`.
    pub k: f64,
    pub log_k: f64,
    pub log_numerator: f64,
    pub log_denominator: f64,
    pub quadrature: QuadratureDiagnostics,
    pub limit: Option<LimitEstimate>,
}

/// Bayes factor from a numerator and a log-likelihood over `(−1, 1)` sharing
/// one additive constant; the stationary prior is uniform with density ½.
pub fn bayes_factor_from<F>(
    log_numerator: f64,
    log_likelihood: F,
    opts: &AdaptiveOptions,
) -> Result<BayesFactorResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (log_integral, quadrature) = adaptive_log_integral(log_likelihood, -1.0, 1.0, opts)?;
    let log_denominator = 0.5f64.ln() + log_integral;
    let log_k = log_numerator - log_denominator;
    Ok(BayesFactorResult {
        k: log_k.exp(),
        log_k,
        log_numerator,
        log_denominator,
        quadrature,
        limit: None,
    })
}

/// Bayes factor of the unit-root model against the stationary AR(1) model.
///
/// Without an intercept both sides use the conditional likelihood; with an
/// intercept both use the stationary-prior full likelihood, the numerator
/// as its limit at `φ = 1`.
pub fn bayes_factor(data: &Dataset, intercept: bool) -> Result<BayesFactorResult> {
    let mode = if intercept {
        InitialObs::StationaryPrior
    } else {
        InitialObs::Conditional
    };
    let kernel = Ar1Kernel::new(data, intercept, mode);
    let num = log_likelihood_at_unit_root(data, intercept)?;
    let mut result = bayes_factor_from(
        num.log_value,
        |phi| kernel.log_marginal(phi),
        &AdaptiveOptions::default(),
    )?;
    result.limit = num.limit;
    Ok(result)
}

/// Evaluation grid for [`phi_posterior`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub mode: InitialObs,
    /// Largest posterior mass tolerated in the outer 1% of the grid on
    /// either side.
    pub boundary_tol: f64,
    /// Cells are bisected until the trapezoid and Simpson masses of each
    /// agree to this fraction of the total.
    pub refine_tol: f64,
}

impl Default for PhiGrid {
    fn default() -> Self {
        Self {
            lo: -1.5,
            hi: 1.5,
            points: 1001,
            mode: InitialObs::UnitVariancePrior,
            boundary_tol: 1e-4,
            refine_tol: 1e-9,
        }
    }
}

impl PhiGrid {
    /// The uniform starting grid, before refinement.
    pub fn nodes(&self) -> Vec<f64> {
        let h = (self.hi - self.lo) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.lo + h * i as f64).collect()
    }
}

/// Flat-prior marginal posterior of φ tabulated on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiPosterior {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    /// `p(φ ≥ 1 | data)`.
    pub prob_phi_ge_1: f64,
    /// `p(|φ| < 1 | data)`.
    pub prob_stationary: f64,
}

impl PhiPosterior {
    pub fn mode(&self) -> f64 {
        let i = self
            .density
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        self.grid[i]
    }

    pub fn mean(&self) -> f64 {
        let f: Vec<f64> = self
            .grid
            .iter()
            .zip(&self.density)
            .map(|(x, d)| x * d)
            .collect();
        trapezoid(&self.grid, &f)
    }

    /// Posterior mass on `[lo, hi]`, interpolating linearly inside cells.
    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        mass_between(&self.grid, &self.density, lo, hi)
    }

    /// Linear interpolation of the density; zero outside the grid.
    pub fn density_at(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x < g[0] || x > g[g.len() - 1] {
            return 0.0;
        }
        let i = g.partition_point(|v| *v <= x).clamp(1, g.len() - 1);
        let (x0, x1) = (g[i - 1], g[i]);
        let (d0, d1) = (self.density[i - 1], self.density[i]);
        d0 + (d1 - d0) * (x - x0) / (x1 - x0)
    }
}

pub fn trapezoid(x: &[f64], f: &[f64]) -> f64 {
    x.windows(2)
        .zip(f.windows(2))
        .map(|(xs, fs)| 0.5 * (xs[1] - xs[0]) * (fs[0] + fs[1]))
        .sum()
}

fn mass_between(x: &[f64], f: &[f64], lo: f64, hi: f64) -> f64 {
    let mut acc = 0.0;
    for i in 1..x.len() {
        let (x0, x1) = (x[i - 1], x[i]);
        let a = x0.max(lo);
        let b = x1.min(hi);
        if b <= a {
            continue;
        }
        let slope = (f[i] - f[i - 1]) / (x1 - x0);
        let fa = f[i - 1] + slope * (a - x0);
        let fb = f[i - 1] + slope * (b - x0);
        acc += 0.5 * (b - a) * (fa + fb);
    }
    acc
}

/// Marginal posterior of φ under a flat prior, on `grid`.
///
/// Near a unit root the posterior width is of order `1/T`, far below the
/// spacing of any practical uniform grid, so the starting grid is refined
/// by bisection wherever the local trapezoid rule is inaccurate. The
/// returned grid is therefore non-uniform. The density is normalized by the
/// trapezoid rule on that grid.
pub fn phi_posterior(data: &Dataset, intercept: bool, grid: &PhiGrid) -> Result<PhiPosterior> {
    if grid.points < 3 || !(grid.hi > grid.lo) {
        return Err(Error::InvalidConfig(
            "phi grid needs lo < hi and >= 3 points".into(),
        ));
    }
    let kernel = Ar1Kernel::new(data, intercept, grid.mode);
    let mut nodes = grid.nodes();
    // Put the unit root on the grid so the tail mass has no partial cell there,
    // unless the likelihood is singular at it.
    let unit_ok = match grid.mode {
        InitialObs::UnitVariancePrior => true,
        InitialObs::Conditional => !intercept,
        InitialObs::StationaryPrior => false,
    };
    if unit_ok && grid.lo < 1.0 && 1.0 < grid.hi && !nodes.contains(&1.0) {
        let i = nodes.partition_point(|v| *v < 1.0);
        nodes.insert(i, 1.0);
    }
    let mut logs = nodes
        .iter()
        .map(|&p| kernel.log_marginal(p))
        .collect::<Result<Vec<f64>>>()?;

    const MAX_NODES: usize = 200_000;
    loop {
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let dens: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let total = trapezoid(&nodes, &dens);
        let mut new_nodes = Vec::with_capacity(nodes.len());
        let mut new_logs = Vec::with_capacity(nodes.len());
        let mut split = false;
        for i in 0..nodes.len() {
            if i > 0 {
                let (x0, x1) = (nodes[i - 1], nodes[i]);
                let h = x1 - x0;
                let (d0, d1) = (dens[i - 1], dens[i]);
                // Flat cells far below the peak cannot matter.
                if d0.max(d1) * h > grid.refine_tol * total * 1e-3 && h > 1e-12 {
                    let xm = 0.5 * (x0 + x1);
                    let lm = kernel.log_marginal(xm)?;
                    let dm = (lm - max).exp();
                    let trap = 0.5 * h * (d0 + d1);
                    let simpson = h / 6.0 * (d0 + 4.0 * dm + d1);
                    if (trap - simpson).abs() > grid.refine_tol * total {
                        new_nodes.push(xm);
                        new_logs.push(lm);
                        split = true;
                    }
                }
            }
            new_nodes.push(nodes[i]);
            new_logs.push(logs[i]);
        }
        nodes = new_nodes;
        logs = new_logs;
        if !split || nodes.len() > MAX_NODES {
            break;
        }
    }

    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut density: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let z = trapezoid(&nodes, &density);
    for d in density.iter_mut() {
        *d /= z;
    }
    let band = 0.01 * (grid.hi - grid.lo);
    let edge = mass_between(&nodes, &density, grid.lo, grid.lo + band)
        + mass_between(&nodes, &density, grid.hi - band, grid.hi);
    if edge > grid.boundary_tol {
        return Err(Error::GridTooNarrow { mass: edge });
    }
    let prob_phi_ge_1 = mass_between(&nodes, &density, 1.0, grid.hi);
    let prob_stationary = mass_between(&nodes, &density, -1.0, 1.0);
    Ok(PhiPosterior {
        grid: nodes,
        density,
        prob_phi_ge_1,
        prob_stationary,
    })
}

/// AR(1) cointegration test: Bayes factor or credible interval, per `spec.method`.
pub fn ar1_test(data: &Dataset, spec: &RegressionSpec) -> Result<TestResult> {
    spec.validate()?;
    match spec.method {
        Method::Ar1BayesFactor => {
            let bf = bayes_factor(data, spec.intercept)?;
            let mut r = TestResult::new(Method::Ar1BayesFactor, bf.k, spec.alpha_level)
                .with_diagnostic("log_bayes_factor", bf.log_k)
                .with_diagnostic("log_numerator", bf.log_numerator)
                .with_diagnostic("log_denominator", bf.log_denominator)
                .with_diagnostic("quadrature_panels", bf.quadrature.panels as f64)
                .with_diagnostic("quadrature_rel_change", bf.quadrature.rel_change);
            if let Some(l) = bf.limit {
                r = r.with_diagnostic("limit_correction", l.error);
            }
            Ok(r)
        }
        Method::Ar1Credible => {
            let post = phi_posterior(data, spec.intercept, &PhiGrid::default())?;
            Ok(
                TestResult::new(Method::Ar1Credible, post.prob_phi_ge_1, spec.alpha_level)
                    .with_diagnostic("prob_stationary", post.prob_stationary)
                    .with_diagnostic("posterior_mode", post.mode())
                    .with_diagnostic("posterior_mean", post.mean()),
            )
        }
        other => Err(Error::InvalidConfig(format!(
            "{other} is not an AR(1) test"
        ))),
    }
}
