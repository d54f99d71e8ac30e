//! Frequentist baselines: least squares, the augmented Dickey-Fuller test
//! with BIC lag selection, and the two-stage Engle-Granger test.

use nalgebra::{DMatrix, DVector};

use crate::data::{Dataset, Method, RegressionSpec, TestResult};
use crate::error::{Error, Result};

/// Least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    /// Coefficients; the intercept comes first when one was requested.
    pub coef: DVector<f64>,
    pub residuals: DVector<f64>,
    pub ssr: f64,
    /// Standard errors from `SSR/(N−p) · (XᵀX)⁻¹`; NaN without spare rows.
    pub std_errors: DVector<f64>,
}

/// Regress `y` on the columns of `x` (plus a leading constant column when
/// `intercept`) by Householder QR.
pub fn ols(y: &DVector<f64>, x: &DMatrix<f64>, intercept: bool) -> Result<OlsFit> {
    let n = y.len();
    if x.nrows() != n {
        return Err(Error::Dimension(format!(
            "{} rows in the design for {n} observations",
            x.nrows()
        )));
    }
    let a = if intercept {
        x.clone().insert_column(0, 1.0)
    } else {
        x.clone()
    };
    let p = a.ncols();
    if n <= p {
        return Err(Error::InsufficientData(format!(
            "{n} observations for {p} coefficients"
        )));
    }
    let qr = a.clone().qr();
    let r = qr.r();
    let max_diag = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    for i in 0..p {
        if !(r[(i, i)].abs() > 1e-10 * max_diag) {
            return Err(Error::CollinearRegressors(format!(
                "design column {i} is linearly dependent on the others"
            )));
        }
    }
    let qty = qr.q().transpose() * y;
    let coef = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::CollinearRegressors("triangular solve failed".into()))?;
    let residuals = y - &a * &coef;
    let ssr = residuals.norm_squared();
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::CollinearRegressors("triangular solve failed".into()))?;
    let s2 = ssr / (n - p) as f64;
    let std_errors = DVector::from_fn(p, |i, _| (s2 * r_inv.row(i).norm_squared()).sqrt());
    Ok(OlsFit {
        coef,
        residuals,
        ssr,
        std_errors,
    })
}

// MacKinnon (2010) response surfaces for residual-based tests with a constant
// in the cointegrating regression, indexed by the number of series N = 1..12
// and by level (1%, 5%, 10%). Each row is (b∞, b1, b2, b3) in
// τ(T) = b∞ + b1/T + b2/T² + b3/T³.
const TAU_C_2010: [[[f64; 4]; 3]; 12] = [
    [
        [-3.43035, -6.5393, -16.786, -79.433],
        [-2.86154, -2.8903, -4.234, -40.040],
        [-2.56677, -1.5384, -2.809, 0.0],
    ],
    [
        [-3.89644, -10.9519, -33.527, 0.0],
        [-3.33613, -6.1101, -6.823, 0.0],
        [-3.04445, -4.2412, -2.720, 0.0],
    ],
    [
        [-4.29374, -14.4354, -33.195, 47.433],
        [-3.74066, -8.5632, -10.852, 27.982],
        [-3.45218, -6.2143, -3.718, 0.0],
    ],
    [
        [-4.64332, -18.1031, -37.972, 0.0],
        [-4.09600, -11.2349, -11.175, 0.0],
        [-3.81020, -8.3931, -4.137, 0.0],
    ],
    [
        [-4.95756, -21.8883, -45.142, 0.0],
        [-4.41519, -14.0405, -12.575, 0.0],
        [-4.13157, -10.7417, -3.784, 0.0],
    ],
    [
        [-5.24568, -25.6688, -57.737, 88.639],
        [-4.70693, -16.9178, -17.492, 60.007],
        [-4.42501, -13.1875, -5.104, 27.877],
    ],
    [
        [-5.51233, -29.5760, -69.398, 164.295],
        [-4.97684, -19.9021, -22.045, 110.761],
        [-4.69648, -15.7315, -5.104, 27.877],
    ],
    [
        [-5.76202, -33.5258, -82.189, 256.289],
        [-5.22924, -23.0023, -24.646, 144.479],
        [-4.95007, -18.3959, -7.344, 94.872],
    ],
    [
        [-5.99742, -37.6572, -87.365, 248.316],
        [-5.46697, -26.2057, -26.627, 176.382],
        [-5.18897, -21.1377, -9.484, 172.704],
    ],
    [
        [-6.22103, -41.7154, -102.680, 389.33],
        [-5.69244, -29.4521, -30.994, 251.016],
        [-5.41533, -24.0006, -7.514, 163.049],
    ],
    [
        [-6.43377, -46.0084, -106.809, 352.752],
        [-5.90714, -32.8336, -30.275, 249.994],
        [-5.63086, -26.9693, -4.083, 151.427],
    ],
    [
        [-6.63790, -50.2095, -124.156, 579.622],
        [-6.11279, -36.2681, -32.505, 314.802],
        [-5.83724, -29.9864, -2.686, 184.116],
    ],
];

const TABLE_LEVELS: [f64; 3] = [0.01, 0.05, 0.10];

/// Critical values at 1%, 5% and 10% for `n_series` series and `nobs`
/// observations.
pub fn critical_values(n_series: usize, nobs: usize) -> Result<[f64; 3]> {
    if !(1..=TAU_C_2010.len()).contains(&n_series) {
        return Err(Error::InvalidConfig(format!(
            "critical values are tabulated for 1..=12 series, got {n_series}"
        )));
    }
    let inv = 1.0 / nobs as f64;
    let table = &TAU_C_2010[n_series - 1];
    Ok(std::array::from_fn(|i| {
        let b = table[i];
        b[0] + inv * (b[1] + inv * (b[2] + inv * b[3]))
    }))
}

/// Critical value at an arbitrary level, interpolating linearly in the
/// level between the tabulated 1%, 5% and 10% points (clamped outside).
pub fn critical_value(n_series: usize, nobs: usize, level: f64) -> Result<f64> {
    let cv = critical_values(n_series, nobs)?;
    let l = level.clamp(TABLE_LEVELS[0], TABLE_LEVELS[2]);
    let i = if l <= TABLE_LEVELS[1] { 0 } else { 1 };
    let w = (l - TABLE_LEVELS[i]) / (TABLE_LEVELS[i + 1] - TABLE_LEVELS[i]);
    Ok(cv[i] + w * (cv[i + 1] - cv[i]))
}

/// Tail probability of `stat`, interpolated linearly between the tabulated
/// quantiles, extrapolated from the nearest pair and clamped to
/// `[0.001, 0.999]`.
pub fn pvalue_band(n_series: usize, nobs: usize, stat: f64) -> Result<f64> {
    let cv = critical_values(n_series, nobs)?;
    let i = if stat <= cv[1] { 0 } else { 1 };
    let w = (stat - cv[i]) / (cv[i + 1] - cv[i]);
    let p = TABLE_LEVELS[i] + w * (TABLE_LEVELS[i + 1] - TABLE_LEVELS[i]);
    Ok(p.clamp(0.001, 0.999))
}

/// Settings for [`adf_test_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdfConfig {
    /// Largest augmentation lag considered by BIC.
    pub k_max: usize,
    /// Test level.
    pub level: f64,
    /// Number of series in the system the input came from; 1 for a raw series.
    pub n_series: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdfResult {
    /// t-ratio of the lagged-level coefficient.
    pub statistic: f64,
    pub selected_lags: usize,
    pub pvalue_band: f64,
    pub critical_value: f64,
    pub reject: bool,
    /// Observations in the final regression.
    pub nobs: usize,
}

/// ADF test on a raw series at `level`, with BIC choosing up to `k_max` lags.
pub fn adf_test(series: &[f64], k_max: usize, level: f64) -> Result<AdfResult> {
    adf_test_with(
        series,
        &AdfConfig {
            k_max,
            level,
            n_series: 1,
        },
    )
}

/// Lagged-level and lagged-difference design for `ΔR_t`, `t ∈ [start, T)`.
fn adf_design(series: &[f64], lags: usize, start: usize) -> (DVector<f64>, DMatrix<f64>) {
    let rows = series.len() - start;
    let dy = DVector::from_fn(rows, |i, _| series[start + i] - series[start + i - 1]);
    let x = DMatrix::from_fn(rows, lags + 1, |i, j| {
        let t = start + i;
        if j == 0 {
            series[t - 1]
        } else {
            series[t - j] - series[t - j - 1]
        }
    });
    (dy, x)
}

/// ADF regression `ΔR_t = γR_{t−1} + Σᵢ ξᵢΔR_{t−i} + ε_t` with no
/// deterministic terms.
///
/// Lag orders `0..=k_max` are compared by BIC on the common sample that the
/// largest order allows; the chosen order is then refit on all usable rows.
pub fn adf_test_with(series: &[f64], config: &AdfConfig) -> Result<AdfResult> {
    let t = series.len();
    if t <= config.k_max + 10 {
        return Err(Error::InsufficientData(format!(
            "ADF with up to {} lags needs more than {} observations, got {t}",
            config.k_max,
            config.k_max + 10
        )));
    }
    let common = config.k_max + 1;
    let mut best = (f64::INFINITY, 0usize);
    for p in 0..=config.k_max {
        let (dy, x) = adf_design(series, p, common);
        let fit = ols(&dy, &x, false)?;
        let n = dy.len() as f64;
        if fit.ssr <= 0.0 {
            return Err(Error::DegenerateFit);
        }
        let bic = n * (fit.ssr / n).ln() + (p + 1) as f64 * n.ln();
        if bic < best.0 {
            best = (bic, p);
        }
    }
    let lags = best.1;
    let (dy, x) = adf_design(series, lags, lags + 1);
    let fit = ols(&dy, &x, false)?;
    if fit.ssr <= 0.0 {
        return Err(Error::DegenerateFit);
    }
    let statistic = fit.coef[0] / fit.std_errors[0];
    let nobs = dy.len();
    let cv = critical_value(config.n_series, nobs, config.level)?;
    Ok(AdfResult {
        statistic,
        selected_lags: lags,
        pvalue_band: pvalue_band(config.n_series, nobs, statistic)?,
        critical_value: cv,
        reject: statistic < cv,
        nobs,
    })
}

/// Engle-Granger test: OLS of `y` on `x`, then an ADF test on the residuals
/// against residual-based critical values for the system's series count.
pub fn engle_granger_test(data: &Dataset, spec: &RegressionSpec) -> Result<TestResult> {
    spec.validate()?;
    if spec.method != Method::EngleGranger {
        return Err(Error::InvalidConfig(format!(
            "{} is not the Engle-Granger test",
            spec.method
        )));
    }
    let y = data.y();
    let fit = ols(&y, &data.x(), spec.intercept)?;
    if fit.ssr <= 1e-24 * y.norm_squared().max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateFit);
    }
    let adf = adf_test_with(
        fit.residuals.as_slice(),
        &AdfConfig {
            k_max: spec.k_max,
            level: spec.alpha_level,
            n_series: data.n_series(),
        },
    )?;
    let mut r = TestResult::new(Method::EngleGranger, adf.statistic, adf.critical_value)
        .with_diagnostic("selected_lags", adf.selected_lags as f64)
        .with_diagnostic("pvalue_band", adf.pvalue_band)
        .with_diagnostic("level", spec.alpha_level);
    let offset = usize::from(spec.intercept);
    if spec.intercept {
        r = r.with_diagnostic("intercept", fit.coef[0]);
    }
    for j in offset..fit.coef.len() {
        r = r.with_diagnostic(&format!("beta2_{}", j - offset), fit.coef[j]);
    }
    Ok(r)
}
