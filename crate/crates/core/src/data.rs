//! Problem data: the observed multivariate series, the regressand/regressor
//! split, residual construction and the decision object returned by every
//! test.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Observed system `Z_{1:T}`: rows are time points, columns are series.
///
/// One column is the regressand `Y_t`; the rest are the regressors `X_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: DMatrix<f64>,
    regressand: usize,
    labels: Vec<String>,
}

impl Dataset {
    /// Builds a dataset with column 0 as the regressand.
    pub fn new(values: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        Self::with_regressand_index(values, labels, 0)
    }

    pub fn with_regressand_index(
        values: DMatrix<f64>,
        labels: Vec<String>,
        regressand: usize,
    ) -> Result<Self> {
        let (t, n) = values.shape();
        if n == 0 {
            return Err(Error::Dimension("dataset has no columns".into()));
        }
        if labels.len() != n {
            return Err(Error::Dimension(format!(
                "{} labels for {n} columns",
                labels.len()
            )));
        }
        if regressand >= n {
            return Err(Error::Dimension(format!(
                "regressand index {regressand} out of range for {n} columns"
            )));
        }
        if t < n + 3 {
            return Err(Error::InsufficientData(format!(
                "{t} observations for {n} series; need at least {}",
                n + 3
            )));
        }
        for j in 0..n {
            for i in 0..t {
                if !values[(i, j)].is_finite() {
                    return Err(Error::MissingData {
                        row: i,
                        column: j,
                        label: labels[j].clone(),
                    });
                }
            }
        }
        Ok(Self {
            values,
            regressand,
            labels,
        })
    }

    /// Two-series dataset `(y, x)` with default labels `Y` and `X`.
    pub fn from_pair(y: &[f64], x: &[f64]) -> Result<Self> {
        if y.len() != x.len() {
            return Err(Error::Dimension(format!(
                "y has {} observations, x has {}",
                y.len(),
                x.len()
            )));
        }
        let values = DMatrix::from_fn(y.len(), 2, |i, j| if j == 0 { y[i] } else { x[i] });
        Self::new(values, vec!["Y".into(), "X".into()])
    }

    /// Builds a dataset from a regressand and a list of regressor columns.
    pub fn from_columns(y: &[f64], xs: &[Vec<f64>]) -> Result<Self> {
        let t = y.len();
        if let Some(bad) = xs.iter().find(|c| c.len() != t) {
            return Err(Error::Dimension(format!(
                "regressor has {} observations, regressand has {t}",
                bad.len()
            )));
        }
        let n = xs.len() + 1;
        let values = DMatrix::from_fn(t, n, |i, j| if j == 0 { y[i] } else { xs[j - 1][i] });
        let mut labels = vec!["Y".to_string()];
        labels.extend((1..n).map(|j| format!("X{j}")));
        Self::new(values, labels)
    }

    /// Re-selects the regressand by column label.
    pub fn select_regressand(self, label: &str) -> Result<Self> {
        let idx = self
            .labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::InvalidConfig(format!("no column named {label:?}")))?;
        Self::with_regressand_index(self.values, self.labels, idx)
    }

    /// Number of observations `T`.
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    /// Number of series `n`.
    pub fn n_series(&self) -> usize {
        self.values.ncols()
    }

    pub fn n_regressors(&self) -> usize {
        self.values.ncols() - 1
    }

    pub fn regressand_index(&self) -> usize {
        self.regressand
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Regressand column `y_{1:T}`.
    pub fn y(&self) -> DVector<f64> {
        self.values.column(self.regressand).into_owned()
    }

    fn regressor_columns(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_series()).filter(move |&j| j != self.regressand)
    }

    /// Regressor matrix, `T × (n−1)`, columns in original order.
    pub fn x(&self) -> DMatrix<f64> {
        let cols: Vec<usize> = self.regressor_columns().collect();
        DMatrix::from_fn(self.len(), cols.len(), |i, j| self.values[(i, cols[j])])
    }

    /// Regressor matrix with a leading column of ones when `intercept` is set.
    pub fn design(&self, intercept: bool) -> DMatrix<f64> {
        let x = self.x();
        if !intercept {
            return x;
        }
        let mut d = DMatrix::from_element(self.len(), x.ncols() + 1, 1.0);
        d.columns_mut(1, x.ncols()).copy_from(&x);
        d
    }

    /// Returns a copy whose regressand column is multiplied by `c`.
    pub fn scale_regressand(&self, c: f64) -> Self {
        let mut values = self.values.clone();
        values.column_mut(self.regressand).scale_mut(c);
        Self {
            values,
            regressand: self.regressand,
            labels: self.labels.clone(),
        }
    }
}

/// Which test a [`RegressionSpec`] asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Ar1BayesFactor,
    Ar1Credible,
    GibbsFixedOrder,
    RjMcmc,
    EngleGranger,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Ar1BayesFactor,
        Method::Ar1Credible,
        Method::GibbsFixedOrder,
        Method::RjMcmc,
        Method::EngleGranger,
    ];

    /// Short stable name used in CLI flags and report files.
    pub fn tag(self) -> &'static str {
        match self {
            Method::Ar1BayesFactor => "ar1-bf",
            Method::Ar1Credible => "ar1-credible",
            Method::GibbsFixedOrder => "gibbs",
            Method::RjMcmc => "rjmcmc",
            Method::EngleGranger => "engle-granger",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.tag() == tag)
    }

    /// Credible-interval style methods, whose statistic is a posterior tail mass.
    pub fn is_credible(self) -> bool {
        matches!(
            self,
            Method::Ar1Credible | Method::GibbsFixedOrder | Method::RjMcmc
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Regression options and the decision threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSpec {
    pub intercept: bool,
    pub method: Method,
    /// Fixed residual order for [`Method::GibbsFixedOrder`].
    pub order: Option<usize>,
    /// Largest order visited by the reversible-jump sampler; also the lag
    /// ceiling of the Engle-Granger unit-root regression.
    pub k_max: usize,
    /// Decision threshold: a tail probability for credible tests, a positive
    /// Bayes-factor cut-off, or the significance level for Engle-Granger.
    pub alpha_level: f64,
}

impl RegressionSpec {
    pub fn new(method: Method) -> Self {
        let alpha_level = match method {
            Method::Ar1BayesFactor => 1.0,
            _ => 0.05,
        };
        Self {
            intercept: true,
            method,
            order: None,
            k_max: 5,
            alpha_level,
        }
    }

    pub fn intercept(mut self, intercept: bool) -> Self {
        self.intercept = intercept;
        self
    }

    pub fn order(mut self, k: usize) -> Self {
        self.order = Some(k);
        self
    }

    pub fn k_max(mut self, k_max: usize) -> Self {
        self.k_max = k_max;
        self
    }

    pub fn alpha(mut self, alpha: f64) -> Self {
        self.alpha_level = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.method == Method::GibbsFixedOrder {
            match self.order {
                Some(k) if k >= 1 && k <= self.k_max => {}
                Some(k) => {
                    return Err(Error::InvalidConfig(format!(
                        "order {k} outside 1..={}",
                        self.k_max
                    )))
                }
                None => {
                    return Err(Error::InvalidConfig(
                        "fixed-order Gibbs test needs an order".into(),
                    ))
                }
            }
        }
        if self.method == Method::RjMcmc && self.k_max == 0 {
            return Err(Error::InvalidConfig("k_max must be at least 1".into()));
        }
        let a = self.alpha_level;
        let ok = match self.method {
            Method::Ar1BayesFactor => a.is_finite() && a > 0.0,
            _ => a > 0.0 && a < 1.0,
        };
        if !ok {
            return Err(Error::InvalidConfig(format!(
                "threshold {a} invalid for {}",
                self.method
            )));
        }
        Ok(())
    }
}

/// Residual series `R_t(β₂) = y_t − β₂ᵀx_t − α`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSeries {
    pub r: DVector<f64>,
    pub beta2: DVector<f64>,
    pub intercept: Option<f64>,
}

/// Builds `R_t = y_t − β₂ᵀx_t − α` for every `t`.
pub fn build_residuals(
    data: &Dataset,
    beta2: &[f64],
    intercept: Option<f64>,
) -> Result<ResidualSeries> {
    if beta2.len() != data.n_regressors() {
        return Err(Error::Dimension(format!(
            "beta2 has {} entries, dataset has {} regressors",
            beta2.len(),
            data.n_regressors()
        )));
    }
    let beta = DVector::from_column_slice(beta2);
    let mut r = data.y() - data.x() * &beta;
    if let Some(a) = intercept {
        r.add_scalar_mut(-a);
    }
    Ok(ResidualSeries {
        r,
        beta2: beta,
        intercept,
    })
}

/// `Δs_t = s_{t+1} − s_t`; output is one shorter than the input.
pub fn first_differences(series: &[f64]) -> Result<Vec<f64>> {
    if series.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "differencing needs at least 2 values, got {}",
            series.len()
        )));
    }
    Ok(series.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Running sum starting from `start`: `out[0] = start`, `out[i] = out[i−1] + d[i−1]`.
pub fn cumulative_sum(start: f64, increments: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(increments.len() + 1);
    let mut acc = start;
    out.push(acc);
    for d in increments {
        acc += d;
        out.push(acc);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Cointegrated,
    NotCointegrated,
}

impl Verdict {
    /// Applies the decision rule of `method` to a statistic.
    ///
    /// * Bayes factor: not cointegrated iff `K ≥ threshold`.
    /// * Credible tests: cointegrated iff the unit-root tail mass is `≤ threshold`.
    /// * Engle-Granger: cointegrated iff the ADF statistic lies below the
    ///   critical value passed as `threshold`.
    pub fn decide(method: Method, statistic: f64, threshold: f64) -> Self {
        let coint = match method {
            Method::Ar1BayesFactor => statistic < threshold,
            Method::Ar1Credible | Method::GibbsFixedOrder | Method::RjMcmc => {
                statistic <= threshold
            }
            Method::EngleGranger => statistic < threshold,
        };
        if coint {
            Verdict::Cointegrated
        } else {
            Verdict::NotCointegrated
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Cointegrated => "cointegrated",
            Verdict::NotCointegrated => "not-cointegrated",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of a cointegration test.
#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub verdict: Verdict,
    /// Bayes factor, posterior tail mass `p(ρ ≥ 1 | data)`, or ADF statistic.
    pub statistic: f64,
    pub threshold: f64,
    pub method: Method,
    pub diagnostics: BTreeMap<String, f64>,
}

impl TestResult {
    pub fn new(method: Method, statistic: f64, threshold: f64) -> Self {
        Self {
            verdict: Verdict::decide(method, statistic, threshold),
            statistic,
            threshold,
            method,
            diagnostics: BTreeMap::new(),
        }
    }

    pub fn with_diagnostic(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }
}
