//! Numerical kernels shared by the inference modules: Gauss-Legendre
//! quadrature, companion-matrix root finding, small dense SPD algebra,
//! Gaussian and scaled-inverse-χ² sampling, and Richardson extrapolation.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};

/// Distance from 1 below which a root is classified as a unit root.
///
/// Only used for reporting; inference never branches on it.
pub const UNIT_ROOT_TOL: f64 = 1e-8;

/// Nodes and weights of a quadrature rule on `(a, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub a: f64,
    pub b: f64,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, by Newton iteration on
/// the three-term Legendre recurrence.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "Gauss-Legendre order must be positive");
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

impl QuadratureGrid {
    /// Single-panel Gauss-Legendre rule.
    pub fn gauss_legendre(a: f64, b: f64, order: usize) -> Self {
        Self::composite(&[a, b], order)
    }

    /// Composite Gauss-Legendre rule over consecutive `breakpoints`.
    pub fn composite(breakpoints: &[f64], order: usize) -> Self {
        assert!(breakpoints.len() >= 2);
        let (z, w) = gauss_legendre(order);
        let mut nodes = Vec::with_capacity((breakpoints.len() - 1) * order);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for p in breakpoints.windows(2) {
            let half = 0.5 * (p[1] - p[0]);
            let mid = 0.5 * (p[1] + p[0]);
            for (zi, wi) in z.iter().zip(&w) {
                nodes.push(mid + half * zi);
                weights.push(half * wi);
            }
        }
        Self {
            nodes,
            weights,
            a: breakpoints[0],
            b: *breakpoints.last().unwrap(),
        }
    }

    /// `panels` equal panels, with the two end panels further split
    /// geometrically (`grading` halvings) toward `a` and `b`.
    pub fn graded(a: f64, b: f64, panels: usize, grading: usize, order: usize) -> Self {
        Self::composite(&graded_breakpoints(a, b, panels, grading), order)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn graded_breakpoints(a: f64, b: f64, panels: usize, grading: usize) -> Vec<f64> {
    let h = (b - a) / panels as f64;
    let mut pts = Vec::with_capacity(panels + 1 + 2 * grading);
    pts.push(a);
    for j in (1..=grading).rev() {
        pts.push(a + h * 0.5f64.powi(j as i32));
    }
    for i in 1..panels {
        pts.push(a + h * i as f64);
    }
    for j in 1..=grading {
        pts.push(b - h * 0.5f64.powi(j as i32));
    }
    pts.push(b);
    pts
}

/// `Σ wᵢ f(xᵢ)` over the grid; fails on the first non-finite evaluation.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, grid: &QuadratureGrid) -> Result<f64> {
    let mut acc = 0.0;
    for (&x, &w) in grid.nodes.iter().zip(&grid.weights) {
        let v = f(x);
        if !v.is_finite() {
            return Err(Error::NonFinite { node: x, value: v });
        }
        acc += w * v;
    }
    Ok(acc)
}

/// `log Σ wᵢ exp(logf(xᵢ))`, stable against overflow.
pub fn log_integrate<F>(mut log_f: F, grid: &QuadratureGrid) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut vals = Vec::with_capacity(grid.len());
    for &x in &grid.nodes {
        let v = log_f(x)?;
        if v.is_nan() || v == f64::INFINITY {
            return Err(Error::NonFinite { node: x, value: v });
        }
        vals.push(v);
    }
    let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return Ok(m);
    }
    let s: f64 = vals
        .iter()
        .zip(&grid.weights)
        .map(|(v, w)| w * (v - m).exp())
        .sum();
    Ok(m + s.ln())
}

/// Refinement policy for [`adaptive_log_integral`].
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub order: usize,
    pub initial_panels: usize,
    pub max_panels: usize,
    pub grading: usize,
    pub rel_tol: f64,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            order: 20,
            initial_panels: 8,
            max_panels: 8192,
            grading: 12,
            rel_tol: 1e-9,
        }
    }
}

/// Record of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureDiagnostics {
    pub panels: usize,
    pub evaluations: usize,
    pub rel_change: f64,
    pub converged: bool,
}

/// Integrates `exp(log_f)` over `(a, b)` on graded composite Gauss-Legendre
/// rules, doubling the panel count until successive estimates agree to
/// `rel_tol`. Returns the log of the integral.
pub fn adaptive_log_integral<F>(
    mut log_f: F,
    a: f64,
    b: f64,
    opts: &AdaptiveOptions,
) -> Result<(f64, QuadratureDiagnostics)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut panels = opts.initial_panels.max(1);
    let mut evaluations = 0;
    let grid = QuadratureGrid::graded(a, b, panels, opts.grading, opts.order);
    evaluations += grid.len();
    let mut prev = log_integrate(&mut log_f, &grid)?;
    loop {
        panels *= 2;
        let grid = QuadratureGrid::graded(a, b, panels, opts.grading, opts.order);
        evaluations += grid.len();
        let cur = log_integrate(&mut log_f, &grid)?;
        let rel_change = if cur == prev {
            0.0
        } else {
            (cur - prev).exp_m1().abs()
        };
        let converged = rel_change < opts.rel_tol;
        if converged || panels >= opts.max_panels {
            return Ok((
                cur,
                QuadratureDiagnostics {
                    panels,
                    evaluations,
                    rel_change,
                    converged,
                },
            ));
        }
        prev = cur;
    }
}

/// Roots of `a₀zᵏ + a₁zᵏ⁻¹ + ⋯ + a_k` (coefficients highest degree first)
/// as eigenvalues of the companion matrix, polished by Newton steps.
pub fn polynomial_roots(coeffs: &[f64]) -> Result<Vec<Complex<f64>>> {
    if coeffs.len() < 2 {
        return Err(Error::Degenerate("polynomial of degree 0".into()));
    }
    let lead = coeffs[0];
    if lead == 0.0 || !lead.is_finite() {
        return Err(Error::Degenerate("leading coefficient is zero".into()));
    }
    let k = coeffs.len() - 1;
    let monic: Vec<f64> = coeffs.iter().map(|c| c / lead).collect();
    if k == 1 {
        return Ok(vec![Complex::new(-monic[1], 0.0)]);
    }
    let mut companion = DMatrix::<f64>::zeros(k, k);
    for j in 0..k {
        companion[(0, j)] = -monic[j + 1];
    }
    for i in 1..k {
        companion[(i, i - 1)] = 1.0;
    }
    let mut roots: Vec<Complex<f64>> = companion.complex_eigenvalues().iter().copied().collect();
    for r in roots.iter_mut() {
        *r = polish_root(&monic, *r);
    }
    Ok(roots)
}

fn polish_root(monic: &[f64], mut z: Complex<f64>) -> Complex<f64> {
    for _ in 0..3 {
        let mut p = Complex::new(1.0, 0.0);
        let mut dp = Complex::new(0.0, 0.0);
        for &c in &monic[1..] {
            dp = dp * z + p;
            p = p * z + c;
        }
        if dp.norm() == 0.0 {
            break;
        }
        let step = p / dp;
        if !step.re.is_finite() || !step.im.is_finite() {
            break;
        }
        let candidate = z - step;
        // Newton can wander for clustered roots; keep only improvements.
        if poly_abs(monic, candidate) < poly_abs(monic, z) {
            z = candidate;
        } else {
            break;
        }
    }
    if z.im.abs() < 1e-14 * z.norm().max(1.0) {
        z.im = 0.0;
    }
    z
}

fn poly_abs(monic: &[f64], z: Complex<f64>) -> f64 {
    monic[1..]
        .iter()
        .fold(Complex::new(1.0, 0.0), |p, &c| p * z + c)
        .norm()
}

/// Roots of `Π(z) = zᵏ − φ₁zᵏ⁻¹ − ⋯ − φ_k`.
pub fn ar_roots(phi: &[f64]) -> Result<Vec<Complex<f64>>> {
    let mut coeffs = Vec::with_capacity(phi.len() + 1);
    coeffs.push(1.0);
    coeffs.extend(phi.iter().map(|p| -p));
    polynomial_roots(&coeffs)
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DMatrix<f64>,
}

impl Cholesky {
    /// Factors `a`, reading only its lower triangle. Reports the first
    /// non-positive pivot on failure.
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension(format!(
                "expected a square matrix, got {}x{}",
                n,
                a.ncols()
            )));
        }
        let mut l = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for p in 0..j {
                d -= l[(j, p)] * l[(j, p)];
            }
            // Relative floor: pivots at rounding level of the diagonal are singular.
            let scale = a[(j, j)].abs().max(f64::MIN_POSITIVE);
            if !(d > 1e-14 * scale) || !d.is_finite() {
                return Err(Error::SingularCovariance { index: j, pivot: d });
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for p in 0..j {
                    s -= l[(i, p)] * l[(j, p)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { l })
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// `log |A|`.
    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Solves `L y = b`.
    pub fn solve_lower(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut y = b.clone();
        for i in 0..n {
            let mut s = y[i];
            for p in 0..i {
                s -= self.l[(i, p)] * y[p];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    /// Solves `Lᵀ x = y`.
    pub fn solve_upper(&self, y: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut x = y.clone();
        for i in (0..n).rev() {
            let mut s = x[i];
            for p in i + 1..n {
                s -= self.l[(p, i)] * x[p];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.solve_upper(&self.solve_lower(b))
    }

    /// `bᵀ A⁻¹ b`.
    pub fn inv_quad(&self, b: &DVector<f64>) -> f64 {
        self.solve_lower(b).norm_squared()
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut inv = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            inv.set_column(j, &self.solve(&e));
        }
        inv
    }
}

/// Solution of an SPD system together with `log |A|`.
#[derive(Debug, Clone)]
pub struct SpdSolution {
    pub x: DVector<f64>,
    pub log_det: f64,
}

pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<SpdSolution> {
    if b.len() != a.nrows() {
        return Err(Error::Dimension(format!(
            "rhs has {} entries for a {}x{} matrix",
            b.len(),
            a.nrows(),
            a.ncols()
        )));
    }
    let chol = Cholesky::new(a)?;
    Ok(SpdSolution {
        x: chol.solve(b),
        log_det: chol.log_det(),
    })
}

pub fn standard_normal_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// Draw from `N(mean, covariance)`.
pub fn sample_mvn<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    covariance: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    if covariance.nrows() != mean.len() {
        return Err(Error::Dimension("mean and covariance disagree".into()));
    }
    let chol = Cholesky::new(covariance)?;
    let z = standard_normal_vector(mean.len(), rng);
    Ok(mean + chol.l() * z)
}

/// Draw from `N(P⁻¹ b, s² P⁻¹)` given the Cholesky factor of the precision
/// `P`. This is the shape of every Gaussian full conditional in the
/// samplers.
pub fn sample_gaussian_conditional<R: Rng + ?Sized>(
    precision: &Cholesky,
    rhs: &DVector<f64>,
    scale2: f64,
    rng: &mut R,
) -> DVector<f64> {
    let mean = precision.solve(rhs);
    let z = standard_normal_vector(mean.len(), rng);
    mean + precision.solve_upper(&z) * scale2.sqrt()
}

/// Scaled inverse-χ² distribution with `nu` degrees of freedom and scale `tau2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledInvChi2 {
    nu: f64,
    tau2: f64,
}

impl ScaledInvChi2 {
    pub fn new(nu: f64, tau2: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) || !(tau2 > 0.0 && tau2.is_finite()) {
            return Err(Error::Domain(format!(
                "scaled inverse chi-squared needs nu > 0 and tau2 > 0, got ({nu}, {tau2})"
            )));
        }
        Ok(Self { nu, tau2 })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn tau2(&self) -> f64 {
        self.tau2
    }

    pub fn mean(&self) -> Option<f64> {
        (self.nu > 2.0).then(|| self.nu * self.tau2 / (self.nu - 2.0))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_scaled_inv_chi2(self, rng)
    }
}

/// `ν τ² / χ²_ν`, with `χ²_ν` drawn as `Gamma(ν/2, 2)`.
pub fn sample_scaled_inv_chi2<R: Rng + ?Sized>(params: &ScaledInvChi2, rng: &mut R) -> f64 {
    let gamma = Gamma::new(0.5 * params.nu, 2.0).expect("validated shape");
    loop {
        let chi2: f64 = gamma.sample(rng);
        if chi2 > 0.0 {
            return params.nu * params.tau2 / chi2;
        }
    }
}

/// Evaluation ladder and acceptance tolerance for [`richardson_limit`].
#[derive(Debug, Clone, Copy)]
pub struct RichardsonOptions {
    pub eps0: f64,
    pub levels: usize,
    /// Accept when the best diagonal correction is below
    /// `tol · (1 + |estimate|)`.
    pub tol: f64,
}

impl Default for RichardsonOptions {
    fn default() -> Self {
        Self {
            eps0: 1e-2,
            levels: 8,
            tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitEstimate {
    pub value: f64,
    /// Difference between the chosen diagonal entry and its predecessor.
    pub error: f64,
    pub level: usize,
}

/// `lim_{ε→0⁺} f(ε)` from the ladder `ε_j = ε₀ 2^{−j}`, `j = 0..=levels`,
/// assuming an error expansion in integer powers of `ε`.
pub fn richardson_limit<F>(mut f: F, opts: &RichardsonOptions) -> Result<LimitEstimate>
where
    F: FnMut(f64) -> Result<f64>,
{
    if opts.levels == 0 || !(opts.eps0 > 0.0) {
        return Err(Error::InvalidConfig(
            "Richardson ladder needs eps0 > 0 and at least one level".into(),
        ));
    }
    let mut prev_row: Vec<f64> = Vec::new();
    let mut diag = Vec::with_capacity(opts.levels + 1);
    for j in 0..=opts.levels {
        let h = opts.eps0 * 0.5f64.powi(j as i32);
        let v = f(h)?;
        if !v.is_finite() {
            return Err(Error::NonFinite { node: h, value: v });
        }
        let mut row = Vec::with_capacity(j + 1);
        row.push(v);
        for i in 1..=j {
            let factor = (1u64 << i) as f64 - 1.0;
            let t = row[i - 1] + (row[i - 1] - prev_row[i - 1]) / factor;
            row.push(t);
        }
        diag.push(row[j]);
        prev_row = row;
    }
    let (level, error) = (1..diag.len())
        .map(|j| (j, (diag[j] - diag[j - 1]).abs()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one level");
    let value = diag[level];
    if error > opts.tol * (1.0 + value.abs()) {
        return Err(Error::LimitDiverged {
            estimate: value,
            correction: error,
        });
    }
    Ok(LimitEstimate {
        value,
        error,
        level,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quadrature_weights_sum_to_length() {
        let g = QuadratureGrid::graded(-1.0, 1.0, 16, 10, 20);
        let s: f64 = g.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-12);
        assert!(g.nodes.iter().all(|x| *x > -1.0 && *x < 1.0));
    }

    #[test]
    fn quadrature_on_polynomials() {
        let g = QuadratureGrid::graded(-1.0, 1.0, 8, 6, 20);
        assert!((integrate(|_| 1.0, &g).unwrap() - 2.0).abs() < 1e-12);
        assert!(integrate(|x| x, &g).unwrap().abs() < 1e-12);
        // antiderivative x³/3
        assert!((integrate(|x| x * x, &g).unwrap() - 2.0 / 3.0).abs() < 1e-10);
        let single = QuadratureGrid::gauss_legendre(0.0, 2.0, 5);
        // exact through degree 9: ∫₀² x⁹ = 2¹⁰/10
        assert!((integrate(|x| x.powi(9), &single).unwrap() - 102.4).abs() < 1e-10);
    }

    #[test]
    fn non_finite_integrand_reports_node() {
        let g = QuadratureGrid::gauss_legendre(-1.0, 1.0, 4);
        let err = integrate(|x| if x > 0.5 { f64::NAN } else { 1.0 }, &g).unwrap_err();
        match err {
            Error::NonFinite { node, .. } => assert!(node > 0.5),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn adaptive_integral_of_sharp_peak() {
        // Gaussian of width 1e-3 centred at 0.999; mass inside (−1,1) from erf.
        let s = 1e-3;
        let (log_i, diag) = adaptive_log_integral(
            |x| Ok(-0.5 * ((x - 0.999) / s).powi(2)),
            -1.0,
            1.0,
            &AdaptiveOptions::default(),
        )
        .unwrap();
        assert!(diag.converged);
        // P(Z < 1) for the standardized upper edge, times √(2π)·s
        let phi_1 = 0.841_344_746_068_542_9;
        let expect = (2.0 * std::f64::consts::PI).sqrt() * s * phi_1;
        assert!((log_i.exp() / expect - 1.0).abs() < 1e-8);
    }

    #[test]
    fn roots_of_simple_polynomials() {
        let r = ar_roots(&[1.0]).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0] - Complex::new(1.0, 0.0)).norm() < 1e-14);

        let mut r = ar_roots(&[0.5, 0.5]).unwrap();
        r.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((r[0] - Complex::new(-0.5, 0.0)).norm() < 1e-12);
        assert!((r[1] - Complex::new(1.0, 0.0)).norm() < 1e-12);

        assert!(matches!(
            polynomial_roots(&[3.0]),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            polynomial_roots(&[0.0, 1.0]),
            Err(Error::Degenerate(_))
        ));
    }

    fn expand(roots: &[Complex<f64>]) -> Vec<Complex<f64>> {
        let mut c = vec![Complex::new(1.0, 0.0)];
        for r in roots {
            let mut next = vec![Complex::new(0.0, 0.0); c.len() + 1];
            for (i, ci) in c.iter().enumerate() {
                next[i] += ci;
                next[i + 1] -= ci * r;
            }
            c = next;
        }
        c
    }

    #[test]
    fn complex_roots_come_in_conjugate_pairs() {
        // z² + 1
        let r = polynomial_roots(&[1.0, 0.0, 1.0]).unwrap();
        assert!((r[0].im + r[1].im).abs() < 1e-14);
        assert!((r[0].im.abs() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn roots_re_expand_to_coefficients(coeffs in prop::collection::vec(-2.0f64..2.0, 1..=6)) {
            let mut poly = vec![1.0];
            poly.extend(&coeffs);
            let roots = polynomial_roots(&poly).unwrap();
            let back = expand(&roots);
            for (b, c) in back.iter().zip(&poly) {
                prop_assert!((b.re - c).abs() < 1e-8, "{:?} vs {:?}", back, poly);
                prop_assert!(b.im.abs() < 1e-8);
            }
        }
    }

    #[test]
    fn spd_solves() {
        let id = DMatrix::<f64>::identity(3, 3);
        let b = DVector::from_vec(vec![1.0, -2.0, 3.5]);
        let s = solve_spd(&id, &b).unwrap();
        assert_eq!(s.x, b);
        assert_eq!(s.log_det, 0.0);

        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 4.0]));
        let s = solve_spd(&d, &DVector::from_vec(vec![2.0, 4.0])).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-15 && (s.x[1] - 1.0).abs() < 1e-15);
        assert!((s.log_det - 8f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn random_spd_residual_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..8 {
            let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let a = m.transpose() * &m + DMatrix::identity(n, n);
            let b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let s = solve_spd(&a, &b).unwrap();
            assert!((&a * &s.x - &b).norm() <= 1e-8 * b.norm());
            let det = a.clone().determinant();
            assert!((s.log_det - det.ln()).abs() < 1e-10);
        }
    }

    #[test]
    fn non_spd_is_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match solve_spd(&a, &DVector::from_vec(vec![1.0, 1.0])) {
            Err(Error::SingularCovariance { index, pivot }) => {
                assert_eq!(index, 1);
                assert!(pivot < 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mvn_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 100_000;
        let mean = DVector::zeros(2);
        let id = DMatrix::identity(2, 2);
        let mut s = DVector::zeros(2);
        for _ in 0..n {
            s += sample_mvn(&mean, &id, &mut rng).unwrap();
        }
        s /= n as f64;
        let bound = 4.0 / (n as f64).sqrt();
        assert!(s.iter().all(|v| v.abs() < bound), "{s}");

        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let mut acc = DMatrix::<f64>::zeros(2, 2);
        for _ in 0..n {
            let d = sample_mvn(&mean, &cov, &mut rng).unwrap();
            acc += &d * d.transpose();
        }
        acc /= n as f64;
        for i in 0..2 {
            for j in 0..2 {
                assert!((acc[(i, j)] - cov[(i, j)]).abs() < 0.05, "{acc}");
            }
        }
    }

    #[test]
    fn mvn_is_deterministic() {
        let mean = DVector::from_vec(vec![1.0, -1.0, 3.0]);
        let id = DMatrix::identity(3, 3);
        let a = sample_mvn(&mean, &id, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_mvn(&mean, &id, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gaussian_conditional_matches_covariance_route() {
        let p = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let chol = Cholesky::new(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let mut m = DVector::zeros(2);
        let mut c = DMatrix::zeros(2, 2);
        let draws: Vec<_> = (0..n)
            .map(|_| sample_gaussian_conditional(&chol, &b, 0.5, &mut rng))
            .collect();
        for d in &draws {
            m += d;
        }
        m /= n as f64;
        for d in &draws {
            let e = d - &m;
            c += &e * e.transpose();
        }
        c /= n as f64;
        let mean = p.clone().try_inverse().unwrap() * &b;
        let cov = p.try_inverse().unwrap() * 0.5;
        assert!((m - mean).norm() < 0.01);
        assert!((c - cov).norm() < 0.01);
    }

    #[test]
    fn scaled_inv_chi2_mean() {
        let d = ScaledInvChi2::new(10.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
        assert!(draws.iter().all(|v| *v > 0.0));
        let mean = draws.iter().sum::<f64>() / n as f64;
        // variance of the distribution: 2ν²τ⁴ / ((ν−2)²(ν−4))
        let var = 2.0 * 100.0 / (64.0 * 6.0);
        let se = (var / n as f64).sqrt();
        assert!((mean - 1.25).abs() < 3.0 * se, "{mean}");
        let a = d.sample(&mut ChaCha8Rng::seed_from_u64(4));
        let b = d.sample(&mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a, b);
        assert!(ScaledInvChi2::new(0.0, 1.0).is_err());
    }

    #[test]
    fn richardson_examples() {
        let o = RichardsonOptions::default();
        let l = richardson_limit(|e| Ok((e * e + e * e * e) / (e * e)), &o).unwrap();
        assert!((l.value - 1.0).abs() < 1e-10);
        let l = richardson_limit(|e| Ok(e.powi(3) / (e * e)), &o).unwrap();
        assert!(l.value.abs() < 1e-10);
        let six = RichardsonOptions { levels: 6, ..o };
        let l = richardson_limit(|e: f64| Ok(e.sin() / e), &six).unwrap();
        assert!((l.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn richardson_flags_divergence() {
        let o = RichardsonOptions::default();
        assert!(matches!(
            richardson_limit(|e: f64| Ok(e.ln()), &o),
            Err(Error::LimitDiverged { .. })
        ));
        assert!(matches!(
            richardson_limit(|e: f64| Ok(1.0 / e), &o),
            Err(Error::LimitDiverged { .. })
        ));
        assert!(matches!(
            richardson_limit(|_| Ok(f64::NAN), &o),
            Err(Error::NonFinite { .. })
        ));
    }
}
