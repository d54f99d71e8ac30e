//! Independent reference computations shared by integration tests.
//!
//! Nothing here calls the library's likelihood code. Only the dataset
//! accessors and the Gauss-Legendre rule are reused.

#![allow(dead_code)]

use bayescoint::numerics::gauss_legendre;
use bayescoint::Dataset;
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

/// A `t × 2` dataset with every entry uniform on `[−1, 1]`.
pub fn uniform_pair(seed: u64, t: usize) -> Dataset {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> Vec<f64> { (0..t).map(|_| rng.random_range(-1.0..=1.0)).collect() };
    let y = draw();
    let x = draw();
    Dataset::from_pair(&y, &x).expect("valid pair")
}

/// Composite Gauss-Legendre nodes and weights on `[a, b]`.
pub fn composite_rule(a: f64, b: f64, panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + h * p as f64;
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(lo + 0.5 * h * (xi + 1.0));
            weights.push(0.5 * h * wi);
        }
    }
    (nodes, weights)
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `log ∫∫∫ p(y | x, α, β, φ, σ²) σ⁻² dα dβ dσ²` for a single regressor,
/// with `R_1 ~ N(0, σ²)` and `R_t − φR_{t−1} ~ N(0, σ²)`, by direct
/// quadrature of the raw Gaussian likelihood. Constants shared across φ are
/// dropped.
///
/// Coordinates are `(α, β) = c + σ L z` with `L Lᵀ = (XᵀX)⁻¹` and `u = ln σ²`, so the box in `z`
/// does not need to grow with σ. `c` is any point near the mode; it only
/// places the box.
pub fn ar1_log_marginal_bruteforce(data: &Dataset, phi: f64) -> f64 {
    assert_eq!(data.n_regressors(), 1, "oracle handles one regressor");
    let y = data.y();
    let x = data.x().column(0).into_owned();
    let t = y.len();

    // Box centre and scale from a least-squares fit of the filtered rows.
    let mut rows = DMatrix::zeros(t, 2);
    let mut rhs = DVector::zeros(t);
    rows[(0, 0)] = 1.0;
    rows[(0, 1)] = x[0];
    rhs[0] = y[0];
    for i in 1..t {
        rows[(i, 0)] = 1.0 - phi;
        rows[(i, 1)] = x[i] - phi * x[i - 1];
        rhs[i] = y[i] - phi * y[i - 1];
    }
    let a: Matrix2<f64> = (rows.transpose() * &rows)
        .fixed_view::<2, 2>(0, 0)
        .into_owned();
    let b: Vector2<f64> = (rows.transpose() * &rhs)
        .fixed_view::<2, 1>(0, 0)
        .into_owned();
    let ainv = a.try_inverse().expect("regressors are collinear");
    let centre = ainv * b;
    // Whitening factor, so a square box in z covers a strongly correlated
    // (α, β) ridge.
    let l = ainv.cholesky().expect("inverse cross-product not SPD").l();

    let (y, x): (Vec<f64>, Vec<f64>) = (y.iter().copied().collect(), x.iter().copied().collect());
    let ssr = |alpha: f64, beta: f64| {
        let r = |i: usize| y[i] - alpha - beta * x[i];
        let mut s = r(0) * r(0);
        let mut prev = r(0);
        for i in 1..t {
            let cur = r(i);
            let e = cur - phi * prev;
            s += e * e;
            prev = cur;
        }
        s
    };
    let s_min = ssr(centre[0], centre[1]).max(1e-300);
    let u0 = (s_min / t as f64).ln();

    let (zn, zw) = composite_rule(-8.0, 8.0, 6, 8);
    let (un, uw) = composite_rule(u0 - 12.0, u0 + 45.0, 12, 8);
    let half_t = 0.5 * t as f64;
    let mut terms = Vec::with_capacity(un.len());
    for (&u, &wu) in un.iter().zip(&uw) {
        let sigma = (0.5 * u).exp();
        let inv2s2 = 0.5 * (-u).exp();
        let mut inner = 0.0;
        for (&z0, &w0) in zn.iter().zip(&zw) {
            for (&z1, &w1) in zn.iter().zip(&zw) {
                let alpha = centre[0] + sigma * l[(0, 0)] * z0;
                let beta = centre[1] + sigma * (l[(1, 0)] * z0 + l[(1, 1)] * z1);
                let excess = ssr(alpha, beta) - s_min;
                inner += w0 * w1 * (-excess * inv2s2).exp();
            }
        }
        // Likelihood σ^{−T}, prior σ⁻² cancelled by dσ² = σ² du, box
        // Jacobian σ² |L|.
        let log_val = -half_t * u - s_min * inv2s2 + u + inner.ln();
        terms.push(log_val + wu.ln());
    }
    log_sum_exp(&terms) + (l[(0, 0)] * l[(1, 1)]).ln()
}

/// Brute-force posterior density of φ at `points`, normalized on `[lo, hi]`.
pub fn ar1_phi_density_bruteforce(data: &Dataset, lo: f64, hi: f64, points: &[f64]) -> Vec<f64> {
    // Panels of width 0.4; width 1 misses sharp peaks by ~2e-4 in the normalizer.
    let panels = ((hi - lo) / 0.4).ceil() as usize;
    let (nodes, weights) = composite_rule(lo, hi, panels, 8);
    let logs: Vec<f64> = nodes
        .iter()
        .zip(&weights)
        .map(|(&p, &w)| ar1_log_marginal_bruteforce(data, p) + w.ln())
        .collect();
    let log_z = log_sum_exp(&logs);
    points
        .iter()
        .map(|&p| (ar1_log_marginal_bruteforce(data, p) - log_z).exp())
        .collect()
}

/// Gaussian-kernel density estimate at `points`.
pub fn kde(samples: &[f64], bandwidth: f64, points: &[f64]) -> Vec<f64> {
    let norm = 1.0 / (samples.len() as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    points
        .iter()
        .map(|&p| {
            norm * samples
                .iter()
                .map(|s| {
                    let d = (p - s) / bandwidth;
                    (-0.5 * d * d).exp()
                })
                .sum::<f64>()
        })
        .collect()
}

/// A tabulated density convolved with the same Gaussian kernel, so it can be
/// compared with [`kde`] without smoothing bias.
pub fn smooth_tabulated(grid: &[f64], density: &[f64], bandwidth: f64, points: &[f64]) -> Vec<f64> {
    let c = 1.0 / (bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    points
        .iter()
        .map(|&p| {
            let k = |x: f64| {
                let d = (p - x) / bandwidth;
                c * (-0.5 * d * d).exp()
            };
            grid.windows(2)
                .zip(density.windows(2))
                .map(|(g, f)| 0.5 * (g[1] - g[0]) * (f[0] * k(g[0]) + f[1] * k(g[1])))
                .sum::<f64>()
        })
        .collect()
}

/// Lag-polynomial roots by brute-force Durand-Kerner iteration, for
/// cross-checking the companion-matrix solver.
pub fn durand_kerner(monic_desc: &[f64]) -> Vec<nalgebra::Complex<f64>> {
    use nalgebra::Complex;
    let n = monic_desc.len() - 1;
    let eval = |z: Complex<f64>| {
        monic_desc
            .iter()
            .fold(Complex::new(0.0, 0.0), |acc, &c| acc * z + c)
    };
    let mut roots: Vec<Complex<f64>> = (0..n)
        .map(|i| Complex::new(0.4, 0.9).powu(i as u32))
        .collect();
    for _ in 0..2000 {
        let prev = roots.clone();
        for i in 0..n {
            let mut denom = Complex::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    denom *= roots[i] - roots[j];
                }
            }
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
        }
        let delta: f64 = roots.iter().zip(&prev).map(|(a, b)| (a - b).norm()).sum();
        if delta < 1e-15 {
            break;
        }
    }
    roots
}
