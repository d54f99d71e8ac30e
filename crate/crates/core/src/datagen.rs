//! Synthetic benchmark instances: a random-walk regressor, a regressand built
//! from it through `y_t = β₂x_t + α + R_t`, and an AR residual `R_t` that is
//! either stationary (cointegrated) or has an exact unit root.
//!
//! Stationary coefficients are drawn uniformly from the positive region whose
//! largest root of `Π` lies in `(root_floor, 1)`. Unit-root coefficients are
//! obtained from a stationary difference process `ΔR` of one order less.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::arp::ArParams;
use crate::data::{cumulative_sum, Dataset, Verdict};
use crate::error::{Error, Result};

/// Rejection attempts allowed before declaring the region infeasible.
pub const MAX_ATTEMPTS: u64 = 1_000_000;

/// Residual order of generated instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderChoice {
    Fixed(usize),
    /// Uniform over `{1..=k}`.
    UniformUpTo(usize),
}

impl OrderChoice {
    pub fn max(self) -> usize {
        match self {
            OrderChoice::Fixed(k) | OrderChoice::UniformUpTo(k) => k,
        }
    }

    fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> usize {
        match self {
            OrderChoice::Fixed(k) => k,
            OrderChoice::UniformUpTo(k) => rng.random_range(1..=k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenConfig {
    /// Series length `T`.
    pub t: usize,
    pub order: OrderChoice,
    pub p_unit_root: f64,
    /// The largest root of `Π` must exceed this in magnitude.
    pub root_floor: f64,
    /// Interval for `β₂` and `α`.
    pub coef_range: (f64, f64),
    pub sigma2: f64,
    /// Residual steps simulated and discarded before the first kept value.
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            t: 200,
            order: OrderChoice::Fixed(1),
            p_unit_root: 0.5,
            root_floor: 0.8,
            coef_range: (0.0, 5.0),
            sigma2: 1.0,
            burn_in: 200,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.root_floor > 0.0 && self.root_floor < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "root floor must lie in (0, 1), got {}",
                self.root_floor
            )));
        }
        if !(0.0..=1.0).contains(&self.p_unit_root) {
            return Err(Error::InvalidConfig(format!(
                "unit-root probability must lie in [0, 1], got {}",
                self.p_unit_root
            )));
        }
        if !(self.sigma2 > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "noise variance must be positive, got {}",
                self.sigma2
            )));
        }
        let (lo, hi) = self.coef_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidConfig(format!(
                "invalid coefficient range [{lo}, {hi}]"
            )));
        }
        if self.order.max() == 0 {
            return Err(Error::InvalidConfig(
                "residual order must be at least 1".into(),
            ));
        }
        if self.t < 5 {
            return Err(Error::InsufficientData(format!(
                "series length {} is too short",
                self.t
            )));
        }
        Ok(())
    }
}

/// A generated dataset with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct GenInstance {
    pub data: Dataset,
    pub label: Verdict,
    pub true_phi: Vec<f64>,
    pub true_beta2: Vec<f64>,
    pub true_intercept: f64,
}

impl GenInstance {
    pub fn order(&self) -> usize {
        self.true_phi.len()
    }

    pub fn is_cointegrated(&self) -> bool {
        self.label == Verdict::Cointegrated
    }
}

/// Generator for instance `index` of a study seeded with `seed`. Each
/// instance owns an independent ChaCha stream.
pub fn instance_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn accepts(phi: &[f64], root_floor: f64) -> Result<bool> {
    let p = ArParams::new(phi)?;
    Ok(p.is_stationary() && p.max_root_modulus() > root_floor)
}

/// Uniform draw from `{φ ∈ (0,1]^k : all roots of Π inside the unit circle,
/// largest modulus > root_floor}` by rejection.
pub fn sample_stationary_constrained<R: Rng + ?Sized>(
    k: usize,
    root_floor: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::InvalidConfig("order must be at least 1".into()));
    }
    if !(root_floor > 0.0 && root_floor < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "root floor must lie in (0, 1), got {root_floor}"
        )));
    }
    for _ in 0..MAX_ATTEMPTS {
        // 1 − [0,1) is uniform on (0,1]
        let phi: Vec<f64> = (0..k).map(|_| 1.0 - rng.random::<f64>()).collect();
        // With positive coefficients the dominant root is real and positive,
        // so Σφ ≥ 1 already places it on or outside the unit circle.
        if phi.iter().sum::<f64>() >= 1.0 {
            continue;
        }
        if accepts(&phi, root_floor)? {
            return Ok(phi);
        }
    }
    Err(Error::GenerationStalled {
        attempts: MAX_ATTEMPTS,
        accepted: 0,
    })
}

/// Coefficients of `(1 − L)(1 − ψ₁L − ⋯ − ψ_{k−1}L^{k−1})`, an AR(k) with
/// an exact unit root.
pub fn embed_unit_root(psi: &[f64]) -> Vec<f64> {
    let k = psi.len() + 1;
    let mut phi = vec![0.0; k];
    phi[0] = 1.0 + psi.first().copied().unwrap_or(0.0);
    for i in 1..k - 1 {
        phi[i] = psi[i] - psi[i - 1];
    }
    if k > 1 {
        phi[k - 1] = -psi[k - 2];
    }
    phi
}

/// `R_t = Σ φᵢ R_{t−i} + e_t` with zero pre-sample values.
pub fn simulate_ar(phi: &[f64], noise: &[f64]) -> Vec<f64> {
    let mut r = Vec::with_capacity(noise.len());
    for (t, e) in noise.iter().enumerate() {
        let mut v = *e;
        for (i, p) in phi.iter().enumerate() {
            if t > i {
                v += p * r[t - i - 1];
            }
        }
        r.push(v);
    }
    r
}

/// Draws one labelled instance. Pure given the generator state.
pub fn generate_instance<R: Rng + ?Sized>(config: &GenConfig, rng: &mut R) -> Result<GenInstance> {
    config.validate()?;
    let k = config.order.draw(rng);
    let unit_root = rng.random::<f64>() < config.p_unit_root;
    let phi = if unit_root {
        let psi = if k > 1 {
            sample_stationary_constrained(k - 1, config.root_floor, rng)?
        } else {
            Vec::new()
        };
        embed_unit_root(&psi)
    } else {
        sample_stationary_constrained(k, config.root_floor, rng)?
    };
    let sd = config.sigma2.sqrt();
    let n = config.burn_in + config.t;
    let noise: Vec<f64> = (0..n)
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let r = simulate_ar(&phi, &noise);
    let r = &r[config.burn_in..];
    let steps: Vec<f64> = (0..config.t)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let x = cumulative_sum(0.0, &steps);
    let x = &x[1..];
    let (lo, hi) = config.coef_range;
    let uniform = |rng: &mut R| lo + (hi - lo) * rng.random::<f64>();
    let beta2 = uniform(rng);
    let alpha = uniform(rng);
    let y: Vec<f64> = x
        .iter()
        .zip(r)
        .map(|(xi, ri)| beta2 * xi + alpha + ri)
        .collect();
    Ok(GenInstance {
        data: Dataset::from_pair(&y, x)?,
        label: if unit_root {
            Verdict::NotCointegrated
        } else {
            Verdict::Cointegrated
        },
        true_phi: phi,
        true_beta2: vec![beta2],
        true_intercept: alpha,
    })
}

/// Instance `index` of the study described by `config`.
pub fn generate_indexed(config: &GenConfig, index: u64) -> Result<GenInstance> {
    generate_instance(config, &mut instance_rng(config.seed, index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::adf_test;
    use crate::numerics::polynomial_roots;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn embed_examples() {
        assert_eq!(embed_unit_root(&[]), vec![1.0]);
        assert_eq!(embed_unit_root(&[0.5]), vec![1.5, -0.5]);
        let mut roots: Vec<f64> = polynomial_roots(&[1.0, -1.5, 0.5])
            .unwrap()
            .iter()
            .map(|r| r.re)
            .collect();
        roots.sort_by(f64::total_cmp);
        assert!((roots[0] - 0.5).abs() < 1e-12 && (roots[1] - 1.0).abs() < 1e-12);
        let phi = embed_unit_root(&[0.3, 0.2, 0.1]);
        let p = ArParams::new(&phi).unwrap();
        assert!(p.has_unit_root());
        assert!((phi.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn stationary_draws_respect_the_region() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in 1..=4 {
            for _ in 0..200 {
                let phi = sample_stationary_constrained(k, 0.8, &mut rng).unwrap();
                assert!(phi.iter().all(|p| *p > 0.0 && *p <= 1.0));
                let m = ArParams::new(&phi).unwrap().max_root_modulus();
                assert!(m > 0.8 && m < 1.0);
                assert!(phi.iter().sum::<f64>() < 1.0);
            }
        }
    }

    #[test]
    fn order_one_draws_are_uniform_above_the_floor() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 10_000;
        let mut v: Vec<f64> = (0..n)
            .map(|_| sample_stationary_constrained(1, 0.8, &mut rng).unwrap()[0])
            .collect();
        v.sort_by(f64::total_cmp);
        let ks = v
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let f = (x - 0.8) / 0.2;
                (f - i as f64 / n as f64)
                    .abs()
                    .max((f - (i + 1) as f64 / n as f64).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.02, "{ks}");
    }

    #[test]
    fn infeasible_region_stalls() {
        // Positive coefficients put the largest root at no less than φ₁, so
        // a floor just below 1 leaves almost no volume at high order.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = sample_stationary_constrained(12, 0.999_999, &mut rng);
        assert!(matches!(r, Err(Error::GenerationStalled { .. })));
    }

    #[test]
    fn difference_and_level_simulations_agree_exactly_on_dyadic_input() {
        let psi = [0.5, -0.25];
        let noise: Vec<f64> = (0..40).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let via_levels = simulate_ar(&embed_unit_root(&psi), &noise);
        let via_diffs = cumulative_sum(0.0, &simulate_ar(&psi, &noise));
        assert_eq!(via_levels, via_diffs[1..].to_vec());
    }

    proptest! {
        #[test]
        fn difference_and_level_simulations_agree(
            psi in prop::collection::vec(0.05f64..0.3, 0..4),
            seed in 0u64..1000,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noise: Vec<f64> = (0..200).map(|_| rng.sample(StandardNormal)).collect();
            let a = simulate_ar(&embed_unit_root(&psi), &noise);
            let b = cumulative_sum(0.0, &simulate_ar(&psi, &noise));
            for (x, y) in a.iter().zip(&b[1..]) {
                prop_assert!((x - y).abs() <= 1e-10 * (1.0 + y.abs()));
            }
        }

        #[test]
        fn unit_root_coefficients_sum_to_one(psi in prop::collection::vec(0.0f64..0.3, 0..5)) {
            let phi = embed_unit_root(&psi);
            prop_assert_eq!(phi.len(), psi.len() + 1);
            prop_assert!((phi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn instances_are_labelled_consistently() {
        let cfg = GenConfig {
            order: OrderChoice::UniformUpTo(3),
            seed: 5,
            ..GenConfig::default()
        };
        let mut coint = 0;
        let n = 2000;
        for i in 0..n {
            let g = generate_indexed(&cfg, i).unwrap();
            let p = ArParams::new(&g.true_phi).unwrap();
            assert_eq!((g.data.len(), g.data.n_series()), (200, 2));
            assert!((1..=3).contains(&g.order()));
            if g.is_cointegrated() {
                coint += 1;
                assert!(p.is_stationary());
                assert!(g.true_phi.iter().sum::<f64>() < 1.0);
            } else {
                assert!(p.has_unit_root());
                assert!((g.true_phi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            let (lo, hi) = cfg.coef_range;
            assert!((lo..=hi).contains(&g.true_beta2[0]) && (lo..=hi).contains(&g.true_intercept));
        }
        assert!((coint as f64 / n as f64 - 0.5).abs() < 0.04);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = GenConfig {
            seed: 9,
            order: OrderChoice::Fixed(2),
            ..GenConfig::default()
        };
        assert_eq!(
            generate_indexed(&cfg, 3).unwrap(),
            generate_indexed(&cfg, 3).unwrap()
        );
        assert_ne!(
            generate_indexed(&cfg, 3).unwrap(),
            generate_indexed(&cfg, 4).unwrap()
        );
    }

    #[test]
    fn regressor_increments_look_like_white_noise() {
        let cfg = GenConfig {
            t: 1000,
            seed: 11,
            ..GenConfig::default()
        };
        let g = generate_indexed(&cfg, 0).unwrap();
        let x: Vec<f64> = g.data.x().column(0).iter().copied().collect();
        let dx = crate::data::first_differences(&x).unwrap();
        let mean = dx.iter().sum::<f64>() / dx.len() as f64;
        let var = dx.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / dx.len() as f64;
        assert!(mean.abs() < 4.0 / (dx.len() as f64).sqrt());
        assert!((var - 1.0).abs() < 0.15);
    }

    #[test]
    fn true_residuals_of_cointegrated_instances_reject_a_unit_root() {
        let cfg = GenConfig {
            t: 1000,
            seed: 13,
            p_unit_root: 0.0,
            order: OrderChoice::UniformUpTo(3),
            ..GenConfig::default()
        };
        let n = 200;
        let rejected = (0..n)
            .filter(|&i| {
                let g = generate_indexed(&cfg, i).unwrap();
                let r =
                    crate::data::build_residuals(&g.data, &g.true_beta2, Some(g.true_intercept))
                        .unwrap();
                let r: Vec<f64> = r.r.iter().copied().collect();
                adf_test(&r, 5, 0.05).unwrap().reject
            })
            .count();
        // Roots just below 1 are allowed, so a few instances stay
        // indistinguishable from a unit root at this length.
        assert!(rejected as f64 >= 0.8 * n as f64, "{rejected}/{n}");
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for cfg in [
            GenConfig {
                root_floor: 1.0,
                ..GenConfig::default()
            },
            GenConfig {
                p_unit_root: 1.5,
                ..GenConfig::default()
            },
            GenConfig {
                sigma2: 0.0,
                ..GenConfig::default()
            },
            GenConfig {
                order: OrderChoice::Fixed(0),
                ..GenConfig::default()
            },
        ] {
            assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        }
    }
}
