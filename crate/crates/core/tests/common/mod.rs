#![allow(dead_code)]

pub mod props;

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tensorcx::*;

/// Largest gap between `D_{b1} ∗ D_{b2}` and `D_{b1+b2}` over `x ∈ (0, x_eval]`.
///
/// The convolution is a Stieltjes sum `Σ_i ΔD_{b1}(t_i) · D_{b2}(x − t_i^mid)` over the
/// tabulated grid, which stays accurate across the `x^{β−1}` density singularity.
pub fn semigroup_gap(b1: f64, b2: f64, h: f64, x_max: f64, x_eval: f64) -> f64 {
    let l1 = dickman_build(b1, x_max, h).unwrap();
    let l2 = dickman_build(b2, x_max, h).unwrap();
    let sum = dickman_build(b1 + b2, x_max, h).unwrap();
    let n_eval = (x_eval / h).round() as usize;
    let cdf1: Vec<f64> = (0..=n_eval).map(|i| dickman_cdf(&l1, i as f64 * h)).collect();
    let mut worst: f64 = 0.0;
    for k in (4..=n_eval).step_by(4) {
        let x = k as f64 * h;
        let conv: f64 = (0..k).map(|i| (cdf1[i + 1] - cdf1[i]) * dickman_cdf(&l2, x - (i as f64 + 0.5) * h)).sum();
        worst = worst.max((conv - dickman_cdf(&sum, x)).abs());
    }
    worst
}

fn open01(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u;
        }
    }
}

/// Chambers–Mallows–Stuck draw from the law with cf `exp{−σ^α|t|^α(1 − iβ sign(t) ω)}`,
/// which is the A-form with `ρκ_α = σ^α` and `μ = 0`.
pub fn cms_draw(alpha: f64, beta: f64, sigma: f64, rng: &mut ChaCha8Rng) -> f64 {
    let v = PI * (open01(rng) - 0.5);
    let w = -open01(rng).ln();
    if alpha == 1.0 {
        let x = ((FRAC_PI_2 + beta * v) * v.tan() - beta * ((FRAC_PI_2 * w * v.cos()) / (FRAC_PI_2 + beta * v)).ln()) / FRAC_PI_2;
        sigma * x + beta * sigma * sigma.ln() / FRAC_PI_2
    } else {
        let t = beta * (PI * alpha / 2.0).tan();
        let b = t.atan() / alpha;
        let s = (1.0 + t * t).powf(1.0 / (2.0 * alpha));
        let x = s * (alpha * (v + b)).sin() / v.cos().powf(1.0 / alpha) * ((v - alpha * (v + b)).cos() / w).powf((1.0 - alpha) / alpha);
        sigma * x
    }
}

pub struct McPoint {
    pub x: f64,
    pub cdf: f64,
    pub empirical: f64,
    pub se: f64,
}

impl McPoint {
    pub fn z(&self) -> f64 {
        (self.empirical - self.cdf).abs() / self.se
    }
}

/// Compares `stable_cdf` with the empirical CDF of `n` CMS draws at the quantiles `levels`.
pub fn stable_mc(law: &StableLaw, n: usize, seed: u64, levels: &[f64]) -> Vec<McPoint> {
    let sigma = (law.rho * law.kappa()).powf(1.0 / law.alpha);
    let xs: Vec<f64> = levels.iter().map(|&u| stable_quantile(law, u).unwrap()).collect();
    let mut hits = vec![0usize; xs.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n {
        let y = law.mu + cms_draw(law.alpha, law.beta_skew, sigma, &mut rng);
        for (h, &x) in hits.iter_mut().zip(&xs) {
            *h += usize::from(y <= x);
        }
    }
    xs.iter()
        .zip(hits)
        .map(|(&x, h)| {
            let cdf = stable_cdf(law, x).unwrap();
            McPoint { x, cdf, empirical: h as f64 / n as f64, se: (cdf * (1.0 - cdf) / n as f64).sqrt() }
        })
        .collect()
}
