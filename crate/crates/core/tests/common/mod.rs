//! Oracles shared by the integration tests. Nothing here calls the library's
//! CRPS code; only distribution CDFs and samplers are used.
#![allow(dead_code)]

use emos::distributions::{Predictive, PredictiveDistribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Recursive adaptive Simpson with Richardson correction.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64, m: f64, fm: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
            + step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, fa, b, fb, m, fm, whole, tol, 50)
}

/// `∫ (F(y) − 1{y ≥ obs})² dy` on `[q(1e-9), q(1 − 1e-9)]`, split at `obs`
/// and at a few interior quantiles, integrated by adaptive Simpson.
pub fn crps_oracle(d: &PredictiveDistribution, obs: f64) -> f64 {
    twcrps_oracle(d, obs, f64::NEG_INFINITY)
}

pub fn twcrps_oracle(d: &PredictiveDistribution, obs: f64, threshold: f64) -> f64 {
    let lo = d.quantile(1e-9).unwrap().max(0.0);
    let hi = d.quantile(1.0 - 1e-9).unwrap();
    let integrand = |y: f64| {
        let ind = if y >= obs { 1.0 } else { 0.0 };
        (d.cdf(y) - ind).powi(2)
    };
    let mut knots = vec![lo, hi, obs];
    for p in [0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99] {
        knots.push(d.quantile(p).unwrap());
    }
    if threshold.is_finite() {
        knots.push(threshold);
    }
    let start = if threshold.is_finite() { threshold.max(0.0) } else { 0.0 };
    knots.push(start);
    knots.retain(|k| *k >= start);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let mut total = 0.0;
    // region below lo where F ≈ 0 still contributes when obs is below it
    for w in knots.windows(2) {
        total += simpson(&integrand, w[0], w[1], 1e-13);
    }
    // above hi, (1 − F)² is negligible; obs above hi contributes ≈ F² = 1
    total
}

/// Monte Carlo estimate of `E|X − x| − ½E|X − X'|` and its standard error.
pub fn crps_monte_carlo(d: &PredictiveDistribution, obs: f64, n: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n {
        let x = d.draw(&mut rng);
        let x2 = d.draw(&mut rng);
        let z = (x - obs).abs() - 0.5 * (x - x2).abs();
        sum += z;
        sum_sq += z * z;
    }
    let mean = sum / n as f64;
    let var = (sum_sq / n as f64 - mean * mean) * n as f64 / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// A TN, LN or mixture forecast with parameters spread over the range seen
/// for wind speed.
pub fn random_forecast<R: rand::Rng>(rng: &mut R) -> PredictiveDistribution {
    use emos::distributions::{LogNormal, MixtureTnLn, TruncNormal};
    let tn = TruncNormal::new(rng.random_range(-2.0..10.0), rng.random_range(0.3..3.0)).unwrap();
    let ln = LogNormal::new(rng.random_range(-0.5..2.5), rng.random_range(0.1..1.2)).unwrap();
    match rng.random_range(0..3) {
        0 => tn.into(),
        1 => ln.into(),
        _ => MixtureTnLn::new(rng.random_range(0.05..0.95), tn, ln).unwrap().into(),
    }
}
