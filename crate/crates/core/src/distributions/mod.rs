//! Predictive distributions for nonnegative quantities.
//!
//! [`TruncNormal`], [`LogNormal`] and their mixture [`MixtureTnLn`] are the
//! parametric families; [`EmpiricalDistribution`] covers the raw ensemble
//! and climatology. All of them implement [`Predictive`], which is what the
//! verification code is written against.

mod empirical;
mod lognormal;
mod mixture;
mod truncnormal;

pub use empirical::EmpiricalDistribution;
pub use lognormal::LogNormal;
pub use mixture::MixtureTnLn;
pub use truncnormal::TruncNormal;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::quadrature::{integrate, QuadOptions};

/// Tail probability beyond which CRPS integrals are truncated.
pub const TAIL_PROB: f64 = 1e-9;

/// Absolute tolerance for each CRPS integral piece.
const PIECE_TOL: f64 = 5e-9;

fn quad_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: PIECE_TOL,
        max_intervals: 400,
    }
}

pub(crate) fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// `∫₀^obs F² + ∫_obs^upper (1 − F)²` for a CDF supported on `[0, ∞)`.
pub(crate) fn crps_by_quadrature<F>(cdf: F, obs: f64, upper: f64, breaks: &[f64]) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    band_by_quadrature(cdf, obs, f64::NEG_INFINITY, f64::INFINITY, upper, breaks)
}

/// `∫_lo^hi (F(y) − 1{y ≥ obs})² dy` for a CDF supported on `[0, ∞)`, with
/// the upper tail cut at `upper`.
pub(crate) fn band_by_quadrature<F>(cdf: F, obs: f64, lo: f64, hi: f64, upper: f64, breaks: &[f64]) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let mut total = 0.0;
    // Below zero F = 0, so the integrand is the indicator alone.
    let (neg_lo, neg_hi) = (lo.max(obs), hi.min(0.0));
    if neg_lo < neg_hi {
        total += neg_hi - neg_lo;
    }
    let start = lo.max(0.0);
    let below_obs = hi.min(obs);
    if start < below_obs {
        total += integrate(|y| cdf(y).powi(2), start, below_obs, breaks, quad_opts())?;
    }
    let (from, to) = (start.max(obs), hi.min(upper));
    if from < to {
        total += integrate(|y| (1.0 - cdf(y)).powi(2), from, to, breaks, quad_opts())?;
    }
    Ok(total)
}

/// Interface shared by every forecast type the verification tools score.
pub trait Predictive {
    fn cdf(&self, x: f64) -> f64;
    fn quantile(&self, p: f64) -> Result<f64>;
    fn mean(&self) -> f64;
    fn median(&self) -> Result<f64> {
        self.quantile(0.5)
    }
    fn crps(&self, obs: f64) -> Result<f64>;
    /// Negative log density; `+∞` outside the support and `NaN` for forecasts
    /// without a density.
    fn log_score(&self, obs: f64) -> f64;
    /// `∫_lo^hi (F(y) − 1{y ≥ obs})² dy`
    fn twcrps_between(&self, obs: f64, lo: f64, hi: f64) -> Result<f64>;

    /// Threshold-weighted CRPS with weight `1{y ≥ threshold}`.
    fn twcrps(&self, obs: f64, threshold: f64) -> Result<f64> {
        self.twcrps_between(obs, threshold, f64::INFINITY)
    }

    /// twCRPS at each threshold. The integral is cut at the sorted thresholds
    /// and the nonnegative pieces are accumulated from the top, so the values
    /// never increase with the threshold, not even by rounding.
    fn twcrps_curve(&self, obs: f64, thresholds: &[f64]) -> Result<Vec<f64>> {
        let mut order: Vec<usize> = (0..thresholds.len()).collect();
        order.sort_by(|&i, &j| thresholds[i].total_cmp(&thresholds[j]));
        let mut out = vec![0.0; thresholds.len()];
        let mut acc = 0.0;
        let mut top = f64::INFINITY;
        for &i in order.iter().rev() {
            let r = thresholds[i];
            if r < top {
                acc += self.twcrps_between(obs, r, top)?;
                top = r;
            }
            out[i] = acc;
        }
        Ok(out)
    }
}

/// A parametric EMOS predictive distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PredictiveDistribution {
    TruncNormal(TruncNormal),
    LogNormal(LogNormal),
    Mixture(MixtureTnLn),
}

impl PredictiveDistribution {
    pub fn density(&self, x: f64) -> f64 {
        match self {
            Self::TruncNormal(d) => d.density(x),
            Self::LogNormal(d) => d.density(x),
            Self::Mixture(d) => d.density(x),
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::TruncNormal(d) => d.draw(rng),
            Self::LogNormal(d) => d.draw(rng),
            Self::Mixture(d) => d.draw(rng),
        }
    }

    /// `n` i.i.d. draws from a ChaCha stream seeded with `seed`.
    pub fn sample(&self, seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.draw(&mut rng)).collect()
    }

    pub fn family(&self) -> &'static str {
        match self {
            Self::TruncNormal(_) => "TN",
            Self::LogNormal(_) => "LN",
            Self::Mixture(_) => "MIX",
        }
    }
}

impl From<TruncNormal> for PredictiveDistribution {
    fn from(d: TruncNormal) -> Self {
        Self::TruncNormal(d)
    }
}

impl From<LogNormal> for PredictiveDistribution {
    fn from(d: LogNormal) -> Self {
        Self::LogNormal(d)
    }
}

impl From<MixtureTnLn> for PredictiveDistribution {
    fn from(d: MixtureTnLn) -> Self {
        Self::Mixture(d)
    }
}

impl Predictive for PredictiveDistribution {
    fn cdf(&self, x: f64) -> f64 {
        match self {
            Self::TruncNormal(d) => d.cdf(x),
            Self::LogNormal(d) => d.cdf(x),
            Self::Mixture(d) => d.cdf(x),
        }
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        match self {
            Self::TruncNormal(d) => d.quantile(p),
            Self::LogNormal(d) => d.quantile(p),
            Self::Mixture(d) => d.quantile(p),
        }
    }

    fn mean(&self) -> f64 {
        match self {
            Self::TruncNormal(d) => d.mean(),
            Self::LogNormal(d) => d.mean(),
            Self::Mixture(d) => d.mean(),
        }
    }

    fn crps(&self, obs: f64) -> Result<f64> {
        match self {
            Self::TruncNormal(d) => d.crps(obs),
            Self::LogNormal(d) => d.crps(obs),
            Self::Mixture(d) => d.crps(obs),
        }
    }

    fn log_score(&self, obs: f64) -> f64 {
        match self {
            Self::TruncNormal(d) => -d.ln_density(obs),
            Self::LogNormal(d) => -d.ln_density(obs),
            Self::Mixture(d) => -d.density(obs).ln(),
        }
    }

    fn twcrps_between(&self, obs: f64, lo: f64, hi: f64) -> Result<f64> {
        match self {
            Self::TruncNormal(d) => d.twcrps_between(obs, lo, hi),
            Self::LogNormal(d) => d.twcrps_between(obs, lo, hi),
            Self::Mixture(d) => d.twcrps_between(obs, lo, hi),
        }
    }
}

impl Predictive for EmpiricalDistribution {
    fn cdf(&self, x: f64) -> f64 {
        EmpiricalDistribution::cdf(self, x)
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        EmpiricalDistribution::quantile(self, p)
    }

    fn mean(&self) -> f64 {
        EmpiricalDistribution::mean(self)
    }

    fn median(&self) -> Result<f64> {
        Ok(EmpiricalDistribution::median(self))
    }

    fn crps(&self, obs: f64) -> Result<f64> {
        Ok(EmpiricalDistribution::crps(self, obs))
    }

    fn log_score(&self, _obs: f64) -> f64 {
        f64::NAN
    }

    fn twcrps_between(&self, obs: f64, lo: f64, hi: f64) -> Result<f64> {
        Ok(EmpiricalDistribution::twcrps_between(self, obs, lo, hi))
    }
}

/// Any forecast the pipeline can emit: parametric EMOS output or an
/// empirical (ensemble / climatology) distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum Forecast {
    Parametric(PredictiveDistribution),
    Empirical(EmpiricalDistribution),
}

impl Forecast {
    pub fn family(&self) -> &'static str {
        match self {
            Forecast::Parametric(d) => d.family(),
            Forecast::Empirical(_) => "EMP",
        }
    }
}

impl From<PredictiveDistribution> for Forecast {
    fn from(d: PredictiveDistribution) -> Self {
        Forecast::Parametric(d)
    }
}

impl From<EmpiricalDistribution> for Forecast {
    fn from(d: EmpiricalDistribution) -> Self {
        Forecast::Empirical(d)
    }
}

impl Predictive for Forecast {
    fn cdf(&self, x: f64) -> f64 {
        match self {
            Forecast::Parametric(d) => d.cdf(x),
            Forecast::Empirical(d) => Predictive::cdf(d, x),
        }
    }

    fn quantile(&self, p: f64) -> Result<f64> {
        match self {
            Forecast::Parametric(d) => d.quantile(p),
            Forecast::Empirical(d) => Predictive::quantile(d, p),
        }
    }

    fn mean(&self) -> f64 {
        match self {
            Forecast::Parametric(d) => d.mean(),
            Forecast::Empirical(d) => Predictive::mean(d),
        }
    }

    fn median(&self) -> Result<f64> {
        match self {
            Forecast::Parametric(d) => d.median(),
            Forecast::Empirical(d) => Predictive::median(d),
        }
    }

    fn crps(&self, obs: f64) -> Result<f64> {
        match self {
            Forecast::Parametric(d) => d.crps(obs),
            Forecast::Empirical(d) => Predictive::crps(d, obs),
        }
    }

    fn log_score(&self, obs: f64) -> f64 {
        match self {
            Forecast::Parametric(d) => d.log_score(obs),
            Forecast::Empirical(d) => Predictive::log_score(d, obs),
        }
    }

    fn twcrps_between(&self, obs: f64, lo: f64, hi: f64) -> Result<f64> {
        match self {
            Forecast::Parametric(d) => d.twcrps_between(obs, lo, hi),
            Forecast::Empirical(d) => Predictive::twcrps_between(d, obs, lo, hi),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tn(mu: f64, s: f64) -> TruncNormal {
        TruncNormal::new(mu, s).unwrap()
    }

    #[test]
    fn mixture_log_score_definition() {
        let m = MixtureTnLn::new(0.5, tn(0.0, 1.0), LogNormal::new(0.0, 1.0).unwrap()).unwrap();
        let d = PredictiveDistribution::from(m);
        let expected = -(0.5 * m.tn().density(1.0) + 0.5 * m.ln().density(1.0)).ln();
        assert!((d.log_score(1.0) - expected).abs() < 1e-15);
    }

    #[test]
    fn log_score_outside_support_is_infinite() {
        let d = PredictiveDistribution::from(tn(0.0, 1.0));
        assert_eq!(d.log_score(-1.0), f64::INFINITY);
    }

    #[test]
    fn tn_closed_form_matches_quadrature_route() {
        for &(mu, s) in &[(2.0, 1.0), (0.3, 2.0), (-1.0, 1.5), (6.0, 0.1)] {
            let d = tn(mu, s);
            for &x in &[0.0, 0.5, 2.5, 7.0] {
                let q = crps_by_quadrature(|y| d.cdf(y), x, d.upper_limit(), &[mu.max(0.0)]).unwrap();
                assert!((d.crps_closed_form(x) - q).abs() < 1e-8, "mu={mu} s={s} x={x}");
            }
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = PredictiveDistribution::from(tn(1.0, 2.0));
        assert_eq!(d.sample(7, 50), d.sample(7, 50));
        assert_ne!(d.sample(7, 50), d.sample(8, 50));
    }

    #[test]
    fn degenerate_mixture_draws_from_tn() {
        let t = tn(5.0, 0.5);
        let m = PredictiveDistribution::from(MixtureTnLn::new(1.0, t, LogNormal::new(-3.0, 0.1).unwrap()).unwrap());
        let a = m.sample(3, 100);
        let b = PredictiveDistribution::from(t).sample(3, 100);
        assert_eq!(a, b);
    }
}
