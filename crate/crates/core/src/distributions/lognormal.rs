use std::f64::consts::FRAC_1_SQRT_2;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::special::{ln_norm_pdf, norm_cdf, norm_quantile};

use super::truncnormal::check_probability;
use super::{band_by_quadrature, TAIL_PROB};

/// Log-normal distribution `LN(location, shape)`: `ln X ~ N(location, shape²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNormal {
    location: f64,
    shape: f64,
}

impl LogNormal {
    pub fn new(location: f64, shape: f64) -> Result<Self> {
        if !location.is_finite() {
            return Err(Error::invalid("location", format!("must be finite, got {location}")));
        }
        if !(shape > 0.0 && shape.is_finite()) {
            return Err(Error::invalid("shape", format!("must be positive, got {shape}")));
        }
        Ok(Self { location, shape })
    }

    /// Moment matching: the log-normal with the given mean and variance.
    pub fn from_mean_variance(mean: f64, variance: f64) -> Result<Self> {
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(Error::Infeasible(format!("log-normal mean must be positive, got {mean}")));
        }
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::Infeasible(format!(
                "log-normal variance must be positive, got {variance}"
            )));
        }
        let shape_sq = (variance / (mean * mean)).ln_1p();
        let location = 2.0 * mean.ln() - 0.5 * (variance + mean * mean).ln();
        Self::new(location, shape_sq.sqrt())
    }

    pub fn location(&self) -> f64 {
        self.location
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn ln_density(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let lx = x.ln();
        ln_norm_pdf((lx - self.location) / self.shape) - lx - self.shape.ln()
    }

    pub fn density(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            self.ln_density(x).exp()
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            norm_cdf((x.ln() - self.location) / self.shape)
        }
    }

    pub fn sf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            1.0
        } else {
            norm_cdf((self.location - x.ln()) / self.shape)
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_probability(p)?;
        Ok((self.location + self.shape * norm_quantile(p)).exp())
    }

    pub fn median(&self) -> f64 {
        self.location.exp()
    }

    pub fn mean(&self) -> f64 {
        (self.location + 0.5 * self.shape * self.shape).exp()
    }

    pub fn variance(&self) -> f64 {
        let s2 = self.shape * self.shape;
        s2.exp_m1() * (2.0 * self.location + s2).exp()
    }

    pub(crate) fn upper_limit(&self) -> f64 {
        self.quantile(1.0 - TAIL_PROB).unwrap_or(f64::MAX)
    }

    /// Closed form, with `E|X − X′| = 2m(2Φ(σ/√2) − 1)`.
    pub fn crps(&self, obs: f64) -> Result<f64> {
        let mean = self.mean();
        let half_gini = norm_cdf(self.shape * FRAC_1_SQRT_2);
        if obs <= 0.0 {
            return Ok(2.0 * mean * (1.0 - half_gini) - obs);
        }
        let w = (obs.ln() - self.location) / self.shape;
        let value = obs * (2.0 * norm_cdf(w) - 1.0)
            - 2.0 * mean * (norm_cdf(w - self.shape) - norm_cdf(-self.shape * FRAC_1_SQRT_2));
        Ok(value.max(0.0))
    }

    pub fn twcrps(&self, obs: f64, threshold: f64) -> Result<f64> {
        self.twcrps_between(obs, threshold, f64::INFINITY)
    }

    /// `∫_lo^hi (F(y) − 1{y ≥ obs})² dy`
    pub fn twcrps_between(&self, obs: f64, lo: f64, hi: f64) -> Result<f64> {
        band_by_quadrature(|y| self.cdf(y), obs, lo, hi, self.upper_limit(), &[self.median()])
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        (self.location + self.shape * z).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_and_support() {
        let d = LogNormal::new(0.0, 1.0).unwrap();
        assert!((d.cdf(1.0) - 0.5).abs() < 1e-16);
        assert!((d.quantile(0.5).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(d.density(-1.0), 0.0);
        assert_eq!(d.density(0.0), 0.0);
    }

    #[test]
    fn log_score_at_one() {
        let d = LogNormal::new(0.0, 1.0).unwrap();
        assert!((-d.ln_density(1.0) - 0.918_938_533_204_672_8).abs() < 1e-14);
    }

    #[test]
    fn moment_matching_reference() {
        let d = LogNormal::from_mean_variance(2.0, 1.0).unwrap();
        assert!((d.location() - (4.0 / 5f64.sqrt()).ln()).abs() < 1e-15);
        assert!((d.shape() - 1.25f64.ln().sqrt()).abs() < 1e-15);
        assert!((d.location() - 0.581_575_404_902_840_8).abs() < 1e-12);
        assert!((d.shape() - 0.472_380_727_077_325).abs() < 1e-12);
        assert!((d.mean() - 2.0).abs() < 1e-14);
        assert!((d.variance() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn infeasible_moments() {
        assert!(matches!(LogNormal::from_mean_variance(0.0, 1.0), Err(Error::Infeasible(_))));
        assert!(matches!(LogNormal::from_mean_variance(1.0, 0.0), Err(Error::Infeasible(_))));
    }

    #[test]
    fn vanishing_variance_limit() {
        let d = LogNormal::from_mean_variance(3.0, 1e-12).unwrap();
        assert!(d.shape() < 1e-6);
        assert!((d.location() - 3f64.ln()).abs() < 1e-12);
    }
}
