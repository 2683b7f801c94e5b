use std::f64::consts::{PI, SQRT_2};

use rand::Rng;

use crate::error::{Error, Result};
use crate::special::{ln_norm_cdf, ln_norm_pdf, norm_cdf, norm_pdf, norm_quantile_from_ln, norm_sf};

use super::{open_unit, band_by_quadrature, TAIL_PROB};

/// Below this `μ/σ`, `Φ(μ/σ)²` approaches underflow and the closed form is
/// evaluated on the log scale.
const LOG_SCALE_RATIO: f64 = -20.0;

/// Below this log mass the survival function is computed on the log scale.
const MIN_LN_MASS: f64 = -600.0;

/// Normal distribution `N(location, scale²)` truncated to `[0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncNormal {
    location: f64,
    scale: f64,
    /// ln Φ(location / scale), the log of the retained mass.
    ln_mass: f64,
    /// Φ(location / scale), or zero when it would underflow.
    mass: f64,
}

impl TruncNormal {
    pub fn new(location: f64, scale: f64) -> Result<Self> {
        if !location.is_finite() {
            return Err(Error::invalid("location", format!("must be finite, got {location}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid("scale", format!("must be positive, got {scale}")));
        }
        let ln_mass = ln_norm_cdf(location / scale);
        Ok(Self {
            location,
            scale,
            ln_mass,
            mass: if ln_mass > MIN_LN_MASS { ln_mass.exp() } else { 0.0 },
        })
    }

    pub fn location(&self) -> f64 {
        self.location
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    fn standardize(&self, x: f64) -> f64 {
        (x - self.location) / self.scale
    }

    pub fn ln_density(&self, x: f64) -> f64 {
        if x < 0.0 {
            return f64::NEG_INFINITY;
        }
        ln_norm_pdf(self.standardize(x)) - self.scale.ln() - self.ln_mass
    }

    pub fn density(&self, x: f64) -> f64 {
        if x < 0.0 {
            0.0
        } else {
            self.ln_density(x).exp()
        }
    }

    /// `ln P(X > x)`
    fn ln_sf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        (ln_norm_cdf(-self.standardize(x)) - self.ln_mass).min(0.0)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            -self.ln_sf(x).exp_m1()
        }
    }

    pub fn sf(&self, x: f64) -> f64 {
        self.ln_sf(x).exp()
    }

    /// Survival function with one special-function call, for quadrature
    /// integrands where absolute accuracy suffices.
    pub(crate) fn sf_fast(&self, x: f64) -> f64 {
        if x <= 0.0 {
            1.0
        } else if self.mass > 0.0 {
            (norm_cdf(-self.standardize(x)) / self.mass).min(1.0)
        } else {
            self.sf(x)
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_probability(p)?;
        // P(X > x) = Φ((μ - x)/σ) / Φ(μ/σ) = 1 - p
        let z = norm_quantile_from_ln((-p).ln_1p() + self.ln_mass);
        Ok((self.location - self.scale * z).max(0.0))
    }

    fn mills(&self) -> f64 {
        let ratio = self.location / self.scale;
        (ln_norm_pdf(ratio) - self.ln_mass).exp()
    }

    pub fn mean(&self) -> f64 {
        self.location + self.scale * self.mills()
    }

    pub fn variance(&self) -> f64 {
        let ratio = self.location / self.scale;
        let r = self.mills();
        self.scale * self.scale * (1.0 - ratio * r - r * r)
    }

    /// Probability at or below which the quadrature upper limit is placed.
    pub(crate) fn upper_limit(&self) -> f64 {
        self.quantile(1.0 - TAIL_PROB).unwrap_or(self.location + 40.0 * self.scale)
    }

    /// `(p, q)` in units of σ with `CRPS = σ(p − q)`, for `obs ≥ 0`.
    fn closed_form_terms(&self, obs: f64) -> (f64, f64) {
        let ratio = self.location / self.scale;
        let z = self.standardize(obs);
        if ratio >= LOG_SCALE_RATIO {
            let mass = self.mass;
            let p = z * (1.0 - 2.0 * norm_sf(z) / mass) + 2.0 * norm_pdf(z) / mass;
            let q = norm_cdf(SQRT_2 * ratio) / (PI.sqrt() * mass * mass);
            (p, q)
        } else {
            // Φ(μ/σ) is tiny; form every ratio on the log scale.
            let lm = self.ln_mass;
            let p = z * (1.0 - 2.0 * (ln_norm_cdf(-z) - lm).exp()) + 2.0 * (ln_norm_pdf(z) - lm).exp();
            let q = (ln_norm_cdf(SQRT_2 * ratio) - 2.0 * lm).exp() / PI.sqrt();
            (p, q)
        }
    }

    /// Closed form, valid for every `μ/σ`.
    pub fn crps(&self, obs: f64) -> Result<f64> {
        Ok(self.crps_closed_form(obs))
    }

    pub(crate) fn crps_closed_form(&self, obs: f64) -> f64 {
        if obs < 0.0 {
            return self.crps_closed_form(0.0) - obs;
        }
        let (p, q) = self.closed_form_terms(obs);
        (self.scale * (p - q)).max(0.0)
    }

    pub fn twcrps(&self, obs: f64, threshold: f64) -> Result<f64> {
        self.twcrps_between(obs, threshold, f64::INFINITY)
    }

    /// `∫_lo^hi (F(y) − 1{y ≥ obs})² dy`
    pub fn twcrps_between(&self, obs: f64, lo: f64, hi: f64) -> Result<f64> {
        band_by_quadrature(|y| self.cdf(y), obs, lo, hi, self.upper_limit(), &[self.location.max(0.0)])
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = open_unit(rng);
        self.quantile(u).unwrap_or(0.0)
    }
}

pub(crate) fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("p", format!("quantile level must lie in (0, 1), got {p}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_at_zero_for_standard() {
        let d = TruncNormal::new(0.0, 1.0).unwrap();
        // 2·φ(0)
        assert!((d.density(0.0) - 0.797_884_560_802_865_4).abs() < 1e-14);
        assert_eq!(d.density(-0.1), 0.0);
    }

    #[test]
    fn cdf_and_quantile_at_the_quartile() {
        let d = TruncNormal::new(0.0, 1.0).unwrap();
        // 2Φ(x) - 1 = 0.5  =>  x = Φ⁻¹(0.75)
        let q75 = 0.674_489_750_196_081_7;
        assert!((d.cdf(q75) - 0.5).abs() < 1e-14);
        assert!((d.quantile(0.5).unwrap() - q75).abs() < 1e-12);
    }

    #[test]
    fn half_normal_moments() {
        let d = TruncNormal::new(0.0, 1.0).unwrap();
        assert!((d.mean() - (2.0 / PI).sqrt()).abs() < 1e-14);
        assert!((d.variance() - (1.0 - 2.0 / PI)).abs() < 1e-14);
    }

    #[test]
    fn extreme_negative_ratio_stays_finite() {
        let d = TruncNormal::new(-50.0, 1.0).unwrap();
        assert!(d.density(0.0).is_finite() && d.density(0.0) > 0.0);
        let q = d.quantile(0.5).unwrap();
        assert!((d.cdf(q) - 0.5).abs() < 1e-9);
        // approximately exponential with rate 50
        assert!((d.mean() - 0.02).abs() < 1e-3);
        assert!(d.crps(0.01).unwrap().is_finite());
    }

    #[test]
    fn rejects_bad_scale() {
        assert!(TruncNormal::new(1.0, 0.0).is_err());
        assert!(TruncNormal::new(1.0, -1.0).is_err());
        assert!(TruncNormal::new(f64::NAN, 1.0).is_err());
    }
}
