use rand::Rng;

use crate::error::{Error, Result};
use crate::roots::{brent, RootOptions};

use super::truncnormal::check_probability;
use super::{crps_by_quadrature, open_unit, band_by_quadrature, LogNormal, TruncNormal};

/// Convex combination `weight·TN + (1 − weight)·LN`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureTnLn {
    weight: f64,
    tn: TruncNormal,
    ln: LogNormal,
}

/// Tolerance on the CDF value for the mixture quantile search.
const QUANTILE_TOL: f64 = 1e-9;

impl MixtureTnLn {
    pub fn new(weight: f64, tn: TruncNormal, ln: LogNormal) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::invalid("weight", format!("must lie in [0, 1], got {weight}")));
        }
        Ok(Self { weight, tn, ln })
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn tn(&self) -> &TruncNormal {
        &self.tn
    }

    pub fn ln(&self) -> &LogNormal {
        &self.ln
    }

    pub fn density(&self, x: f64) -> f64 {
        match self.weight {
            1.0 => self.tn.density(x),
            0.0 => self.ln.density(x),
            w => w * self.tn.density(x) + (1.0 - w) * self.ln.density(x),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.weight {
            1.0 => self.tn.cdf(x),
            0.0 => self.ln.cdf(x),
            w => w * self.tn.cdf(x) + (1.0 - w) * self.ln.cdf(x),
        }
    }

    /// Root of `cdf(x) = p` bracketed by the two component quantiles at `p`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_probability(p)?;
        if self.weight == 1.0 {
            return self.tn.quantile(p);
        }
        if self.weight == 0.0 {
            return self.ln.quantile(p);
        }
        let a = self.tn.quantile(p)?;
        let b = self.ln.quantile(p)?;
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        if hi - lo <= f64::EPSILON * hi.abs() {
            return Ok(lo);
        }
        brent(
            |x| self.cdf(x) - p,
            lo,
            hi,
            RootOptions {
                f_tol: QUANTILE_TOL,
                ..RootOptions::default()
            },
        )
        .map_err(|e| Error::RootSearch(format!("mixture quantile at p={p}: {e}")))
    }

    pub fn mean(&self) -> f64 {
        self.weight * self.tn.mean() + (1.0 - self.weight) * self.ln.mean()
    }

    /// Upper integration limit: the larger component quantile at `1 − 1e-9`,
    /// which is never below the mixture's own quantile at that level.
    pub(crate) fn upper_limit(&self) -> f64 {
        match self.weight {
            1.0 => self.tn.upper_limit(),
            0.0 => self.ln.upper_limit(),
            _ => self.tn.upper_limit().max(self.ln.upper_limit()),
        }
    }

    /// Mixture survival function for quadrature integrands.
    fn sf_fast(&self, x: f64) -> f64 {
        self.weight * self.tn.sf_fast(x) + (1.0 - self.weight) * self.ln.sf(x)
    }

    fn breaks(&self) -> [f64; 2] {
        [self.tn.location().max(0.0), self.ln.median()]
    }

    /// CRPS as `∫₀^obs F² + ∫_obs^∞ (1 − F)²`, evaluated by adaptive quadrature.
    pub fn crps(&self, obs: f64) -> Result<f64> {
        match self.weight {
            1.0 => self.tn.crps(obs),
            0.0 => self.ln.crps(obs),
            _ => crps_by_quadrature(|y| 1.0 - self.sf_fast(y), obs, self.upper_limit(), &self.breaks()),
        }
    }

    pub fn twcrps(&self, obs: f64, threshold: f64) -> Result<f64> {
        self.twcrps_between(obs, threshold, f64::INFINITY)
    }

    /// `∫_lo^hi (F(y) − 1{y ≥ obs})² dy`
    pub fn twcrps_between(&self, obs: f64, lo: f64, hi: f64) -> Result<f64> {
        band_by_quadrature(|y| 1.0 - self.sf_fast(y), obs, lo, hi, self.upper_limit(), &self.breaks())
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.weight == 1.0 {
            return self.tn.draw(rng);
        }
        if self.weight == 0.0 {
            return self.ln.draw(rng);
        }
        if open_unit(rng) < self.weight {
            self.tn.draw(rng)
        } else {
            self.ln.draw(rng)
        }
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    fn mix(w: f64) -> MixtureTnLn {
        MixtureTnLn::new(w, TruncNormal::new(0.0, 1.0).unwrap(), LogNormal::new(0.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn density_is_pointwise_average() {
        let m = mix(0.5);
        let expected = 0.5 * m.tn().density(1.0) + 0.5 * m.ln().density(1.0);
        assert!((m.density(1.0) - expected).abs() < 1e-16);
    }

    #[test]
    fn degenerate_weights_short_circuit() {
        let m = mix(1.0);
        for &x in &[0.0, 0.3, 1.0, 4.0] {
            assert_eq!(m.cdf(x), m.tn().cdf(x));
        }
        assert_eq!(m.crps(2.5).unwrap(), m.tn().crps(2.5).unwrap());
        let m0 = mix(0.0);
        assert_eq!(m0.quantile(0.3).unwrap(), m0.ln().quantile(0.3).unwrap());
    }

    #[test]
    fn quantile_hits_tolerance() {
        let m = mix(0.3);
        for &p in &[1e-6, 0.01, 0.2, 0.5, 0.9, 0.999_999] {
            let q = m.quantile(p).unwrap();
            assert!((m.cdf(q) - p).abs() <= 1e-9, "p={p}");
        }
    }

    #[test]
    fn rejects_weight_outside_unit_interval() {
        let tn = TruncNormal::new(0.0, 1.0).unwrap();
        let ln = LogNormal::new(0.0, 1.0).unwrap();
        assert!(MixtureTnLn::new(1.2, tn, ln).is_err());
        assert!(MixtureTnLn::new(-0.1, tn, ln).is_err());
    }
}
