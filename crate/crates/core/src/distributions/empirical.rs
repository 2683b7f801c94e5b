use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::truncnormal::check_probability;

/// Step-function forecast putting mass `1/n` on each value (raw ensemble,
/// climatology).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    sorted: Vec<f64>,
    /// ½·E|X − X'| for two independent draws.
    half_mean_abs_diff: f64,
}

impl EmpiricalDistribution {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("empirical forecast needs at least one value"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("values", "empirical forecast values must be finite"));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        // Σ_{i,j} |x_i − x_j| = 2 Σ_i (2i − n − 1) x_(i)
        let weighted: f64 = sorted
            .iter()
            .enumerate()
            .map(|(i, v)| (2.0 * (i as f64 + 1.0) - n - 1.0) * v)
            .sum();
        Ok(Self {
            sorted,
            half_mean_abs_diff: weighted / (n * n),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let below = self.sorted.partition_point(|v| *v <= x);
        below as f64 / self.sorted.len() as f64
    }

    /// Order statistic `x_(⌈np⌉)`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_probability(p)?;
        let n = self.sorted.len();
        // Guard against n·p landing a hair above an integer.
        let rank = ((n as f64 * p) - 1e-12).ceil().max(1.0) as usize;
        Ok(self.sorted[rank.min(n) - 1])
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.sorted.len() as f64
    }

    /// Sample median, averaging the two central values for even sizes.
    pub fn median(&self) -> f64 {
        let n = self.sorted.len();
        if n % 2 == 1 {
            self.sorted[n / 2]
        } else {
            0.5 * (self.sorted[n / 2 - 1] + self.sorted[n / 2])
        }
    }

    /// `E|X − x| − ½E|X − X'|`, exact for the step function.
    pub fn crps(&self, obs: f64) -> f64 {
        let n = self.sorted.len() as f64;
        let abs_err: f64 = self.sorted.iter().map(|v| (v - obs).abs()).sum::<f64>() / n;
        (abs_err - self.half_mean_abs_diff).max(0.0)
    }

    /// `∫_r^∞ (F(y) − 1{y ≥ obs})² dy`
    pub fn twcrps(&self, obs: f64, threshold: f64) -> f64 {
        self.twcrps_between(obs, threshold, f64::INFINITY)
    }

    /// `∫_lo^hi (F(y) − 1{y ≥ obs})² dy`, integrated exactly piece by piece.
    pub fn twcrps_between(&self, obs: f64, lo: f64, hi: f64) -> f64 {
        let n = self.sorted.len() as f64;
        let mut points = self.sorted.clone();
        points.push(obs);
        points.sort_by(f64::total_cmp);
        let mut total = 0.0;
        for pair in points.windows(2) {
            let a = pair[0].max(lo);
            let b = pair[1].min(hi);
            if b <= a {
                continue;
            }
            let f = self.sorted.partition_point(|v| *v <= pair[0]) as f64 / n;
            let indicator = if pair[0] >= obs { 1.0 } else { 0.0 };
            total += (f - indicator).powi(2) * (b - a);
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_at_observation() {
        let e = EmpiricalDistribution::new(&[3.2]).unwrap();
        assert_eq!(e.crps(3.2), 0.0);
    }

    #[test]
    fn two_point_crps() {
        // E|X−1| − ½E|X−X'| = 1 − ½·1
        let e = EmpiricalDistribution::new(&[0.0, 2.0]).unwrap();
        assert!((e.crps(1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn quantile_convention() {
        let e = EmpiricalDistribution::new(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(e.quantile(0.5).unwrap(), 2.0);
        assert_eq!(e.quantile(0.51).unwrap(), 3.0);
        assert_eq!(e.quantile(0.01).unwrap(), 1.0);
        assert_eq!(e.median(), 2.5);
    }

    #[test]
    fn twcrps_from_below_support_is_crps() {
        let e = EmpiricalDistribution::new(&[1.0, 2.5, 2.5, 4.0, 7.0]).unwrap();
        for &obs in &[0.0, 2.0, 2.5, 5.0, 9.0] {
            assert!((e.twcrps(obs, -1.0) - e.crps(obs)).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_is_an_error() {
        assert!(EmpiricalDistribution::new(&[]).is_err());
    }
}
