//! EMOS link functions: from an ensemble to predictive-distribution parameters.
//!
//! Members are partitioned into exchangeable groups. Members of one group
//! share a coefficient, so the location (TN) or mean (LN) is affine in the
//! per-group sums, and the scale (TN) or variance (LN) is affine in the
//! ensemble variance `S²`.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::distributions::{EmpiricalDistribution, LogNormal, MixtureTnLn, PredictiveDistribution, TruncNormal};
use crate::error::{Error, Result};

/// Sizes `M_1..M_m` of the exchangeable groups, in member order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangeableGrouping {
    sizes: Vec<usize>,
}

impl ExchangeableGrouping {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::invalid("group_sizes", "at least one group is required"));
        }
        if sizes.contains(&0) {
            return Err(Error::invalid("group_sizes", "every group needs at least one member"));
        }
        Ok(Self { sizes })
    }

    /// One group holding all `members` members.
    pub fn single(members: usize) -> Result<Self> {
        Self::new(vec![members])
    }

    /// Every member its own group (fully distinguishable members).
    pub fn singletons(members: usize) -> Result<Self> {
        Self::new(vec![1; members])
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn group_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn member_count(&self) -> usize {
        self.sizes.iter().sum()
    }
}

/// One (date, station) pair: the ensemble and, when available, the verifying
/// observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastCase {
    pub date: NaiveDate,
    pub station_id: String,
    pub members: Vec<f64>,
    pub observation: Option<f64>,
}

impl ForecastCase {
    pub fn label(&self) -> String {
        format!("{} {}", self.date, self.station_id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub group_sums: Vec<f64>,
    pub mean: f64,
    /// `S² = 1/(M−1) Σ (f_k − f̄)²` over the whole ensemble.
    pub variance: f64,
    pub median: f64,
}

pub fn ensemble_stats(case: &ForecastCase, grouping: &ExchangeableGrouping) -> Result<EnsembleStats> {
    let m = case.members.len();
    if m != grouping.member_count() {
        return Err(Error::LengthMismatch {
            what: "ensemble members vs grouping total",
            left: m,
            right: grouping.member_count(),
        });
    }
    if m < 2 {
        return Err(Error::invalid("members", "ensemble variance needs at least two members"));
    }
    let mut group_sums = Vec::with_capacity(grouping.group_count());
    let mut start = 0;
    for &size in grouping.sizes() {
        group_sums.push(case.members[start..start + size].iter().sum());
        start += size;
    }
    let mean = case.members.iter().sum::<f64>() / m as f64;
    // Shifted by the first member so identical members give exactly zero.
    let shift = case.members[0];
    let (sum_d, sum_d2) = case
        .members
        .iter()
        .fold((0.0, 0.0), |(s, s2), f| (s + (f - shift), s2 + (f - shift) * (f - shift)));
    let variance = ((sum_d2 - sum_d * sum_d / m as f64) / (m - 1) as f64).max(0.0);
    let mut sorted = case.members.clone();
    sorted.sort_by(f64::total_cmp);
    let median = if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    };
    Ok(EnsembleStats {
        group_sums,
        mean,
        variance,
        median,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ModelKind {
    Tn,
    Ln,
    Mixture,
    RegimeSwitch,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Tn => "TN",
            ModelKind::Ln => "LN",
            ModelKind::Mixture => "MIXTURE",
            ModelKind::RegimeSwitch => "REGIME_SWITCH",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().replace('-', "_").as_str() {
            "TN" => Ok(ModelKind::Tn),
            "LN" => Ok(ModelKind::Ln),
            "MIXTURE" | "MIX" => Ok(ModelKind::Mixture),
            "REGIME_SWITCH" | "RS" => Ok(ModelKind::RegimeSwitch),
            other => Err(format!("unknown model kind `{other}`")),
        }
    }
}

/// Affine link coefficients: `intercept + Σ_k slopes[k]·group_sum_k` for the
/// location/mean and `var_intercept + var_slope·S²` for the variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkCoefficients {
    pub intercept: f64,
    pub slopes: Vec<f64>,
    pub var_intercept: f64,
    pub var_slope: f64,
}

impl LinkCoefficients {
    pub fn new(intercept: f64, slopes: Vec<f64>, var_intercept: f64, var_slope: f64) -> Self {
        Self {
            intercept,
            slopes,
            var_intercept,
            var_slope,
        }
    }

    fn check(&self, stats: &EnsembleStats, block: &'static str) -> Result<()> {
        if self.slopes.len() != stats.group_sums.len() {
            return Err(Error::LengthMismatch {
                what: "group slopes vs groups",
                left: self.slopes.len(),
                right: stats.group_sums.len(),
            });
        }
        if self.var_intercept < 0.0 || self.var_slope < 0.0 {
            return Err(Error::invalid(
                block,
                format!(
                    "variance coefficients must be nonnegative, got ({}, {})",
                    self.var_intercept, self.var_slope
                ),
            ));
        }
        Ok(())
    }

    fn affine_location(&self, stats: &EnsembleStats) -> f64 {
        self.intercept
            + self
                .slopes
                .iter()
                .zip(&stats.group_sums)
                .map(|(a, s)| a * s)
                .sum::<f64>()
    }

    fn affine_variance(&self, stats: &EnsembleStats) -> f64 {
        self.var_intercept + self.var_slope * stats.variance
    }
}

/// Coefficients of one fitted EMOS model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub kind: ModelKind,
    pub tn: Option<LinkCoefficients>,
    pub ln: Option<LinkCoefficients>,
    pub weight: Option<f64>,
    pub threshold: Option<f64>,
}

impl CoefficientSet {
    pub fn tn(coeffs: LinkCoefficients) -> Self {
        Self {
            kind: ModelKind::Tn,
            tn: Some(coeffs),
            ln: None,
            weight: None,
            threshold: None,
        }
    }

    pub fn ln(coeffs: LinkCoefficients) -> Self {
        Self {
            kind: ModelKind::Ln,
            tn: None,
            ln: Some(coeffs),
            weight: None,
            threshold: None,
        }
    }

    pub fn mixture(tn: LinkCoefficients, ln: LinkCoefficients, weight: f64) -> Self {
        Self {
            kind: ModelKind::Mixture,
            tn: Some(tn),
            ln: Some(ln),
            weight: Some(weight),
            threshold: None,
        }
    }

    pub fn regime_switch(tn: LinkCoefficients, ln: LinkCoefficients, threshold: f64) -> Self {
        Self {
            kind: ModelKind::RegimeSwitch,
            tn: Some(tn),
            ln: Some(ln),
            weight: None,
            threshold: Some(threshold),
        }
    }

    /// Checks the structural invariants for `kind` and `groups` exchangeable groups.
    pub fn validate(&self, groups: usize) -> Result<()> {
        let needs_tn = matches!(self.kind, ModelKind::Tn | ModelKind::Mixture | ModelKind::RegimeSwitch);
        let needs_ln = matches!(self.kind, ModelKind::Ln | ModelKind::Mixture | ModelKind::RegimeSwitch);
        for (needed, block, name) in [(needs_tn, &self.tn, "tn_coeffs"), (needs_ln, &self.ln, "ln_coeffs")] {
            match block {
                Some(c) => {
                    if c.slopes.len() != groups {
                        return Err(Error::invalid(
                            name,
                            format!("expected {groups} group slopes, got {}", c.slopes.len()),
                        ));
                    }
                    if c.var_intercept < 0.0 || c.var_slope < 0.0 {
                        return Err(Error::invalid(name, "variance coefficients must be nonnegative"));
                    }
                }
                None if needed => {
                    return Err(Error::invalid(name, format!("required for {}", self.kind.as_str())));
                }
                None => {}
            }
        }
        if self.kind == ModelKind::Mixture {
            match self.weight {
                Some(w) if (0.0..=1.0).contains(&w) => {}
                Some(w) => return Err(Error::invalid("weight", format!("must lie in [0, 1], got {w}"))),
                None => return Err(Error::invalid("weight", "required for MIXTURE")),
            }
        }
        if self.kind == ModelKind::RegimeSwitch {
            match self.threshold {
                Some(t) if t > 0.0 => {}
                Some(t) => return Err(Error::invalid("threshold", format!("must be positive, got {t}"))),
                None => return Err(Error::invalid("threshold", "required for REGIME_SWITCH")),
            }
        }
        Ok(())
    }

    fn tn_block(&self) -> Result<&LinkCoefficients> {
        self.tn
            .as_ref()
            .ok_or_else(|| Error::invalid("tn_coeffs", format!("absent for {}", self.kind.as_str())))
    }

    fn ln_block(&self) -> Result<&LinkCoefficients> {
        self.ln
            .as_ref()
            .ok_or_else(|| Error::invalid("ln_coeffs", format!("absent for {}", self.kind.as_str())))
    }
}

/// `N₀(a_0 + Σ a_k·sum_k, b_0 + b_1·S²)`
pub fn link_tn(coeffs: &CoefficientSet, stats: &EnsembleStats) -> Result<TruncNormal> {
    let c = coeffs.tn_block()?;
    c.check(stats, "tn_coeffs")?;
    let variance = c.affine_variance(stats);
    if !(variance > 0.0) {
        return Err(Error::Infeasible(format!("TN variance {variance} is not positive")));
    }
    let location = c.affine_location(stats);
    if !location.is_finite() {
        return Err(Error::Infeasible(format!("TN location {location} is not finite")));
    }
    TruncNormal::new(location, variance.sqrt())
}

/// Log-normal whose mean and variance are affine in the ensemble, converted
/// to location/shape by exact moment inversion.
pub fn link_ln(coeffs: &CoefficientSet, stats: &EnsembleStats) -> Result<LogNormal> {
    let c = coeffs.ln_block()?;
    c.check(stats, "ln_coeffs")?;
    LogNormal::from_mean_variance(c.affine_location(stats), c.affine_variance(stats))
}

pub fn link_mixture(coeffs: &CoefficientSet, stats: &EnsembleStats) -> Result<MixtureTnLn> {
    let weight = coeffs
        .weight
        .ok_or_else(|| Error::invalid("weight", "required for MIXTURE"))?;
    MixtureTnLn::new(weight, link_tn(coeffs, stats)?, link_ln(coeffs, stats)?)
}

/// TN when the ensemble median is below the threshold, LN otherwise (ties go to LN).
pub fn link_regime_switch(coeffs: &CoefficientSet, stats: &EnsembleStats) -> Result<PredictiveDistribution> {
    let threshold = coeffs
        .threshold
        .ok_or_else(|| Error::invalid("threshold", "required for REGIME_SWITCH"))?;
    if stats.median < threshold {
        link_tn(coeffs, stats).map(Into::into)
    } else {
        link_ln(coeffs, stats).map(Into::into)
    }
}

/// Dispatches on `coeffs.kind`.
pub fn link(coeffs: &CoefficientSet, stats: &EnsembleStats) -> Result<PredictiveDistribution> {
    match coeffs.kind {
        ModelKind::Tn => link_tn(coeffs, stats).map(Into::into),
        ModelKind::Ln => link_ln(coeffs, stats).map(Into::into),
        ModelKind::Mixture => link_mixture(coeffs, stats).map(Into::into),
        ModelKind::RegimeSwitch => link_regime_switch(coeffs, stats),
    }
}

/// Raw-ensemble or climatology forecast.
pub fn empirical_forecast(values: &[f64]) -> Result<EmpiricalDistribution> {
    EmpiricalDistribution::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case(members: Vec<f64>) -> ForecastCase {
        ForecastCase {
            date: NaiveDate::from_ymd_opt(2012, 4, 1).unwrap(),
            station_id: "S1".into(),
            members,
            observation: Some(1.0),
        }
    }

    fn stats(sum: f64, var: f64, median: f64) -> EnsembleStats {
        EnsembleStats {
            group_sums: vec![sum],
            mean: sum,
            variance: var,
            median,
        }
    }

    #[test]
    fn constant_ensemble() {
        let g = ExchangeableGrouping::new(vec![3, 5]).unwrap();
        let s = ensemble_stats(&case(vec![4.0; 8]), &g).unwrap();
        assert_eq!(s.variance, 0.0);
        assert_eq!(s.mean, 4.0);
        assert_eq!(s.median, 4.0);
        assert_eq!(s.group_sums, vec![12.0, 20.0]);
    }

    #[test]
    fn three_member_stats() {
        let g = ExchangeableGrouping::single(3).unwrap();
        let s = ensemble_stats(&case(vec![3.0, 1.0, 2.0]), &g).unwrap();
        assert_eq!((s.mean, s.variance, s.median), (2.0, 1.0, 2.0));
    }

    #[test]
    fn control_plus_perturbed_group_sums() {
        let g = ExchangeableGrouping::new(vec![1, 10]).unwrap();
        let mut members = vec![3.0];
        members.extend(std::iter::repeat_n(2.0, 10));
        let s = ensemble_stats(&case(members), &g).unwrap();
        assert_eq!(s.group_sums, vec![3.0, 20.0]);
    }

    #[test]
    fn stats_errors() {
        let g = ExchangeableGrouping::single(1).unwrap();
        assert!(ensemble_stats(&case(vec![1.0]), &g).is_err());
        let g = ExchangeableGrouping::single(3).unwrap();
        assert!(matches!(ensemble_stats(&case(vec![1.0, 2.0]), &g), Err(Error::LengthMismatch { .. })));
        assert!(ExchangeableGrouping::new(vec![2, 0]).is_err());
    }

    #[test]
    fn tn_links() {
        let c = CoefficientSet::tn(LinkCoefficients::new(0.0, vec![1.0], 1.0, 0.0));
        let d = link_tn(&c, &stats(3.0, 2.0, 1.0)).unwrap();
        assert_eq!((d.location(), d.scale()), (3.0, 1.0));

        let c = CoefficientSet::tn(LinkCoefficients::new(0.5, vec![0.9], 0.3, 0.5));
        let d = link_tn(&c, &stats(2.0, 1.0, 1.0)).unwrap();
        assert!((d.location() - 2.3).abs() < 1e-15);
        assert!((d.scale() - 0.8f64.sqrt()).abs() < 1e-15);

        let c = CoefficientSet::tn(LinkCoefficients::new(1.5, vec![0.0], 1.0, 0.0));
        assert_eq!(link_tn(&c, &stats(9.0, 1.0, 1.0)).unwrap().location(), 1.5);
    }

    #[test]
    fn tn_degenerate_variance_is_infeasible() {
        let c = CoefficientSet::tn(LinkCoefficients::new(0.0, vec![1.0], 0.0, 1.0));
        assert!(matches!(link_tn(&c, &stats(1.0, 0.0, 1.0)), Err(Error::Infeasible(_))));
        let c = CoefficientSet::tn(LinkCoefficients::new(0.0, vec![1.0], -0.1, 1.0));
        assert!(matches!(link_tn(&c, &stats(1.0, 1.0, 1.0)), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn ln_link_moments() {
        let c = CoefficientSet::ln(LinkCoefficients::new(0.0, vec![1.0], 1.0, 0.0));
        let d = link_ln(&c, &stats(2.0, 5.0, 1.0)).unwrap();
        assert!((d.location() - 0.581_575_404_902_840_8).abs() < 1e-12);
        assert!((d.shape() - 0.472_380_727_077_325).abs() < 1e-12);
        let c = CoefficientSet::ln(LinkCoefficients::new(-5.0, vec![1.0], 1.0, 0.0));
        assert!(matches!(link_ln(&c, &stats(2.0, 5.0, 1.0)), Err(Error::Infeasible(_))));
    }

    #[test]
    fn mixture_limits() {
        let tn = LinkCoefficients::new(0.5, vec![0.9], 0.3, 0.5);
        let ln = LinkCoefficients::new(0.2, vec![1.1], 0.5, 0.4);
        let s = stats(4.0, 1.2, 2.0);
        let one = link_mixture(&CoefficientSet::mixture(tn.clone(), ln.clone(), 1.0), &s).unwrap();
        let zero = link_mixture(&CoefficientSet::mixture(tn.clone(), ln.clone(), 0.0), &s).unwrap();
        let half = link_mixture(&CoefficientSet::mixture(tn.clone(), ln.clone(), 0.5), &s).unwrap();
        let t = link_tn(&CoefficientSet::tn(tn.clone()), &s).unwrap();
        let l = link_ln(&CoefficientSet::ln(ln.clone()), &s).unwrap();
        for &x in &[0.0, 1.0, 3.7, 6.0, 12.0] {
            assert_eq!(one.cdf(x), t.cdf(x));
            assert_eq!(zero.cdf(x), l.cdf(x));
            assert!((half.density(x) - 0.5 * (t.density(x) + l.density(x))).abs() < 1e-15);
        }
    }

    #[test]
    fn regime_switch_branches() {
        let tn = LinkCoefficients::new(0.5, vec![0.9], 0.3, 0.5);
        let ln = LinkCoefficients::new(0.2, vec![1.1], 0.5, 0.4);
        let c = CoefficientSet::regime_switch(tn, ln, 8.0);
        assert_eq!(link_regime_switch(&c, &stats(5.0, 1.0, 5.0)).unwrap().family(), "TN");
        assert_eq!(link_regime_switch(&c, &stats(9.0, 1.0, 9.0)).unwrap().family(), "LN");
        assert_eq!(link_regime_switch(&c, &stats(8.0, 1.0, 8.0)).unwrap().family(), "LN");
    }

    #[test]
    fn validation_rules() {
        let tn = LinkCoefficients::new(0.5, vec![0.9], 0.3, 0.5);
        let mut c = CoefficientSet::mixture(tn.clone(), tn.clone(), 0.4);
        assert!(c.validate(1).is_ok());
        assert!(c.validate(2).is_err());
        c.weight = None;
        assert!(c.validate(1).is_err());
        let mut r = CoefficientSet::regime_switch(tn.clone(), tn.clone(), 8.0);
        r.threshold = Some(-1.0);
        assert!(r.validate(1).is_err());
        assert!("regime-switch".parse::<ModelKind>().is_ok());
    }

    #[test]
    fn empirical_median_convention() {
        let e = empirical_forecast(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(e.quantile(0.5).unwrap(), 2.0);
    }
}
