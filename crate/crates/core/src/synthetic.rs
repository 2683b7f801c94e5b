//! Synthetic ensembles with observations drawn from a known EMOS process.
//!
//! A regional level follows a bounded random walk over days. Each station
//! adds a fixed offset, each group a bias, and each member independent noise
//! whose spread varies from case to case; members are truncated at zero.
//! The observation is a draw from the truth model linked to that ensemble.

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emos::{ensemble_stats, link, CoefficientSet, ExchangeableGrouping, ForecastCase};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberProcess {
    /// Starting value of the regional level.
    pub base_level: f64,
    /// Standard deviation of the level's daily increment.
    pub daily_variability: f64,
    /// The level is reflected into `[level_min, level_max]`.
    pub level_min: f64,
    pub level_max: f64,
    /// Standard deviation of the fixed per-station offsets.
    pub station_variability: f64,
    /// Typical member noise standard deviation.
    pub member_spread: f64,
    /// Log-scale standard deviation of the per-case spread multiplier.
    pub spread_variability: f64,
    /// Additive bias per exchangeable group.
    pub group_bias: Vec<f64>,
}

impl Default for MemberProcess {
    fn default() -> Self {
        Self {
            base_level: 6.0,
            daily_variability: 1.0,
            level_min: 2.0,
            level_max: 12.0,
            station_variability: 1.0,
            member_spread: 1.0,
            spread_variability: 0.4,
            group_bias: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub start_date: NaiveDate,
    pub n_days: usize,
    pub n_stations: usize,
    pub grouping: ExchangeableGrouping,
    pub member_process: MemberProcess,
    pub truth: CoefficientSet,
    /// Probability that an observation is withheld.
    pub missing_fraction: f64,
    pub seed: u64,
    /// Ensemble redraws allowed when the truth link is infeasible.
    pub max_retries: u32,
}

impl ScenarioSpec {
    pub fn new(n_days: usize, n_stations: usize, grouping: ExchangeableGrouping, truth: CoefficientSet, seed: u64) -> Self {
        Self {
            start_date: NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date"),
            n_days,
            n_stations,
            grouping,
            member_process: MemberProcess::default(),
            truth,
            missing_fraction: 0.0,
            seed,
            max_retries: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.member_process;
        if self.n_days == 0 {
            return Err(Error::invalid("n_days", "must be positive"));
        }
        if self.n_stations == 0 {
            return Err(Error::invalid("n_stations", "must be positive"));
        }
        if self.grouping.member_count() < 2 {
            return Err(Error::invalid("group_sizes", "the ensemble needs at least two members"));
        }
        if !p.group_bias.is_empty() && p.group_bias.len() != self.grouping.group_count() {
            return Err(Error::invalid(
                "group_bias",
                format!("{} values for {} groups", p.group_bias.len(), self.grouping.group_count()),
            ));
        }
        let nonneg = [
            ("daily_variability", p.daily_variability),
            ("station_variability", p.station_variability),
            ("member_spread", p.member_spread),
            ("spread_variability", p.spread_variability),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be finite and nonnegative, got {v}")));
            }
        }
        if !(p.level_min.is_finite() && p.level_max.is_finite() && p.level_min <= p.level_max) {
            return Err(Error::invalid("level_min", "level bounds must satisfy level_min <= level_max"));
        }
        if !(0.0..1.0).contains(&self.missing_fraction) {
            return Err(Error::invalid("missing_fraction", "must lie in [0, 1)"));
        }
        self.truth.validate(self.grouping.group_count())
    }

    fn station_ids(&self) -> Vec<String> {
        let width = self.n_stations.to_string().len().max(3);
        (1..=self.n_stations).map(|i| format!("S{i:0width$}")).collect()
    }
}

fn reflect(mut x: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    let span = hi - lo;
    // Fold repeatedly so large steps still land inside the band.
    for _ in 0..64 {
        if x < lo {
            x = 2.0 * lo - x;
        } else if x > hi {
            x = 2.0 * hi - x;
        } else {
            return x;
        }
    }
    lo + (x - lo).rem_euclid(span)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Generates `n_days × n_stations` cases ordered by date then station.
///
/// The level path and station offsets come from stream 0 of the seed; day
/// `d` uses stream `d + 1`, so days can be generated in any order.
pub fn generate(spec: &ScenarioSpec) -> Result<Vec<ForecastCase>> {
    spec.validate()?;
    let p = &spec.member_process;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let offsets: Vec<f64> = (0..spec.n_stations).map(|_| p.station_variability * normal(&mut rng)).collect();
    let mut levels = Vec::with_capacity(spec.n_days);
    let mut level = reflect(p.base_level, p.level_min, p.level_max);
    for _ in 0..spec.n_days {
        levels.push(level);
        level = reflect(level + p.daily_variability * normal(&mut rng), p.level_min, p.level_max);
    }
    let stations = spec.station_ids();
    let days: Vec<Vec<ForecastCase>> = (0..spec.n_days)
        .into_par_iter()
        .map(|d| generate_day(spec, d, levels[d], &offsets, &stations))
        .collect::<Result<_>>()?;
    Ok(days.into_iter().flatten().collect())
}

fn generate_day(spec: &ScenarioSpec, day: usize, level: f64, offsets: &[f64], stations: &[String]) -> Result<Vec<ForecastCase>> {
    let p = &spec.member_process;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(day as u64 + 1);
    let date = spec.start_date + Duration::days(day as i64);
    let spread_shift = 0.5 * p.spread_variability * p.spread_variability;
    let mut out = Vec::with_capacity(stations.len());
    for (s, station_id) in stations.iter().enumerate() {
        let centre = level + offsets[s];
        let mut attempt = 0;
        let (case, forecast) = loop {
            let spread = p.member_spread * (p.spread_variability * normal(&mut rng) - spread_shift).exp();
            let mut members = Vec::with_capacity(spec.grouping.member_count());
            for (g, &size) in spec.grouping.sizes().iter().enumerate() {
                let bias = p.group_bias.get(g).copied().unwrap_or(0.0);
                for _ in 0..size {
                    members.push((centre + bias + spread * normal(&mut rng)).max(0.0));
                }
            }
            let case = ForecastCase {
                date,
                station_id: station_id.clone(),
                members,
                observation: None,
            };
            match ensemble_stats(&case, &spec.grouping).and_then(|st| link(&spec.truth, &st)) {
                Ok(f) => break (case, f),
                Err(e) if attempt >= spec.max_retries => {
                    return Err(Error::Infeasible(format!(
                        "truth link infeasible for {} after {} redraws: {e}",
                        case.label(),
                        spec.max_retries
                    )))
                }
                Err(_) => attempt += 1,
            }
        };
        let obs = forecast.draw(&mut rng);
        let withheld = spec.missing_fraction > 0.0 && rng.random::<f64>() < spec.missing_fraction;
        out.push(ForecastCase {
            observation: (!withheld).then_some(obs),
            ..case
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emos::LinkCoefficients;

    fn tn_truth() -> CoefficientSet {
        CoefficientSet::tn(LinkCoefficients::new(0.5, vec![0.9 / 10.0], 0.3, 0.5))
    }

    #[test]
    fn shape_and_order() {
        let spec = ScenarioSpec::new(5, 3, ExchangeableGrouping::single(10).unwrap(), tn_truth(), 7);
        let cases = generate(&spec).unwrap();
        assert_eq!(cases.len(), 15);
        assert_eq!(cases[0].station_id, "S001");
        assert!(cases.windows(2).all(|w| (w[0].date, &w[0].station_id) < (w[1].date, &w[1].station_id)));
        assert!(cases.iter().flat_map(|c| &c.members).all(|&m| m >= 0.0));
    }

    #[test]
    fn deterministic_under_seed() {
        let spec = ScenarioSpec::new(20, 4, ExchangeableGrouping::new(vec![1, 10]).unwrap(), tn_truth_two(), 11);
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = ScenarioSpec { seed: 12, ..spec.clone() };
        assert_ne!(generate(&spec).unwrap(), generate(&other).unwrap());
    }

    fn tn_truth_two() -> CoefficientSet {
        CoefficientSet::tn(LinkCoefficients::new(0.5, vec![0.2, 0.07], 0.3, 0.5))
    }

    #[test]
    fn zero_spread_gives_zero_variance() {
        let mut spec = ScenarioSpec::new(4, 2, ExchangeableGrouping::single(5).unwrap(), tn_truth(), 3);
        spec.member_process.member_spread = 0.0;
        for case in generate(&spec).unwrap() {
            let s = ensemble_stats(&case, &spec.grouping).unwrap();
            assert_eq!(s.variance, 0.0);
        }
    }

    #[test]
    fn missing_fraction_withholds_observations() {
        let mut spec = ScenarioSpec::new(50, 10, ExchangeableGrouping::single(4).unwrap(), tn_truth(), 5);
        spec.missing_fraction = 0.2;
        let cases = generate(&spec).unwrap();
        let missing = cases.iter().filter(|c| c.observation.is_none()).count() as f64 / cases.len() as f64;
        assert!((missing - 0.2).abs() < 0.05, "{missing}");
    }

    #[test]
    fn infeasible_truth_fails_after_retries() {
        // LN mean equal to a negative constant is never feasible.
        let truth = CoefficientSet::ln(LinkCoefficients::new(-1.0, vec![0.0], 1.0, 0.0));
        let mut spec = ScenarioSpec::new(2, 1, ExchangeableGrouping::single(3).unwrap(), truth, 1);
        spec.max_retries = 3;
        assert!(matches!(generate(&spec), Err(Error::Infeasible(_))));
    }

    #[test]
    fn rejects_bad_group_bias() {
        let mut spec = ScenarioSpec::new(2, 1, ExchangeableGrouping::single(3).unwrap(), tn_truth(), 1);
        spec.member_process.group_bias = vec![0.0, 1.0];
        assert!(matches!(generate(&spec), Err(Error::InvalidParameter { name: "group_bias", .. })));
    }

    #[test]
    fn reflect_stays_in_band() {
        for x in [-30.0, -1.0, 0.5, 3.0, 17.0, 1e6] {
            let r = reflect(x, 0.0, 2.0);
            assert!((0.0..=2.0).contains(&r), "{x} -> {r}");
        }
    }
}
