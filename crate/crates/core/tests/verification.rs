mod common;

use common::random_forecast;
use emos::distributions::{EmpiricalDistribution, LogNormal, MixtureTnLn, Predictive, PredictiveDistribution, TruncNormal};
use emos::verification::{
    bootstrap_rejection_rate, build_report, coverage_and_width, dm_test, ensemble_range_nominal_pct, pit, pit_histogram,
    pit_values, point_scores, rank_histogram, score_cases, series_correlation, twcrpss, uniformity_test,
    verification_rank, ReportOptions, ScoreKind, ScoreSeries,
};
use emos::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

fn tn(mu: f64, s: f64) -> PredictiveDistribution {
    TruncNormal::new(mu, s).unwrap().into()
}

fn mix() -> PredictiveDistribution {
    MixtureTnLn::new(0.6, TruncNormal::new(3.0, 1.0).unwrap(), LogNormal::new(1.0, 0.4).unwrap())
        .unwrap()
        .into()
}

#[test]
fn twcrps_above_the_support_vanishes() {
    let d = tn(2.0, 1.0);
    let top = d.quantile(1.0 - 1e-9).unwrap();
    assert!(d.twcrps(1.0, top + 5.0).unwrap().abs() < 1e-8);
    assert!(mix().twcrps(1.0, 60.0).unwrap().abs() < 1e-8);
}

#[test]
fn missing_observation_is_an_error() {
    let f = vec![tn(2.0, 1.0); 2];
    let err = score_cases(&f, &[Some(1.0), None], ScoreKind::Crps).unwrap_err();
    assert!(matches!(err, Error::MissingObservation(_)));
}

#[test]
fn skill_score_convention() {
    assert_eq!(twcrpss(0.7, 0.7).unwrap(), 0.0);
    assert_eq!(twcrpss(0.5, 1.0).unwrap(), 0.5);
    assert!(twcrpss(0.8, 0.4).unwrap() < 0.0, "worse than the reference is negative");
    assert!(twcrpss(0.1, 0.0).is_err());
}

#[test]
fn point_score_examples() {
    let d = tn(2.0, 0.5);
    let med = d.median().unwrap();
    let (mae, _) = point_scores(&[d], &[Some(med)]).unwrap();
    assert_eq!(mae, 0.0);

    let e = EmpiricalDistribution::new(&[2.0]).unwrap();
    assert_eq!(point_scores(&[e], &[Some(3.0)]).unwrap(), (1.0, 1.0));

    let m = mix();
    let PredictiveDistribution::Mixture(inner) = m else { unreachable!() };
    let expected = 0.6 * inner.tn().mean() + 0.4 * inner.ln().mean();
    assert!((m.mean() - expected).abs() < 1e-14);
}

#[test]
fn pit_examples() {
    for d in [tn(2.0, 1.0), LogNormal::new(0.5, 0.6).unwrap().into(), mix()] {
        assert!((pit(&d, d.median().unwrap()) - 0.5).abs() < 1e-9);
        assert_eq!(pit(&d, 0.0), 0.0);
    }
}

#[test]
fn rank_extremes_and_tie_randomisation() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let members = [1.0, 2.0, 3.0, 4.0];
    assert_eq!(verification_rank(&members, 0.5, &mut rng), 1);
    assert_eq!(verification_rank(&members, 9.0, &mut rng), 5);

    // All members tie with the observation: ranks uniform over 1..=M+1.
    let tied = [2.0; 4];
    let n = 20_000;
    let mut counts = [0usize; 5];
    for seed in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        counts[verification_rank(&tied, 2.0, &mut rng) - 1] += 1;
    }
    let expected = n as f64 / 5.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 99th percentile of chi-square with 4 degrees of freedom.
    assert!(chi2 < 13.277, "chi2 = {chi2}, counts {counts:?}");
}

#[test]
fn coverage_levels_and_ensemble_range_convention() {
    assert!((ensemble_range_nominal_pct(11) - 100.0 * 10.0 / 12.0).abs() < 1e-12);
    assert!((ensemble_range_nominal_pct(50) - 100.0 * 49.0 / 51.0).abs() < 1e-12);

    // Quantile levels 1/12 and 11/12 for nominal 83.33%.
    let d = tn(5.0, 2.0);
    let (_, width) = coverage_and_width(&[d], &[Some(5.0)], 100.0 * 10.0 / 12.0).unwrap();
    let expected = d.quantile(11.0 / 12.0).unwrap() - d.quantile(1.0 / 12.0).unwrap();
    assert!((width - expected).abs() < 1e-12);

    // The ensemble range at (M−1)/(M+1) matches the rank-based count.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let m = 11;
    let mut ensembles = Vec::new();
    let mut obs = Vec::new();
    for _ in 0..500 {
        let members: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..10.0)).collect();
        ensembles.push(members);
        obs.push(Some(rng.random_range(0.0..10.0)));
    }
    let forecasts: Vec<EmpiricalDistribution> = ensembles.iter().map(|e| EmpiricalDistribution::new(e).unwrap()).collect();
    let (coverage, _) = coverage_and_width(&forecasts, &obs, ensemble_range_nominal_pct(m)).unwrap();
    let refs: Vec<&[f64]> = ensembles.iter().map(Vec::as_slice).collect();
    let ranks = rank_histogram(&refs, &obs, 3).unwrap();
    let inside = obs.len() - ranks[0] - ranks[m];
    assert!((coverage - 100.0 * inside as f64 / obs.len() as f64).abs() < 1e-12);
}

#[test]
fn empirical_integral_matches_kernel_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let members: Vec<f64> = (0..rng.random_range(1..40)).map(|_| rng.random_range(0.0..15.0)).collect();
        let e = EmpiricalDistribution::new(&members).unwrap();
        let x = rng.random_range(0.0..15.0);
        let integral = e.twcrps_between(x, f64::NEG_INFINITY, f64::INFINITY);
        assert!((integral - e.crps(x)).abs() < 1e-10);
    }
}

#[test]
fn dm_declared_rules() {
    let s = ScoreSeries::new(vec![0.4, 0.9, 1.3, 0.2]);
    let same = dm_test(&s, &s, 1).unwrap();
    assert_eq!((same.statistic, same.p_value), (0.0, 1.0));

    let worse = ScoreSeries::new(s.values.iter().map(|v| v + 0.5).collect());
    let r = dm_test(&worse, &s, 1).unwrap();
    assert_eq!(r.statistic, f64::INFINITY);
    assert_eq!(r.p_value, 0.0);

    assert!(dm_test(&s, &ScoreSeries::new(vec![1.0; 3]), 1).is_err());
    assert!(dm_test(&s, &s, 5).is_err());
}

#[test]
fn dm_hac_variance_matches_hand_computation() {
    let d = [0.3, 0.4, 0.2, 0.1, -0.1, -0.2, 0.0, 0.3, 0.5, 0.4];
    let f = ScoreSeries::new(d.iter().map(|v| 1.0 + v).collect());
    let g = ScoreSeries::new(vec![1.0; d.len()]);
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let gamma = |k: usize| (k..d.len()).map(|t| (d[t] - mean) * (d[t - k] - mean)).sum::<f64>() / n;
    let var = gamma(0) + 2.0 * gamma(1) + 2.0 * gamma(2);
    let r = dm_test(&f, &g, 3).unwrap();
    assert!((r.statistic - n.sqrt() * mean / var.sqrt()).abs() < 1e-9);
    assert_eq!(r.lag, 3);
    assert!(!r.variance_fallback);
}

#[test]
fn dm_non_finite_scores_are_flagged() {
    let f = ScoreSeries::new(vec![1.0, f64::INFINITY, 2.0, f64::INFINITY, 1.5, 0.7]);
    let g = ScoreSeries::new(vec![1.1, 0.5, f64::INFINITY, f64::INFINITY, 1.2, 0.9]);
    assert_eq!(f.non_finite, vec![1, 3]);
    let r = dm_test(&f, &g, 1).unwrap();
    assert_eq!((r.n, r.infinite_against_f, r.infinite_against_g, r.both_non_finite), (3, 1, 1, 1));
    assert!(r.statistic.is_finite());
}

#[test]
fn uniformity_rejects_gross_departures() {
    assert!(uniformity_test(&vec![0.9; 100], 0).unwrap().p_value < 1e-6);
    assert!(uniformity_test(&[0.5; 10], 0).is_err());

    let beta = Beta::new(2.0, 2.0).unwrap();
    let sims = 200;
    let mut rejected = 0;
    for s in 0..sims {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + s);
        let pit: Vec<f64> = (0..2500).map(|_| beta.sample(&mut rng)).collect();
        if uniformity_test(&pit, 0).unwrap().p_value < 0.05 {
            rejected += 1;
        }
    }
    assert!(rejected as f64 / sims as f64 > 0.9, "power {rejected}/{sims}");
}

#[test]
fn uniformity_on_uniform_sample_has_full_rank() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let pit: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
    let r = uniformity_test(&pit, 2).unwrap();
    assert_eq!(r.df, 4);
    assert!((0.0..=1.0).contains(&r.p_value));
}

#[test]
fn bootstrap_rates() {
    let biased = vec![0.95; 3000];
    assert_eq!(bootstrap_rejection_rate(&biased, 50, 500, 0.05, 0, 1).unwrap(), 1.0);
    assert!(bootstrap_rejection_rate(&biased, 50, 5000, 0.05, 0, 1).is_err());

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let uniform: Vec<f64> = (0..20_000).map(|_| rng.random::<f64>()).collect();
    let rate = bootstrap_rejection_rate(&uniform, 400, 500, 0.05, 0, 3).unwrap();
    assert!(rate < 0.15, "rate {rate}");
    assert_eq!(rate, bootstrap_rejection_rate(&uniform, 400, 500, 0.05, 0, 3).unwrap());
}

#[test]
fn correlation_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
    let b: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
    assert!((series_correlation(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    let neg: Vec<f64> = a.iter().map(|v| -v).collect();
    assert!((series_correlation(&a, &neg).unwrap() + 1.0).abs() < 1e-12);
    assert!(series_correlation(&a, &b).unwrap().abs() < 0.03);
    assert!(series_correlation(&a, &vec![1.0; a.len()]).is_err());
}

#[test]
fn report_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let forecasts: Vec<PredictiveDistribution> = (0..300).map(|_| random_forecast(&mut rng)).collect();
    let obs: Vec<Option<f64>> = forecasts.iter().map(|f| Some(f.draw(&mut rng))).collect();
    let opts = ReportOptions {
        thresholds: vec![5.0, 8.0],
        nominal_pct: 80.0,
        bins: 12,
        seed: 1,
    };
    let r = build_report("X", &forecasts, &obs, None, &opts).unwrap();
    assert_eq!(r.cases, 300);
    assert!((0.0..=100.0).contains(&r.coverage_pct));
    assert_eq!(r.rank_counts.iter().sum::<usize>(), 300);
    assert_eq!(r.rank_counts, pit_histogram(&r.pit_values, 12));
    assert_eq!(r.pit_values, pit_values(&forecasts, &obs).unwrap());
    assert!(r.mean_twcrps[1].value <= r.mean_twcrps[0].value);
    assert!(r.mean_logs.is_some());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scores_are_ordered_and_bounded(seed in any::<u64>(), r in 0.0f64..15.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_forecast(&mut rng);
        let x = f.draw(&mut rng);
        let crps = f.crps(x).unwrap();
        let tw = f.twcrps(x, r).unwrap();
        prop_assert!(crps >= 0.0);
        prop_assert!(tw >= -1e-12 && tw <= crps + 1e-8);
        let u = pit(&f, x);
        prop_assert!((0.0..=1.0).contains(&u));
    }

    #[test]
    fn dm_is_antisymmetric(values in prop::collection::vec((0.0f64..5.0, 0.0f64..5.0), 5..200), h in 1usize..4) {
        let f = ScoreSeries::new(values.iter().map(|v| v.0).collect());
        let g = ScoreSeries::new(values.iter().map(|v| v.1).collect());
        let a = dm_test(&f, &g, h).unwrap();
        let b = dm_test(&g, &f, h).unwrap();
        prop_assert_eq!(a.statistic, -b.statistic);
        prop_assert_eq!(a.p_value, b.p_value);
        prop_assert!((0.0..=1.0).contains(&a.p_value));
    }

    #[test]
    fn twcrps_curve_never_increases(seed in any::<u64>(), mut grid in prop::collection::vec(0.0f64..20.0, 1..25)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_forecast(&mut rng);
        let x = f.draw(&mut rng);
        grid.sort_by(f64::total_cmp);
        let curve = f.twcrps_curve(x, &grid).unwrap();
        prop_assert!(curve.windows(2).all(|w| w[1] <= w[0]));
    }
}
