//! Verifies a calibrated and a miscalibrated forecast against the same
//! observations: scores, coverage, histograms, DM test and the bootstrap
//! uniformity rejection rate.

use emos::distributions::{PredictiveDistribution, TruncNormal};
use emos::verification::{
    bootstrap_rejection_rate, build_report, dm_test, score_cases, twcrpss, uniformity_test, ReportOptions, ScoreKind,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> emos::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut sharp = Vec::new();
    let mut overconfident = Vec::new();
    let mut obs = Vec::new();
    for _ in 0..3000 {
        let location = rng.random_range(2.0..10.0);
        let truth = TruncNormal::new(location, 1.5)?;
        obs.push(Some(PredictiveDistribution::from(truth).draw(&mut rng)));
        sharp.push(PredictiveDistribution::from(truth));
        overconfident.push(PredictiveDistribution::from(TruncNormal::new(location, 0.8)?));
    }

    let options = ReportOptions {
        thresholds: vec![8.0, 10.0],
        nominal_pct: 100.0 * 10.0 / 12.0,
        bins: 12,
        seed: 1,
    };
    for (name, f) in [("calibrated", &sharp), ("overconfident", &overconfident)] {
        let r = build_report(name, f, &obs, None, &options)?;
        let u = uniformity_test(&r.pit_values, 0)?;
        let rate = bootstrap_rejection_rate(&r.pit_values, 500, 500, 0.05, 0, 2)?;
        println!(
            "{name:<14} CRPS {:.4}  twCRPS@8 {:.4}  coverage {:.1}% (nominal {:.1}%)  width {:.3}",
            r.mean_crps, r.mean_twcrps[0].value, r.coverage_pct, r.nominal_pct, r.avg_width
        );
        println!("{:<14} PIT histogram {:?}", "", r.rank_counts);
        println!("{:<14} uniformity p {:.3e}, bootstrap rejection {:.3}", "", u.p_value, rate);
    }

    let a = score_cases(&sharp, &obs, ScoreKind::Crps)?;
    let b = score_cases(&overconfident, &obs, ScoreKind::Crps)?;
    let dm = dm_test(&a, &b, 1)?;
    println!("DM calibrated vs overconfident: t {:.2}, p {:.2e}", dm.statistic, dm.p_value);
    println!("CRPSS {:.3}", twcrpss(a.mean(), b.mean())?);
    Ok(())
}
