//! Maps one ensemble to predictive distributions through the EMOS links,
//! with a control member and ten exchangeable perturbed members.

use emos::distributions::Predictive;
use emos::emos::{ensemble_stats, link, CoefficientSet, ExchangeableGrouping, ForecastCase, LinkCoefficients};

fn main() -> emos::Result<()> {
    let grouping = ExchangeableGrouping::new(vec![1, 10])?;
    let case = ForecastCase {
        date: chrono::NaiveDate::from_ymd_opt(2021, 1, 15).unwrap(),
        station_id: "S01".into(),
        members: vec![6.1, 5.2, 7.9, 6.6, 4.8, 8.3, 5.9, 7.1, 6.4, 5.5, 9.0],
        observation: Some(7.4),
    };
    let stats = ensemble_stats(&case, &grouping)?;
    println!(
        "group sums {:?}, mean {:.3}, variance {:.3}, median {:.3}",
        stats.group_sums, stats.mean, stats.variance, stats.median
    );

    let tn = LinkCoefficients::new(0.2, vec![0.1, 0.08], 0.2, 0.3);
    let ln = LinkCoefficients::new(1.5, vec![0.15, 0.1], 1.0, 1.5);
    let models = [
        ("TN", CoefficientSet::tn(tn.clone())),
        ("LN", CoefficientSet::ln(ln.clone())),
        ("MIXTURE", CoefficientSet::mixture(tn.clone(), ln.clone(), 0.7)),
        ("REGIME_SWITCH θ=6", CoefficientSet::regime_switch(tn.clone(), ln.clone(), 6.0)),
        ("REGIME_SWITCH θ=8", CoefficientSet::regime_switch(tn, ln, 8.0)),
    ];
    let obs = case.observation.unwrap();
    for (name, coeffs) in &models {
        let d = link(coeffs, &stats)?;
        println!(
            "{name:<18} {:<3} mean {:.3}  median {:.3}  CRPS {:.4}  PIT {:.3}",
            d.family(),
            d.mean(),
            d.median()?,
            d.crps(obs)?,
            d.cdf(obs)
        );
    }
    Ok(())
}
