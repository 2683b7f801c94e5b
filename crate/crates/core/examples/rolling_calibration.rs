//! Rolling-window calibration: each day is forecast from a model fitted on
//! the preceding window, then compared with climatology.

use emos::distributions::Predictive;
use emos::emos::{CoefficientSet, ExchangeableGrouping, LinkCoefficients, ModelKind};
use emos::estimation::{climatology_calibrate, rolling_calibrate, Objective, Pooling, TrainingConfig};
use emos::synthetic::{generate, ScenarioSpec};

fn main() -> emos::Result<()> {
    let grouping = ExchangeableGrouping::new(vec![1, 10])?;
    let truth = CoefficientSet::tn(LinkCoefficients::new(0.3, vec![0.1, 0.08], 0.2, 0.3));
    let cases = generate(&ScenarioSpec::new(45, 6, grouping.clone(), truth, 3))?;

    for pooling in [Pooling::Regional, Pooling::Local] {
        let mut config = TrainingConfig::new(ModelKind::Tn, Objective::MinCrps, 25);
        config.pooling = pooling;
        let days = rolling_calibrate(&cases, &grouping, &config)?;
        let scores: Vec<f64> = days
            .iter()
            .flat_map(|d| &d.forecasts)
            .filter_map(|f| f.observation.map(|y| f.forecast.crps(y)))
            .collect::<emos::Result<_>>()?;
        println!(
            "{:<8} {} days, {} fits, mean CRPS {:.4}",
            pooling.as_str(),
            days.len(),
            days.iter().map(|d| d.fits.len()).sum::<usize>(),
            scores.iter().sum::<f64>() / scores.len() as f64
        );
        if let Some(first) = days.first() {
            println!("  first fit {}: {:?}", first.date, first.fits[0].fit.coefficients.tn);
        }
    }

    let config = TrainingConfig::new(ModelKind::Tn, Objective::MinCrps, 25);
    let clim = climatology_calibrate(&cases, &config)?;
    let scores: Vec<f64> = clim
        .iter()
        .flat_map(|(_, f)| f)
        .filter_map(|f| f.observation.map(|y| f.forecast.crps(y)))
        .collect();
    println!("climatology mean CRPS {:.4}", scores.iter().sum::<f64>() / scores.len() as f64);
    Ok(())
}
