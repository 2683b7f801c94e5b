//! Fits TN, LN and TN-LN mixture models by minimum CRPS and maximum
//! likelihood on a synthetic training set with a known mixture truth.

use emos::emos::{CoefficientSet, ExchangeableGrouping, LinkCoefficients, ModelKind};
use emos::estimation::{fit, mean_objective, Objective, TrainingConfig};
use emos::synthetic::{generate, ScenarioSpec};

fn main() -> emos::Result<()> {
    let grouping = ExchangeableGrouping::new(vec![1, 10])?;
    let truth = CoefficientSet::mixture(
        LinkCoefficients::new(0.2, vec![0.1, 0.08], 0.2, 0.3),
        LinkCoefficients::new(1.5, vec![0.15, 0.1], 1.0, 1.5),
        0.7,
    );
    let cases = generate(&ScenarioSpec::new(30, 10, grouping.clone(), truth.clone(), 11))?;
    println!("{} training cases", cases.len());

    for objective in [Objective::MinCrps, Objective::MaxLikelihood] {
        let at_truth = mean_objective(&truth, &cases, &grouping, objective)?;
        println!("\n{}: truth scores {at_truth:.4}", objective.as_str());
        for kind in [ModelKind::Tn, ModelKind::Ln, ModelKind::Mixture] {
            let config = TrainingConfig::new(kind, objective, 30);
            let result = fit(&cases, &grouping, &config, None)?;
            println!(
                "  {:<8} {:.4}  ({} evaluations, converged {})",
                kind.as_str(),
                result.objective_value,
                result.iterations,
                result.converged
            );
            if kind == ModelKind::Mixture {
                println!("  fitted weight {:.3}", result.coefficients.weight.unwrap_or(f64::NAN));
            }
        }
    }
    Ok(())
}
